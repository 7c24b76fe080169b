"""Magnet-elastomer tactile sensor simulation and texture classification toolkit."""

__version__ = "0.1.0"
