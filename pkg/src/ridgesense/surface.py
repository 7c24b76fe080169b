"""Parameterized 1-D surface profiles and profile roughness metrics.

Heights are in micrometres, lateral coordinates in millimetres. Profiles are
uniformly sampled height fields h(x); textures are built from sinusoidal or
seeded stochastic generators so every surface is reproducible.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

MIN_RESOLUTION = 50.0  # samples/mm; coarser grids undersample the finest textures
DEFAULT_RESOLUTION = 200.0


class InvalidSpecError(ValueError):
    """Raised for non-positive wavelengths/lengths or other bad generator input."""


@dataclass(frozen=True)
class Sinusoid:
    wavelength_mm: float
    amplitude_um: float


@dataclass(frozen=True)
class SumOfSinusoids:
    # components are (wavelength_mm, amplitude_um, phase_rad)
    components: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class Stochastic:
    seed: int
    correlation_length_mm: float
    rms_amplitude_um: float


SurfaceSpec = Sinusoid | SumOfSinusoids | Stochastic


@dataclass(frozen=True)
class SurfaceProfile:
    """Uniformly sampled height field. Immutable; heights array is read-only."""

    length_mm: float
    resolution: float  # samples/mm
    heights_um: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.heights_um, dtype=float)
        h.setflags(write=False)
        object.__setattr__(self, "heights_um", h)
        n_expected = int(round(self.length_mm * self.resolution))
        if h.ndim != 1 or h.size < 2 or h.size != n_expected:
            raise InvalidSpecError(
                f"heights length {h.size} != round(length*resolution) = {n_expected}"
            )
        if self.resolution < MIN_RESOLUTION:
            raise InvalidSpecError(
                f"resolution {self.resolution} samples/mm below minimum {MIN_RESOLUTION}"
            )

    @property
    def x_mm(self) -> np.ndarray:
        return np.arange(self.heights_um.size) / self.resolution


@dataclass(frozen=True)
class RoughnessMetrics:
    ra_um: float  # mean absolute deviation from the mean line
    rt_um: float  # max peak-to-valley
    rp_um: float  # max peak above the mean line


def generate_surface(
    spec: SurfaceSpec, length_mm: float, resolution: float = DEFAULT_RESOLUTION
) -> SurfaceProfile:
    """Sample a surface spec onto a uniform grid.

    Deterministic: the stochastic kind is fully determined by its seed.
    """
    if length_mm <= 0:
        raise InvalidSpecError(f"length must be positive, got {length_mm}")
    if resolution < MIN_RESOLUTION:
        raise InvalidSpecError(
            f"resolution {resolution} samples/mm below minimum {MIN_RESOLUTION}"
        )
    n = int(round(length_mm * resolution))
    x = np.arange(n) / resolution

    if isinstance(spec, Sinusoid):
        _check_component(spec.wavelength_mm, spec.amplitude_um)
        h = spec.amplitude_um * np.sin(2.0 * np.pi * x / spec.wavelength_mm)
    elif isinstance(spec, SumOfSinusoids):
        if not spec.components:
            raise InvalidSpecError("sum-of-sinusoids needs at least one component")
        h = np.zeros(n)
        for lam, amp, phase in spec.components:
            _check_component(lam, amp)
            h += amp * np.sin(2.0 * np.pi * x / lam + phase)
    elif isinstance(spec, Stochastic):
        if spec.correlation_length_mm <= 0:
            raise InvalidSpecError("correlation length must be positive")
        if spec.rms_amplitude_um < 0:
            raise InvalidSpecError("rms amplitude must be non-negative")
        rng = np.random.default_rng(spec.seed)
        noise = rng.standard_normal(n)
        width = max(1, int(round(spec.correlation_length_mm * resolution)))
        kernel = np.ones(width) / width
        h = np.convolve(noise, kernel, mode="same")
        h -= h.mean()
        rms = np.sqrt(np.mean(h**2))
        if rms > 0 and spec.rms_amplitude_um > 0:
            h *= spec.rms_amplitude_um / rms
        else:
            h = np.zeros(n)
    else:
        raise InvalidSpecError(f"unknown surface spec {spec!r}")

    return SurfaceProfile(length_mm=length_mm, resolution=resolution, heights_um=h)


def _check_component(wavelength_mm, amplitude_um):
    if wavelength_mm <= 0:
        raise InvalidSpecError(f"wavelength must be positive, got {wavelength_mm}")
    if amplitude_um < 0:
        raise InvalidSpecError(f"amplitude must be non-negative, got {amplitude_um}")


def sample_height(profile: SurfaceProfile, x_mm) -> float | np.ndarray:
    """Linearly interpolated height at x (mm). Exact at stored sample points."""
    x = np.asarray(x_mm, dtype=float)
    x_max = (profile.heights_um.size - 1) / profile.resolution
    if np.any(x < 0) or np.any(x > x_max + 1e-12):
        raise ValueError(f"x outside profile range [0, {x_max}] mm")
    out = np.interp(x, profile.x_mm, profile.heights_um)
    return float(out) if np.isscalar(x_mm) else out


def roughness(profile: SurfaceProfile) -> RoughnessMetrics:
    """Ra / Rt / Rp of the profile relative to its mean line."""
    h = profile.heights_um
    mean = h.mean()
    return RoughnessMetrics(
        ra_um=float(np.mean(np.abs(h - mean))),
        rt_um=float(h.max() - h.min()),
        rp_um=float(h.max() - mean),
    )


def to_csv(profile: SurfaceProfile) -> str:
    buf = io.StringIO()
    buf.write("x_mm,height_um\n")
    for x, h in zip(profile.x_mm, profile.heights_um):
        buf.write(f"{float(x)!r},{float(h)!r}\n")
    return buf.getvalue()


def from_csv(text: str) -> SurfaceProfile:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "x_mm,height_um":
        raise InvalidSpecError("expected header 'x_mm,height_um'")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if data.shape[0] < 2:
        raise InvalidSpecError("profile needs at least 2 samples")
    x, h = data[:, 0], data[:, 1]
    dx = np.diff(x)
    if not np.allclose(dx, dx[0], rtol=1e-6, atol=1e-12):
        raise InvalidSpecError("profile samples must be uniformly spaced")
    resolution = 1.0 / dx[0]
    length = x.size / resolution
    return SurfaceProfile(length_mm=length, resolution=resolution, heights_um=h)
