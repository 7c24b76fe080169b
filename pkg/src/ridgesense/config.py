"""Declarative experiment configuration: sensor designs, sweep grids, presets.

Configs load from TOML files; the named presets mirror the simulation batch
grids (initial survey, wavelength sweep, amplitude sweep) with the default
sensor designs.
"""

from __future__ import annotations

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass

from .features import PipelineConfig
from .magnetics import MagnetModel, MagnetometerLayout
from .mechanics import DEFAULT_STACK, ElastomerStack, ScanConfig, TipGeometry

SCHEMA_VERSION = "ridgesense-files-1"


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the offending key."""


@dataclass(frozen=True)
class DesignConfig:
    name: str
    tip: TipGeometry
    stack: ElastomerStack = DEFAULT_STACK
    magnet: MagnetModel = MagnetModel()
    layout: MagnetometerLayout = MagnetometerLayout()


@dataclass(frozen=True)
class SweepConfig:
    wavelengths_mm: tuple
    amplitudes_um: tuple
    velocities_mm_s: tuple
    repetitions: int = 3
    directions: tuple = (+1,)

    def __post_init__(self):
        if not self.wavelengths_mm or not self.amplitudes_um or not self.velocities_mm_s:
            # an empty grid is allowed (no-op sweep), but each axis present
            pass
        if self.repetitions < 1:
            raise ConfigError("sweep.repetitions must be at least 1")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    designs: tuple
    sweep: SweepConfig
    scan_duration_s: float = 1.2
    preload_depth_um: float = 50.0
    sim_rate_hz: float = 20000.0
    output_rate_hz: float = 5000.0
    surface_resolution: float = 200.0
    pipeline: PipelineConfig = PipelineConfig()
    cv_folds: int = 5
    cv_repeats: int = 60

    def __post_init__(self):
        if not isinstance(self.seed, int):
            raise ConfigError("seed is mandatory and must be an integer")
        names = [d.name for d in self.designs]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate design names in {names}")

    def scan_config(self, velocity_mm_s: float, direction: int = +1) -> ScanConfig:
        return ScanConfig(
            velocity_mm_s=velocity_mm_s,
            direction=direction,
            preload_depth_um=self.preload_depth_um,
            duration_s=self.scan_duration_s,
            sim_rate_hz=self.sim_rate_hz,
            output_rate_hz=self.output_rate_hz,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def default_designs():
    """The three sensor designs used in the experiments.

    Contact widths are effective contact-zone model parameters: the ridged
    tips present full 600 um ridge periods; the flat tip presents a small
    flattened contact zone under light preload.
    """
    return (
        DesignConfig(name="flat", tip=TipGeometry("flat", 0.35)),
        DesignConfig(
            name="ridged-flat",
            tip=TipGeometry("flat-ridged", 1.2, 80.0, 400.0, 600.0),
        ),
        DesignConfig(
            name="ridged-sphere",
            tip=TipGeometry(
                "spherical-ridged", 4.0, 80.0, 400.0, 600.0, sphere_radius_mm=10.0
            ),
        ),
    )


_PRESET_GRIDS = {
    "initial-survey": {
        "wavelengths_mm": (0.06, 0.24, 0.30, 0.60, 5.98),
        "amplitudes_um": (10.0, 25.0, 50.0, 100.0),
        "velocities_mm_s": (25.0, 50.0, 100.0),
    },
    "wavelength-sweep": {
        "wavelengths_mm": (0.27, 0.33, 0.36, 0.39, 0.42, 0.45, 0.48, 0.51, 0.54, 0.57),
        "amplitudes_um": (10.0, 25.0, 50.0),
        "velocities_mm_s": (25.0, 50.0, 100.0),
    },
    "amplitude-sweep": {
        "wavelengths_mm": (0.24, 0.30, 0.60),
        "amplitudes_um": (15.0, 20.0, 30.0, 35.0, 40.0, 45.0),
        "velocities_mm_s": (25.0, 50.0, 100.0),
    },
}

PRESET_NAMES = tuple(_PRESET_GRIDS)


def preset(name: str, seed: int = 42, designs=None, **overrides) -> ExperimentConfig:
    if name not in _PRESET_GRIDS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    sweep = SweepConfig(**_PRESET_GRIDS[name])
    return ExperimentConfig(
        seed=seed,
        designs=tuple(designs) if designs is not None else default_designs(),
        sweep=sweep,
        **overrides,
    )


def _get(table: dict, key: str, default=None, required: bool = False, path: str = ""):
    if key in table:
        return table[key]
    if required:
        raise ConfigError(f"missing required config key {path}{key}")
    return default


def from_toml(path) -> ExperimentConfig:
    """Load an experiment config from a TOML file."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    try:
        return _from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _from_dict(raw: dict) -> ExperimentConfig:
    exp = raw.get("experiment", {})
    seed = _get(exp, "seed", required=True, path="experiment.")

    designs = []
    for i, dt in enumerate(raw.get("design", [])):
        tip = TipGeometry(
            kind=_get(dt, "kind", required=True, path=f"design[{i}]."),
            contact_width_mm=_get(dt, "contact_width_mm", required=True, path=f"design[{i}]."),
            ridge_depth_um=dt.get("ridge_depth_um", 0.0),
            ridge_width_um=dt.get("ridge_width_um", 0.0),
            ridge_wavelength_um=dt.get("ridge_wavelength_um", 0.0),
            sphere_radius_mm=dt.get("sphere_radius_mm", 0.0),
            crest_plateau_fraction=dt.get("crest_plateau_fraction", 0.25),
        )
        stack = ElastomerStack(
            epidermis_thickness_mm=dt.get("epidermis_thickness_mm", 2.0),
            dermis_thickness_mm=dt.get("dermis_thickness_mm", 3.0),
            epidermis_modulus_psi=dt.get("epidermis_modulus_psi", 96.0),
            dermis_modulus_psi=dt.get("dermis_modulus_psi", 8.0),
        )
        magnet = MagnetModel(
            edge_mm=dt.get("magnet_edge_mm", 2.0),
            remanence_t=dt.get("magnet_remanence_t", 1.43),
        )
        layout = MagnetometerLayout(
            position_mm=tuple(dt.get("sensor_position_mm", (0.0, 0.0, -3.0))),
            conversion_ut_per_lsb=dt.get("conversion_ut_per_lsb", 1.0),
            resolution_bits=dt.get("resolution_bits", 18),
        )
        designs.append(
            DesignConfig(
                name=_get(dt, "name", required=True, path=f"design[{i}]."),
                tip=tip,
                stack=stack,
                magnet=magnet,
                layout=layout,
            )
        )
    if not designs:
        designs = list(default_designs())

    sweep_t = raw.get("sweep", {})
    if "preset" in sweep_t:
        name = sweep_t["preset"]
        if name not in _PRESET_GRIDS:
            raise ConfigError(f"sweep.preset: unknown preset {name!r}")
        grid = dict(_PRESET_GRIDS[name])
    else:
        grid = {
            "wavelengths_mm": tuple(sweep_t.get("wavelengths_mm", ())),
            "amplitudes_um": tuple(sweep_t.get("amplitudes_um", ())),
            "velocities_mm_s": tuple(sweep_t.get("velocities_mm_s", ())),
        }
    sweep = SweepConfig(
        wavelengths_mm=tuple(grid["wavelengths_mm"]),
        amplitudes_um=tuple(grid["amplitudes_um"]),
        velocities_mm_s=tuple(grid["velocities_mm_s"]),
        repetitions=sweep_t.get("repetitions", 3),
        directions=tuple(sweep_t.get("directions", (1,))),
    )

    scan_t = raw.get("scan", {})
    pipe_t = raw.get("pipeline", {})
    cv_t = raw.get("cv", {})
    return ExperimentConfig(
        seed=seed,
        designs=tuple(designs),
        sweep=sweep,
        scan_duration_s=scan_t.get("duration_s", 1.2),
        preload_depth_um=scan_t.get("preload_depth_um", 50.0),
        sim_rate_hz=scan_t.get("sim_rate_hz", 20000.0),
        output_rate_hz=scan_t.get("output_rate_hz", 5000.0),
        surface_resolution=scan_t.get("surface_resolution", 200.0),
        pipeline=PipelineConfig(
            resample_rate_hz=pipe_t.get("resample_rate_hz", 5000.0),
            target_rate_hz=pipe_t.get("target_rate_hz", 330.0),
            highpass_hz=pipe_t.get("highpass_hz", 2.0),
            peak_prominence=pipe_t.get("peak_prominence", 2.0),
            max_peaks=pipe_t.get("max_peaks", 20),
        ),
        cv_folds=cv_t.get("folds", 5),
        cv_repeats=cv_t.get("repeats", 60),
    )
