"""Point-dipole magnet field seen by a magnetometer die, with LSB quantization.

The magnet is a small cube approximated as a point dipole at its center; the
die reports integer counts at a fixed uT/LSB conversion. Simulated and
ingested data share the FieldSeries type and CSV schema.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .mechanics import MagnetTrajectory

MU0 = 4e-7 * np.pi
MIN_STANDOFF_MM = 0.5  # closer than this the magnet would intersect the die


class SingularPositionError(ValueError):
    pass


@dataclass(frozen=True)
class MagnetModel:
    edge_mm: float = 2.0
    remanence_t: float = 1.43  # N50 midrange

    def __post_init__(self):
        if self.edge_mm <= 0 or self.remanence_t <= 0:
            raise ValueError("magnet edge and remanence must be positive")

    @property
    def moment_am2(self) -> float:
        volume = (self.edge_mm / 1000.0) ** 3
        return self.remanence_t * volume / MU0


@dataclass(frozen=True)
class MagnetometerLayout:
    # die position relative to the magnet rest center, sensor frame, mm
    position_mm: tuple[float, float, float] = (0.0, 0.0, -3.0)
    conversion_ut_per_lsb: float = 1.0
    # 18 bits keeps the ~6.7e4 LSB on-axis rest field well inside range
    resolution_bits: int = 18

    def __post_init__(self):
        if self.conversion_ut_per_lsb <= 0:
            raise ValueError("conversion must be positive")
        if self.resolution_bits < 1:
            raise ValueError("resolution_bits must be at least 1")

    @property
    def saturation_lsb(self) -> int:
        return 2**self.resolution_bits - 1


@dataclass(frozen=True)
class FieldSeries:
    times_s: np.ndarray
    bx_lsb: np.ndarray
    by_lsb: np.ndarray
    bz_lsb: np.ndarray
    rate_hz: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times_s)
        if not (len(self.bx_lsb) == len(self.by_lsb) == len(self.bz_lsb) == n):
            raise ValueError("field series must have equal length")
        if self.rate_hz <= 0:
            raise ValueError("rate must be positive")
        for arr in (self.times_s, self.bx_lsb, self.by_lsb, self.bz_lsb):
            np.asarray(arr).setflags(write=False)


def dipole_field(magnet: MagnetModel, pose, sensor_pos_mm) -> tuple[float, float, float]:
    """Triaxial field (uT) at the sensor for a magnet displaced/rotated in-plane.

    pose is (x_um, z_um, theta_mrad): magnet center displacement and rotation
    about the y axis relative to the rest pose; the rest moment points along +z.
    """
    bx, by, bz = _dipole_field_arrays(
        magnet,
        np.atleast_1d(pose[0]).astype(float),
        np.atleast_1d(pose[1]).astype(float),
        np.atleast_1d(pose[2]).astype(float),
        np.asarray(sensor_pos_mm, dtype=float),
    )
    return float(bx[0]), float(by[0]), float(bz[0])


def _dipole_field_arrays(magnet, x_um, z_um, theta_mrad, sensor_pos_mm):
    theta = theta_mrad / 1000.0
    m = magnet.moment_am2
    mx = m * np.sin(theta)
    my = np.zeros_like(theta)
    mz = m * np.cos(theta)

    # vector from magnet center to sensor, meters
    rx = (sensor_pos_mm[0] - x_um / 1000.0) / 1000.0
    ry = np.full_like(theta, sensor_pos_mm[1] / 1000.0)
    rz = (sensor_pos_mm[2] - z_um / 1000.0) / 1000.0
    r2 = rx**2 + ry**2 + rz**2
    r = np.sqrt(r2)
    if np.any(r < MIN_STANDOFF_MM / 1000.0):
        raise SingularPositionError(
            f"magnet-to-die distance below {MIN_STANDOFF_MM} mm"
        )
    mdotr = mx * rx + my * ry + mz * rz
    pref = 1e-7 / (r2 * r)  # mu0 / 4 pi / r^3
    bx = pref * (3.0 * rx * mdotr / r2 - mx)
    by = pref * (3.0 * ry * mdotr / r2 - my)
    bz = pref * (3.0 * rz * mdotr / r2 - mz)
    return bx * 1e6, by * 1e6, bz * 1e6  # tesla -> uT


def quantize(b_ut, layout: MagnetometerLayout):
    """Round a uT triple to LSB counts, saturating at the resolution bound."""
    b = np.asarray(b_ut, dtype=float)
    counts = np.rint(b / layout.conversion_ut_per_lsb)
    sat = layout.saturation_lsb
    return np.clip(counts, -sat, sat).astype(np.int64)


def trajectory_to_field(
    traj: MagnetTrajectory,
    magnet: MagnetModel,
    layout: MagnetometerLayout,
) -> FieldSeries:
    """Per-sample dipole field plus quantization along a magnet trajectory."""
    pos = np.asarray(layout.position_mm, dtype=float)
    bx, by, bz = _dipole_field_arrays(
        magnet, traj.x_disp_um, traj.z_disp_um, traj.rotation_mrad, pos
    )
    raw = np.stack([bx, by, bz], axis=1)
    counts = np.rint(raw / layout.conversion_ut_per_lsb)
    sat = layout.saturation_lsb
    saturated = bool(np.any(np.abs(counts) > sat))
    counts = np.clip(counts, -sat, sat).astype(np.int64)
    dt = np.diff(traj.times_s)
    rate = 1.0 / dt[0] if dt.size else 1.0
    return FieldSeries(
        times_s=np.asarray(traj.times_s, dtype=float).copy(),
        bx_lsb=counts[:, 0],
        by_lsb=counts[:, 1],
        bz_lsb=counts[:, 2],
        rate_hz=rate,
        meta={"source": "simulated", "saturated": saturated},
    )


def field_to_csv(series: FieldSeries, header_comments=()) -> str:
    buf = io.StringIO()
    for line in header_comments:
        buf.write(f"# {line}\n")
    buf.write("t_s,bx_lsb,by_lsb,bz_lsb\n")
    for t, x, y, z in zip(series.times_s, series.bx_lsb, series.by_lsb, series.bz_lsb):
        buf.write(f"{float(t)!r},{int(x)},{int(y)},{int(z)}\n")
    return buf.getvalue()


def field_from_csv(text: str, meta=None) -> FieldSeries:
    rows = []
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#") or ln.startswith("t_s"):
            continue
        t, x, y, z = ln.split(",")
        rows.append((float(t), int(x), int(y), int(z)))
    if len(rows) < 2:
        raise ValueError("field CSV needs at least 2 samples")
    arr = np.array(rows, dtype=object)
    times = np.array([r[0] for r in rows], dtype=float)
    rate = 1.0 / (times[1] - times[0])
    return FieldSeries(
        times_s=times,
        bx_lsb=np.array([r[1] for r in rows], dtype=np.int64),
        by_lsb=np.array([r[2] for r in rows], dtype=np.int64),
        bz_lsb=np.array([r[3] for r in rows], dtype=np.int64),
        rate_hz=rate,
        meta=dict(meta or {"source": "ingested"}),
    )
