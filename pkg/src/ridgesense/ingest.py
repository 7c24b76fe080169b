"""Recorded-log parsing, contact detection, and pass segmentation.

Log format (defined here, versioned by a header comment): CSV lines
`t_s,x_um,z_um,bx,by,bz`; `#`-prefixed lines are comments/metadata. Passes
carved from a log flow through the same feature pipeline as simulated data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import ema
from .magnetics import FieldSeries

LOG_SCHEMA = "ridgesense-log-1"
CONTACT_ALPHA = 0.12
CONTACT_THRESHOLD_LSB = 10.0
BASELINE_SAMPLES = 50
MIN_PASS_TRAVEL_UM = 1000.0
MIN_PASS_DURATION_S = 0.2
VELOCITY_TOLERANCE = 0.2


class MalformedLogError(ValueError):
    def __init__(self, bad_lines):
        super().__init__(
            f"more than 1% malformed lines; first bad line numbers: {bad_lines[:10]}"
        )
        self.bad_lines = bad_lines


@dataclass(frozen=True)
class LogRecord:
    t_s: float
    x_enc_um: float
    z_enc_um: float
    bx_lsb: int
    by_lsb: int
    bz_lsb: int


@dataclass(frozen=True)
class SessionMeta:
    design: str
    material: str
    nominal_velocity_mm_s: float
    direction: str = "+x"
    repetition: int = 0
    trial: int = 0


@dataclass
class Pass:
    fieldseries: FieldSeries
    meta: SessionMeta
    measured_velocity_mm_s: float
    direction: int  # +1 / -1
    flags: list = field(default_factory=list)


@dataclass
class ParseResult:
    records: list
    comments: list
    diagnostics: list  # (line_number, line) for malformed lines


def parse_log(data) -> ParseResult:
    """Parse log bytes/text; tolerate up to 1% malformed lines."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    records, comments, diagnostics = [], [], []
    total = 0
    for lineno, ln in enumerate(data.splitlines(), start=1):
        ln = ln.strip()
        if not ln:
            continue
        if ln.startswith("#"):
            comments.append(ln)
            continue
        total += 1
        parts = ln.split(",")
        try:
            if len(parts) != 6:
                raise ValueError("wrong field count")
            rec = LogRecord(
                t_s=float(parts[0]),
                x_enc_um=float(parts[1]),
                z_enc_um=float(parts[2]),
                bx_lsb=int(parts[3]),
                by_lsb=int(parts[4]),
                bz_lsb=int(parts[5]),
            )
            if not all(
                np.isfinite(v) for v in (rec.t_s, rec.x_enc_um, rec.z_enc_um)
            ):
                raise ValueError("non-finite value")
            records.append(rec)
        except ValueError:
            diagnostics.append((lineno, ln))
    if total > 0 and len(diagnostics) > 0.01 * total:
        raise MalformedLogError([n for n, _ in diagnostics])
    return ParseResult(records=records, comments=comments, diagnostics=diagnostics)


def detect_contact(
    z_field_lsb,
    alpha: float = CONTACT_ALPHA,
    threshold_lsb: float = CONTACT_THRESHOLD_LSB,
):
    """First index where the EMA of the z field deviates from the pre-contact
    baseline by at least the threshold. Returns None if never crossed.

    The baseline is the mean of the first 50 samples, which are contact-free
    because acquisition starts before the sensor is lowered.
    """
    z = np.asarray(z_field_lsb, dtype=float)
    if z.size < BASELINE_SAMPLES:
        raise ValueError(f"need at least {BASELINE_SAMPLES} baseline samples")
    baseline = z[:BASELINE_SAMPLES].mean()
    smoothed = ema(z, alpha)
    crossed = np.flatnonzero(np.abs(smoothed - baseline) >= threshold_lsb)
    return int(crossed[0]) if crossed.size else None


def segment_passes(records, meta: SessionMeta, expected_passes: int | None = None):
    """Split records into constant-direction passes at x-encoder reversals.

    A reversal requires at least 1 mm of travel on both sides; velocity per
    pass is the least-squares slope of x_enc vs t. Passes shorter than 0.2 s
    or off the nominal velocity by more than 20% are flagged, not dropped.
    """
    if len(records) < 2:
        return []
    t = np.array([r.t_s for r in records])
    x = np.array([r.x_enc_um for r in records])
    boundaries = [0]
    ext = 0  # index of the running extreme of the current leg
    direction = 0
    for i in range(1, x.size):
        if direction == 0:
            if abs(x[i] - x[0]) >= MIN_PASS_TRAVEL_UM:
                direction = 1 if x[i] > x[0] else -1
                ext = i
        elif direction * (x[i] - x[ext]) >= 0:
            ext = i
        elif direction * (x[ext] - x[i]) >= MIN_PASS_TRAVEL_UM:
            boundaries.append(ext)
            direction = -direction
            ext = i
    boundaries.append(len(records) - 1)

    passes = []
    for start, stop in zip(boundaries[:-1], boundaries[1:]):
        seg = slice(start, stop + 1)
        if abs(x[stop] - x[start]) < MIN_PASS_TRAVEL_UM:
            continue
        seg_t, seg_x = t[seg], x[seg]
        slope_um_s = float(np.polyfit(seg_t, seg_x, 1)[0])
        velocity = abs(slope_um_s) / 1000.0
        flags = []
        duration = seg_t[-1] - seg_t[0]
        if duration <= MIN_PASS_DURATION_S:
            flags.append("short-duration")
        if meta.nominal_velocity_mm_s > 0 and (
            abs(velocity - meta.nominal_velocity_mm_s)
            > VELOCITY_TOLERANCE * meta.nominal_velocity_mm_s
        ):
            flags.append("velocity-off-nominal")
        dt = np.diff(seg_t)
        rate = 1.0 / dt[0] if dt.size else 1.0
        fs = FieldSeries(
            times_s=seg_t.copy(),
            bx_lsb=np.array([r.bx_lsb for r in records[seg]], dtype=np.int64),
            by_lsb=np.array([r.by_lsb for r in records[seg]], dtype=np.int64),
            bz_lsb=np.array([r.bz_lsb for r in records[seg]], dtype=np.int64),
            rate_hz=rate,
            meta={"source": "ingested"},
        )
        passes.append(
            Pass(
                fieldseries=fs,
                meta=meta,
                measured_velocity_mm_s=velocity,
                direction=1 if slope_um_s >= 0 else -1,
                flags=flags,
            )
        )
    if expected_passes is not None and len(passes) < expected_passes:
        for p in passes:
            p.flags.append("fewer-passes-than-expected")
    return passes


def records_to_log(records, comments=()) -> str:
    """Serialize records in the versioned log format (float fields round-trip)."""
    lines = [f"# schema={LOG_SCHEMA}"]
    lines += [f"# {c}" for c in comments]
    for r in records:
        lines.append(
            f"{r.t_s!r},{r.x_enc_um!r},{r.z_enc_um!r},{r.bx_lsb},{r.by_lsb},{r.bz_lsb}"
        )
    return "\n".join(lines) + "\n"


def synthetic_log_from_field(series: FieldSeries, velocity_mm_s: float, direction: int = 1):
    """Wrap a FieldSeries in log records with an ideal encoder ramp."""
    records = []
    for t, bx, by, bz in zip(series.times_s, series.bx_lsb, series.by_lsb, series.bz_lsb):
        x = direction * velocity_mm_s * 1000.0 * (t - series.times_s[0])
        records.append(
            LogRecord(
                t_s=float(t),
                x_enc_um=float(x),
                z_enc_um=0.0,
                bx_lsb=int(bx),
                by_lsb=int(by),
                bz_lsb=int(bz),
            )
        )
    return records
