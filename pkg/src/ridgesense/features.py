"""Per-axis time/frequency feature extraction and unit-grouped normalization.

The feature vector has a fixed 66-slot layout: for each field axis (x, y, z),
5 time-domain stats, 8 spectrum stats, and 9 peak stats. Slots that would be
undefined (zero variance, too few peaks) are 0 by rule, never NaN.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import dsp
from .magnetics import FieldSeries

LAYOUT_VERSION = "fv66-1"

_AXIS_SLOTS = [
    ("mean", "field-LSB"),
    ("p2p", "field-LSB"),
    ("std", "field-LSB"),
    ("skew", "dimensionless"),
    ("kurt", "dimensionless"),
    ("spec_centroid_f", "frequency-Hz"),
    ("spec_std_f", "frequency-Hz"),
    ("spec_skew_f", "dimensionless"),
    ("spec_kurt_f", "dimensionless"),
    ("spec_centroid_p", "power-LSB"),
    ("spec_std_p", "power-LSB"),
    ("spec_skew_p", "dimensionless"),
    ("spec_kurt_p", "dimensionless"),
    ("peak_count", "count"),
    ("peak_mean_f", "frequency-Hz"),
    ("peak_std_f", "frequency-Hz"),
    ("peak_skew_f", "dimensionless"),
    ("peak_kurt_f", "dimensionless"),
    ("peak_mean_p", "power-LSB"),
    ("peak_std_p", "power-LSB"),
    ("peak_skew_p", "dimensionless"),
    ("peak_kurt_p", "dimensionless"),
]

AXES = ("x", "y", "z")
SLOT_NAMES = [f"{axis}_{name}" for axis in AXES for name, _ in _AXIS_SLOTS]
SLOT_UNITS = [unit for _ in AXES for _, unit in _AXIS_SLOTS]
N_FEATURES = len(SLOT_NAMES)  # 66

UNIT_GROUPS = {}
for _i, _unit in enumerate(SLOT_UNITS):
    UNIT_GROUPS.setdefault(_unit, []).append(_i)


@dataclass(frozen=True)
class PipelineConfig:
    resample_rate_hz: float = 5000.0
    target_rate_hz: float = 330.0
    highpass_hz: float = 2.0
    peak_prominence: float = 2.0
    max_peaks: int = 20


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout_version: str = LAYOUT_VERSION

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} slots, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass
class LabeledDataset:
    vectors: np.ndarray  # (n, 66)
    labels: list
    meta: list  # list of dicts
    layout_version: str = LAYOUT_VERSION

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != N_FEATURES:
            raise ValueError(f"vectors must be (n, {N_FEATURES})")
        if not (len(self.labels) == len(self.meta) == self.vectors.shape[0]):
            raise ValueError("labels/meta length mismatch")

    def __len__(self):
        return self.vectors.shape[0]


def _moments(values, weights=None):
    """(mean, std, skew, kurt) with population normalization.

    Skew is m3/m2^1.5, kurtosis m4/m2^2 (Pearson; Gaussian -> 3). Degenerate
    variance maps skew and kurtosis to 0.
    """
    v = np.asarray(values, dtype=float)
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=float)
    wsum = w.sum()
    mean = float(np.sum(w * v) / wsum)
    d = v - mean
    m2 = float(np.sum(w * d**2) / wsum)
    scale = max(1.0, float(np.max(np.abs(v))) ** 2)
    if m2 <= 1e-24 * scale:
        return mean, 0.0, 0.0, 0.0
    m3 = float(np.sum(w * d**3) / wsum)
    m4 = float(np.sum(w * d**4) / wsum)
    return mean, float(np.sqrt(m2)), m3 / m2**1.5, m4 / m2**2


def time_features(series: dsp.UniformSeries) -> np.ndarray:
    """[mean, peak-to-peak, std, skew, kurtosis] of a conditioned series."""
    v = series.values
    if v.size < 4:
        raise ValueError("need at least 4 samples for time features")
    mean, std, skew, kurt = _moments(v)
    return np.array([mean, float(v.max() - v.min()), std, skew, kurt])


def spectrum_features(spec: dsp.PowerSpectrum) -> np.ndarray:
    """Stats along the frequency axis (power-weighted) and the power axis.

    Zero-total-power spectra yield all zeros.
    """
    p = spec.power
    if p.size == 0 or p.sum() <= 0:
        return np.zeros(8)
    cf, sf, kf, uf = _moments(spec.freqs_hz, weights=p)
    cp, sp, kp, up = _moments(p)
    return np.array([cf, sf, kf, uf, cp, sp, kp, up])


def peak_features(peaks) -> np.ndarray:
    """[count, mean/std/skew/kurt of peak freqs, same of peak powers].

    Fewer than 4 peaks zero the skew/kurt slots; fewer than 2 zero the std;
    an empty list is all zeros.
    """
    n = len(peaks)
    out = np.zeros(9)
    out[0] = n
    if n == 0:
        return out
    freqs = np.array([pk.freq_hz for pk in peaks])
    powers = np.array([pk.power for pk in peaks])
    mf, sf, skf, kf = _moments(freqs)
    mp, sp, skp, kp = _moments(powers)
    if n < 2:
        sf = sp = 0.0
    if n < 4:
        skf = kf = skp = kp = 0.0
    out[1:5] = [mf, sf, skf, kf]
    out[5:9] = [mp, sp, skp, kp]
    return out


def extract(fieldseries: FieldSeries, pipeline: PipelineConfig = PipelineConfig()) -> FeatureVector:
    """Full conditioning + feature pipeline for one pass of field data."""
    duration = fieldseries.times_s[-1] - fieldseries.times_s[0]
    if duration < 1.0 - 1e-9:
        raise ValueError(f"need at least 1 s of data, got {duration:.3f} s")
    out = np.empty(N_FEATURES)
    for i, axis_values in enumerate(
        (fieldseries.bx_lsb, fieldseries.by_lsb, fieldseries.bz_lsb)
    ):
        series = dsp.resample(
            fieldseries.times_s, np.asarray(axis_values, dtype=float), pipeline.resample_rate_hz
        )
        if pipeline.target_rate_hz < pipeline.resample_rate_hz:
            series = dsp.downsample(series, pipeline.target_rate_hz)
        series = dsp.highpass(series, pipeline.highpass_hz)
        spec = dsp.power_spectrum(series)
        peaks = dsp.find_peaks(spec, pipeline.peak_prominence, pipeline.max_peaks)
        out[22 * i : 22 * i + 5] = time_features(series)
        out[22 * i + 5 : 22 * i + 13] = spectrum_features(spec)
        out[22 * i + 13 : 22 * i + 22] = peak_features(peaks)
    return FeatureVector(values=out)


def normalize(dataset: LabeledDataset, fit_rows=None, clamp: bool = False) -> LabeledDataset:
    """Min-max normalize to [0, 1], unit group by unit group.

    The min/max of each unit group is taken jointly over all member slots of
    the fit rows (default: all rows) and the same affine map is applied to
    every row. A degenerate group (max == min) maps to 0.5.
    """
    if fit_rows is None:
        fit_rows = np.arange(len(dataset))
    fit_rows = np.asarray(fit_rows, dtype=int)
    if fit_rows.size == 0:
        raise ValueError("fit_rows must be non-empty")
    out = np.empty_like(dataset.vectors)
    for slots in UNIT_GROUPS.values():
        block = dataset.vectors[np.ix_(fit_rows, slots)]
        lo, hi = block.min(), block.max()
        if hi > lo:
            out[:, slots] = (dataset.vectors[:, slots] - lo) / (hi - lo)
        else:
            out[:, slots] = 0.5
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return LabeledDataset(
        vectors=out,
        labels=list(dataset.labels),
        meta=[dict(m) for m in dataset.meta],
        layout_version=dataset.layout_version,
    )


def concat(datasets) -> LabeledDataset:
    datasets = list(datasets)
    versions = {d.layout_version for d in datasets}
    if len(versions) > 1:
        raise ValueError(f"mixed feature layout versions: {sorted(versions)}")
    return LabeledDataset(
        vectors=np.vstack([d.vectors for d in datasets]),
        labels=[lb for d in datasets for lb in d.labels],
        meta=[m for d in datasets for m in d.meta],
        layout_version=datasets[0].layout_version,
    )


def dataset_to_csv(dataset: LabeledDataset, header_comments=()) -> str:
    meta_keys = sorted({k for m in dataset.meta for k in m})
    buf = io.StringIO()
    for line in header_comments:
        buf.write(f"# {line}\n")
    buf.write(f"# layout={dataset.layout_version}\n")
    buf.write(",".join(["label"] + meta_keys + SLOT_NAMES) + "\n")
    for label, meta, vec in zip(dataset.labels, dataset.meta, dataset.vectors):
        cells = [str(label)] + [str(meta.get(k, "")) for k in meta_keys]
        cells += [repr(float(v)) for v in vec]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def dataset_from_csv(text: str) -> LabeledDataset:
    layout = LAYOUT_VERSION
    header = None
    labels, meta, rows = [], [], []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        if ln.startswith("#"):
            stripped = ln[1:].strip()
            if stripped.startswith("layout="):
                layout = stripped.split("=", 1)[1]
            continue
        cells = ln.split(",")
        if header is None:
            header = cells
            if header[-N_FEATURES:] != SLOT_NAMES:
                raise ValueError("feature columns do not match the expected layout")
            meta_keys = header[1:-N_FEATURES]
            continue
        labels.append(cells[0])
        meta.append(dict(zip(meta_keys, cells[1 : 1 + len(meta_keys)])))
        rows.append([float(v) for v in cells[-N_FEATURES:]])
    if layout != LAYOUT_VERSION:
        raise ValueError(f"unsupported feature layout {layout!r}")
    if not rows:
        raise ValueError("empty feature table")
    return LabeledDataset(vectors=np.array(rows), labels=labels, meta=meta, layout_version=layout)
