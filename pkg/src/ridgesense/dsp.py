"""Time-series conditioning: resampling, filtering, spectra, peaks, EMA.

All operations are pure. Spectra use a Hann window with amplitude correction:
a bin-centered sine of amplitude A shows a peak of magnitude A. The stored
one-sided magnitudes relate to the raw windowed DFT by
|X[k]| = power[k] * wsum / 2 for interior bins and |X[k]| = power[k] * wsum
for the DC and Nyquist bins, with wsum the window sample sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

MIN_SPECTRAL_LENGTH = 8


@dataclass(frozen=True)
class UniformSeries:
    rate_hz: float
    values: np.ndarray

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ValueError("rate must be positive")
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class PowerSpectrum:
    freqs_hz: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        if len(self.freqs_hz) != len(self.power):
            raise ValueError("freqs and power must have equal length")
        for arr in (self.freqs_hz, self.power):
            np.asarray(arr).setflags(write=False)


@dataclass(frozen=True)
class SpectralPeak:
    freq_hz: float
    power: float
    prominence: float


def resample(times_s, values, target_rate_hz: float) -> UniformSeries:
    """Linear interpolation onto a uniform grid spanning the input time range."""
    t = np.asarray(times_s, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 2:
        raise ValueError("need at least 2 samples to resample")
    if np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    n = int(np.floor((t[-1] - t[0]) * target_rate_hz)) + 1
    grid = t[0] + np.arange(n) / target_rate_hz
    return UniformSeries(rate_hz=target_rate_hz, values=np.interp(grid, t, v))


def downsample(series: UniformSeries, target_rate_hz: float) -> UniformSeries:
    """Anti-aliased rate reduction: zero-phase low-pass then grid interpolation."""
    if target_rate_hz >= series.rate_hz:
        raise ValueError("target rate must be below the source rate")
    cutoff = 0.45 * target_rate_hz
    sos = signal.butter(4, cutoff / (series.rate_hz / 2.0), btype="low", output="sos")
    filtered = signal.sosfiltfilt(sos, series.values)
    t_src = np.arange(series.values.size) / series.rate_hz
    n = int(np.floor(t_src[-1] * target_rate_hz)) + 1
    grid = np.arange(n) / target_rate_hz
    return UniformSeries(rate_hz=target_rate_hz, values=np.interp(grid, t_src, filtered))


def highpass(series: UniformSeries, cutoff_hz: float) -> UniformSeries:
    """Zero-phase 4th-order high-pass (forward-backward)."""
    nyquist = series.rate_hz / 2.0
    if cutoff_hz >= nyquist:
        raise ValueError(f"cutoff {cutoff_hz} Hz at or above Nyquist {nyquist} Hz")
    sos = signal.butter(4, cutoff_hz / nyquist, btype="high", output="sos")
    return UniformSeries(rate_hz=series.rate_hz, values=signal.sosfiltfilt(sos, series.values))


def power_spectrum(series: UniformSeries) -> PowerSpectrum:
    """One-sided Hann-windowed amplitude spectrum of the mean-removed series."""
    x = series.values
    n = x.size
    if n < MIN_SPECTRAL_LENGTH:
        raise ValueError(f"need at least {MIN_SPECTRAL_LENGTH} samples, got {n}")
    w = signal.windows.hann(n, sym=False)
    spec = np.abs(np.fft.rfft((x - x.mean()) * w))
    wsum = w.sum()
    power = spec * (2.0 / wsum)
    power[0] /= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0
    freqs = np.fft.rfftfreq(n, d=1.0 / series.rate_hz)
    return PowerSpectrum(freqs_hz=freqs, power=power)


def spectrum_energy(spec: PowerSpectrum, n: int, window_sum: float) -> float:
    """Energy sum(x_w**2) of the mean-removed windowed signal, by Parseval.

    Reconstructs the raw DFT magnitudes from the documented normalization
    (|X_k| = power_k * wsum / 2 interior, power_k * wsum at DC/Nyquist) and
    applies Parseval's identity; n is the original series length.
    """
    if spec.power.size != n // 2 + 1:
        raise ValueError("n inconsistent with spectrum length")
    interior = spec.power[1:-1] if n % 2 == 0 else spec.power[1:]
    total = (spec.power[0] ** 2) + 0.5 * np.sum(interior**2)
    if n % 2 == 0:
        total += spec.power[-1] ** 2
    return float(total * window_sum**2 / n)


def find_peaks(spec: PowerSpectrum, min_prominence: float, max_count: int):
    """Largest spectral peaks by topographic prominence.

    Local maxima with prominence >= min_prominence, sorted by power descending
    and truncated to max_count. Series endpoints act as range boundaries.
    """
    idx, props = signal.find_peaks(spec.power, prominence=min_prominence)
    if idx.size == 0 or max_count <= 0:
        return []
    order = np.argsort(-spec.power[idx], kind="stable")[:max_count]
    return [
        SpectralPeak(
            freq_hz=float(spec.freqs_hz[idx[i]]),
            power=float(spec.power[idx[i]]),
            prominence=float(props["prominences"][i]),
        )
        for i in order
    ]


def ema(values, alpha: float) -> np.ndarray:
    """Exponential moving average: y[0] = x[0], y[n] = a x[n] + (1-a) y[n-1]."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return x.copy()
    y, _ = signal.lfilter([alpha], [1.0, -(1.0 - alpha)], x, zi=[(1.0 - alpha) * x[0]])
    return y


def spectrum_to_csv(spec: PowerSpectrum) -> str:
    lines = ["freq_hz,power"]
    lines += [f"{float(f)!r},{float(p)!r}" for f, p in zip(spec.freqs_hz, spec.power)]
    return "\n".join(lines) + "\n"
