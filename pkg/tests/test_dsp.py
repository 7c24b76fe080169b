"""Resampling, filters, spectra, peak finding, and the EMA."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgesense import dsp
from ridgesense.dsp import PowerSpectrum, UniformSeries


class TestResample:
    def test_sine_interpolation_error_small(self):
        t = np.arange(0, 1.0, 1.0 / 5000.0)
        x = np.sin(2 * np.pi * 40.0 * t)
        out = dsp.resample(t, x, 3300.0)
        grid = t[0] + np.arange(out.values.size) / 3300.0
        # linear interpolation of a 40 Hz sine at 5 kHz: error < (w dt)^2 / 8
        bound = (2 * np.pi * 40.0 / 5000.0) ** 2 / 8.0
        assert np.max(np.abs(out.values - np.sin(2 * np.pi * 40.0 * grid))) < bound * 1.01

    def test_grid_spans_input(self):
        t = np.array([0.5, 0.6, 0.7, 0.8])
        out = dsp.resample(t, np.ones(4), 100.0)
        assert out.values.size == 31  # floor(0.3 * 100) + 1

    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError):
            dsp.resample([0.0, 0.1, 0.1], [1, 2, 3], 100.0)


class TestFilters:
    def test_highpass_removes_dc(self):
        series = UniformSeries(330.0, np.full(660, 123.0))
        out = dsp.highpass(series, 2.0)
        assert np.max(np.abs(out.values)) < 1e-6 * 123.0

    def test_highpass_cutoff_validation(self):
        with pytest.raises(ValueError):
            dsp.highpass(UniformSeries(100.0, np.zeros(32)), 60.0)

    def test_downsample_preserves_passband(self):
        t = np.arange(0, 2.0, 1.0 / 5000.0)
        series = UniformSeries(5000.0, np.sin(2 * np.pi * 50.0 * t))
        out = dsp.downsample(series, 330.0)
        grid = np.arange(out.values.size) / 330.0
        mid = slice(50, -50)  # avoid filter edge transients
        assert np.max(np.abs(out.values[mid] - np.sin(2 * np.pi * 50.0 * grid)[mid])) < 0.01

    def test_downsample_rejects_upsampling(self):
        with pytest.raises(ValueError):
            dsp.downsample(UniformSeries(100.0, np.zeros(32)), 200.0)

    @given(freq=st.floats(10.0, 100.0))
    @settings(max_examples=25, deadline=None)
    def test_highpass_idempotent_in_passband(self, freq):
        t = np.arange(4096) / 330.0
        series = UniformSeries(330.0, np.sin(2 * np.pi * freq * t))
        once = dsp.highpass(series, 2.0)
        twice = dsp.highpass(once, 2.0)
        # the 2 Hz filter's boundary transient decays with ~0.2 s time
        # constant; compare well inside the window
        mid = slice(1024, -1024)
        assert np.max(np.abs(twice.values[mid] - once.values[mid])) < 0.01


class TestSpectrum:
    def test_bin_centered_sine_amplitude(self):
        n, rate = 330, 330.0
        t = np.arange(n) / rate
        for amp, freq in ((7.0, 10.0), (2.5, 55.0)):
            spec = dsp.power_spectrum(UniformSeries(rate, amp * np.sin(2 * np.pi * freq * t)))
            k = int(freq * n / rate)
            assert spec.power[k] == pytest.approx(amp, rel=0.01)

    def test_mean_removed(self):
        spec = dsp.power_spectrum(UniformSeries(100.0, np.full(64, 42.0)))
        assert spec.power[0] == pytest.approx(0.0, abs=1e-9)

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            dsp.power_spectrum(UniformSeries(100.0, np.zeros(4)))

    @given(seed=st.integers(0, 500), n=st.integers(16, 200))
    @settings(max_examples=40, deadline=None)
    def test_parseval_energy(self, seed, n):
        rng = np.random.default_rng(seed)
        x = rng.normal(scale=5.0, size=n)
        series = UniformSeries(100.0, x)
        spec = dsp.power_spectrum(series)
        from scipy.signal.windows import hann

        w = hann(n, sym=False)
        direct = float(np.sum(((x - x.mean()) * w) ** 2))
        via_spectrum = dsp.spectrum_energy(spec, n, float(w.sum()))
        assert via_spectrum == pytest.approx(direct, rel=1e-6, abs=1e-9)


class TestFindPeaks:
    def _spec(self, power):
        power = np.asarray(power, dtype=float)
        return PowerSpectrum(freqs_hz=np.arange(power.size, dtype=float), power=power)

    def test_known_peaks_sorted_by_power(self):
        spec = self._spec([0, 1, 8, 1, 0, 5, 0, 3, 0])
        peaks = dsp.find_peaks(spec, min_prominence=2.0, max_count=10)
        assert [p.freq_hz for p in peaks] == [2.0, 5.0, 7.0]
        assert [p.power for p in peaks] == [8.0, 5.0, 3.0]

    def test_prominence_threshold(self):
        spec = self._spec([0, 1, 8, 7, 7.5, 7, 0])  # small bump at index 4
        peaks = dsp.find_peaks(spec, min_prominence=2.0, max_count=10)
        assert [p.freq_hz for p in peaks] == [2.0]

    def test_max_count_truncates(self):
        spec = self._spec([0, 5, 0, 6, 0, 7, 0, 8, 0])
        peaks = dsp.find_peaks(spec, min_prominence=1.0, max_count=2)
        assert [p.power for p in peaks] == [8.0, 7.0]

    @given(offset=st.floats(0.0, 100.0))
    @settings(max_examples=25, deadline=None)
    def test_offset_invariant(self, offset):
        base = np.array([0, 1, 8, 1, 0, 5, 0, 3, 0], dtype=float)
        p1 = dsp.find_peaks(self._spec(base), 2.0, 10)
        p2 = dsp.find_peaks(self._spec(base + offset), 2.0, 10)
        assert [p.freq_hz for p in p1] == [p.freq_hz for p in p2]
        assert [p.prominence for p in p1] == pytest.approx([p.prominence for p in p2])


class TestEma:
    def test_closed_form_oracle(self):
        alpha = 0.12
        x = np.array([3.0, -1.0, 4.0, 1.0, 5.0, 9.0])
        expected = np.empty_like(x)
        expected[0] = x[0]
        for i in range(1, x.size):
            expected[i] = alpha * x[i] + (1 - alpha) * expected[i - 1]
        assert np.allclose(dsp.ema(x, alpha), expected, atol=1e-12)

    def test_alpha_one_is_identity(self):
        x = np.array([1.0, 5.0, -2.0])
        assert np.array_equal(dsp.ema(x, 1.0), x)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            dsp.ema([1.0], 0.0)
        with pytest.raises(ValueError):
            dsp.ema([1.0], 1.5)

    def test_step_response(self):
        # after n samples of a unit step from 0, y = 1 - (1-a)^n
        alpha = 0.2
        x = np.concatenate([[0.0], np.ones(10)])
        y = dsp.ema(x, alpha)
        assert y[-1] == pytest.approx(1.0 - (1.0 - alpha) ** 10, abs=1e-12)
