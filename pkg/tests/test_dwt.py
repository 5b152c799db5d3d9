import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from uroevent.dwt import (
    DEC_HI,
    DEC_LO,
    REC_LO,
    InterpolatedDecomposition,
    WaveletDecomposition,
    cascade_lengths,
    coefficient_len,
    dwt5_db2,
    idwt5_db2,
    interpolate_full_length,
    knot_positions,
    stretch_series,
)
from uroevent.errors import NonFiniteInputError, ShapeMismatchError, SignalTooShortError


def oracle_level1(x, filt):
    """Independent direct-convolution analysis: mirror-extend, slide, dot."""
    x = list(map(float, x))
    ext = x[2::-1] + x + x[-1:-4:-1]  # half-point symmetric, 3 samples each side
    taps = list(map(float, filt))
    windows = []
    for start in range(len(ext) - 3):
        windows.append(sum(ext[start + j] * taps[3 - j] for j in range(4)))
    return np.asarray(windows[1::2])


class TestFilters:
    def test_scaling_filter_is_orthonormal(self):
        assert abs(np.dot(REC_LO, REC_LO) - 1.0) < 1e-12
        assert abs(REC_LO.sum() - np.sqrt(2.0)) < 1e-12

    def test_highpass_annihilates_constants(self):
        assert abs(DEC_HI.sum()) < 1e-12


class TestForward:
    def test_constant_signal_zero_details(self):
        for value in (0.0, 7.0, -3.25, 1e4):
            decomp = dwt5_db2(np.full(64, value))
            worst = max(np.max(np.abs(cd)) for cd in decomp.detail)
            assert worst <= 1e-12 * max(abs(value), 1.0)

    def test_impulse_matches_direct_convolution_oracle(self):
        x = np.zeros(64)
        x[8] = 1.0
        decomp = dwt5_db2(x)
        assert np.allclose(decomp.approx[0], oracle_level1(x, DEC_LO), atol=1e-12)
        assert np.allclose(decomp.detail[0], oracle_level1(x, DEC_HI), atol=1e-12)
        # away from boundaries the response is the subsampled, reversed taps
        nonzero = decomp.approx[0][np.abs(decomp.approx[0]) > 0]
        assert np.allclose(sorted(np.abs(nonzero)), sorted(np.abs(REC_LO[::2])), atol=1e-12)

    def test_random_signals_match_oracle(self):
        rng = np.random.default_rng(2)
        for n in (32, 45, 64, 101):
            x = rng.normal(size=n)
            decomp = dwt5_db2(x)
            assert np.allclose(decomp.approx[0], oracle_level1(x, DEC_LO), atol=1e-12)
            assert np.allclose(decomp.detail[0], oracle_level1(x, DEC_HI), atol=1e-12)

    def test_energy_conserved_under_periodization(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=128)
        decomp = dwt5_db2(x, mode="periodic")
        coeff_energy = np.sum(decomp.approx[-1] ** 2) + sum(
            np.sum(cd**2) for cd in decomp.detail
        )
        assert abs(np.sum(x * x) - coeff_energy) <= 1e-9

    def test_coefficient_lengths_follow_cascade(self):
        for n in (32, 33, 64, 100, 4096):
            decomp = dwt5_db2(np.zeros(n))
            lens = cascade_lengths(n)
            for k in range(5):
                assert len(decomp.approx[k]) == coefficient_len(lens[k])
                assert len(decomp.detail[k]) == len(decomp.approx[k])

    def test_linearity(self):
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=128), rng.normal(size=128)
        a, b = 2.5, -1.25
        combined = dwt5_db2(a * x + b * y)
        dx, dy = dwt5_db2(x), dwt5_db2(y)
        for k in range(5):
            assert np.max(np.abs(combined.approx[k] - (a * dx.approx[k] + b * dy.approx[k]))) <= 1e-9
            assert np.max(np.abs(combined.detail[k] - (a * dx.detail[k] + b * dy.detail[k]))) <= 1e-9

    def test_too_short_rejected(self):
        with pytest.raises(SignalTooShortError):
            dwt5_db2(np.zeros(31))

    def test_non_finite_rejected(self):
        x = np.zeros(64)
        x[5] = np.nan
        with pytest.raises(NonFiniteInputError):
            dwt5_db2(x)


class TestInverse:
    def test_round_trip_random_256(self):
        x = np.random.default_rng(7).normal(size=256)
        assert np.max(np.abs(idwt5_db2(dwt5_db2(x)) - x)) <= 1e-9

    def test_round_trip_assorted_lengths(self):
        rng = np.random.default_rng(8)
        for n in (32, 33, 50, 63, 64, 100, 127, 128, 1000, 4095, 4096):
            x = rng.normal(size=n) * 50.0
            assert np.max(np.abs(idwt5_db2(dwt5_db2(x)) - x)) <= 1e-9

    def test_zero_decomposition_reconstructs_zero(self):
        decomp = dwt5_db2(np.zeros(64))
        assert np.max(np.abs(idwt5_db2(decomp))) == 0.0

    def test_ramp_round_trip(self):
        ramp = np.arange(100.0)
        assert np.max(np.abs(idwt5_db2(dwt5_db2(ramp)) - ramp)) <= 1e-9

    def test_periodized_round_trip(self):
        x = np.random.default_rng(9).normal(size=256)
        decomp = dwt5_db2(x, mode="periodic")
        assert np.max(np.abs(idwt5_db2(decomp) - x)) <= 1e-9

    def test_shape_mismatch_rejected(self):
        decomp = dwt5_db2(np.zeros(64))
        with pytest.raises(ShapeMismatchError):
            WaveletDecomposition(decomp.approx, decomp.detail[:4] + (np.zeros(3),), 64)


class TestInterpolation:
    def test_constant_series_stretches_to_constant(self):
        out = stretch_series(np.full(4, 3.5), level=5, source_len=40)
        assert out.shape == (40,)
        assert np.allclose(out, 3.5, atol=1e-12)

    def test_two_knot_series_is_monotone(self):
        out = stretch_series(np.array([0.0, 1.0]), level=1, source_len=8)
        assert np.all(np.diff(out) >= -1e-12)
        assert out[0] == 0.0 and out[-1] == 1.0

    def test_output_length_matches_source(self):
        decomp = dwt5_db2(np.random.default_rng(10).normal(size=64))
        interp = interpolate_full_length(decomp)
        for series in interp.series():
            assert len(series) == 64

    def test_spline_passes_through_knots(self):
        rng = np.random.default_rng(11)
        n = 64
        decomp = dwt5_db2(rng.normal(size=n))
        for k in range(5):
            values = decomp.detail[k]
            pos = knot_positions(k + 1, len(values), n)
            uniq, inverse = np.unique(pos, return_inverse=True)
            if len(uniq) < len(pos):
                continue  # clamp-collided knots are averaged, not interpolated
            spline = CubicSpline(pos, values, bc_type="natural")
            assert np.allclose(spline(pos), values, atol=1e-9)

    def test_interpolated_values_finite_on_corpus(self, small_corpus):
        interp = interpolate_full_length(dwt5_db2(small_corpus[0].samples))
        for series in interp.series():
            assert np.all(np.isfinite(series))

    def test_interpolation_requires_symmetric_mode(self):
        decomp = dwt5_db2(np.zeros(128), mode="periodic")
        with pytest.raises(ShapeMismatchError):
            interpolate_full_length(decomp)

    def test_length_validation(self):
        with pytest.raises(ShapeMismatchError):
            InterpolatedDecomposition(
                tuple(np.zeros(10) for _ in range(5)),
                tuple(np.zeros(10) for _ in range(5)),
                source_len=12,
            )
