"""5-level discrete wavelet transform with the 4-tap Daubechies-2 wavelet.

The forward transform iterates analysis filtering and dyadic downsampling on
the approximation branch.  Boundaries use half-point symmetric extension, and
only filter windows fully inside the extended signal are kept, so a constant
input yields exactly-zero detail coefficients at every level.  The inverse
transform (upsample, synthesis filter, sum, trim) reconstructs the input to
floating-point precision.

A periodized variant (``mode="periodic"``) keeps exactly n/2 coefficients per
band and therefore conserves energy; it exists for orthonormality checks and
requires the length to be divisible by 2**levels.

Every coefficient series can be stretched back to the source length with a
natural cubic spline whose knots sit at the temporal centres of the
coefficients' supports (``stretch_series``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NonFiniteInputError, ShapeMismatchError, SignalTooShortError

LEVELS = 5
FILTER_LEN = 4
MIN_SIGNAL_LEN = 32

# Orthonormal Daubechies-2 scaling filter: sums to sqrt(2), unit norm.
_R3 = np.sqrt(3.0)
REC_LO = np.array([1.0 + _R3, 3.0 + _R3, 3.0 - _R3, 1.0 - _R3]) / (4.0 * np.sqrt(2.0))
REC_HI = np.array([REC_LO[3], -REC_LO[2], REC_LO[1], -REC_LO[0]])
DEC_LO = REC_LO[::-1].copy()
DEC_HI = REC_HI[::-1].copy()
for _f in (REC_LO, REC_HI, DEC_LO, DEC_HI):
    _f.flags.writeable = False


def coefficient_len(n: int, mode: str = "symmetric") -> int:
    """Length of one coefficient band produced from a length-``n`` signal."""
    if mode == "symmetric":
        return (n + FILTER_LEN - 1) // 2
    return n // 2


def cascade_lengths(source_len: int, mode: str = "symmetric") -> list[int]:
    """Signal length entering each of the 5 decomposition levels."""
    lens = [source_len]
    for _ in range(LEVELS - 1):
        lens.append(coefficient_len(lens[-1], mode))
    return lens


@dataclass(frozen=True)
class WaveletDecomposition:
    """Raw (decimated) coefficient series of a 5-level decomposition.

    ``approx[k]`` and ``detail[k]`` hold cA(k+1) and cD(k+1).
    """

    approx: tuple[np.ndarray, ...]
    detail: tuple[np.ndarray, ...]
    source_len: int
    mode: str = "symmetric"

    def __post_init__(self) -> None:
        if len(self.approx) != LEVELS or len(self.detail) != LEVELS:
            raise ShapeMismatchError("expected 5 approximation and 5 detail series")
        expected = cascade_lengths(self.source_len, self.mode)
        for k, (ca, cd) in enumerate(zip(self.approx, self.detail)):
            want = coefficient_len(expected[k], self.mode)
            if len(ca) != want or len(cd) != want:
                raise ShapeMismatchError(
                    f"level {k + 1}: expected {want} coefficients, "
                    f"got {len(ca)} (cA) / {len(cd)} (cD)"
                )


@dataclass(frozen=True)
class InterpolatedDecomposition:
    """All ten coefficient series stretched to the source length."""

    approx: tuple[np.ndarray, ...]
    detail: tuple[np.ndarray, ...]
    source_len: int

    def __post_init__(self) -> None:
        for series in (*self.approx, *self.detail):
            if len(series) != self.source_len:
                raise ShapeMismatchError(
                    f"interpolated series length {len(series)} != source {self.source_len}"
                )
            if not np.all(np.isfinite(series)):
                raise NonFiniteInputError("interpolated series contains NaN or infinity")

    def series(self) -> list[np.ndarray]:
        """The ten series in canonical order cA1..cA5, cD1..cD5."""
        return [*self.approx, *self.detail]


def _extend(x: np.ndarray, mode: str) -> np.ndarray:
    if mode == "symmetric":
        return np.pad(x, (FILTER_LEN - 1, FILTER_LEN - 1), mode="symmetric")
    if mode == "periodic":
        return np.pad(x, (0, FILTER_LEN - 1), mode="wrap")
    raise ValueError(f"unknown extension mode {mode!r}")


def _dwt_single(x: np.ndarray, filt: np.ndarray, mode: str) -> np.ndarray:
    n = len(x)
    xe = _extend(x, mode)
    y = np.convolve(xe, filt)
    if mode == "symmetric":
        # analysis windows at even offsets, fully inside the extended signal
        return y[FILTER_LEN : n + 2 * (FILTER_LEN - 1) : 2]
    return y[FILTER_LEN - 1 : FILTER_LEN - 1 + n : 2]


def _idwt_single(ca: np.ndarray, cd: np.ndarray, n: int, mode: str) -> np.ndarray:
    if len(ca) != len(cd):
        raise ShapeMismatchError(f"cA/cD length mismatch: {len(ca)} vs {len(cd)}")
    up_a = np.zeros(2 * len(ca))
    up_a[::2] = ca
    up_d = np.zeros(2 * len(cd))
    up_d[::2] = cd
    rec = np.convolve(up_a, REC_LO) + np.convolve(up_d, REC_HI)
    if mode == "symmetric":
        if len(ca) != coefficient_len(n, mode):
            raise ShapeMismatchError(
                f"cannot invert to length {n} from {len(ca)} coefficients"
            )
        return rec[FILTER_LEN - 2 : FILTER_LEN - 2 + n]
    out = rec[:n].copy()
    out[: FILTER_LEN - 1] += rec[n : n + FILTER_LEN - 1]
    return out


def dwt5_db2(signal: np.ndarray, mode: str = "symmetric") -> WaveletDecomposition:
    """Decompose a pressure signal into 5 approximation + 5 detail bands.

    Parameters
    ----------
    signal : array-like
        Finite 1-D signal, at least 32 samples.
    mode : {"symmetric", "periodic"}
        Boundary extension.  ``periodic`` conserves energy exactly but
        requires the length to be divisible by 32.

    Raises
    ------
    SignalTooShortError, NonFiniteInputError
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise NonFiniteInputError("signal must be 1-D")
    if len(x) < MIN_SIGNAL_LEN:
        raise SignalTooShortError(f"need >= {MIN_SIGNAL_LEN} samples, got {len(x)}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError("signal contains NaN or infinity")
    if mode == "periodic" and len(x) % (2**LEVELS) != 0:
        raise ShapeMismatchError("periodic mode requires a length divisible by 32")

    approx: list[np.ndarray] = []
    detail: list[np.ndarray] = []
    cur = x
    for _ in range(LEVELS):
        approx.append(_dwt_single(cur, DEC_LO, mode))
        detail.append(_dwt_single(cur, DEC_HI, mode))
        cur = approx[-1]
    return WaveletDecomposition(tuple(approx), tuple(detail), len(x), mode)


def idwt5_db2(decomp: WaveletDecomposition) -> np.ndarray:
    """Reconstruct the original signal from a decomposition (max error ~1e-15)."""
    lens = cascade_lengths(decomp.source_len, decomp.mode)
    cur = decomp.approx[-1]
    for k in range(LEVELS - 1, -1, -1):
        cur = _idwt_single(cur, decomp.detail[k], lens[k], decomp.mode)
    return cur


def knot_positions(level: int, n_coeffs: int, source_len: int) -> np.ndarray:
    """Sample positions of the temporal centres of level-``level`` coefficients.

    Coefficient ``i`` at level ``k`` is centred at ``i * 2**k - 2**(k-1) + 0.5``;
    positions are clamped to ``[0, source_len - 1]``.
    """
    pos = np.arange(n_coeffs) * 2.0**level - 2.0 ** (level - 1) + 0.5
    return np.clip(pos, 0.0, float(source_len - 1))


def stretch_series(values: np.ndarray, level: int, source_len: int) -> np.ndarray:
    """Stretch one coefficient series to ``source_len`` samples.

    A natural cubic spline interpolates between the knots from
    ``knot_positions``; clamp-collided boundary knots are averaged, and the
    interpolant is held constant beyond the first/last knot.
    """
    values = np.asarray(values, dtype=np.float64)
    pos = knot_positions(level, len(values), source_len)
    uniq, inverse = np.unique(pos, return_inverse=True)
    if len(uniq) < len(pos):
        sums = np.zeros(len(uniq))
        counts = np.zeros(len(uniq))
        np.add.at(sums, inverse, values)
        np.add.at(counts, inverse, 1.0)
        values = sums / counts
        pos = uniq
    if len(pos) == 1:
        return np.full(source_len, values[0])
    spline = CubicSpline(pos, values, bc_type="natural")
    grid = np.clip(np.arange(source_len, dtype=np.float64), pos[0], pos[-1])
    return np.asarray(spline(grid), dtype=np.float64)


def interpolate_full_length(decomp: WaveletDecomposition) -> InterpolatedDecomposition:
    """Stretch every coefficient series of a symmetric-mode decomposition."""
    if decomp.mode != "symmetric":
        raise ShapeMismatchError("interpolation is defined for symmetric-mode decompositions")
    n = decomp.source_len
    approx = tuple(stretch_series(decomp.approx[k], k + 1, n) for k in range(LEVELS))
    detail = tuple(stretch_series(decomp.detail[k], k + 1, n) for k in range(LEVELS))
    return InterpolatedDecomposition(approx, detail, n)
