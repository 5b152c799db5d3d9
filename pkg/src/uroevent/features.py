"""Segmentation of interpolated decompositions and the 55-feature vector.

Each 10 Hz trace is cut into non-overlapping 0.8 s windows (8 samples); a
trailing remainder is dropped.  Per window, every one of the ten interpolated
coefficient series contributes four statistics (maximum, mean absolute value,
median, Shannon entropy of the normalized squared values), and each level
contributes the maximum / mean / median of the normalized cross-correlation
between its approximation and detail series over lags -7..+7, for 55 features
in total.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dwt import InterpolatedDecomposition, dwt5_db2, interpolate_full_length
from .errors import RateMismatchError, UroeventError, ValidationError
from .trace_io import LABEL_PRIORITY, EventLabel, Trace

SEGMENT_LEN = 8
SEGMENT_SECONDS = 0.8
N_FEATURES = 55

_SERIES_NAMES = tuple(f"cA{k}" for k in range(1, 6)) + tuple(f"cD{k}" for k in range(1, 6))
_STAT_SUFFIXES = ("max", "mav", "med", "ent")

#: Canonical 55-column schema: per-series statistics, then per-level xcorr.
FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{series}{suffix}" for series in _SERIES_NAMES for suffix in _STAT_SUFFIXES
) + tuple(
    f"xCorr{level}{suffix}" for level in range(1, 6) for suffix in ("max", "mean", "med")
)

ENTROPY_MAX = float(np.log(SEGMENT_LEN))


@dataclass(frozen=True)
class SegmentInfo:
    """Bounds and label of one 0.8 s window within a trace."""

    trace_id: str
    segment_index: int
    start_sample: int
    start_s: float
    label: EventLabel

    @property
    def end_sample(self) -> int:
        return self.start_sample + SEGMENT_LEN


@dataclass(frozen=True)
class SegmentFeatures:
    """One segment's 55-value feature vector."""

    trace_id: str
    segment_index: int
    start_s: float
    label: EventLabel
    features: np.ndarray

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.shape != (N_FEATURES,):
            raise ValidationError(f"expected {N_FEATURES} features, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("feature vector contains NaN or infinity")
        object.__setattr__(self, "features", feats)


@dataclass
class FeatureMatrix:
    """Stacked segment features with row metadata and a fixed column schema.

    ``scaled`` guards against double standardization: the z-score scaler
    refuses matrices already tagged as scaled.
    """

    trace_ids: list[str]
    segment_index: np.ndarray
    start_s: np.ndarray
    labels: list[EventLabel]
    X: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    scaled: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, len(self.feature_names))
        self.segment_index = np.asarray(self.segment_index, dtype=np.int64)
        self.start_s = np.asarray(self.start_s, dtype=np.float64)
        n = self.X.shape[0]
        if not (len(self.trace_ids) == len(self.labels) == len(self.segment_index) == n):
            raise ValidationError("feature matrix metadata lengths disagree")

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    def label_counts(self) -> dict[EventLabel, int]:
        counts = {lbl: 0 for lbl in EventLabel}
        for lbl in self.labels:
            counts[lbl] += 1
        return counts

    def subset(self, indices: np.ndarray) -> "FeatureMatrix":
        indices = np.asarray(indices)
        return FeatureMatrix(
            [self.trace_ids[i] for i in indices],
            self.segment_index[indices],
            self.start_s[indices],
            [self.labels[i] for i in indices],
            self.X[indices],
            self.feature_names,
            scaled=self.scaled,
        )

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("trace_id,segment_index,start_s,label," + ",".join(self.feature_names) + "\n")
            for i in range(self.n_rows):
                row = [
                    self.trace_ids[i],
                    str(int(self.segment_index[i])),
                    repr(float(self.start_s[i])),
                    self.labels[i].value,
                ]
                row.extend(repr(float(v)) for v in self.X[i])
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            names = tuple(header[4:])
            trace_ids: list[str] = []
            seg_idx: list[int] = []
            start_s: list[float] = []
            labels: list[EventLabel] = []
            rows: list[list[float]] = []
            for row in reader:
                if not row:
                    continue
                trace_ids.append(row[0])
                seg_idx.append(int(row[1]))
                start_s.append(float(row[2]))
                labels.append(EventLabel(row[3]))
                rows.append([float(v) for v in row[4:]])
        X = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
        return cls(trace_ids, np.asarray(seg_idx), np.asarray(start_s), labels, X, names)


def segment(trace: Trace, interp: InterpolatedDecomposition) -> list[SegmentInfo]:
    """Cut a 10 Hz trace into labelled 8-sample windows.

    A window overlapping at least one annotated sample takes the overlapped
    label; when several labels overlap, priority is VOID > DO > ABD.
    Unannotated windows are NONE; a trailing remainder (< 8 samples) is
    dropped.
    """
    if abs(trace.fs - 10.0) >= 1e-6:
        raise RateMismatchError(f"trace {trace.trace_id!r}: fs must be 10 Hz, got {trace.fs}")
    if interp.source_len != trace.n_samples:
        raise RateMismatchError(
            f"trace {trace.trace_id!r}: decomposition length {interp.source_len} "
            f"!= trace length {trace.n_samples}"
        )
    n = trace.n_samples
    # per-sample label priority: 0 = NONE, then ABD < DO < VOID
    rank_of = {lbl: r for r, lbl in enumerate(reversed(LABEL_PRIORITY), start=1)}
    sample_rank = np.zeros(n, dtype=np.int8)
    for ann in trace.annotations:
        lo = int(np.ceil(ann.start_s * trace.fs - 1e-9))
        hi = int(np.ceil(ann.end_s * trace.fs - 1e-9))
        lo, hi = max(lo, 0), min(hi, n)
        if hi > lo:
            r = rank_of[ann.label]
            np.maximum(sample_rank[lo:hi], r, out=sample_rank[lo:hi])
    label_of_rank = {0: EventLabel.NONE, **{r: lbl for lbl, r in rank_of.items()}}

    n_segments = n // SEGMENT_LEN
    out = []
    for j in range(n_segments):
        start = j * SEGMENT_LEN
        rank = int(sample_rank[start : start + SEGMENT_LEN].max())
        out.append(
            SegmentInfo(trace.trace_id, j, start, start * 0.1, label_of_rank[rank])
        )
    return out


def _stat_block(segs: np.ndarray) -> np.ndarray:
    """(n_seg, 8) coefficient windows -> (n_seg, 4) [max, mav, median, entropy]."""
    mx = segs.max(axis=1)
    mav = np.abs(segs).mean(axis=1)
    med = np.median(segs, axis=1)
    sq = segs * segs
    tot = sq.sum(axis=1)
    safe_tot = np.where(tot > 0.0, tot, 1.0)
    p = sq / safe_tot[:, None]
    plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    ent = np.where(tot > 0.0, -plogp.sum(axis=1), 0.0)
    ent = np.clip(ent, 0.0, ENTROPY_MAX)
    return np.column_stack([mx, mav, med, ent])


def _xcorr_block(a_segs: np.ndarray, d_segs: np.ndarray) -> np.ndarray:
    """Normalized full cross-correlation stats per window.

    Lags run -7..+7; each lag's sum is divided by ||a|| * ||d|| (all-zero
    sequence when either norm vanishes), and values are clipped to [-1, 1]
    to absorb floating-point overshoot.
    """
    n_seg = a_segs.shape[0]
    d_pad = np.zeros((n_seg, 3 * SEGMENT_LEN - 2))
    d_pad[:, SEGMENT_LEN - 1 : 2 * SEGMENT_LEN - 1] = d_segs
    n_lags = 2 * SEGMENT_LEN - 1
    xc = np.empty((n_seg, n_lags))
    for k in range(n_lags):
        sl = d_pad[:, n_lags - 1 - k : n_lags - 1 - k + SEGMENT_LEN]
        xc[:, k] = np.einsum("ij,ij->i", a_segs, sl)
    norm = np.linalg.norm(a_segs, axis=1) * np.linalg.norm(d_segs, axis=1)
    nonzero = norm > 0.0
    xc = np.where(nonzero[:, None], xc / np.where(nonzero, norm, 1.0)[:, None], 0.0)
    xc = np.clip(xc, -1.0, 1.0)
    return np.column_stack([xc.max(axis=1), xc.mean(axis=1), np.median(xc, axis=1)])


def _feature_rows(interp: InterpolatedDecomposition, n_segments: int) -> np.ndarray:
    used = n_segments * SEGMENT_LEN
    blocks = []
    windows = {}
    for name, series in zip(_SERIES_NAMES, interp.series()):
        segs = series[:used].reshape(n_segments, SEGMENT_LEN)
        windows[name] = segs
        blocks.append(_stat_block(segs))
    for level in range(1, 6):
        blocks.append(_xcorr_block(windows[f"cA{level}"], windows[f"cD{level}"]))
    return np.hstack(blocks)


def segment_features(bounds: SegmentInfo, interp: InterpolatedDecomposition) -> SegmentFeatures:
    """Compute the 55-value feature vector for a single window."""
    if bounds.end_sample > interp.source_len:
        raise ValidationError(
            f"segment [{bounds.start_sample}, {bounds.end_sample}) exceeds "
            f"decomposition length {interp.source_len}"
        )
    row_blocks = []
    windows = {}
    for name, series in zip(_SERIES_NAMES, interp.series()):
        seg = series[bounds.start_sample : bounds.end_sample].reshape(1, SEGMENT_LEN)
        windows[name] = seg
        row_blocks.append(_stat_block(seg))
    for level in range(1, 6):
        row_blocks.append(_xcorr_block(windows[f"cA{level}"], windows[f"cD{level}"]))
    vec = np.hstack(row_blocks)[0]
    return SegmentFeatures(bounds.trace_id, bounds.segment_index, bounds.start_s, bounds.label, vec)


def extract_trace(trace: Trace) -> FeatureMatrix:
    """Decompose, interpolate, segment, and featurize one 10 Hz trace."""
    decomp = dwt5_db2(trace.samples)
    interp = interpolate_full_length(decomp)
    infos = segment(trace, interp)
    if not infos:
        return FeatureMatrix([], np.empty(0, dtype=np.int64), np.empty(0), [], np.empty((0, N_FEATURES)))
    X = _feature_rows(interp, len(infos))
    return FeatureMatrix(
        [info.trace_id for info in infos],
        np.asarray([info.segment_index for info in infos]),
        np.asarray([info.start_s for info in infos]),
        [info.label for info in infos],
        X,
    )


def extract_all(traces: list[Trace]) -> FeatureMatrix:
    """Featurize a corpus, preserving trace order; errors carry the trace id."""
    parts: list[FeatureMatrix] = []
    for trace in traces:
        try:
            parts.append(extract_trace(trace))
        except UroeventError as exc:
            raise type(exc)(f"trace {trace.trace_id!r}: {exc}") from exc
    if not parts:
        return FeatureMatrix([], np.empty(0, dtype=np.int64), np.empty(0), [], np.empty((0, N_FEATURES)))
    return FeatureMatrix(
        [tid for p in parts for tid in p.trace_ids],
        np.concatenate([p.segment_index for p in parts]),
        np.concatenate([p.start_s for p in parts]),
        [lbl for p in parts for lbl in p.labels],
        np.vstack([p.X for p in parts]),
    )


def balance_none(matrix: FeatureMatrix, seed: int) -> FeatureMatrix:
    """Subsample NONE rows to match the combined count of event rows.

    Selection is uniform without replacement and deterministic for a fixed
    seed; event rows and overall row order are untouched.  When NONE rows are
    already at or below the target, the matrix is returned unchanged.
    """
    none_idx = np.asarray([i for i, lbl in enumerate(matrix.labels) if lbl == EventLabel.NONE])
    target = matrix.n_rows - len(none_idx)
    if len(none_idx) <= target:
        return matrix
    rng = np.random.default_rng(seed)
    kept_none = rng.choice(none_idx, size=target, replace=False)
    keep = np.ones(matrix.n_rows, dtype=bool)
    keep[none_idx] = False
    keep[kept_none] = True
    return matrix.subset(np.flatnonzero(keep))


def validate_features(X: np.ndarray, n_features: int | None = None) -> np.ndarray:
    """Coerce to a finite 2-D float64 array; shared input check for estimators."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValidationError(f"expected a 2-D feature array, got ndim={X.ndim}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValidationError(f"expected {n_features} feature columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature array contains NaN or infinity")
    return X
