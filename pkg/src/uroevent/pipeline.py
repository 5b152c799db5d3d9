"""Hierarchical and single-stage event classifiers, plus candidate proposal.

The two-stage classifier routes each event through a VOID / non-VOID head;
events predicted non-VOID continue to an ABD / DO head, and the two verdicts
assemble into one three-class label.  Argmax ties resolve toward non-VOID in
stage 1 (so stage 2 can still refine) and toward ABD in stage 2 (lower class
index).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import median_filter
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import MissingClassError, RateMismatchError, ValidationError
from .events import Event, SplitPlan, events_in
from .features import FEATURE_NAMES, SEGMENT_LEN, extract_trace, validate_features
from .nn import MlpClassifier, ReliefF, TrainConfig, ZScoreScaler, load_model, save_model
from .trace_io import LABEL_PRIORITY, EventLabel, Trace

STAGE1_VOID = "VOID"
STAGE1_NONVOID = "NONVOID"
SINGLE_CLASSES = ("ABD", "DO", "VOID")


@dataclass(frozen=True)
class PredictionRecord:
    """One event's verdicts across the cascade."""

    trace_id: str
    first_segment: int
    last_segment: int
    stage1_label: str
    stage2_label: str | None
    cascaded_label: EventLabel
    p_void: float
    p_abd: float | None
    p_do: float | None

    def __post_init__(self) -> None:
        if self.stage1_label == STAGE1_VOID:
            if self.stage2_label is not None or self.cascaded_label != EventLabel.VOID:
                raise ValidationError("VOID route must skip stage 2 and yield VOID")
        else:
            if self.stage2_label is None or self.cascaded_label.value != self.stage2_label:
                raise ValidationError("non-VOID route must carry the stage-2 verdict")


class TwoStageEventClassifier(BaseEstimator, ClassifierMixin):
    """VOID/non-VOID router followed by an ABD/DO head.

    Stage 2 is trained on the ground-truth ABD and DO rows (not on stage-1
    output), and each stage fits its own standardizer on its own training
    rows.  ``n_features`` optionally prunes to the top-ranked features before
    either stage sees the data; the default keeps every column.
    """

    def __init__(
        self,
        hidden_dims=(128, 200),
        learning_rate=0.001,
        epochs=50,
        batch_size=128,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        seed=0,
        n_features=None,
        relieff_neighbors=10,
    ):
        self.hidden_dims = hidden_dims
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.seed = seed
        self.n_features = n_features
        self.relieff_neighbors = relieff_neighbors

    def _mlp_kwargs(self) -> dict:
        return dict(
            hidden_dims=self.hidden_dims,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            seed=self.seed,
        )

    def fit(self, X, y):
        X = validate_features(X)
        y = np.asarray(y, dtype=object)
        for cls in SINGLE_CLASSES:
            if not np.any(y == cls):
                raise MissingClassError(f"training events contain no {cls} examples")

        if self.n_features is not None:
            scaled = ZScoreScaler().fit(X).transform(X)
            ranker = ReliefF(self.relieff_neighbors).fit(scaled, y.astype(str))
            self.selected_features_ = np.sort(ranker.top_features(self.n_features))
        else:
            self.selected_features_ = None
        Xs = self._select(X)

        y1 = np.where(y == STAGE1_VOID, STAGE1_VOID, STAGE1_NONVOID)
        self.stage1_ = MlpClassifier(stage_tag="stage1", **self._mlp_kwargs()).fit(Xs, y1)
        mask = y != STAGE1_VOID
        self.stage2_ = MlpClassifier(stage_tag="stage2", **self._mlp_kwargs()).fit(
            Xs[mask], y[mask].astype(str)
        )
        self.classes_ = np.asarray(SINGLE_CLASSES)
        self.n_features_in_ = X.shape[1]
        return self

    def _select(self, X: np.ndarray) -> np.ndarray:
        if self.selected_features_ is None:
            return X
        return X[:, self.selected_features_]

    def _check_fitted(self) -> None:
        if not hasattr(self, "stage1_"):
            raise ValidationError("two-stage classifier is not fitted")

    def stage_probas(self, X):
        """(stage-1 probability rows, stage-2 probability rows) for every input."""
        self._check_fitted()
        Xs = self._select(validate_features(X, self.n_features_in_))
        return self.stage1_.predict_proba(Xs), self.stage2_.predict_proba(Xs)

    def predict_proba(self, X) -> np.ndarray:
        """Composite three-class distribution [ABD, DO, VOID] per event."""
        p1, p2 = self.stage_probas(X)
        i_void = int(np.flatnonzero(self.stage1_.classes_ == STAGE1_VOID)[0])
        i_non = 1 - i_void
        i_abd = int(np.flatnonzero(self.stage2_.classes_ == "ABD")[0])
        p_void = p1[:, i_void]
        p_abd = p1[:, i_non] * p2[:, i_abd]
        p_do = p1[:, i_non] * p2[:, 1 - i_abd]
        return np.column_stack([p_abd, p_do, p_void])

    def predict(self, X) -> np.ndarray:
        """Cascaded labels via stage routing (not composite-probability argmax)."""
        p1, p2 = self.stage_probas(X)
        s1 = self.stage1_.classes_[np.argmax(p1, axis=1)]
        s2 = self.stage2_.classes_[np.argmax(p2, axis=1)]
        return np.where(s1 == STAGE1_VOID, STAGE1_VOID, s2)

    def predict_stage1(self, X) -> np.ndarray:
        """VOID / NONVOID verdicts only."""
        p1, _ = self.stage_probas(X)
        return self.stage1_.classes_[np.argmax(p1, axis=1)]

    def predict_stage2(self, X) -> np.ndarray:
        """ABD / DO verdicts only (stage-2 head applied unconditionally)."""
        _, p2 = self.stage_probas(X)
        return self.stage2_.classes_[np.argmax(p2, axis=1)]


def train_two_stage(
    events: list[Event],
    split: SplitPlan,
    config: TrainConfig | None = None,
    n_features: int | None = None,
) -> TwoStageEventClassifier:
    """Fit the hierarchical classifier on the train side of a split."""
    config = config or TrainConfig()
    train_events = events_in(events, split.train_trace_ids)
    X = np.vstack([e.features for e in train_events]) if train_events else np.empty((0, 55))
    y = np.asarray([e.label.value for e in train_events], dtype=object)
    model = TwoStageEventClassifier(n_features=n_features, **config.estimator_kwargs())
    return model.fit(X, y)


def train_single_stage(
    events: list[Event],
    split: SplitPlan,
    config: TrainConfig | None = None,
) -> MlpClassifier:
    """Fit one three-class head on the train side of a split."""
    config = config or TrainConfig()
    train_events = events_in(events, split.train_trace_ids)
    labels = {e.label.value for e in train_events}
    for cls in SINGLE_CLASSES:
        if cls not in labels:
            raise MissingClassError(f"training events contain no {cls} examples")
    X = np.vstack([e.features for e in train_events])
    y = np.asarray([e.label.value for e in train_events])
    return MlpClassifier(stage_tag="single", **config.estimator_kwargs()).fit(X, y)


def predict_cascaded(model: TwoStageEventClassifier, events: list[Event]) -> list[PredictionRecord]:
    """Route every event through the cascade; one record per event, in order."""
    if not events:
        return []
    X = np.vstack([e.features for e in events])
    p1, p2 = model.stage_probas(X)
    i_void = int(np.flatnonzero(model.stage1_.classes_ == STAGE1_VOID)[0])
    s1 = model.stage1_.classes_[np.argmax(p1, axis=1)]
    s2 = model.stage2_.classes_[np.argmax(p2, axis=1)]
    i_abd = int(np.flatnonzero(model.stage2_.classes_ == "ABD")[0])
    records = []
    for k, e in enumerate(events):
        if s1[k] == STAGE1_VOID:
            records.append(
                PredictionRecord(
                    e.trace_id, e.first_segment, e.last_segment,
                    STAGE1_VOID, None, EventLabel.VOID,
                    float(p1[k, i_void]), None, None,
                )
            )
        else:
            records.append(
                PredictionRecord(
                    e.trace_id, e.first_segment, e.last_segment,
                    STAGE1_NONVOID, str(s2[k]), EventLabel(str(s2[k])),
                    float(p1[k, i_void]), float(p2[k, i_abd]), float(p2[k, 1 - i_abd]),
                )
            )
    return records


def propose_events(
    trace: Trace,
    baseline_window_s: float = 60.0,
    threshold_cmh2o: float = 5.0,
    min_segments: int = 2,
) -> list[Event]:
    """Propose unlabelled candidate events on an unannotated 10 Hz trace.

    A segment is active when its mean pressure exceeds the rolling-median
    baseline (centred window of ``baseline_window_s``) by at least
    ``threshold_cmh2o``; maximal runs of ``min_segments`` or more active
    segments become candidates carrying median-aggregated features.
    """
    if abs(trace.fs - 10.0) >= 1e-6:
        raise RateMismatchError(f"trace {trace.trace_id!r}: fs must be 10 Hz, got {trace.fs}")
    matrix = extract_trace(trace)
    n_segments = matrix.n_rows
    if n_segments == 0:
        return []
    window = int(round(baseline_window_s * trace.fs)) | 1  # odd-sized centred window
    baseline = median_filter(trace.samples, size=window, mode="nearest")
    used = n_segments * SEGMENT_LEN
    seg_mean = trace.samples[:used].reshape(n_segments, SEGMENT_LEN).mean(axis=1)
    base_mean = baseline[:used].reshape(n_segments, SEGMENT_LEN).mean(axis=1)
    active = seg_mean - base_mean >= threshold_cmh2o

    candidates: list[Event] = []
    i = 0
    while i < n_segments:
        if not active[i]:
            i += 1
            continue
        j = i
        while j + 1 < n_segments and active[j + 1]:
            j += 1
        if j - i + 1 >= min_segments:
            feats = np.median(matrix.X[i : j + 1], axis=0)
            candidates.append(Event(trace.trace_id, None, i, j, feats))
        i = j + 1
    return candidates


def save_two_stage(model: TwoStageEventClassifier, directory: str | Path) -> None:
    """Persist both stage models (and the feature selection, when active)."""
    model._check_fitted()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_model(model.stage1_, directory / "stage1.model")
    save_model(model.stage2_, directory / "stage2.model")
    selection = directory / "selected_features.txt"
    if model.selected_features_ is not None:
        selection.write_text(
            "".join(f"{FEATURE_NAMES[i]}\n" for i in model.selected_features_),
            encoding="utf-8",
        )
    elif selection.exists():
        selection.unlink()


def load_two_stage(directory: str | Path) -> TwoStageEventClassifier:
    directory = Path(directory)
    stage1 = load_model(directory / "stage1.model")
    stage2 = load_model(directory / "stage2.model")
    model = TwoStageEventClassifier(
        hidden_dims=stage1.hidden_dims,
        learning_rate=stage1.learning_rate,
        epochs=stage1.epochs,
        batch_size=stage1.batch_size,
        beta1=stage1.beta1,
        beta2=stage1.beta2,
        epsilon=stage1.epsilon,
        seed=stage1.seed,
    )
    model.stage1_ = stage1
    model.stage2_ = stage2
    selection = directory / "selected_features.txt"
    if selection.exists():
        names = selection.read_text(encoding="utf-8").split()
        index_of = {name: i for i, name in enumerate(FEATURE_NAMES)}
        model.selected_features_ = np.asarray(sorted(index_of[n] for n in names))
        model.n_features = len(names)
        model.n_features_in_ = len(FEATURE_NAMES)
    else:
        model.selected_features_ = None
        model.n_features_in_ = stage1.n_features_in_
    model.classes_ = np.asarray(SINGLE_CLASSES)
    return model


def predictions_to_csv(records: list[PredictionRecord], path: str | Path) -> None:
    """Spec'd cascade export: one row per event with stage verdicts and probabilities."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("trace_id,first_segment,last_segment,stage1,stage2,cascaded,p_void,p_abd,p_do\n")
        for r in records:
            fh.write(
                ",".join(
                    [
                        r.trace_id,
                        str(r.first_segment),
                        str(r.last_segment),
                        r.stage1_label,
                        r.stage2_label or "",
                        r.cascaded_label.value,
                        repr(float(r.p_void)),
                        "" if r.p_abd is None else repr(float(r.p_abd)),
                        "" if r.p_do is None else repr(float(r.p_do)),
                    ]
                )
                + "\n"
            )


def sample_labels(trace: Trace) -> list[EventLabel]:
    """Per-sample annotation labels (priority VOID > DO > ABD, else NONE)."""
    rank_of = {lbl: r for r, lbl in enumerate(reversed(LABEL_PRIORITY), start=1)}
    ranks = np.zeros(trace.n_samples, dtype=np.int8)
    for ann in trace.annotations:
        lo = max(int(np.ceil(ann.start_s * trace.fs - 1e-9)), 0)
        hi = min(int(np.ceil(ann.end_s * trace.fs - 1e-9)), trace.n_samples)
        if hi > lo:
            np.maximum(ranks[lo:hi], rank_of[ann.label], out=ranks[lo:hi])
    label_of = {0: EventLabel.NONE, **{r: lbl for lbl, r in rank_of.items()}}
    return [label_of[int(r)] for r in ranks]


def write_overlay(
    trace: Trace,
    labelled_spans: list[tuple[int, int, EventLabel]],
    path: str | Path,
) -> None:
    """Plot-ready per-sample file: time, pressure, actual and predicted labels.

    ``labelled_spans`` are (first_segment, last_segment, predicted label)
    triples, e.g. from :class:`PredictionRecord` fields.
    """
    predicted = [EventLabel.NONE] * trace.n_samples
    for first, last, label in labelled_spans:
        lo = first * SEGMENT_LEN
        hi = min((last + 1) * SEGMENT_LEN, trace.n_samples)
        for i in range(lo, hi):
            predicted[i] = label
    actual = sample_labels(trace)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("time_s,pves,actual_label,predicted_label\n")
        for i, v in enumerate(trace.samples):
            fh.write(
                f"{i / trace.fs!r},{float(v)!r},{actual[i].value},{predicted[i].value}\n"
            )
