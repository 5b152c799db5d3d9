"""Event aggregation and leakage-free train/test splitting.

Maximal runs of consecutive same-label segments (NONE excluded) become one
event each, represented by the per-column median of its segments' features.
Splits are assigned at trace granularity so no trace contributes events to
both sides.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InfeasibleSplitError, ValidationError
from .features import FEATURE_NAMES, N_FEATURES, FeatureMatrix
from .trace_io import EVENT_CLASSES, LABEL_PRIORITY, EventLabel


@dataclass(frozen=True)
class Event:
    """A run of consecutive same-label segments, median-aggregated.

    ``label`` is None only for unlabelled candidates proposed on unannotated
    traces; aggregated annotated events always carry ABD, DO, or VOID.
    """

    trace_id: str
    label: EventLabel | None
    first_segment: int
    last_segment: int
    features: np.ndarray

    def __post_init__(self) -> None:
        if self.last_segment < self.first_segment:
            raise ValidationError(
                f"empty segment span [{self.first_segment}, {self.last_segment}]"
            )
        if self.label == EventLabel.NONE:
            raise ValidationError("events never carry the NONE label")
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.shape != (N_FEATURES,):
            raise ValidationError(f"expected {N_FEATURES} features, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("event features contain NaN or infinity")
        object.__setattr__(self, "features", feats)

    @property
    def n_segments(self) -> int:
        return self.last_segment - self.first_segment + 1


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train/test trace assignment."""

    train_trace_ids: tuple[str, ...]
    test_trace_ids: tuple[str, ...]
    seed: int
    description: str = ""

    def __post_init__(self) -> None:
        overlap = set(self.train_trace_ids) & set(self.test_trace_ids)
        if overlap:
            raise ValidationError(f"traces on both sides of the split: {sorted(overlap)}")
        object.__setattr__(self, "train_trace_ids", tuple(sorted(self.train_trace_ids)))
        object.__setattr__(self, "test_trace_ids", tuple(sorted(self.test_trace_ids)))


def build_events(matrix: FeatureMatrix) -> list[Event]:
    """Group consecutive same-label segments of each trace into events.

    Rows must be grouped by trace with ascending segment indices.  A run ends
    whenever the label changes or the segment index is not the successor of
    the previous one, so removed (balanced) NONE rows never bridge two runs.
    """
    events: list[Event] = []
    i = 0
    n = matrix.n_rows
    while i < n:
        label = matrix.labels[i]
        j = i + 1
        while (
            j < n
            and matrix.trace_ids[j] == matrix.trace_ids[i]
            and matrix.labels[j] == label
            and matrix.segment_index[j] == matrix.segment_index[j - 1] + 1
        ):
            j += 1
        if label != EventLabel.NONE:
            events.append(
                Event(
                    matrix.trace_ids[i],
                    label,
                    int(matrix.segment_index[i]),
                    int(matrix.segment_index[j - 1]),
                    np.median(matrix.X[i:j], axis=0),
                )
            )
        i = j
    return events


def _unique_in_order(ids: list[str]) -> list[str]:
    return list(dict.fromkeys(ids))


def _check_feasible(events: list[Event], plan: SplitPlan) -> SplitPlan:
    present = {e.label for e in events}
    train = set(plan.train_trace_ids)
    test = set(plan.test_trace_ids)
    for label in EVENT_CLASSES:
        if label not in present:
            continue
        sides = {
            "train": any(e.label == label and e.trace_id in train for e in events),
            "test": any(e.label == label and e.trace_id in test for e in events),
        }
        missing = [side for side, ok in sides.items() if not ok]
        if missing:
            raise InfeasibleSplitError(
                f"class {label.value} has no events on the {missing[0]} side"
            )
    return plan


def _dominant_class(labels: list[EventLabel]) -> EventLabel:
    counts = {lbl: 0 for lbl in EVENT_CLASSES}
    for lbl in labels:
        counts[lbl] += 1
    best = max(counts.values())
    for lbl in LABEL_PRIORITY:
        if counts[lbl] == best:
            return lbl
    raise AssertionError("unreachable")


def split_by_trace(
    events: list[Event],
    train_fraction: float | None = None,
    seed: int = 0,
    dataset_tags: dict[str, str] | None = None,
    train_tags: tuple[str, ...] | None = None,
    test_tags: tuple[str, ...] | None = None,
) -> SplitPlan:
    """Assign whole traces to train or test.

    Two modes:

    * fraction: stratified random split.  Traces are stratified by their
      dominant event class, shuffled per stratum with the seeded generator,
      and assigned to train until the stratum's train event count reaches
      ``train_fraction`` of its events, so the event-count ratio approximates
      the fraction.
    * named groups: with ``dataset_tags`` (trace_id -> tag) plus ``train_tags``
      and ``test_tags``, all traces tagged with a train tag go to train and
      all tagged with a test tag go to test; other traces are out of scope.

    Raises
    ------
    InfeasibleSplitError
        If any event class present in the input ends up absent from one side.
    ConfigError
        Invalid fraction, overlapping tag groups, or untagged traces.
    """
    if (train_fraction is None) == (train_tags is None):
        raise ConfigError("specify exactly one of train_fraction or train/test tags")

    if train_tags is not None:
        if dataset_tags is None or test_tags is None:
            raise ConfigError("named splits need dataset_tags and test_tags")
        if set(train_tags) & set(test_tags):
            raise ConfigError(f"tags on both sides: {sorted(set(train_tags) & set(test_tags))}")
        trace_ids = _unique_in_order([e.trace_id for e in events])
        missing = [t for t in trace_ids if t not in dataset_tags]
        if missing:
            raise ConfigError(f"traces without a dataset tag: {missing}")
        train = [t for t in trace_ids if dataset_tags[t] in train_tags]
        test = [t for t in trace_ids if dataset_tags[t] in test_tags]
        desc = f"manifest:{'+'.join(train_tags)}->{'+'.join(test_tags)}"
        return _check_feasible(events, SplitPlan(tuple(train), tuple(test), seed, desc))

    if not (0.0 < train_fraction < 1.0):
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    by_trace: dict[str, list[EventLabel]] = {}
    for e in events:
        by_trace.setdefault(e.trace_id, []).append(e.label)
    strata: dict[EventLabel, list[str]] = {lbl: [] for lbl in EVENT_CLASSES}
    for trace_id in sorted(by_trace):
        strata[_dominant_class(by_trace[trace_id])].append(trace_id)

    rng = np.random.default_rng(seed)
    train: list[str] = []
    test: list[str] = []
    for lbl in EVENT_CLASSES:
        members = strata[lbl]
        if not members:
            continue
        order = [members[i] for i in rng.permutation(len(members))]
        total = sum(len(by_trace[t]) for t in members)
        target = train_fraction * total
        got = 0
        for trace_id in order:
            if got < target:
                train.append(trace_id)
                got += len(by_trace[trace_id])
            else:
                test.append(trace_id)
    desc = f"fraction:{train_fraction!r}"
    return _check_feasible(events, SplitPlan(tuple(train), tuple(test), seed, desc))


def events_in(events: list[Event], trace_ids: tuple[str, ...]) -> list[Event]:
    """Events whose trace belongs to the given side of a split."""
    wanted = set(trace_ids)
    return [e for e in events if e.trace_id in wanted]


def events_to_csv(events: list[Event], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("trace_id,label,first_segment,last_segment," + ",".join(FEATURE_NAMES) + "\n")
        for e in events:
            row = [e.trace_id, e.label.value if e.label else "", str(e.first_segment), str(e.last_segment)]
            row.extend(repr(float(v)) for v in e.features)
            fh.write(",".join(row) + "\n")


def events_from_csv(path: str | Path) -> list[Event]:
    events: list[Event] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row:
                continue
            events.append(
                Event(
                    row[0],
                    EventLabel(row[1]) if row[1] else None,
                    int(row[2]),
                    int(row[3]),
                    np.asarray([float(v) for v in row[4:]]),
                )
            )
    return events


def split_to_csv(plan: SplitPlan, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("trace_id,role\n")
        for t in plan.train_trace_ids:
            fh.write(f"{t},train\n")
        for t in plan.test_trace_ids:
            fh.write(f"{t},test\n")


def split_from_csv(path: str | Path, seed: int = 0) -> SplitPlan:
    train: list[str] = []
    test: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row:
                continue
            (train if row[1] == "train" else test).append(row[0])
    return SplitPlan(tuple(train), tuple(test), seed, "loaded")
