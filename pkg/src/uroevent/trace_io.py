"""Loading, validation, and resampling of annotated bladder-pressure traces.

A trace on disk is a pair of CSV files sharing an id stem:

* ``<id>.pves.csv``  -- header ``time_s,pves_cmh2o``, one row per sample,
  monotonically increasing time at a fixed step.
* ``<id>.events.csv`` -- header ``start_s,end_s,label`` with label one of
  ABD, DO, VOID.  The file may be absent for unannotated recordings.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, UnsupportedRateError, ValidationError

PVES_SUFFIX = ".pves.csv"
EVENTS_SUFFIX = ".events.csv"

# relative tolerance when checking the time column for a uniform step
_STEP_RTOL = 1e-6


class EventLabel(enum.Enum):
    """The three annotated event classes plus the implicit baseline class."""

    ABD = "ABD"
    DO = "DO"
    VOID = "VOID"
    NONE = "NONE"

    def __str__(self) -> str:
        return self.value


#: Annotated (non-baseline) classes, in canonical order.
EVENT_CLASSES = (EventLabel.ABD, EventLabel.DO, EventLabel.VOID)

#: Label priority used when a segment overlaps several annotations.
LABEL_PRIORITY = (EventLabel.VOID, EventLabel.DO, EventLabel.ABD)


@dataclass(frozen=True, order=True)
class Annotation:
    """A labelled time interval, in seconds from the start of the trace."""

    start_s: float
    end_s: float
    label: EventLabel = field(compare=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise ValidationError(f"non-finite annotation bounds ({self.start_s}, {self.end_s})")
        if self.end_s <= self.start_s:
            raise ValidationError(
                f"annotation end {self.end_s} must be greater than start {self.start_s}"
            )
        if self.label == EventLabel.NONE:
            raise ValidationError("NONE is implicit and never appears as an annotation label")


@dataclass(frozen=True)
class Trace:
    """An immutable pressure recording with its annotations.

    Attributes
    ----------
    trace_id : str
        Unique identifier (the file stem on disk).
    samples : np.ndarray
        Pressure values in cmH2O; 1-D, finite, read-only.
    fs : float
        Sampling rate in Hz.
    annotations : tuple[Annotation, ...]
        Sorted by start time; every interval lies within [0, duration].
    """

    trace_id: str
    samples: np.ndarray
    fs: float
    annotations: tuple[Annotation, ...] = ()

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError(f"trace {self.trace_id!r}: samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValidationError(f"trace {self.trace_id!r}: samples contain NaN or infinity")
        if not (math.isfinite(self.fs) and self.fs > 0):
            raise ValidationError(f"trace {self.trace_id!r}: fs must be positive, got {self.fs}")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        anns = tuple(sorted(self.annotations, key=lambda a: (a.start_s, a.end_s)))
        duration = self.duration_s
        for ann in anns:
            if ann.start_s < 0 or ann.end_s > duration + 1e-9:
                raise ValidationError(
                    f"trace {self.trace_id!r}: annotation [{ann.start_s}, {ann.end_s}] "
                    f"outside [0, {duration}]"
                )
        object.__setattr__(self, "annotations", anns)

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fs


def _merge_same_label_overlaps(annotations: list[Annotation]) -> list[Annotation]:
    """Merge overlapping or touching intervals that carry the same label."""
    merged: list[Annotation] = []
    for ann in sorted(annotations, key=lambda a: (a.start_s, a.end_s)):
        for i, kept in enumerate(merged):
            if kept.label == ann.label and ann.start_s <= kept.end_s and kept.start_s <= ann.end_s:
                merged[i] = Annotation(
                    min(kept.start_s, ann.start_s), max(kept.end_s, ann.end_s), kept.label
                )
                break
        else:
            merged.append(ann)
    return sorted(merged, key=lambda a: (a.start_s, a.end_s))


def _parse_float(token: str, path: Path, row: int, column: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise ParseError(f"{path}:{row}: cannot parse {column} value {token!r}") from exc


def load_trace(path: str | Path) -> Trace:
    """Load one trace from its ``.pves.csv`` file (annotations file optional).

    Parameters
    ----------
    path : str or Path
        Path to the ``<id>.pves.csv`` samples file.

    Returns
    -------
    Trace
        Validated trace with sampling rate inferred from the time column.

    Raises
    ------
    ParseError
        Malformed rows, missing headers, or a non-uniform time step.
    ValidationError
        Non-finite samples or annotations outside the trace.
    """
    path = Path(path)
    if not path.name.endswith(PVES_SUFFIX):
        raise ParseError(f"{path}: expected a file named <id>{PVES_SUFFIX}")
    trace_id = path.name[: -len(PVES_SUFFIX)]

    times: list[float] = []
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time_s", "pves_cmh2o"]:
            raise ParseError(f"{path}: expected header 'time_s,pves_cmh2o', got {header!r}")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{i}: expected 2 columns, got {len(row)}")
            times.append(_parse_float(row[0], path, i, "time_s"))
            values.append(_parse_float(row[1], path, i, "pves_cmh2o"))
    if not values:
        raise ParseError(f"{path}: no sample rows")

    samples = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise ValidationError(f"{path}: pressure column contains NaN or infinity")

    t = np.asarray(times, dtype=np.float64)
    if t.size == 1:
        raise ParseError(f"{path}: at least two samples required to infer the sampling rate")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ParseError(f"{path}: time column must be strictly increasing")
    step = float(np.median(steps))
    if np.any(np.abs(steps - step) > _STEP_RTOL * max(step, 1.0)):
        raise ParseError(f"{path}: time column is not uniformly sampled")
    fs = 1.0 / step
    # snap to integer rates (10 Hz steps of 0.1 are not exactly representable)
    if abs(fs - round(fs)) < 1e-6:
        fs = float(round(fs))

    annotations = _load_annotations(path.with_name(trace_id + EVENTS_SUFFIX))
    return Trace(trace_id, samples, fs, tuple(annotations))


def _load_annotations(path: Path) -> list[Annotation]:
    if not path.exists():
        return []
    anns: list[Annotation] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["start_s", "end_s", "label"]:
            raise ParseError(f"{path}: expected header 'start_s,end_s,label', got {header!r}")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{i}: expected 3 columns, got {len(row)}")
            start = _parse_float(row[0], path, i, "start_s")
            end = _parse_float(row[1], path, i, "end_s")
            token = row[2].strip()
            if token not in (lbl.value for lbl in EVENT_CLASSES):
                raise ParseError(f"{path}:{i}: unknown label {token!r}")
            anns.append(Annotation(start, end, EventLabel(token)))
    return _merge_same_label_overlaps(anns)


def save_trace(trace: Trace, directory: str | Path) -> Path:
    """Write ``<id>.pves.csv`` and ``<id>.events.csv`` under ``directory``.

    Float values are written with Python's shortest round-trip repr, so
    save -> load -> save is byte-stable.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pves_path = directory / (trace.trace_id + PVES_SUFFIX)
    with open(pves_path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("time_s,pves_cmh2o\n")
        for i, v in enumerate(trace.samples):
            fh.write(f"{i / trace.fs!r},{float(v)!r}\n")
    events_path = directory / (trace.trace_id + EVENTS_SUFFIX)
    with open(events_path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("start_s,end_s,label\n")
        for ann in trace.annotations:
            fh.write(f"{float(ann.start_s)!r},{float(ann.end_s)!r},{ann.label.value}\n")
    return pves_path


def load_corpus(directory: str | Path) -> list[Trace]:
    """Load every ``*.pves.csv`` trace in ``directory``, sorted by trace id."""
    directory = Path(directory)
    paths = sorted(directory.glob(f"*{PVES_SUFFIX}"))
    return [load_trace(p) for p in paths]


def resample_to_10hz(trace: Trace) -> Trace:
    """Return the trace downsampled to 10 Hz.

    100 Hz input is decimated by block-averaging each run of 10 consecutive
    samples (implicit anti-aliasing, exact on constants); a trailing remainder
    shorter than one block is dropped.  10 Hz input is returned unchanged.
    Annotation times are preserved.

    Raises
    ------
    UnsupportedRateError
        For sampling rates other than 10 or 100 Hz.
    """
    if abs(trace.fs - 10.0) < 1e-6:
        return trace
    if abs(trace.fs - 100.0) >= 1e-6:
        raise UnsupportedRateError(
            f"trace {trace.trace_id!r}: cannot resample {trace.fs} Hz (supported: 10, 100)"
        )
    n_blocks = trace.n_samples // 10
    if n_blocks == 0:
        raise ValidationError(f"trace {trace.trace_id!r}: too short to resample to 10 Hz")
    blocks = trace.samples[: n_blocks * 10].reshape(n_blocks, 10)
    out = blocks.mean(axis=1)
    duration = n_blocks / 10.0
    anns = []
    for ann in trace.annotations:
        if ann.start_s >= duration:
            continue
        anns.append(Annotation(ann.start_s, min(ann.end_s, duration), ann.label))
    return Trace(trace.trace_id, out, 10.0, tuple(anns))


def load_dataset_tags(path: str | Path) -> dict[str, str]:
    """Read a ``trace_id,tag`` manifest mapping traces to dataset groups."""
    path = Path(path)
    tags: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["trace_id", "tag"]:
            raise ParseError(f"{path}: expected header 'trace_id,tag', got {header!r}")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{i}: expected 2 columns, got {len(row)}")
            tags[row[0].strip()] = row[1].strip()
    return tags


def save_dataset_tags(tags: dict[str, str], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("trace_id,tag\n")
        for trace_id in sorted(tags):
            fh.write(f"{trace_id},{tags[trace_id]}\n")
