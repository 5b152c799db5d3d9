"""Seeded synthetic pressure-trace generator with ground-truth annotations.

Morphologies are qualitative stand-ins for the three event classes: short
high-amplitude spikes (ABD), smooth low bumps (DO), and sustained plateaus
that return to baseline (VOID).  Placement, durations, and amplitudes are
drawn from per-trace generators derived from the corpus seed, so a fixed
configuration always produces byte-identical trace files.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError
from .trace_io import Annotation, EventLabel, Trace

_DEFAULT_EVENTS = {"ABD": 3, "DO": 2, "VOID": 1}


@dataclass(frozen=True)
class SynthConfig:
    """Corpus recipe: counts, morphology ranges, baseline, and noise."""

    seed: int = 0
    n_traces: int = 10
    duration_s: float = 600.0
    events_per_trace: dict = field(default_factory=lambda: dict(_DEFAULT_EVENTS))
    abd_duration_range: tuple[float, float] = (2.0, 8.0)
    abd_amplitude_range: tuple[float, float] = (20.0, 60.0)
    do_duration_range: tuple[float, float] = (15.0, 60.0)
    do_amplitude_range: tuple[float, float] = (10.0, 40.0)
    void_duration_range: tuple[float, float] = (30.0, 120.0)
    void_amplitude_range: tuple[float, float] = (30.0, 80.0)
    baseline_cmh2o: float = 10.0
    drift_cmh2o: float = 1.0
    noise_sigma: float = 1.0
    abd_in_void: bool = False
    fs: float = 10.0
    min_gap_s: float = 5.0
    edge_margin_s: float = 5.0
    trace_prefix: str = "synth"

    def __post_init__(self) -> None:
        if self.n_traces < 1 or self.duration_s <= 0:
            raise ConfigError("n_traces must be >= 1 and duration positive")
        if self.fs not in (10.0, 100.0):
            raise ConfigError(f"fs must be 10 or 100 Hz, got {self.fs}")
        if self.noise_sigma < 0 or self.drift_cmh2o < 0:
            raise ConfigError("noise_sigma and drift must be non-negative")
        for lbl in self.events_per_trace:
            if lbl not in ("ABD", "DO", "VOID"):
                raise ConfigError(f"unknown event class {lbl!r}")
            if self.events_per_trace[lbl] < 0:
                raise ConfigError("event counts must be non-negative")
        for name in ("abd", "do", "void"):
            for kind in ("duration", "amplitude"):
                lo, hi = getattr(self, f"{name}_{kind}_range")
                if not (0 < lo <= hi):
                    raise ConfigError(f"{name} {kind} range must satisfy 0 < lo <= hi")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        kwargs = dict(data)
        for key in (
            "abd_duration_range", "abd_amplitude_range", "do_duration_range",
            "do_amplitude_range", "void_duration_range", "void_amplitude_range",
        ):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _ranges(config: SynthConfig, label: EventLabel):
    name = label.value.lower()
    return getattr(config, f"{name}_duration_range"), getattr(config, f"{name}_amplitude_range")


def _spike(u: np.ndarray) -> np.ndarray:
    """Sharp symmetric pulse, zero at both ends."""
    return np.sin(np.pi * u) ** 4


def _bump(u: np.ndarray) -> np.ndarray:
    """Gradual rise and fall."""
    return np.sin(np.pi * u) ** 2


def _plateau(u: np.ndarray) -> np.ndarray:
    """Smoothstep ramp up, sustained hold, smoothstep return to baseline."""
    ramp = 0.15
    rise = np.clip(u / ramp, 0.0, 1.0)
    fall = np.clip((1.0 - u) / ramp, 0.0, 1.0)
    edge = np.minimum(rise, fall)
    return 3.0 * edge**2 - 2.0 * edge**3


_SHAPES = {EventLabel.ABD: _spike, EventLabel.DO: _bump, EventLabel.VOID: _plateau}


def _add_morphology(samples, fs, start_s, duration_s, amplitude, label) -> None:
    lo = int(round(start_s * fs))
    hi = min(int(round((start_s + duration_s) * fs)), len(samples))
    idx = np.arange(lo, hi)
    u = (idx / fs - start_s) / duration_s
    samples[lo:hi] += amplitude * _SHAPES[label](np.clip(u, 0.0, 1.0))


def _place_events(config: SynthConfig, rng: np.random.Generator):
    """Pick (label, start, duration, amplitude) tuples with non-overlapping spans."""
    order: list[EventLabel] = []
    for lbl in (EventLabel.ABD, EventLabel.DO, EventLabel.VOID):
        order.extend([lbl] * config.events_per_trace.get(lbl.value, 0))
    if not order:
        return []
    order = [order[i] for i in rng.permutation(len(order))]
    durations = []
    amplitudes = []
    for lbl in order:
        dur_range, amp_range = _ranges(config, lbl)
        durations.append(rng.uniform(*dur_range))
        amplitudes.append(rng.uniform(*amp_range))
    k = len(order)
    free = (
        config.duration_s
        - 2 * config.edge_margin_s
        - sum(durations)
        - (k - 1) * config.min_gap_s
    )
    if free < 0:
        raise ConfigError(
            f"events cannot fit: need {config.duration_s - free:.1f} s, "
            f"trace is {config.duration_s:.1f} s"
        )
    gap_weights = rng.dirichlet(np.ones(k + 1))
    t = config.edge_margin_s + gap_weights[0] * free
    placed = []
    for i, lbl in enumerate(order):
        placed.append((lbl, t, durations[i], amplitudes[i]))
        t += durations[i] + config.min_gap_s + gap_weights[i + 1] * free
    return placed


def generate(config: SynthConfig) -> list[Trace]:
    """Generate the configured corpus; deterministic for a fixed seed."""
    traces = []
    for i in range(config.n_traces):
        rng = np.random.default_rng([config.seed, i])
        n = int(round(config.duration_s * config.fs))
        t = np.arange(n) / config.fs
        phase = rng.uniform(0.0, 2 * np.pi)
        samples = config.baseline_cmh2o + config.drift_cmh2o * np.sin(
            2 * np.pi * t / config.duration_s + phase
        )
        annotations = []
        placed = _place_events(config, rng)
        for lbl, start, dur, amp in placed:
            _add_morphology(samples, config.fs, start, dur, amp, lbl)
            annotations.append(Annotation(start, start + dur, lbl))
        if config.abd_in_void:
            for lbl, start, dur, amp in placed:
                if lbl != EventLabel.VOID:
                    continue
                spike_dur = rng.uniform(2.0, min(8.0, dur / 3.0))
                spike_amp = rng.uniform(*config.abd_amplitude_range)
                spike_start = start + rng.uniform(0.2, 0.8 - spike_dur / dur) * dur
                _add_morphology(samples, config.fs, spike_start, spike_dur, spike_amp, EventLabel.ABD)
                annotations.append(Annotation(spike_start, spike_start + spike_dur, EventLabel.ABD))
        if config.noise_sigma > 0:
            samples = samples + rng.normal(0.0, config.noise_sigma, size=n)
        traces.append(
            Trace(
                f"{config.trace_prefix}{i:03d}",
                samples,
                config.fs,
                tuple(annotations),
            )
        )
    return traces
