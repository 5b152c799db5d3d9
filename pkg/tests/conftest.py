import numpy as np
import pytest

from uroevent import SynthConfig, generate
from uroevent.trace_io import Annotation, EventLabel, Trace


@pytest.fixture(scope="session")
def small_corpus():
    """Eight quiet 5-minute traces with all three event classes."""
    config = SynthConfig(seed=11, n_traces=8, duration_s=300.0, noise_sigma=1.0)
    return generate(config)


@pytest.fixture()
def flat_trace():
    return Trace("flat", np.full(600, 10.0), 10.0)


def make_trace(trace_id, samples, fs=10.0, annotations=()):
    return Trace(trace_id, np.asarray(samples, dtype=float), fs, tuple(annotations))


def make_annotation(start, end, label):
    return Annotation(start, end, EventLabel(label))
