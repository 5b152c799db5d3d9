"""Acceptance suite: one test per release criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines alongside the pytest verdicts.
"""

import itertools
import time
from contextlib import contextmanager

import numpy as np
from click.testing import CliRunner

from uroevent import (
    SynthConfig,
    TrainConfig,
    build_events,
    dwt5_db2,
    evaluate,
    extract_all,
    generate,
    idwt5_db2,
    roc_curve_points,
    split_by_trace,
)
from uroevent.cli import main
from uroevent.events import events_in
from uroevent.features import ENTROPY_MAX, FEATURE_NAMES
from uroevent.metrics import permutation_importance
from uroevent.nn import MlpClassifier, backward_pass, cross_entropy, forward_pass, init_params
from uroevent.pipeline import train_two_stage


@contextmanager
def deadline(criterion, seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"criterion {criterion} took {elapsed:.1f}s (budget {seconds}s)"
    print(f"PASS criterion {criterion} ({elapsed:.2f}s)")


def test_criterion_1_metric_parity():
    with deadline(1, 1.0):
        actual = ["VOID"] * 100 + ["NONVOID"] * 100
        predicted = ["VOID"] * 90 + ["NONVOID"] * 10 + ["VOID"] * 21 + ["NONVOID"] * 79
        report = evaluate(predicted, actual, ("VOID", "NONVOID"))
        assert abs(report.sensitivity["VOID"] - 0.90) <= 1e-12
        assert abs(report.specificity["VOID"] - 0.79) <= 1e-12
        identity_gap = abs(
            report.balanced_accuracy["VOID"]
            - (report.sensitivity["VOID"] + report.specificity["VOID"]) / 2.0
        )
        assert identity_gap <= 1e-12
        assert report.display["balanced_accuracy_pct"]["VOID"] == 84


def test_criterion_2_dwt_correctness():
    with deadline(2, 30.0):
        rng = np.random.default_rng(42)
        worst_round_trip = 0.0
        for _ in range(1000):
            n = int(rng.integers(32, 4097))
            x = rng.normal(scale=rng.uniform(0.5, 50.0), size=n)
            err = np.max(np.abs(idwt5_db2(dwt5_db2(x)) - x))
            worst_round_trip = max(worst_round_trip, err)
        assert worst_round_trip <= 1e-9

        for value in (0.0, 1.0, -7.5, 123.25):
            decomp = dwt5_db2(np.full(256, value))
            worst_detail = max(np.max(np.abs(cd)) for cd in decomp.detail)
            assert worst_detail <= 1e-12

        x, y = rng.normal(size=512), rng.normal(size=512)
        a, b = 3.25, -0.75
        mixed = dwt5_db2(a * x + b * y)
        dx, dy = dwt5_db2(x), dwt5_db2(y)
        for k in range(5):
            gap_a = np.max(np.abs(mixed.approx[k] - (a * dx.approx[k] + b * dy.approx[k])))
            gap_d = np.max(np.abs(mixed.detail[k] - (a * dx.detail[k] + b * dy.detail[k])))
            assert max(gap_a, gap_d) <= 1e-9


def test_criterion_3_gradient_check():
    with deadline(3, 10.0):
        rng = np.random.default_rng(7)
        step = 1e-5
        for _ in range(10):
            dims = [4, 6, 5, int(rng.integers(2, 4))]
            weights, biases = init_params(dims, rng)
            X = rng.normal(size=(5, dims[0]))
            y_idx = rng.integers(0, dims[-1], size=5)
            analytic_w, analytic_b, _ = backward_pass(weights, biases, X, y_idx)

            def loss_at():
                _, _, probs = forward_pass(weights, biases, X)
                return cross_entropy(probs, y_idx)

            worst = 0.0
            for param, grad in zip(weights + biases, analytic_w + analytic_b):
                it = np.nditer(param, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    original = param[idx]
                    param[idx] = original + step
                    up = loss_at()
                    param[idx] = original - step
                    down = loss_at()
                    param[idx] = original
                    numeric = (up - down) / (2 * step)
                    denom = max(abs(grad[idx]), abs(numeric), 1e-6)
                    worst = max(worst, abs(grad[idx] - numeric) / denom)
            assert worst < 1e-4


def test_criterion_4_auc_pair_count_oracle():
    with deadline(4, 5.0):
        rng = np.random.default_rng(11)
        cases = 0
        while cases < 200:
            n = int(rng.integers(2, 21))
            y = rng.integers(0, 2, size=n).astype(bool)
            if y.all() or not y.any():
                continue
            scores = np.round(rng.random(n), 1)  # coarse grid forces ties
            _, auc = roc_curve_points(y, scores)
            pos = scores[y]
            neg = scores[~y]
            wins = 0.0
            for p, q in itertools.product(pos, neg):
                wins += 1.0 if p > q else (0.5 if p == q else 0.0)
            oracle = wins / (len(pos) * len(neg))
            assert auc == oracle
            cases += 1


def test_criterion_5_feature_schema():
    with deadline(5, 30.0):
        config = SynthConfig(
            seed=99, n_traces=10, duration_s=800.0, noise_sigma=2.0,
            events_per_trace={"ABD": 4, "DO": 3, "VOID": 2},
        )
        matrix = extract_all(generate(config))
        assert matrix.n_rows == 10_000
        assert matrix.feature_names == FEATURE_NAMES
        assert len(FEATURE_NAMES) == 55
        for series in ("cA1", "cA5", "cD1", "cD5"):
            for stat in ("max", "mav", "med", "ent"):
                assert f"{series}{stat}" in FEATURE_NAMES
        for level in range(1, 6):
            for stat in ("max", "mean", "med"):
                assert f"xCorr{level}{stat}" in FEATURE_NAMES
        assert matrix.X.shape == (10_000, 55)
        assert np.all(np.isfinite(matrix.X))
        ent = [i for i, n in enumerate(FEATURE_NAMES) if n.endswith("ent")]
        xc = [i for i, n in enumerate(FEATURE_NAMES) if n.startswith("xCorr")]
        assert np.all(matrix.X[:, ent] >= 0.0) and np.all(matrix.X[:, ent] <= ENTROPY_MAX)
        assert np.all(matrix.X[:, xc] >= -1.0) and np.all(matrix.X[:, xc] <= 1.0)


def test_criterion_6_leakage_guards():
    with deadline(6, 30.0):
        config = SynthConfig(seed=5, n_traces=12, duration_s=300.0, noise_sigma=1.0)
        events = build_events(extract_all(generate(config)))
        tags = {f"synth{i:03d}": "ABC"[i % 3] for i in range(12)}
        plans = [
            split_by_trace(events, train_fraction=f, seed=s)
            for f in (0.6, 0.7, 0.8)
            for s in (0, 1, 2)
        ]
        for train_tags, test_tags in ((("A", "B"), ("C",)), (("B",), ("A", "C")), (("B",), ("C",))):
            plans.append(
                split_by_trace(
                    events, dataset_tags=tags, train_tags=train_tags, test_tags=test_tags
                )
            )
        for plan in plans:
            assert not set(plan.train_trace_ids) & set(plan.test_trace_ids)

        # scaler canary: extreme test rows must not move train-fitted statistics
        plan = plans[0]
        clean = train_two_stage(events, plan, TrainConfig(epochs=2, seed=3))
        poisoned_events = [
            e if e.trace_id in plan.train_trace_ids
            else type(e)(e.trace_id, e.label, e.first_segment, e.last_segment,
                         e.features * 0 + 1e9)
            for e in events
        ]
        poisoned = train_two_stage(poisoned_events, plan, TrainConfig(epochs=2, seed=3))
        for stage in ("stage1_", "stage2_"):
            clean_scaler = getattr(clean, stage).scaler_
            poisoned_scaler = getattr(poisoned, stage).scaler_
            assert np.array_equal(clean_scaler.mean_, poisoned_scaler.mean_)
            assert np.array_equal(clean_scaler.std_, poisoned_scaler.std_)


def test_criterion_7_end_to_end_benchmark():
    with deadline(7, 120.0):
        mixes = [
            dict(events_per_trace={"ABD": 4, "DO": 2, "VOID": 1}, trace_prefix="mix1-"),
            dict(events_per_trace={"ABD": 2, "DO": 3, "VOID": 2}, trace_prefix="mix2-"),
            dict(events_per_trace={"ABD": 3, "DO": 2, "VOID": 2}, trace_prefix="mix3-",
                 abd_in_void=True),
        ]
        traces = []
        for k, mix in enumerate(mixes):
            config = SynthConfig(
                seed=1000 + k, n_traces=20, duration_s=600.0, noise_sigma=2.0, **mix
            )
            traces.extend(generate(config))
        assert len(traces) == 60

        events = build_events(extract_all(traces))
        plan = split_by_trace(events, train_fraction=0.6, seed=7)
        model = train_two_stage(events, plan, TrainConfig(seed=7))

        test_events = events_in(events, plan.test_trace_ids)
        X = np.vstack([e.features for e in test_events])
        y = np.asarray([e.label.value for e in test_events])
        y1 = np.where(y == "VOID", "VOID", "NONVOID")
        stage1_acc = float((model.predict_stage1(X) == y1).mean())
        nonvoid = np.flatnonzero(y != "VOID")
        stage2_acc = float((model.predict_stage2(X[nonvoid]) == y[nonvoid]).mean())
        cascaded_acc = float((model.predict(X) == y).mean())
        print(
            f"  benchmark: stage1 {stage1_acc:.3f}, stage2 {stage2_acc:.3f}, "
            f"cascaded {cascaded_acc:.3f} over {len(test_events)} test events"
        )
        assert stage1_acc >= 0.90
        assert stage2_acc >= 0.85
        assert cascaded_acc >= 0.80


def test_criterion_8_pfi_sanity():
    with deadline(8, 30.0):
        rng = np.random.default_rng(13)
        n = 200
        y = np.asarray(["pos"] * (n // 2) + ["neg"] * (n // 2))
        X = rng.normal(size=(n, 3))
        X[:, 0] = np.where(y == "pos", 2.0, -2.0) + rng.normal(scale=0.2, size=n)
        clf = MlpClassifier(
            hidden_dims=(16, 8), epochs=60, learning_rate=0.01, batch_size=32, seed=1
        ).fit(X, y)
        # kill feature 2 at the input layer: its drop must be exactly zero
        clf.weights_[0][2, :] = 0.0
        report = permutation_importance(clf, X, y, seed=9, feature_names=("f0", "f1", "f2"))
        assert report.mean_drop[2] == 0.0
        assert report.std_drop[2] == 0.0
        assert report.baseline_accuracy == 1.0
        permuted_accuracy = 1.0 - report.mean_drop[0]
        assert abs(permuted_accuracy - 0.5) <= 0.05
        again = permutation_importance(clf, X, y, seed=9, feature_names=("f0", "f1", "f2"))
        assert np.array_equal(report.mean_drop, again.mean_drop)
        assert np.array_equal(report.std_drop, again.std_drop)


def test_criterion_9_cli_determinism(tmp_path):
    with deadline(9, 120.0):
        runner = CliRunner()
        root = tmp_path / "run"

        def chain():
            steps = [
                ["synth", "--out", str(root / "corpus"), "--seed", "3", "--n-traces", "8",
                 "--duration", "300", "--noise", "1.0", "--tags", "A,B,C"],
                ["featurize", "--corpus", str(root / "corpus"), "--out", str(root / "features")],
                ["train", "--data", str(root / "features"), "--out", str(root / "model"),
                 "--mode", "two-stage", "--split", "60/40", "--seed", "7"],
                ["evaluate", "--data", str(root / "features"), "--model", str(root / "model"),
                 "--out", str(root / "eval"), "--corpus", str(root / "corpus")],
                ["pfi", "--data", str(root / "features"), "--model", str(root / "model"),
                 "--out", str(root / "pfi"), "--seed", "2", "--repeats", "3"],
            ]
            for step in steps:
                result = runner.invoke(main, step, catch_exceptions=False)
                assert result.exit_code == 0, result.output

        chain()
        snapshot = {
            p.relative_to(root): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }
        assert len(snapshot) > 20
        chain()  # identical invocation, overwriting every artifact
        for rel, before in snapshot.items():
            assert (root / rel).read_bytes() == before, rel
        after = {p.relative_to(root) for p in root.rglob("*") if p.is_file()}
        assert after == set(snapshot)
