import itertools

import numpy as np
import pytest

from uroevent.errors import (
    DegenerateClassesError,
    LengthMismatchError,
    TooFewEventsError,
    UnknownLabelError,
)
from uroevent.metrics import (
    confusion_to_csv,
    display_percent,
    evaluate,
    metrics_to_csv,
    permutation_importance,
    pfi_to_csv,
    roc_curve_points,
    roc_to_csv,
)


def mann_whitney_auc(y_true, scores):
    """Exhaustive pair-count oracle: P(score_pos > score_neg), ties 0.5."""
    pos = [s for s, t in zip(scores, y_true) if t]
    neg = [s for s, t in zip(scores, y_true) if not t]
    wins = 0.0
    for p, q in itertools.product(pos, neg):
        if p > q:
            wins += 1.0
        elif p == q:
            wins += 0.5
    return wins / (len(pos) * len(neg))


def labels_with_confusion(tp, fn, fp, tn, pos="VOID", neg="NONVOID"):
    actual = [pos] * (tp + fn) + [neg] * (fp + tn)
    predicted = [pos] * tp + [neg] * fn + [pos] * fp + [neg] * tn
    return predicted, actual


class TestEvaluate:
    def test_sens90_spec79_displays_balanced_84(self):
        predicted, actual = labels_with_confusion(tp=90, fn=10, fp=21, tn=79)
        report = evaluate(predicted, actual, ("VOID", "NONVOID"))
        assert abs(report.sensitivity["VOID"] - 0.90) < 1e-12
        assert abs(report.specificity["VOID"] - 0.79) < 1e-12
        expected = (report.sensitivity["VOID"] + report.specificity["VOID"]) / 2.0
        assert abs(report.balanced_accuracy["VOID"] - expected) <= 1e-12
        assert report.display["balanced_accuracy_pct"]["VOID"] == 84

    def test_perfect_three_class(self):
        actual = ["ABD"] * 5 + ["DO"] * 3 + ["VOID"] * 4
        report = evaluate(actual, actual, ("ABD", "DO", "VOID"))
        disp = report.display
        for cls in ("ABD", "DO", "VOID"):
            assert disp["balanced_accuracy_pct"][cls] == 100
            assert disp["sensitivity_pct"][cls] == 100
            assert disp["specificity_pct"][cls] == 100
        assert disp["overall_accuracy_pct"] == 100
        assert report.f1_macro == 1.0

    def test_hand_computed_four_sample_case(self):
        # TP=1, FN=1, FP=1, TN=1 -> everything 50%, F1 = 0.50
        predicted, actual = labels_with_confusion(tp=1, fn=1, fp=1, tn=1, pos="A", neg="B")
        report = evaluate(predicted, actual, ("A", "B"))
        assert report.sensitivity["A"] == 0.5
        assert report.specificity["A"] == 0.5
        assert report.overall_accuracy == 0.5
        assert report.f1["A"] == 0.5
        assert round(report.f1_macro, 2) == 0.5

    def test_confusion_totals_match_inputs(self):
        rng = np.random.default_rng(0)
        classes = ("A", "B", "C")
        for _ in range(20):
            actual = [classes[i] for i in rng.integers(0, 3, size=30)]
            predicted = [classes[i] for i in rng.integers(0, 3, size=30)]
            report = evaluate(predicted, actual, classes)
            assert report.confusion.sum() == 30
            for i, cls in enumerate(classes):
                assert report.confusion[i].sum() == actual.count(cls)

    def test_balanced_accuracy_identity(self):
        rng = np.random.default_rng(1)
        classes = ("A", "B")
        for _ in range(20):
            actual = [classes[i] for i in rng.integers(0, 2, size=25)]
            predicted = [classes[i] for i in rng.integers(0, 2, size=25)]
            if len(set(actual)) < 2:
                continue
            report = evaluate(predicted, actual, classes)
            for cls in classes:
                expected = (report.sensitivity[cls] + report.specificity[cls]) / 2.0
                assert abs(report.balanced_accuracy[cls] - expected) <= 1e-12

    def test_f1_macro_invariant_under_relabeling(self):
        rng = np.random.default_rng(2)
        classes = ("A", "B", "C")
        actual = [classes[i] for i in rng.integers(0, 3, size=40)]
        predicted = [classes[i] for i in rng.integers(0, 3, size=40)]
        base = evaluate(predicted, actual, classes).f1_macro
        mapping = {"A": "C", "B": "A", "C": "B"}
        swapped = evaluate(
            [mapping[p] for p in predicted], [mapping[a] for a in actual], classes
        ).f1_macro
        assert abs(base - swapped) <= 1e-12

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            evaluate(["A"], ["A", "B"], ("A", "B"))

    def test_unknown_label(self):
        with pytest.raises(UnknownLabelError):
            evaluate(["A"], ["X"], ("A", "B"))

    def test_macro_auc_included_with_scores(self):
        actual = ["A", "A", "B", "B"]
        predicted = ["A", "A", "B", "B"]
        scores = np.asarray([[0.9, 0.1], [0.8, 0.2], [0.1, 0.9], [0.2, 0.8]])
        report = evaluate(predicted, actual, ("A", "B"), scores=scores)
        assert report.auc == 1.0
        assert set(report.roc_points) == {"A", "B"}

    def test_display_rounding_is_half_even(self):
        assert display_percent(0.845) == 84
        assert display_percent(0.835) == 84
        assert display_percent(0.84) == 84
        assert display_percent(0.849) == 85


class TestRoc:
    def test_perfect_separation(self):
        y = np.asarray([True, True, False, False])
        _, auc = roc_curve_points(y, np.asarray([0.9, 0.8, 0.2, 0.1]))
        assert auc == 1.0

    def test_all_equal_scores_is_chance(self):
        y = np.asarray([True, False, True, False])
        points, auc = roc_curve_points(y, np.full(4, 0.5))
        assert auc == 0.5
        assert points[-1][0] == 1.0 and points[-1][1] == 1.0

    def test_six_sample_set_matches_pair_oracle(self):
        y = np.asarray([True, False, True, False, True, False])
        scores = np.asarray([0.9, 0.9, 0.6, 0.4, 0.2, 0.1])
        _, auc = roc_curve_points(y, scores)
        assert auc == mann_whitney_auc(y, scores)

    def test_random_small_sets_match_oracle_exactly(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            n = int(rng.integers(2, 21))
            y = rng.integers(0, 2, size=n).astype(bool)
            if y.all() or not y.any():
                continue
            # quantized scores force plenty of ties
            scores = np.round(rng.random(n), 1)
            _, auc = roc_curve_points(y, scores)
            assert auc == mann_whitney_auc(y, scores)

    def test_degenerate_classes_rejected(self):
        with pytest.raises(DegenerateClassesError):
            roc_curve_points(np.asarray([True, True]), np.asarray([0.1, 0.2]))

    def test_curve_is_monotone(self):
        rng = np.random.default_rng(4)
        y = rng.integers(0, 2, size=50).astype(bool)
        points, _ = roc_curve_points(y, rng.random(50))
        assert np.all(np.diff(points[:, 0]) >= 0)
        assert np.all(np.diff(points[:, 1]) >= 0)


class FeatureZeroModel:
    """Predicts from feature 0 alone; feature 1 is dead."""

    def predict(self, X):
        return np.where(X[:, 0] > 0, "pos", "neg")


class TestPermutationImportance:
    def make_data(self, n=40, seed=5):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 2))
        y = np.where(X[:, 0] > 0, "pos", "neg")
        return X, y

    def test_dead_feature_drop_is_exactly_zero(self):
        X, y = self.make_data()
        report = permutation_importance(FeatureZeroModel(), X, y, seed=1)
        assert report.mean_drop[1] == 0.0
        assert report.std_drop[1] == 0.0

    def test_informative_feature_drops_to_chance(self):
        X, y = self.make_data(n=200)
        report = permutation_importance(FeatureZeroModel(), X, y, seed=2)
        assert report.baseline_accuracy == 1.0
        assert abs((1.0 - report.mean_drop[0]) - 0.5) <= 0.05

    def test_deterministic_per_seed(self):
        X, y = self.make_data(n=60)
        a = permutation_importance(FeatureZeroModel(), X, y, seed=3)
        b = permutation_importance(FeatureZeroModel(), X, y, seed=3)
        assert np.array_equal(a.mean_drop, b.mean_drop)
        assert np.array_equal(a.std_drop, b.std_drop)

    def test_top_listing_sorted_descending(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(50, 12))
        y = np.where(X[:, 3] > 0, "pos", "neg")

        class M:
            def predict(self, Z):
                return np.where(Z[:, 3] > 0, "pos", "neg")

        report = permutation_importance(M(), X, y, seed=4)
        top = report.top(10)
        assert len(top) == 10
        drops = [d for _, d in top]
        assert drops == sorted(drops, reverse=True)
        assert top[0][0] == "f3"

    def test_too_few_events(self):
        X, y = self.make_data(n=5)
        with pytest.raises(TooFewEventsError):
            permutation_importance(FeatureZeroModel(), X, y, seed=1)


class TestCsvWriters:
    def test_metrics_layout(self, tmp_path):
        predicted, actual = labels_with_confusion(tp=90, fn=10, fp=21, tn=79)
        scores = np.column_stack(
            [np.linspace(0, 1, 200), 1.0 - np.linspace(0, 1, 200)]
        )
        report = evaluate(predicted, actual, ("VOID", "NONVOID"), scores=scores)
        path = tmp_path / "metrics.csv"
        metrics_to_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "metric,VOID,NONVOID"
        assert lines[1].startswith("balanced_accuracy_pct,84,")
        assert any(line.startswith("overall_accuracy_pct,") for line in lines)
        assert any(line.startswith("f1_macro,") for line in lines)
        assert any(line.startswith("auc,") for line in lines)

    def test_confusion_and_roc_files(self, tmp_path):
        actual = ["A", "A", "B", "B"]
        scores = np.asarray([[0.9, 0.1], [0.8, 0.2], [0.1, 0.9], [0.2, 0.8]])
        report = evaluate(actual, actual, ("A", "B"), scores=scores)
        confusion_to_csv(report, tmp_path / "confusion.csv")
        roc_to_csv(report.roc_points, tmp_path / "roc.csv")
        assert (tmp_path / "confusion.csv").read_text().splitlines()[0] == "actual\\predicted,A,B"
        roc_lines = (tmp_path / "roc.csv").read_text().splitlines()
        assert roc_lines[0] == "class,fpr,tpr,threshold"
        assert any(line.startswith("A,") for line in roc_lines[1:])

    def test_pfi_csv(self, tmp_path):
        X = np.random.default_rng(7).normal(size=(30, 2))
        y = np.where(X[:, 0] > 0, "pos", "neg")
        report = permutation_importance(
            FeatureZeroModel(), X, y, seed=5, feature_names=("informative", "dead")
        )
        pfi_to_csv(report, tmp_path / "pfi.csv")
        lines = (tmp_path / "pfi.csv").read_text().splitlines()
        assert lines[0] == "feature,mean_drop,std_drop"
        assert lines[1].startswith("informative,")
