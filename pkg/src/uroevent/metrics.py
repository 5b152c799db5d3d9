"""Classification metrics, ROC/AUC, and permutation feature importance.

Sensitivity, specificity, and balanced accuracy are one-vs-rest per class;
raw fractions are kept alongside display values (integer percents, ties
rounded half-to-even).  ROC curves sweep every distinct score threshold and
integrate with the trapezoid rule over raw counts, which makes the AUC agree
bit-for-bit with Mann-Whitney pair counting (ties weighted 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateClassesError,
    LengthMismatchError,
    TooFewEventsError,
    UnknownLabelError,
)
from .features import validate_features


def display_percent(fraction: float) -> int:
    """Integer percent for table display; .5 ties round half-to-even."""
    return int(round(fraction * 100.0))


@dataclass
class EvaluationReport:
    """Confusion matrix plus per-class and overall metrics.

    Rows of ``confusion`` are actual classes, columns predicted, both in
    ``classes`` order.  Raw metrics are fractions in [0, 1]; the ``display``
    dict mirrors the reporting convention (integer percents, F1 and AUC to
    two decimals).
    """

    classes: tuple[str, ...]
    confusion: np.ndarray
    sensitivity: dict[str, float]
    specificity: dict[str, float]
    balanced_accuracy: dict[str, float]
    f1: dict[str, float]
    overall_accuracy: float
    f1_macro: float
    auc: float | None = None
    roc_points: dict[str, np.ndarray] | None = None

    @property
    def display(self) -> dict:
        out = {
            "balanced_accuracy_pct": {c: display_percent(self.balanced_accuracy[c]) for c in self.classes},
            "sensitivity_pct": {c: display_percent(self.sensitivity[c]) for c in self.classes},
            "specificity_pct": {c: display_percent(self.specificity[c]) for c in self.classes},
            "overall_accuracy_pct": display_percent(self.overall_accuracy),
            "f1_macro": round(self.f1_macro, 2),
        }
        if self.auc is not None:
            out["auc"] = round(self.auc, 2)
        return out


def evaluate(predictions, actuals, classes, scores=None) -> EvaluationReport:
    """Score aligned label lists against the given class set.

    Parameters
    ----------
    predictions, actuals : sequences of labels
        Anything with a stable ``str``; both must draw from ``classes``.
    classes : sequence of labels
        Evaluation class set; fixes the confusion-matrix ordering.
    scores : optional
        Per-class probability columns, shape (n, len(classes)); when given,
        per-class ROC curves and the macro one-vs-rest AUC are included.

    Raises
    ------
    LengthMismatchError, UnknownLabelError
    """
    pred = [str(p) for p in predictions]
    act = [str(a) for a in actuals]
    names = tuple(str(c) for c in classes)
    if len(pred) != len(act):
        raise LengthMismatchError(f"{len(pred)} predictions vs {len(act)} actuals")
    index = {c: i for i, c in enumerate(names)}
    for lbl in (*pred, *act):
        if lbl not in index:
            raise UnknownLabelError(f"label {lbl!r} not in class set {names}")

    n = len(act)
    k = len(names)
    confusion = np.zeros((k, k), dtype=np.int64)
    for a, p in zip(act, pred):
        confusion[index[a], index[p]] += 1

    sens, spec, bal, f1 = {}, {}, {}, {}
    for c, i in index.items():
        tp = confusion[i, i]
        fn = confusion[i].sum() - tp
        fp = confusion[:, i].sum() - tp
        tn = n - tp - fn - fp
        sens[c] = tp / (tp + fn) if tp + fn else 0.0
        spec[c] = tn / (tn + fp) if tn + fp else 0.0
        bal[c] = (sens[c] + spec[c]) / 2.0
        f1[c] = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    overall = float(np.trace(confusion) / n) if n else 0.0
    f1_macro = float(np.mean([f1[c] for c in names]))

    auc = None
    roc = None
    if scores is not None:
        scores = validate_features(np.asarray(scores, dtype=np.float64), k)
        if scores.shape[0] != n:
            raise LengthMismatchError(f"{scores.shape[0]} score rows vs {n} events")
        roc = {}
        aucs = []
        for c, i in index.items():
            truth = np.asarray([a == c for a in act])
            points, c_auc = roc_curve_points(truth, scores[:, i])
            roc[c] = points
            aucs.append(c_auc)
        auc = float(np.mean(aucs))
    return EvaluationReport(names, confusion, sens, spec, bal, f1, overall, f1_macro, auc, roc)


def roc_curve_points(y_true, scores):
    """ROC by sweeping all distinct thresholds; AUC by trapezoid over counts.

    Returns
    -------
    (points, auc)
        ``points`` has one (fpr, tpr, threshold) row per distinct score,
        preceded by the (0, 0, inf) origin; ``auc`` equals the Mann-Whitney
        ranking probability with ties counted 0.5.

    Raises
    ------
    DegenerateClassesError
        Without at least one positive and one negative example.
    """
    y_true = np.asarray(y_true, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if y_true.shape != scores.shape:
        raise LengthMismatchError(f"{y_true.shape} truth vs {scores.shape} scores")
    n_pos = int(y_true.sum())
    n_neg = int(len(y_true) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassesError(f"need both classes, got {n_pos} pos / {n_neg} neg")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_true = y_true[order]
    # group identical scores: one operating point per distinct threshold
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    group_ends = np.append(boundaries, len(scores))
    tp_cum = np.cumsum(sorted_true)
    fp_cum = np.cumsum(~sorted_true)

    points = [(0.0, 0.0, np.inf)]
    area2 = 0.0  # twice the unnormalized area, accumulated over integer counts
    tp_prev = 0
    fp_prev = 0
    for end in group_ends:
        tp = int(tp_cum[end - 1])
        fp = int(fp_cum[end - 1])
        area2 += (fp - fp_prev) * (tp + tp_prev)
        points.append((fp / n_neg, tp / n_pos, float(sorted_scores[end - 1])))
        tp_prev, fp_prev = tp, fp
    auc = (area2 / 2.0) / (n_pos * n_neg)
    return np.asarray(points, dtype=np.float64), float(auc)


@dataclass
class PfiReport:
    """Permutation importance of every feature, averaged over seeded repeats."""

    feature_names: tuple[str, ...]
    baseline_accuracy: float
    mean_drop: np.ndarray
    std_drop: np.ndarray
    n_repeats: int
    seed: int

    def ranking(self) -> np.ndarray:
        return np.argsort(-self.mean_drop, kind="stable")

    def top(self, k: int = 10) -> list[tuple[str, float]]:
        order = self.ranking()[:k]
        return [(self.feature_names[i], float(self.mean_drop[i])) for i in order]


def permutation_importance(model, X, y, seed: int, n_repeats: int = 5,
                           feature_names=None) -> PfiReport:
    """Accuracy drop per feature after shuffling that column on the test set.

    The baseline accuracy is computed once; every (feature, repeat) pair gets
    its own generator derived from ``(seed, feature, repeat)``, so reports are
    reproducible and repeats independent.

    ``model`` needs only a ``predict(X) -> labels`` method.
    """
    X = validate_features(X)
    y = np.asarray([str(v) for v in y])
    n, d = X.shape
    if n < 10:
        raise TooFewEventsError(f"permutation importance needs >= 10 events, got {n}")
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(d))
    baseline = float((np.asarray([str(v) for v in model.predict(X)]) == y).mean())
    mean_drop = np.empty(d)
    std_drop = np.empty(d)
    for f in range(d):
        drops = []
        for rep in range(n_repeats):
            rng = np.random.default_rng([seed, f, rep])
            Xp = X.copy()
            Xp[:, f] = Xp[rng.permutation(n), f]
            acc = float((np.asarray([str(v) for v in model.predict(Xp)]) == y).mean())
            drops.append(baseline - acc)
        mean_drop[f] = np.mean(drops)
        std_drop[f] = np.std(drops)
    return PfiReport(tuple(feature_names), baseline, mean_drop, std_drop, n_repeats, seed)


def metrics_to_csv(report: EvaluationReport, path: str | Path) -> None:
    """Write the table-style metrics layout (per-class rows, then overall)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    disp = report.display
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("metric," + ",".join(report.classes) + "\n")
        for key in ("balanced_accuracy_pct", "sensitivity_pct", "specificity_pct"):
            fh.write(key + "," + ",".join(str(disp[key][c]) for c in report.classes) + "\n")
        pad = "," * (len(report.classes) - 1)
        fh.write(f"overall_accuracy_pct,{disp['overall_accuracy_pct']}{pad}\n")
        fh.write(f"f1_macro,{disp['f1_macro']}{pad}\n")
        if "auc" in disp:
            fh.write(f"auc,{disp['auc']}{pad}\n")


def confusion_to_csv(report: EvaluationReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("actual\\predicted," + ",".join(report.classes) + "\n")
        for i, c in enumerate(report.classes):
            fh.write(c + "," + ",".join(str(int(v)) for v in report.confusion[i]) + "\n")


def roc_to_csv(roc_points: dict[str, np.ndarray], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("class,fpr,tpr,threshold\n")
        for cls in roc_points:
            for fpr, tpr, thr in roc_points[cls]:
                thr_txt = "inf" if np.isinf(thr) else repr(float(thr))
                fh.write(f"{cls},{float(fpr)!r},{float(tpr)!r},{thr_txt}\n")


def pfi_to_csv(report: PfiReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("feature,mean_drop,std_drop\n")
        for i in report.ranking():
            fh.write(
                f"{report.feature_names[i]},{float(report.mean_drop[i])!r},"
                f"{float(report.std_drop[i])!r}\n"
            )
