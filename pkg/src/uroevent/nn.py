"""From-scratch fully connected classifier and supporting estimators.

The network is ``input -> hidden ReLU layers -> softmax`` trained with
mini-batch Adam on the cross-entropy loss.  Everything here is plain numpy so
gradients can be validated against finite differences; the sklearn base
classes only provide ``get_params``/``set_params`` plumbing so the estimators
compose with the wider ecosystem.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .errors import (
    ConfigError,
    CorruptFileError,
    DimensionMismatchError,
    NonFiniteLossError,
    TooFewRowsError,
    TooFewRowsPerClassError,
    ValidationError,
    VersionMismatchError,
)
from .features import FeatureMatrix, validate_features

RNG_NAME = "numpy-pcg64"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters."""

    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epsilon <= 0:
            raise ConfigError("learning_rate, batch_size, and epsilon must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    def estimator_kwargs(self) -> dict:
        return self.to_dict()


class ZScoreScaler(BaseEstimator, TransformerMixin):
    """Per-feature standardization with population (1/n) standard deviation.

    Zero-variance columns get std 1 so constant features pass through
    centred instead of dividing by zero.
    """

    def fit(self, X, y=None):
        X = validate_features(X)
        if X.shape[0] < 2:
            raise TooFewRowsError(f"need at least 2 rows to fit a scaler, got {X.shape[0]}")
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0.0] = 1.0
        self.std_ = std
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = validate_features(X, self.n_features_in_)
        return (X - self.mean_) / self.std_

    def transform_matrix(self, matrix: FeatureMatrix) -> FeatureMatrix:
        """Scale a tagged feature matrix exactly once."""
        if matrix.scaled:
            raise ValidationError("feature matrix is already scaled; refusing to scale twice")
        out = matrix.subset(np.arange(matrix.n_rows))
        out.X = self.transform(out.X)
        out.scaled = True
        return out


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def init_params(layer_dims: list[int], rng: np.random.Generator):
    """He-style uniform init scaled by fan-in; zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward_pass(weights, biases, X):
    """Return (layer activations, hidden pre-activations, class probabilities)."""
    acts = [X]
    pre = []
    n_layers = len(weights)
    for i in range(n_layers):
        z = acts[-1] @ weights[i] + biases[i]
        if i < n_layers - 1:
            pre.append(z)
            acts.append(relu(z))
        else:
            acts.append(z)
    return acts, pre, softmax(acts[-1])


def cross_entropy(probs: np.ndarray, y_idx: np.ndarray) -> float:
    picked = np.clip(probs[np.arange(len(y_idx)), y_idx], 1e-300, None)
    return float(-np.log(picked).mean())


def backward_pass(weights, biases, X, y_idx):
    """Analytic gradients of the mean cross-entropy; returns (gW, gb, loss)."""
    acts, pre, probs = forward_pass(weights, biases, X)
    loss = cross_entropy(probs, y_idx)
    batch = X.shape[0]
    delta = probs.copy()
    delta[np.arange(batch), y_idx] -= 1.0
    delta /= batch
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (pre[i - 1] > 0)
    return grads_w, grads_b, loss


class MlpClassifier(BaseEstimator, ClassifierMixin):
    """Two-hidden-layer softmax classifier trained with Adam.

    Standardization is internal: ``fit`` learns a z-score scaler on the raw
    training features and every prediction path applies it exactly once.
    Class order follows ``np.unique`` of the training labels, and argmax ties
    resolve to the lowest class index.

    Parameters mirror the training defaults: two hidden ReLU layers of 128
    and 200 units, learning rate 0.001, 50 epochs, batch size 128.
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
        stage_tag="",
    ):
        self.hidden_dims = hidden_dims
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.seed = seed
        self.stage_tag = stage_tag

    @property
    def layer_dims_(self) -> list[int]:
        return [self.n_features_in_, *self.hidden_dims, len(self.classes_)]

    def fit(self, X, y):
        X = validate_features(X)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise DimensionMismatchError(
                f"labels shape {y.shape} does not match {X.shape[0]} rows"
            )
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValidationError("need at least 2 classes to train")
        y_idx = np.searchsorted(self.classes_, y)
        self.n_features_in_ = X.shape[1]

        self.scaler_ = ZScoreScaler().fit(X)
        Xs = self.scaler_.transform(X)

        cfg = TrainConfig(
            self.learning_rate, self.epochs, self.batch_size,
            self.beta1, self.beta2, self.epsilon, self.seed,
        )
        rng = np.random.default_rng(cfg.seed)
        weights, biases = init_params(self.layer_dims_, rng)
        self.weights_, self.biases_, self.loss_curve_ = _train_adam(
            weights, biases, Xs, y_idx, cfg, rng
        )
        self.rng_name_ = RNG_NAME
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "weights_"):
            raise ValidationError("classifier is not fitted")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = validate_features(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        _, _, probs = forward_pass(self.weights_, self.biases_, self.scaler_.transform(X))
        return probs

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]


def _train_adam(weights, biases, Xs, y_idx, cfg: TrainConfig, rng: np.random.Generator):
    n = Xs.shape[0]
    params = weights + biases
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    t = 0
    n_w = len(weights)
    loss_curve = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            grads_w, grads_b, loss = backward_pass(weights, biases, Xs[idx], y_idx[idx])
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"loss diverged at epoch {epoch}, batch offset {start}: {loss}"
                )
            epoch_loss += loss * len(idx)
            t += 1
            corr1 = 1.0 - cfg.beta1**t
            corr2 = 1.0 - cfg.beta2**t
            for p, g, m_s, v_s in zip(params, grads_w + grads_b, m_state, v_state):
                m_s *= cfg.beta1
                m_s += (1.0 - cfg.beta1) * g
                v_s *= cfg.beta2
                v_s += (1.0 - cfg.beta2) * g * g
                p -= cfg.learning_rate * (m_s / corr1) / (np.sqrt(v_s / corr2) + cfg.epsilon)
        loss_curve.append(epoch_loss / n)
    return params[:n_w], params[n_w:], loss_curve


def relieff_rank(X, y, k_neighbors: int = 10):
    """Rank features by relevance using nearest hits and misses.

    For every instance, weights decrease with the feature differences to its
    ``k`` nearest same-class neighbours and increase (class-prior weighted)
    with the differences to the ``k`` nearest neighbours of every other
    class.  Distances and differences are range-normalized per feature.

    Returns
    -------
    (order, weights) : (np.ndarray, np.ndarray)
        Feature indices sorted by descending weight, and the weight of every
        feature in canonical order.
    """
    X = validate_features(X)
    y = np.asarray(y)
    n, d = X.shape
    classes, counts = np.unique(y, return_counts=True)
    for cls, cnt in zip(classes, counts):
        if cnt < k_neighbors + 1:
            raise TooFewRowsPerClassError(
                f"class {cls!r} has {cnt} rows; need >= {k_neighbors + 1}"
            )
    span = X.max(axis=0) - X.min(axis=0)
    span[span == 0.0] = 1.0
    Xn = X / span

    priors = {cls: cnt / n for cls, cnt in zip(classes, counts)}
    by_class = {cls: np.flatnonzero(y == cls) for cls in classes}
    weights = np.zeros(d)
    denom = n * k_neighbors
    for i in range(n):
        dist = np.abs(Xn - Xn[i]).sum(axis=1)
        for cls in classes:
            members = by_class[cls]
            members = members[members != i] if cls == y[i] else members
            order = members[np.argsort(dist[members], kind="stable")[:k_neighbors]]
            diffs = np.abs(Xn[order] - Xn[i]).sum(axis=0)
            if cls == y[i]:
                weights -= diffs / denom
            else:
                weights += (priors[cls] / (1.0 - priors[y[i]])) * diffs / denom
    order = np.argsort(-weights, kind="stable")
    return order, weights


class ReliefF(BaseEstimator):
    """Estimator wrapper around :func:`relieff_rank`."""

    def __init__(self, n_neighbors: int = 10):
        self.n_neighbors = n_neighbors

    def fit(self, X, y):
        self.ranking_, self.weights_ = relieff_rank(X, y, self.n_neighbors)
        self.n_features_in_ = validate_features(X).shape[1]
        return self

    def top_features(self, k: int) -> np.ndarray:
        return self.ranking_[:k]


def kfold_indices(n: int, k: int, seed: int):
    """Seeded k-fold partition of ``range(n)`` as (train_idx, val_idx) pairs."""
    if k < 2 or k > n:
        raise ConfigError(f"k must lie in [2, {n}], got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i in range(k):
        val = folds[i]
        train = np.concatenate([folds[j] for j in range(k) if j != i])
        out.append((np.sort(train), np.sort(val)))
    return out


def cross_val_accuracy(X, y, params: dict, k: int = 5, seed: int = 0) -> float:
    """Mean validation accuracy of an MlpClassifier over seeded k folds."""
    X = validate_features(X)
    y = np.asarray(y)
    accs = []
    for train_idx, val_idx in kfold_indices(X.shape[0], k, seed):
        clf = MlpClassifier(**params).fit(X[train_idx], y[train_idx])
        accs.append(float((clf.predict(X[val_idx]) == y[val_idx]).mean()))
    return float(np.mean(accs))


def grid_search(X, y, param_grid: dict[str, list], k: int = 5, seed: int = 0, **fixed):
    """Exhaustive k-fold grid search; returns (best_params, scored grid).

    Ties on mean accuracy resolve to the earliest grid point in the
    deterministic iteration order (sorted parameter names, listed values).
    """
    names = sorted(param_grid)
    results = []
    best = None
    for values in itertools.product(*(param_grid[name] for name in names)):
        params = {**fixed, **dict(zip(names, values))}
        acc = cross_val_accuracy(X, y, params, k=k, seed=seed)
        results.append((params, acc))
        if best is None or acc > best[1]:
            best = (params, acc)
    return best[0], results


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_model(model: MlpClassifier, path: str | Path) -> None:
    """Write a fitted classifier to the versioned text model format.

    All floats use 17 significant decimal digits, which round-trips IEEE
    doubles exactly; a trailing SHA-256 line covers everything above it.
    """
    model._check_fitted()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"uroevent-model v{MODEL_FORMAT_VERSION}"]
    lines.append(f"stage: {model.stage_tag}")
    lines.append("classes: " + " ".join(str(c) for c in model.classes_))
    lines.append("layer_dims: " + " ".join(str(d) for d in model.layer_dims_))
    lines.append(f"seed: {model.seed}")
    lines.append(f"learning_rate: {_fmt(model.learning_rate)}")
    lines.append(f"epochs: {model.epochs}")
    lines.append(f"batch_size: {model.batch_size}")
    lines.append(f"beta1: {_fmt(model.beta1)}")
    lines.append(f"beta2: {_fmt(model.beta2)}")
    lines.append(f"epsilon: {_fmt(model.epsilon)}")
    lines.append(f"rng: {model.rng_name_}")
    lines.append("scaler_mean: " + " ".join(_fmt(v) for v in model.scaler_.mean_))
    lines.append("scaler_std: " + " ".join(_fmt(v) for v in model.scaler_.std_))
    for i, (w, b) in enumerate(zip(model.weights_, model.biases_)):
        lines.append(f"weights {i} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(_fmt(v) for v in row))
        lines.append(f"biases {i} {b.shape[0]}")
        lines.append(" ".join(_fmt(v) for v in b))
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(body)
        fh.write(f"checksum: sha256={digest}\n")


def load_model(path: str | Path) -> MlpClassifier:
    """Load a model file; verifies the format version and checksum."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or not lines[0].startswith("uroevent-model v"):
        raise CorruptFileError(f"{path}: not a model file")
    version = lines[0].removeprefix("uroevent-model v")
    if version != str(MODEL_FORMAT_VERSION):
        raise VersionMismatchError(f"{path}: format version {version} not supported")
    if not lines[-2].startswith("checksum: sha256="):
        raise CorruptFileError(f"{path}: missing checksum (truncated file?)")
    stated = lines[-2].removeprefix("checksum: sha256=")
    body = "\n".join(lines[:-2]) + "\n"
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != stated:
        raise CorruptFileError(f"{path}: checksum mismatch")

    def field(idx: int, key: str) -> str:
        if not lines[idx].startswith(key + ":"):
            raise CorruptFileError(f"{path}: expected {key!r} on line {idx + 1}")
        return lines[idx].split(":", 1)[1].strip()

    stage = field(1, "stage")
    classes = np.asarray(field(2, "classes").split())
    layer_dims = [int(v) for v in field(3, "layer_dims").split()]
    model = MlpClassifier(
        hidden_dims=tuple(layer_dims[1:-1]),
        learning_rate=float(field(5, "learning_rate")),
        epochs=int(field(6, "epochs")),
        batch_size=int(field(7, "batch_size")),
        beta1=float(field(8, "beta1")),
        beta2=float(field(9, "beta2")),
        epsilon=float(field(10, "epsilon")),
        seed=int(field(4, "seed")),
        stage_tag=stage,
    )
    model.classes_ = classes
    model.n_features_in_ = layer_dims[0]
    model.rng_name_ = field(11, "rng")
    scaler = ZScoreScaler()
    scaler.mean_ = np.asarray([float(v) for v in field(12, "scaler_mean").split()])
    scaler.std_ = np.asarray([float(v) for v in field(13, "scaler_std").split()])
    scaler.n_features_in_ = layer_dims[0]
    model.scaler_ = scaler

    weights, biases = [], []
    idx = 14
    try:
        for layer in range(len(layer_dims) - 1):
            head = lines[idx].split()
            if head[:2] != ["weights", str(layer)]:
                raise CorruptFileError(f"{path}: expected weights block {layer} on line {idx + 1}")
            rows, cols = int(head[2]), int(head[3])
            if rows != layer_dims[layer] or cols != layer_dims[layer + 1]:
                raise CorruptFileError(f"{path}: weights block {layer} has wrong shape")
            idx += 1
            w = np.asarray(
                [[float(v) for v in lines[idx + r].split()] for r in range(rows)]
            )
            if w.shape != (rows, cols):
                raise CorruptFileError(f"{path}: weights block {layer} malformed")
            idx += rows
            head = lines[idx].split()
            if head[:2] != ["biases", str(layer)]:
                raise CorruptFileError(f"{path}: expected biases block {layer} on line {idx + 1}")
            idx += 1
            b = np.asarray([float(v) for v in lines[idx].split()])
            if b.shape != (cols,):
                raise CorruptFileError(f"{path}: biases block {layer} malformed")
            idx += 1
            weights.append(w)
            biases.append(b)
    except (IndexError, ValueError) as exc:
        raise CorruptFileError(f"{path}: malformed weight data ({exc})") from exc
    model.weights_ = weights
    model.biases_ = biases
    model.loss_curve_ = []
    return model
