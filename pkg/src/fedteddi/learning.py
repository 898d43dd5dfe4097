"""Reference classifiers with analytic gradients, local SGD, and aggregation.

Two small models are provided — multinomial softmax regression and a
one-hidden-layer tanh MLP — both operating on a flat parameter vector so
that every gradient can be cross-checked against finite differences and
per-class gradient statistics can be computed exactly.  No deep-learning
framework is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

__all__ = [
    "LabeledSample",
    "Dataset",
    "TrainingConfig",
    "GradientStats",
    "SoftmaxRegression",
    "TinyMLP",
    "make_model",
    "local_loss",
    "local_train",
    "aggregate",
    "model_accuracy",
]


class LabeledSample(NamedTuple):
    features: np.ndarray
    label: int


class Dataset:
    """Immutable collection of labeled samples, stored as dense arrays."""

    __slots__ = ("features", "labels")

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=int)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D array (n_samples, n_features)")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must be a vector matching the sample count")
        if features.shape[0] > 0 and np.any(labels < 0):
            raise ValueError("labels must be nonnegative class indices")
        features.flags.writeable = False
        labels.flags.writeable = False
        self.features = features
        self.labels = labels

    @classmethod
    def from_samples(cls, samples: Iterable[LabeledSample]) -> "Dataset":
        samples = list(samples)
        if not samples:
            return cls(np.zeros((0, 0)), np.zeros((0,), dtype=int))
        X = np.stack([np.asarray(s.features, dtype=float) for s in samples])
        y = np.array([s.label for s in samples], dtype=int)
        return cls(X, y)

    @classmethod
    def empty(cls, num_features: int) -> "Dataset":
        return cls(np.zeros((0, num_features)), np.zeros((0,), dtype=int))

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> LabeledSample:
        return LabeledSample(self.features[i], int(self.labels[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def restrict_to_class(self, c: int) -> "Dataset":
        mask = self.labels == c
        return Dataset(self.features[mask], self.labels[mask])

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices])

    def class_counts(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.labels, minlength=num_classes).astype(int)

    def concat(self, other: "Dataset") -> "Dataset":
        if len(self) == 0:
            return other
        if len(other) == 0:
            return self
        return Dataset(
            np.concatenate([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
        )


@dataclass(frozen=True)
class TrainingConfig:
    """Local SGD hyperparameters: tau steps of batch size b at rate eta."""

    tau: int
    batch_size: int
    learning_rate: float
    lr_decay: float = 1.0
    momentum: float = 0.0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not (0 < self.lr_decay <= 1):
            raise ValueError("lr_decay must be in (0, 1]")
        if not (0 <= self.momentum < 1):
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class GradientStats:
    """Round-start gradient statistics a client reports alongside training.

    ``variance_estimate`` is sqrt of the per-coordinate-summed empirical
    variance of per-sample gradients in the first mini-batch, the natural
    scalar for the bounded-gradient-noise assumption E||g_i - g||^2 <= s^2.
    ``per_class_gradient`` holds the gradient of the mean loss over each
    class-restricted subset, evaluated at the round-start model.
    """

    variance_estimate: float
    full_gradient: np.ndarray
    per_class_gradient: dict[int, np.ndarray] = field(default_factory=dict)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(logits))


class SoftmaxRegression:
    """Multinomial logistic regression on a flat parameter vector.

    Layout: class weight matrix (C x F) row-major, then C biases.
    """

    def __init__(self, num_features: int, num_classes: int):
        self.num_features = num_features
        self.num_classes = num_classes

    @property
    def dim(self) -> int:
        return self.num_classes * (self.num_features + 1)

    def init_params(self, rng: np.random.Generator | None = None, scale: float = 0.0) -> np.ndarray:
        if scale == 0.0 or rng is None:
            return np.zeros(self.dim)
        return scale * rng.standard_normal(self.dim)

    def _unpack(self, params: np.ndarray):
        C, F = self.num_classes, self.num_features
        W = params[: C * F].reshape(C, F)
        b = params[C * F :]
        return W, b

    def logits(self, params: np.ndarray, X: np.ndarray) -> np.ndarray:
        W, b = self._unpack(params)
        return X @ W.T + b

    def loss(self, params: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
        logp = _log_softmax(self.logits(params, X))
        return float(-logp[np.arange(len(y)), y].mean())

    def gradient(self, params: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        delta = _softmax(self.logits(params, X))
        delta[np.arange(n), y] -= 1.0
        gW = delta.T @ X / n
        gb = delta.mean(axis=0)
        return np.concatenate([gW.ravel(), gb])

    def per_sample_gradients(self, params: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        delta = _softmax(self.logits(params, X))
        delta[np.arange(n), y] -= 1.0
        gW = np.einsum("ic,if->icf", delta, X).reshape(n, -1)
        return np.concatenate([gW, delta], axis=1)


class TinyMLP:
    """One-hidden-layer tanh network with a softmax head.

    Layout: W1 (H x F), b1 (H), W2 (C x H), b2 (C), all flattened in order.
    tanh keeps the loss smooth so finite-difference checks stay clean.
    """

    def __init__(self, num_features: int, hidden: int, num_classes: int):
        self.num_features = num_features
        self.hidden = hidden
        self.num_classes = num_classes

    @property
    def dim(self) -> int:
        F, H, C = self.num_features, self.hidden, self.num_classes
        return H * F + H + C * H + C

    def init_params(self, rng: np.random.Generator | None = None, scale: float = 0.1) -> np.ndarray:
        if rng is None:
            rng = np.random.default_rng(0)
        return scale * rng.standard_normal(self.dim)

    def _unpack(self, params: np.ndarray):
        F, H, C = self.num_features, self.hidden, self.num_classes
        i = 0
        W1 = params[i : i + H * F].reshape(H, F); i += H * F
        b1 = params[i : i + H]; i += H
        W2 = params[i : i + C * H].reshape(C, H); i += C * H
        b2 = params[i : i + C]
        return W1, b1, W2, b2

    def _forward(self, params: np.ndarray, X: np.ndarray):
        W1, b1, W2, b2 = self._unpack(params)
        h = np.tanh(X @ W1.T + b1)
        return h, h @ W2.T + b2

    def logits(self, params: np.ndarray, X: np.ndarray) -> np.ndarray:
        return self._forward(params, X)[1]

    def loss(self, params: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
        logp = _log_softmax(self.logits(params, X))
        return float(-logp[np.arange(len(y)), y].mean())

    def _deltas(self, params: np.ndarray, X: np.ndarray, y: np.ndarray):
        W1, b1, W2, b2 = self._unpack(params)
        h, logits = self._forward(params, X)
        delta2 = _softmax(logits)
        delta2[np.arange(X.shape[0]), y] -= 1.0
        delta1 = (delta2 @ W2) * (1.0 - h * h)
        return h, delta1, delta2

    def gradient(self, params: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        h, delta1, delta2 = self._deltas(params, X, y)
        gW1 = delta1.T @ X / n
        gb1 = delta1.mean(axis=0)
        gW2 = delta2.T @ h / n
        gb2 = delta2.mean(axis=0)
        return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])

    def per_sample_gradients(self, params: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        h, delta1, delta2 = self._deltas(params, X, y)
        gW1 = np.einsum("ih,if->ihf", delta1, X).reshape(n, -1)
        gW2 = np.einsum("ic,ih->ich", delta2, h).reshape(n, -1)
        return np.concatenate([gW1, delta1, gW2, delta2], axis=1)


def make_model(kind: str, num_features: int, num_classes: int, hidden: int = 16):
    if kind == "softmax":
        return SoftmaxRegression(num_features, num_classes)
    if kind == "mlp":
        return TinyMLP(num_features, hidden, num_classes)
    raise ValueError(f"unknown model kind {kind!r} (expected 'softmax' or 'mlp')")


def local_loss(model, params: np.ndarray, dataset: Dataset) -> float:
    """Mean cross-entropy over the dataset.

    Equals the class-proportion-weighted mean of per-class mean losses,
    which is what the scheduler's distribution math manipulates.
    """
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    return model.loss(params, dataset.features, dataset.labels)


def _batch_indices(n: int, batch_size: int, tau: int, rng: np.random.Generator):
    """Yield tau mini-batches by shuffle-then-chunk, reshuffling per pass."""
    produced = 0
    while produced < tau:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start : start + batch_size]
            produced += 1
            if produced >= tau:
                return


def local_train(
    model,
    params: np.ndarray,
    dataset: Dataset,
    cfg: TrainingConfig,
    rng_seed: int,
) -> tuple[np.ndarray, GradientStats]:
    """Run tau local SGD steps and collect round-start gradient statistics.

    Mini-batches are drawn without replacement by shuffling then chunking,
    seeded by ``rng_seed``; two calls with identical inputs are bitwise
    identical.  The variance estimate and the per-class/full gradients are
    all evaluated at the round-start model.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset must be nonempty")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    b = min(cfg.batch_size, n)

    batches = list(_batch_indices(n, b, cfg.tau, rng))

    first = dataset.subset(batches[0])
    per_sample = model.per_sample_gradients(params, first.features, first.labels)
    variance = float(per_sample.var(axis=0, ddof=0).sum())
    sigma_hat = float(np.sqrt(variance))

    full_grad = model.gradient(params, dataset.features, dataset.labels)
    per_class: dict[int, np.ndarray] = {}
    for c in np.unique(dataset.labels):
        sub = dataset.restrict_to_class(int(c))
        per_class[int(c)] = model.gradient(params, sub.features, sub.labels)

    w = params.copy()
    velocity = np.zeros_like(w)
    for idx in batches:
        batch = dataset.subset(idx)
        g = model.gradient(w, batch.features, batch.labels)
        if cfg.momentum > 0:
            velocity = cfg.momentum * velocity + g
            w = w - cfg.learning_rate * velocity
        else:
            w = w - cfg.learning_rate * g

    stats = GradientStats(
        variance_estimate=sigma_hat,
        full_gradient=full_grad,
        per_class_gradient=per_class,
    )
    return w, stats


def aggregate(models: Mapping[int, np.ndarray], sample_counts: Mapping[int, int]) -> np.ndarray:
    """Sample-count-weighted average of client models.

    Summation runs in ascending client-id order so the floating-point
    reduction is deterministic regardless of how results arrived.
    """
    if not models:
        raise ValueError("models map must be nonempty")
    ids = sorted(models)
    dims = {models[i].shape for i in ids}
    if len(dims) != 1:
        raise ValueError("model dimension mismatch across clients")
    for i in ids:
        if i not in sample_counts or sample_counts[i] <= 0:
            raise ValueError(f"client {i} missing a positive sample count")
    total = float(sum(sample_counts[i] for i in ids))
    out = np.zeros_like(models[ids[0]])
    for i in ids:
        out = out + (sample_counts[i] / total) * models[i]
    return out


def model_accuracy(model, params: np.ndarray, dataset: Dataset) -> float:
    """Fraction of samples whose argmax prediction matches the label.

    Ties go to the lowest class index.
    """
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    pred = np.argmax(model.logits(params, dataset.features), axis=1)
    return float(np.mean(pred == dataset.labels))
