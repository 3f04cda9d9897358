"""Fully connected feed-forward classifier trained by momentum
backpropagation: sigmoid hidden layers, softmax output, cross-entropy
loss, per-row updates in seeded shuffled order."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossval import stratified_folds
from .data import FeatureDataset
from .errors import DatasetError, GradientOverflow, ShapeError
from .evolution import TopologyGenome
from .seeds import derive_seed


@dataclass
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.3
    momentum: float = 0.2
    decay: float = 0.0
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ShapeError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ShapeError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ShapeError("momentum must be in [0, 1)")
        if self.decay < 0:
            raise ShapeError("decay must be >= 0")


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class MlpModel:
    """Weights, biases, class order, and input standardization statistics."""

    kind = "mlp"

    def __init__(self, layer_sizes, weights, biases, class_names,
                 feature_mean=None, feature_std=None):
        self.layer_sizes = [int(x) for x in layer_sizes]
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.class_names = list(class_names)
        self.feature_mean = None if feature_mean is None else np.asarray(feature_mean)
        self.feature_std = None if feature_std is None else np.asarray(feature_std)
        self._velocity_w = [np.zeros_like(w) for w in self.weights]
        self._velocity_b = [np.zeros_like(b) for b in self.biases]
        for w, b, fan_out in zip(self.weights, self.biases, self.layer_sizes[1:]):
            if w.shape != (w.shape[0], fan_out) or b.shape != (fan_out,):
                raise ShapeError("weight/bias shapes do not chain")

    @classmethod
    def init_random(cls, n_inputs: int, hidden: list[int], class_names, rng,
                    init_span: float = 0.5) -> "MlpModel":
        sizes = [n_inputs] + list(hidden) + [len(class_names)]
        weights = [rng.uniform(-init_span, init_span, size=(a, b))
                   for a, b in zip(sizes[:-1], sizes[1:])]
        biases = [rng.uniform(-init_span, init_span, size=b) for b in sizes[1:]]
        return cls(sizes, weights, biases, class_names)

    def standardized(self, X: np.ndarray) -> np.ndarray:
        if self.feature_mean is None:
            return X
        return (X - self.feature_mean) / self.feature_std

    def _forward_std(self, Xs: np.ndarray):
        """Forward pass on already-standardized inputs; returns activations."""
        activations = [Xs]
        a = Xs
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = _sigmoid(a @ w + b)
            activations.append(a)
        probs = _softmax(a @ self.weights[-1] + self.biases[-1])
        activations.append(probs)
        return activations

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.layer_sizes[0]:
            raise ShapeError(
                f"input width {X.shape[1]} != model input size {self.layer_sizes[0]}"
            )
        return self._forward_std(self.standardized(X))[-1]

    def predict_rows(self, X: np.ndarray) -> np.ndarray:
        probs = self.forward_batch(X)
        picks = probs.argmax(axis=1)
        return np.asarray([self.class_names[i] for i in picks], dtype=object)


def forward(model: MlpModel, x) -> np.ndarray:
    """Class-probability vector for one input row."""
    return model.forward_batch(np.asarray(x, dtype=np.float64)[None, :])[0]


def loss(model: MlpModel, dataset: FeatureDataset) -> float:
    """Mean cross-entropy of the true classes."""
    probs = model.forward_batch(dataset.rows)
    index = {c: i for i, c in enumerate(model.class_names)}
    truth = np.asarray([index[str(l)] for l in dataset.labels])
    picked = probs[np.arange(len(truth)), truth]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())


def _gradients(model: MlpModel, Xs: np.ndarray, onehot: np.ndarray):
    """Mean cross-entropy gradients for a standardized batch."""
    activations = model._forward_std(Xs)
    n = Xs.shape[0]
    delta = (activations[-1] - onehot) / n
    grad_w, grad_b = [], []
    for layer in range(len(model.weights) - 1, -1, -1):
        a_prev = activations[layer]
        grad_w.append(a_prev.T @ delta)
        grad_b.append(delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * a_prev * (1.0 - a_prev)
    grad_w.reverse()
    grad_b.reverse()
    return grad_w, grad_b


def backprop_step(model: MlpModel, batch_X, batch_labels, config: TrainConfig,
                  learning_rate: float | None = None) -> MlpModel:
    """One momentum update from a raw batch; velocity lives on the model."""
    X = np.asarray(batch_X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ShapeError("batch must be non-empty")
    index = {c: i for i, c in enumerate(model.class_names)}
    onehot = np.zeros((X.shape[0], len(model.class_names)))
    for r, label in enumerate(batch_labels):
        onehot[r, index[str(label)]] = 1.0
    lr = config.learning_rate if learning_rate is None else learning_rate
    grad_w, grad_b = _gradients(model, model.standardized(X), onehot)
    for g in grad_w + grad_b:
        if not np.all(np.isfinite(g)):
            raise GradientOverflow("non-finite gradient in backprop step")
    for i, (gw, gb) in enumerate(zip(grad_w, grad_b)):
        model._velocity_w[i] = config.momentum * model._velocity_w[i] - lr * gw
        model._velocity_b[i] = config.momentum * model._velocity_b[i] - lr * gb
        model.weights[i] += model._velocity_w[i]
        model.biases[i] += model._velocity_b[i]
    return model


def train(genome, dataset: FeatureDataset, config: TrainConfig | None = None) -> MlpModel:
    """Train on the full dataset with per-row updates in shuffled order.

    Weights start uniform in [-0.5, 0.5] under the config seed; the same
    (genome, dataset, seed) always yields bit-identical models.
    """
    config = config or TrainConfig()
    hidden = genome.layers if isinstance(genome, TopologyGenome) else list(genome)
    labels = dataset.labels.astype(str)
    classes = dataset.class_names
    if len(classes) < 2:
        raise DatasetError("need at least 2 classes")
    counts = {c: int(np.sum(labels == c)) for c in classes}
    if any(v == 0 for v in counts.values()):
        raise DatasetError(f"empty classes: {[c for c, v in counts.items() if v == 0]}")
    rng = np.random.default_rng(config.seed)
    model = MlpModel.init_random(dataset.n_features, hidden, classes, rng)
    if config.standardize:
        model.feature_mean = dataset.rows.mean(axis=0)
        std = dataset.rows.std(axis=0)
        model.feature_std = np.where(std > 0, std, 1.0)
    Xs = model.standardized(dataset.rows)
    index = {c: i for i, c in enumerate(classes)}
    truth = np.asarray([index[l] for l in labels])
    onehot = np.zeros((len(truth), len(classes)))
    onehot[np.arange(len(truth)), truth] = 1.0
    for epoch in range(config.epochs):
        lr = config.learning_rate / (1.0 + config.decay * epoch)
        order = rng.permutation(dataset.n_rows)
        for i in order:
            grad_w, grad_b = _gradients(model, Xs[i:i + 1], onehot[i:i + 1])
            for layer, (gw, gb) in enumerate(zip(grad_w, grad_b)):
                if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
                    raise GradientOverflow(f"non-finite gradient at epoch {epoch}")
                model._velocity_w[layer] = config.momentum * model._velocity_w[layer] - lr * gw
                model._velocity_b[layer] = config.momentum * model._velocity_b[layer] - lr * gb
                model.weights[layer] += model._velocity_w[layer]
                model.biases[layer] += model._velocity_b[layer]
    return model


def _canonical_order(dataset: FeatureDataset) -> list[int]:
    return sorted(range(dataset.n_rows),
                  key=lambda i: (str(dataset.labels[i]), dataset.rows[i].tobytes()))


def cv_accuracy(genome, dataset: FeatureDataset, folds: int = 10,
                config: TrainConfig | None = None) -> float:
    """Mean held-out accuracy (%) over seed-stratified folds.

    Rows are put in a canonical content order first, so the result is
    invariant to any permutation of the input rows. This is the fitness
    handed to the topology search.
    """
    config = config or TrainConfig()
    canon = dataset.take(_canonical_order(dataset))
    assignment = stratified_folds(canon.labels, folds, seed=derive_seed(config.seed, 0xF01D))
    accuracies = []
    for f in range(folds):
        train_idx = np.flatnonzero(assignment != f)
        test_idx = np.flatnonzero(assignment == f)
        fold_config = TrainConfig(epochs=config.epochs, learning_rate=config.learning_rate,
                                  momentum=config.momentum, decay=config.decay,
                                  seed=derive_seed(config.seed, 0xF01D, f),
                                  standardize=config.standardize)
        model = train(genome, canon.take(train_idx), fold_config)
        predicted = model.predict_rows(canon.rows[test_idx])
        actual = canon.labels[test_idx].astype(str)
        accuracies.append(np.mean(predicted.astype(str) == actual))
    return float(np.mean(accuracies) * 100.0)
