"""Single-layer LSTM classifier over sequences of feature rows, trained
by backpropagation through time with Adam updates.

Sequences are built from consecutive rows that share a group identifier
(by default the class label; the harness passes recording ids so windows
never chain across recordings). The final hidden state feeds an affine
softmax readout.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .crossval import stratified_folds
from .data import FeatureDataset
from .errors import DatasetError, GradientOverflow, ShapeError
from .seeds import derive_seed

_GATES = ("forget", "input", "candidate", "output")


@dataclass
class LstmTrainConfig:
    epochs: int = 50
    batch_size: int = 50
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    sequence_len: int = 10
    standardize: bool = True
    clip_norm: float = 5.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ShapeError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ShapeError("batch_size must be >= 1")
        if self.sequence_len < 1:
            raise ShapeError("sequence_len must be >= 1")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ShapeError("Adam decay rates must be in [0, 1)")


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


class LstmModel:
    """Gate parameters over [h_prev, x] concatenations plus a softmax readout."""

    kind = "lstm"

    def __init__(self, units, n_features, gate_weights, gate_biases,
                 readout_weight, readout_bias, class_names,
                 feature_mean=None, feature_std=None, sequence_len=1):
        self.units = int(units)
        self.n_features = int(n_features)
        self.gate_weights = {g: np.asarray(gate_weights[g], dtype=np.float64) for g in _GATES}
        self.gate_biases = {g: np.asarray(gate_biases[g], dtype=np.float64) for g in _GATES}
        self.readout_weight = np.asarray(readout_weight, dtype=np.float64)
        self.readout_bias = np.asarray(readout_bias, dtype=np.float64)
        self.class_names = list(class_names)
        self.feature_mean = None if feature_mean is None else np.asarray(feature_mean)
        self.feature_std = None if feature_std is None else np.asarray(feature_std)
        self.sequence_len = int(sequence_len)
        width = self.units + self.n_features
        for g in _GATES:
            if self.gate_weights[g].shape != (self.units, width):
                raise ShapeError(f"{g} gate weights must be (units, units+features)")
            if self.gate_biases[g].shape != (self.units,):
                raise ShapeError(f"{g} gate bias must be (units,)")

    @classmethod
    def init_xavier(cls, units, n_features, class_names, rng, sequence_len=1) -> "LstmModel":
        width = units + n_features
        limit = np.sqrt(6.0 / (width + units))
        gate_w = {g: rng.uniform(-limit, limit, size=(units, width)) for g in _GATES}
        gate_b = {g: np.zeros(units) for g in _GATES}
        out_limit = np.sqrt(6.0 / (units + len(class_names)))
        readout_w = rng.uniform(-out_limit, out_limit, size=(len(class_names), units))
        return cls(units, n_features, gate_w, gate_b, readout_w,
                   np.zeros(len(class_names)), class_names, sequence_len=sequence_len)

    def standardized(self, X: np.ndarray) -> np.ndarray:
        if self.feature_mean is None:
            return X
        return (X - self.feature_mean) / self.feature_std

    def parameters(self):
        for g in _GATES:
            yield self.gate_weights[g]
        for g in _GATES:
            yield self.gate_biases[g]
        yield self.readout_weight
        yield self.readout_bias

    def predict_rows(self, X: np.ndarray) -> np.ndarray:
        """Classify flattened sequences of shape (n, sequence_len * n_features)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        expected = self.sequence_len * self.n_features
        if X.shape[1] != expected:
            raise ShapeError(f"rows must be flattened sequences of width {expected}")
        sequences = X.reshape(-1, self.sequence_len, self.n_features)
        probs = forward_sequences(self, sequences)
        picks = probs.argmax(axis=1)
        return np.asarray([self.class_names[i] for i in picks], dtype=object)


def _step_batch(model: LstmModel, h_prev, c_prev, x):
    """One gate update for a batch; returns (h, c, gate activations)."""
    concat = np.concatenate([h_prev, x], axis=-1)
    gates = {}
    for g in _GATES:
        z = concat @ model.gate_weights[g].T + model.gate_biases[g]
        gates[g] = np.tanh(z) if g == "candidate" else _sigmoid(z)
    c = gates["forget"] * c_prev + gates["input"] * gates["candidate"]
    h = gates["output"] * np.tanh(c)
    return h, c, gates


def cell_step(model: LstmModel, h_prev, c_prev, x):
    """One LSTM cell update for a single input vector.

    The forget gate scales the previous cell state, the input gate admits
    the candidate values, and the output gate releases tanh of the new
    cell state as the hidden state.
    """
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if h_prev.shape != (model.units,) or c_prev.shape != (model.units,):
        raise ShapeError("hidden/cell state must be (units,)")
    if x.shape != (model.n_features,):
        raise ShapeError(f"input must be ({model.n_features},)")
    h, c, gates = _step_batch(model, h_prev[None], c_prev[None], x[None])
    return h[0], c[0], {g: gates[g][0] for g in _GATES}


def forward_sequences(model: LstmModel, sequences: np.ndarray) -> np.ndarray:
    """Probabilities for a batch of sequences shaped (n, steps, features)."""
    sequences = np.asarray(sequences, dtype=np.float64)
    if sequences.ndim != 3 or sequences.shape[1] == 0:
        raise ShapeError("sequences must be (n, steps, features) with steps >= 1")
    n = sequences.shape[0]
    h = np.zeros((n, model.units))
    c = np.zeros((n, model.units))
    for t in range(sequences.shape[1]):
        h, c, _ = _step_batch(model, h, c, model.standardized(sequences[:, t, :]))
    return _softmax(h @ model.readout_weight.T + model.readout_bias)


def forward_sequence(model: LstmModel, sequence) -> np.ndarray:
    """Class probabilities after folding the cell over one sequence."""
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim == 1:
        sequence = sequence[None, :]
    if sequence.shape[0] == 0:
        raise ShapeError("sequence must be non-empty")
    return forward_sequences(model, sequence[None])[0]


def build_sequences(dataset: FeatureDataset, sequence_len: int, groups=None):
    """Chunk consecutive same-group rows into fixed-length sequences.

    Returns (sequences (n, len, features), labels). Groups default to the
    class labels; remainders shorter than sequence_len are dropped. Every
    class must contribute at least one sequence.
    """
    labels = dataset.labels.astype(str)
    groups = labels if groups is None else np.asarray(groups, dtype=object)
    if len(groups) != dataset.n_rows:
        raise ShapeError("one group id per row required")
    chunks, chunk_labels = [], []
    start = 0
    for i in range(1, dataset.n_rows + 1):
        if i == dataset.n_rows or groups[i] != groups[start]:
            run = np.arange(start, i)
            for s in range(0, len(run) - sequence_len + 1, sequence_len):
                rows = run[s:s + sequence_len]
                chunks.append(dataset.rows[rows])
                chunk_labels.append(labels[rows[0]])
            start = i
    if not chunks:
        raise DatasetError("no group is long enough for one sequence")
    seq_labels = np.asarray(chunk_labels, dtype=object)
    missing = set(dataset.class_names) - {str(x) for x in seq_labels}
    if missing:
        raise DatasetError(f"classes {sorted(missing)} yield no sequences")
    return np.stack(chunks), seq_labels


def sequence_dataset(dataset: FeatureDataset, sequence_len: int, groups=None) -> FeatureDataset:
    """Flatten sequences into rows so row-oriented tools (boosting,
    evaluation) can treat whole sequences as samples."""
    sequences, seq_labels = build_sequences(dataset, sequence_len, groups)
    n, steps, width = sequences.shape
    names = [f"t{t}.{name}" for t in range(steps) for name in dataset.feature_names]
    return FeatureDataset(feature_names=names, rows=sequences.reshape(n, steps * width),
                          labels=seq_labels, class_names=list(dataset.class_names))


def _bptt_gradients(model: LstmModel, X: np.ndarray, onehot: np.ndarray):
    """Full-unroll gradients of mean cross-entropy for standardized sequences."""
    n, steps, _ = X.shape
    h = np.zeros((n, model.units))
    c = np.zeros((n, model.units))
    cache = []
    for t in range(steps):
        h_prev, c_prev = h, c
        concat = np.concatenate([h_prev, X[:, t, :]], axis=-1)
        gates = {}
        for g in _GATES:
            z = concat @ model.gate_weights[g].T + model.gate_biases[g]
            gates[g] = np.tanh(z) if g == "candidate" else _sigmoid(z)
        c = gates["forget"] * c_prev + gates["input"] * gates["candidate"]
        h = gates["output"] * np.tanh(c)
        cache.append((concat, gates, c_prev, c))
    probs = _softmax(h @ model.readout_weight.T + model.readout_bias)

    dlogits = (probs - onehot) / n
    grads = {g: np.zeros_like(model.gate_weights[g]) for g in _GATES}
    grad_biases = {g: np.zeros_like(model.gate_biases[g]) for g in _GATES}
    grad_readout_w = dlogits.T @ h
    grad_readout_b = dlogits.sum(axis=0)
    dh = dlogits @ model.readout_weight
    dc = np.zeros((n, model.units))
    for t in range(steps - 1, -1, -1):
        concat, gates, c_prev, c_t = cache[t]
        tanh_c = np.tanh(c_t)
        d_out = dh * tanh_c
        dc = dc + dh * gates["output"] * (1.0 - tanh_c ** 2)
        d_forget = dc * c_prev
        d_input = dc * gates["candidate"]
        d_candidate = dc * gates["input"]
        dc_prev = dc * gates["forget"]
        dz = {
            "forget": d_forget * gates["forget"] * (1.0 - gates["forget"]),
            "input": d_input * gates["input"] * (1.0 - gates["input"]),
            "candidate": d_candidate * (1.0 - gates["candidate"] ** 2),
            "output": d_out * gates["output"] * (1.0 - gates["output"]),
        }
        dconcat = np.zeros_like(concat)
        for g in _GATES:
            grads[g] += dz[g].T @ concat
            grad_biases[g] += dz[g].sum(axis=0)
            dconcat += dz[g] @ model.gate_weights[g]
        dh = dconcat[:, : model.units]
        dc = dc_prev
    flat = [grads[g] for g in _GATES] + [grad_biases[g] for g in _GATES]
    flat += [grad_readout_w, grad_readout_b]
    ce = float(-np.log(np.maximum((probs * onehot).sum(axis=1), 1e-300)).mean())
    return flat, ce


def bptt_train(dataset: FeatureDataset, units: int, config: LstmTrainConfig | None = None,
               groups=None) -> LstmModel:
    """Train an LSTM on sequences chunked from the dataset.

    Xavier-initialized parameters, Adam updates, gradients clipped to a
    global norm of ``clip_norm`` before a non-finite gradient aborts
    training. Deterministic per (dataset, units, seed).
    """
    config = config or LstmTrainConfig()
    if units < 1:
        raise ShapeError("units must be >= 1")
    classes = dataset.class_names
    if len(classes) < 2:
        raise DatasetError("need at least 2 classes")
    sequences, seq_labels = build_sequences(dataset, config.sequence_len, groups)
    rng = np.random.default_rng(config.seed)
    model = LstmModel.init_xavier(units, dataset.n_features, classes, rng,
                                  sequence_len=config.sequence_len)
    if config.standardize:
        model.feature_mean = dataset.rows.mean(axis=0)
        std = dataset.rows.std(axis=0)
        model.feature_std = np.where(std > 0, std, 1.0)
    Xs = model.standardized(sequences.reshape(-1, dataset.n_features))
    Xs = Xs.reshape(sequences.shape)
    index = {c: i for i, c in enumerate(classes)}
    onehot = np.zeros((len(seq_labels), len(classes)))
    for r, label in enumerate(seq_labels):
        onehot[r, index[str(label)]] = 1.0

    params = list(model.parameters())
    adam_m = [np.zeros_like(p) for p in params]
    adam_v = [np.zeros_like(p) for p in params]
    step = 0
    n = len(seq_labels)
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            batch = order[lo:lo + config.batch_size]
            flat, _ = _bptt_gradients(model, Xs[batch], onehot[batch])
            norm_sq = sum(float((g ** 2).sum()) for g in flat)
            if not np.isfinite(norm_sq):
                raise GradientOverflow("non-finite BPTT gradient")
            norm = np.sqrt(norm_sq)
            if norm > config.clip_norm:
                flat = [g * (config.clip_norm / norm) for g in flat]
            step += 1
            bias1 = 1.0 - config.beta1 ** step
            bias2 = 1.0 - config.beta2 ** step
            for p, m, v, g in zip(params, adam_m, adam_v, flat):
                m *= config.beta1
                m += (1.0 - config.beta1) * g
                v *= config.beta2
                v += (1.0 - config.beta2) * g ** 2
                p -= config.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + config.adam_epsilon)
    return model


def cv_accuracy(dataset: FeatureDataset, units: int, config: LstmTrainConfig | None = None,
                folds: int = 10, groups=None, fold_assignment=None) -> float:
    """Mean held-out accuracy (%) with sequences as the stratified samples."""
    config = config or LstmTrainConfig()
    sequences, seq_labels = build_sequences(dataset, config.sequence_len, groups)
    if fold_assignment is None:
        fold_assignment = stratified_folds(seq_labels, folds,
                                           seed=derive_seed(config.seed, 0x15F0))
    accuracies = []
    for f in range(folds):
        train_idx = np.flatnonzero(fold_assignment != f)
        test_idx = np.flatnonzero(fold_assignment == f)
        # wrap the training sequences back into a dataset; groups keep
        # each original sequence intact (no re-chunking across sequences)
        fold_ds = FeatureDataset(feature_names=dataset.feature_names,
                                 rows=sequences[train_idx].reshape(-1, dataset.n_features),
                                 labels=np.repeat(seq_labels[train_idx], config.sequence_len),
                                 class_names=list(dataset.class_names))
        fold_groups = np.repeat(np.arange(len(train_idx)), config.sequence_len)
        fold_config = LstmTrainConfig(epochs=config.epochs, batch_size=config.batch_size,
                                      learning_rate=config.learning_rate, beta1=config.beta1,
                                      beta2=config.beta2, adam_epsilon=config.adam_epsilon,
                                      seed=derive_seed(config.seed, 0x15F0, units, f),
                                      sequence_len=config.sequence_len,
                                      standardize=config.standardize,
                                      clip_norm=config.clip_norm)
        model = bptt_train(fold_ds, units, fold_config, groups=fold_groups)
        probs = forward_sequences(model, sequences[test_idx])
        picks = probs.argmax(axis=1)
        predicted = np.asarray([model.class_names[i] for i in picks])
        accuracies.append(np.mean(predicted == seq_labels[test_idx].astype(str)))
    return float(np.mean(accuracies) * 100.0)


def unit_sweep(dataset: FeatureDataset, units_list, config: LstmTrainConfig | None = None,
               folds: int = 10, groups=None, threads: int = 1) -> list[tuple[int, float]]:
    """Cross-validated accuracy per unit count, one shared fold split."""
    config = config or LstmTrainConfig()
    units_list = list(units_list)
    if not units_list:
        raise ShapeError("units_list must be non-empty")
    _, seq_labels = build_sequences(dataset, config.sequence_len, groups)
    assignment = stratified_folds(seq_labels, folds, seed=derive_seed(config.seed, 0x15F0))

    def entry(units: int) -> tuple[int, float]:
        acc = cv_accuracy(dataset, units, config, folds, groups=groups,
                          fold_assignment=assignment)
        return int(units), acc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(entry, units_list))
    return [entry(u) for u in units_list]
