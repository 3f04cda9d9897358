"""Attribute ranking by information gain, the one-rule baseline, and the
attribute-subset genome/fitness handed to the evolutionary engine."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .crossval import stratified_folds
from .data import FeatureDataset
from .errors import ConfigError, EmptySelection, ShapeError
from .seeds import derive_seed


@dataclass
class DiscretizedAttribute:
    """Equal-width binning of a continuous column."""

    bin_edges: np.ndarray   # ascending interior thresholds, len = bins - 1
    bin_assignments: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.bin_edges) + 1


def discretize(values, bins: int) -> DiscretizedAttribute:
    """Equal-width bins over the observed range; a constant column gets one bin."""
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    x = np.asarray(values, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi <= lo or bins == 1:
        return DiscretizedAttribute(np.empty(0), np.zeros(len(x), dtype=int))
    width = (hi - lo) / bins
    assignments = np.clip(((x - lo) / width).astype(int), 0, bins - 1)
    edges = lo + width * np.arange(1, bins)
    return DiscretizedAttribute(edges, assignments)


def _entropy_bits(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def class_entropy(labels) -> float:
    """Entropy of the class distribution, in bits."""
    labels = np.asarray(labels, dtype=object)
    if len(labels) == 0:
        raise ShapeError("labels must be non-empty")
    _, counts = np.unique(labels.astype(str), return_counts=True)
    return _entropy_bits(counts)


def info_gain(dataset: FeatureDataset, column: int, bins: int = 10) -> float:
    """Reduction in class entropy after conditioning on the binned column."""
    if not 0 <= column < dataset.n_features:
        raise ShapeError(f"column {column} out of range")
    if bins < 2:
        raise ConfigError("bins must be >= 2")
    disc = discretize(dataset.rows[:, column], bins)
    labels = dataset.labels.astype(str)
    total = len(labels)
    classes, encoded = np.unique(labels, return_inverse=True)
    base = class_entropy(labels)
    conditional = 0.0
    for b in range(disc.n_bins):
        members = encoded[disc.bin_assignments == b]
        if len(members) == 0:
            continue
        counts = np.bincount(members, minlength=len(classes))
        conditional += (len(members) / total) * _entropy_bits(counts)
    return base - conditional


def rank_columns(dataset: FeatureDataset, bins: int = 10, threads: int = 1) -> np.ndarray:
    """Information gain of every column; order-independent, parallelizable."""
    columns = range(dataset.n_features)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            gains = list(pool.map(lambda c: info_gain(dataset, c, bins), columns))
    else:
        gains = [info_gain(dataset, c, bins) for c in columns]
    return np.asarray(gains, dtype=np.float64)


def _one_r_fit(values, labels, bins):
    disc = discretize(values, bins)
    classes = np.unique(labels)
    default = classes[np.argmax([np.sum(labels == c) for c in classes])]
    rule = {}
    for b in range(disc.n_bins):
        members = labels[disc.bin_assignments == b]
        if len(members) == 0:
            rule[b] = default
            continue
        cls, counts = np.unique(members, return_counts=True)
        rule[b] = cls[np.argmax(counts)]  # np.unique sorts, so ties break low
    return disc, rule, default


def _one_r_assign(disc: DiscretizedAttribute, values) -> np.ndarray:
    if disc.n_bins == 1:
        return np.zeros(len(values), dtype=int)
    return np.searchsorted(disc.bin_edges, values, side="right")


def one_r(dataset: FeatureDataset, column: int, bins: int = 10, folds: int = 10,
          seed: int = 0) -> float:
    """Cross-validated accuracy (%) of the single-attribute majority rule."""
    if not 0 <= column < dataset.n_features:
        raise ShapeError(f"column {column} out of range")
    labels = dataset.labels.astype(str)
    if len(np.unique(labels)) < 2:
        raise ShapeError("one_r needs at least 2 classes")
    values = dataset.rows[:, column]
    assignment = stratified_folds(labels, folds, seed=derive_seed(seed, 0x03E2))
    accuracies = []
    for f in range(folds):
        train = assignment != f
        disc, rule, default = _one_r_fit(values[train], labels[train], bins)
        test_bins = _one_r_assign(disc, values[~train])
        predicted = np.asarray([rule.get(b, default) for b in test_bins])
        accuracies.append(np.mean(predicted == labels[~train]))
    return float(np.mean(accuracies) * 100.0)


@dataclass
class AttributeMask:
    """One boolean per feature column; the attribute-selection genome."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def copy(self) -> "AttributeMask":
        return AttributeMask(self.bits.copy())

    # genome protocol used by the evolutionary engine
    def crossover(self, other: "AttributeMask", rng) -> "AttributeMask":
        if len(other) != len(self):
            raise ShapeError("masks differ in length")
        pick = rng.integers(0, 2, size=len(self)).astype(bool)
        return AttributeMask(np.where(pick, self.bits, other.bits))

    def mutate(self, rng, rate: float) -> "AttributeMask":
        flips = rng.random(len(self)) < rate
        bits = np.logical_xor(self.bits, flips)
        if not bits.any():  # clamp back into the valid genome space
            bits[rng.integers(0, len(bits))] = True
        return AttributeMask(bits)

    def to_json(self):
        return [int(b) for b in self.bits]

    @classmethod
    def sample(cls, n_columns: int, rng, density: float = 0.5) -> "AttributeMask":
        bits = rng.random(n_columns) < density
        if not bits.any():
            bits[rng.integers(0, n_columns)] = True
        return cls(bits)


def save_mask(mask: AttributeMask, feature_names: list[str], path) -> None:
    """Persist a mask as the newline-delimited selected column names."""
    chosen = [feature_names[i] for i in mask.indices()]
    Path(path).write_text("\n".join(chosen) + "\n", encoding="utf-8")


def load_mask(path, feature_names: list[str]) -> AttributeMask:
    chosen = [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line]
    index = {name: i for i, name in enumerate(feature_names)}
    unknown = [c for c in chosen if c not in index]
    if unknown:
        raise ShapeError(f"mask names not in catalog: {unknown[:3]}")
    bits = np.zeros(len(feature_names), dtype=bool)
    for c in chosen:
        bits[index[c]] = True
    return AttributeMask(bits)


def subset_fitness(dataset: FeatureDataset, mask: AttributeMask, bins: int = 10,
                   penalty: float = 0.01, column_gains: np.ndarray | None = None) -> float:
    """Mean per-attribute information gain minus a small cardinality penalty.

    An empty mask scores -inf so it can never be selected. Passing
    precomputed ``column_gains`` avoids re-binning on every call.
    """
    if len(mask) != dataset.n_features:
        raise ShapeError("mask length does not match dataset width")
    selected = mask.indices()
    if len(selected) == 0:
        return float("-inf")
    if column_gains is None:
        gains = np.asarray([info_gain(dataset, int(c), bins) for c in selected])
    else:
        gains = np.asarray(column_gains)[selected]
    return float(gains.mean() - penalty * len(selected) / dataset.n_features)


def project(dataset: FeatureDataset, mask: AttributeMask) -> FeatureDataset:
    """Dataset restricted to the selected columns; names and rows preserved."""
    if len(mask) != dataset.n_features:
        raise ShapeError("mask length does not match dataset width")
    selected = mask.indices()
    if len(selected) == 0:
        raise EmptySelection("mask selects no columns")
    return dataset.select_columns(selected)
