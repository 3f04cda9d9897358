"""Multiclass adaptive boosting (SAMME) over any row-oriented base trainer.

Each stage trains on a resample of the dataset drawn from the current
row-weight distribution, earns a stage weight from its weighted error,
and inflates the weights of the rows it got wrong. Prediction is a
weighted vote across stages.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import FeatureDataset
from .errors import BoostFailure, DataError, ShapeError, TrainingError
from .seeds import derive_seed

# ln((1-eps)/eps) diverges as eps -> 0; a perfect stage gets this cap.
ALPHA_CAP = 10.0


@dataclass
class BoostedEnsemble:
    """Trained base models with their stage weights."""

    members: list
    alphas: list[float]
    class_names: list[str]
    estimators: int
    scheme: str = "samme"
    weight_history: list[np.ndarray] = field(default_factory=list, repr=False)

    kind = "ensemble"

    def __post_init__(self):
        if not self.members:
            raise BoostFailure("an ensemble needs at least one member")
        if len(self.members) != len(self.alphas):
            raise ShapeError("one stage weight per member required")

    def vote_scores(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows[None, :]
        index = {c: i for i, c in enumerate(self.class_names)}
        scores = np.zeros((rows.shape[0], len(self.class_names)))
        for alpha, member in zip(self.alphas, self.members):
            predictions = member.predict_rows(rows)
            for r, label in enumerate(predictions):
                scores[r, index[str(label)]] += alpha
        return scores

    def predict_rows(self, rows: np.ndarray) -> np.ndarray:
        scores = self.vote_scores(rows)
        picks = scores.argmax(axis=1)  # argmax takes the first max: class-name order
        return np.asarray([self.class_names[i] for i in picks], dtype=object)


def predict(ensemble: BoostedEnsemble, row) -> str:
    """Weighted-vote class for one input row; ties break by class order."""
    return str(ensemble.predict_rows(np.asarray(row, dtype=np.float64)[None, :])[0])


def boost(trainer: Callable[[FeatureDataset, int], object], dataset: FeatureDataset,
          estimators: int = 10, seed: int = 0) -> BoostedEnsemble:
    """Fit a SAMME ensemble of ``estimators`` stages.

    ``trainer(resampled_dataset, seed)`` must return a model exposing
    ``predict_rows``. Stages whose weighted error reaches the multiclass
    chance bound 1 - 1/K are resampled once and then discarded; an
    error-free stage is kept with a capped weight and stops boosting
    early. Raises BoostFailure if every stage is discarded.
    """
    if estimators < 1:
        raise ShapeError("estimators must be >= 1")
    labels = dataset.labels.astype(str)
    classes = dataset.class_names
    K = len(classes)
    if K < 2:
        raise ShapeError("boosting needs at least 2 classes")
    n = dataset.n_rows
    weights = np.full(n, 1.0 / n)
    members, alphas, history = [], [], []
    chance_bound = 1.0 - 1.0 / K
    for stage in range(estimators):
        model = None
        error = None
        for attempt in range(2):
            rng = np.random.default_rng(derive_seed(seed, stage, attempt))
            resample = rng.choice(n, size=n, replace=True, p=weights)
            try:
                candidate = trainer(dataset.take(resample),
                                    derive_seed(seed, stage, attempt, 1))
            except (DataError, TrainingError):
                continue  # degenerate resample (e.g. a class vanished): retry/discard
            predicted = candidate.predict_rows(dataset.rows).astype(str)
            miss = predicted != labels
            eps = float(weights[miss].sum())
            if eps < chance_bound:
                model, error, missed = candidate, eps, miss
                break
        if model is None:
            continue  # both attempts at or past the chance bound: discard the stage
        if error <= 0.0:
            members.append(model)
            alphas.append(ALPHA_CAP)
            history.append(weights.copy())
            break
        alpha = float(np.log((1.0 - error) / error) + np.log(K - 1))
        members.append(model)
        alphas.append(alpha)
        weights = weights * np.exp(alpha * missed)
        weights = weights / weights.sum()
        history.append(weights.copy())
    if not members:
        raise BoostFailure("every boosting stage was discarded")
    return BoostedEnsemble(members=members, alphas=alphas, class_names=list(classes),
                           estimators=estimators, weight_history=history)
