"""Stratified fold assignment and accuracy/confusion evaluation."""
from __future__ import annotations

import numpy as np

from .errors import EvalError, StratificationError


def stratified_folds(labels, folds: int, seed: int = 0) -> np.ndarray:
    """Per-row fold index in [0, folds): round-robin within each class
    after a seeded shuffle, so per-class fold counts differ by at most 1.
    """
    labels = np.asarray(labels, dtype=object)
    if folds < 2:
        raise StratificationError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    assignment = np.full(len(labels), -1, dtype=int)
    for cls in sorted({str(x) for x in labels}):
        idx = np.flatnonzero(np.asarray([str(x) == cls for x in labels]))
        if len(idx) < folds:
            raise StratificationError(
                f"class {cls!r} has {len(idx)} rows, fewer than {folds} folds"
            )
        rng.shuffle(idx)
        assignment[idx] = np.arange(len(idx)) % folds
    return assignment


def confusion_matrix(true_labels, predicted, class_names) -> np.ndarray:
    index = {c: i for i, c in enumerate(class_names)}
    matrix = np.zeros((len(class_names), len(class_names)), dtype=int)
    for t, p in zip(true_labels, predicted):
        matrix[index[str(t)], index[str(p)]] += 1
    return matrix


def evaluate(model, rows, labels) -> tuple[float, np.ndarray]:
    """Accuracy percent and confusion matrix for a model with predict_rows.

    Rows = true class, columns = predicted class, both in the model's
    class order; accuracy is trace/total * 100.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] == 0:
        raise EvalError("empty test set")
    known = set(model.class_names)
    unknown = {str(x) for x in labels} - known
    if unknown:
        raise EvalError(f"test labels {sorted(unknown)} outside model classes")
    predicted = model.predict_rows(rows)
    matrix = confusion_matrix(labels, predicted, model.class_names)
    accuracy = 100.0 * np.trace(matrix) / matrix.sum()
    return float(accuracy), matrix
