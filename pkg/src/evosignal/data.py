"""Labeled feature matrices and their CSV interchange format."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError


@dataclass
class FeatureDataset:
    """A labeled matrix of named scalar features, one row per window.

    ``rows`` is (n_rows, n_features) float64, ``labels`` holds one class
    identifier per row, and ``class_names`` is the sorted set of labels
    (fixing the canonical class order used by every classifier).
    """

    feature_names: list[str]
    rows: np.ndarray
    labels: np.ndarray
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.feature_names = list(self.feature_names)
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=object)
        if self.rows.ndim == 1:
            self.rows = self.rows.reshape(len(self.labels), -1)
        if self.rows.ndim != 2:
            raise SchemaError(f"rows must be 2-D, got shape {self.rows.shape}")
        if self.rows.shape[1] != len(self.feature_names):
            raise SchemaError(
                f"{len(self.feature_names)} feature names but rows have "
                f"{self.rows.shape[1]} columns"
            )
        if self.rows.shape[0] != len(self.labels):
            raise SchemaError("one label per row required")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise SchemaError("feature names must be unique")
        if self.rows.size and not np.all(np.isfinite(self.rows)):
            raise SchemaError("feature values must be finite (no NaN/Inf)")
        observed = sorted({str(x) for x in self.labels})
        if not self.class_names:
            self.class_names = observed
        else:
            self.class_names = list(self.class_names)
            missing = set(observed) - set(self.class_names)
            if missing:
                raise SchemaError(f"labels {sorted(missing)} not in class_names")

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def take(self, indices) -> "FeatureDataset":
        """Row subset/reorder; keeps the full class_names set."""
        idx = np.asarray(indices, dtype=int)
        return FeatureDataset(
            feature_names=list(self.feature_names),
            rows=self.rows[idx],
            labels=self.labels[idx],
            class_names=list(self.class_names),
        )

    def select_columns(self, indices) -> "FeatureDataset":
        idx = np.asarray(indices, dtype=int)
        return FeatureDataset(
            feature_names=[self.feature_names[i] for i in idx],
            rows=self.rows[:, idx],
            labels=self.labels.copy(),
            class_names=list(self.class_names),
        )

    @classmethod
    def concat(cls, parts: list["FeatureDataset"]) -> "FeatureDataset":
        if not parts:
            raise SchemaError("cannot concatenate zero datasets")
        names = parts[0].feature_names
        for p in parts[1:]:
            if p.feature_names != names:
                raise SchemaError("datasets have differing feature catalogs")
        return cls(
            feature_names=list(names),
            rows=np.vstack([p.rows for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureDataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.rows.shape == other.rows.shape
            and np.array_equal(self.rows, other.rows)
            and list(self.labels) == list(other.labels)
            and self.class_names == other.class_names
        )


def load_feature_csv(path) -> FeatureDataset:
    """Load a feature CSV: header row, exactly one `label` column, numeric cells."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        label_positions = [i for i, name in enumerate(header) if name == "label"]
        if len(label_positions) != 1:
            raise SchemaError(
                f"{path}: expected exactly one 'label' column, found {len(label_positions)}"
            )
        label_at = label_positions[0]
        names = [h for i, h in enumerate(header) if i != label_at]
        rows, labels = [], []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(f"{path}: expected {len(header)} cells", line=line_no)
            values = []
            for i, cell in enumerate(record):
                if i == label_at:
                    labels.append(cell)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric cell {cell!r}", line=line_no, column=header[i]
                    ) from None
            rows.append(values)
    matrix = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
    return FeatureDataset(feature_names=names, rows=matrix, labels=np.asarray(labels, dtype=object))


def write_feature_csv(dataset: FeatureDataset, path) -> None:
    """Write the symmetric CSV form; floats use repr so a round-trip is exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.feature_names) + ["label"])
        for row, label in zip(dataset.rows, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [str(label)])
