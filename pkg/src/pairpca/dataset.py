"""Data container, CSV persistence and the synthetic 3D toy benchmark."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass
class Dataset:
    """Dense observation matrix with optional per-row class labels.

    Parameters
    ----------
    values : ndarray, shape (n_samples, n_features)
    labels : ndarray of str, shape (n_samples,), optional
    feature_names : list of str, optional
    """

    values: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: Optional[list] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1) if values.size else values.reshape(0, 0)
        if values.ndim != 2:
            raise DataError(f"values must be 2D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("values contain non-finite entries")
        self.values = values
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (values.shape[0],):
                raise DataError(
                    f"expected {values.shape[0]} labels, got {labels.shape[0] if labels.ndim else 0}"
                )
            self.labels = labels
        if self.feature_names is not None:
            names = [str(n) for n in self.feature_names]
            if len(names) != values.shape[1]:
                raise DataError(
                    f"expected {values.shape[1]} feature names, got {len(names)}"
                )
            self.feature_names = names

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def classes(self) -> np.ndarray:
        if self.labels is None:
            raise DataError("dataset has no labels")
        return np.unique(self.labels)


def _label_index(header, label_column, n_cols):
    if label_column is None:
        return None
    if isinstance(label_column, int) or (
        isinstance(label_column, str) and label_column.isdigit() and
        (header is None or label_column not in header)
    ):
        idx = int(label_column)
        if not 0 <= idx < n_cols:
            raise DataError(f"label column index {idx} out of range (0..{n_cols - 1})")
        return idx
    if header is None or label_column not in header:
        raise DataError(f"label column {label_column!r} not found in header")
    return header.index(label_column)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: Union[str, int, None] = None) -> Dataset:
    """Read a comma-separated table into a :class:`Dataset`.

    A header row is detected when any of its cells is non-numeric. The label
    column can be given by header name or zero-based index.
    """
    if not os.path.isfile(path):
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"empty table: {path}")

    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"empty table: {path}")

    n_cols = len(header) if header is not None else len(rows[0])
    lab = _label_index(header, label_column, n_cols)
    feat_cols = [j for j in range(n_cols) if j != lab]

    values = np.empty((len(rows), len(feat_cols)))
    labels = []
    for i, row in enumerate(rows):
        line = i + (2 if header is not None else 1)
        if len(row) != n_cols:
            raise DataError(f"{path}: row {line} has {len(row)} cells, expected {n_cols}")
        for out_j, j in enumerate(feat_cols):
            try:
                values[i, out_j] = float(row[j])
            except ValueError:
                col = header[j] if header is not None else j
                raise DataError(
                    f"{path}: non-numeric value {row[j]!r} at row {line}, column {col}"
                ) from None
        if lab is not None:
            labels.append(row[lab].strip())

    names = [header[j] for j in feat_cols] if header is not None else None
    return Dataset(values, np.array(labels) if lab is not None else None, names)


def save_csv(dataset: Dataset, path, label_name: str = "label") -> None:
    """Write ``dataset`` as CSV with round-trip float precision.

    Labels, when present, go to a trailing column. A header is written when
    feature names or labels exist.
    """
    names = dataset.feature_names
    if names is None and dataset.labels is not None:
        names = [f"x{j}" for j in range(dataset.n_features)]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if names is not None:
                writer.writerow(list(names) + ([label_name] if dataset.labels is not None else []))
            for i, row in enumerate(dataset.values):
                cells = [repr(float(v)) for v in row]
                if dataset.labels is not None:
                    cells.append(str(dataset.labels[i]))
                writer.writerow(cells)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def center(dataset: Dataset):
    """Subtract column means. Returns the centered dataset and the mean vector."""
    mean = dataset.values.mean(axis=0)
    return Dataset(dataset.values - mean, dataset.labels, dataset.feature_names), mean


@dataclass
class ToyConfig:
    """Parameters of the two-class 3D shifted-Gaussian benchmark.

    The target replicates the source law, then shifts each class along the
    second coordinate, scales the variance of class 2 and changes the class
    balance.
    """

    seed: int = 42
    n_source_class1: int = 400
    n_source_class2: int = 200
    n_target_class1: int = 400
    n_target_class2: int = 40
    class_means: Sequence = ((0.0, 0.0, 0.0), (4.0, 0.0, 0.0))
    shared_covariance_diagonal: Sequence = (1.0, 1.0, 4.0)
    target_shift_class1: float = 3.0
    target_shift_class2: float = 6.0
    target_variance_scale_class2: float = 2.0

    def validate(self) -> None:
        counts = (self.n_source_class1, self.n_source_class2,
                  self.n_target_class1, self.n_target_class2)
        if any(int(c) < 2 for c in counts):
            raise DataError("all class counts must be >= 2")
        means = np.asarray(self.class_means, dtype=float)
        if means.shape != (2, 3):
            raise DataError("class_means must be two 3-vectors")
        cov = np.asarray(self.shared_covariance_diagonal, dtype=float)
        if cov.shape != (3,) or np.any(cov <= 0):
            raise DataError("shared_covariance_diagonal must be three positive numbers")
        if self.target_variance_scale_class2 <= 0:
            raise DataError("target_variance_scale_class2 must be positive")


FEATURES_3D = ["x1", "x2", "x3"]


def generate_toy(config: ToyConfig = None):
    """Sample the toy benchmark.

    Returns
    -------
    source : Dataset
        Labeled source domain, labels "1" and "2".
    target : Dataset
        Unlabeled target domain.
    target_labels : ndarray of str
        Hidden target labels, for validation only.
    """
    config = config or ToyConfig()
    config.validate()
    rng = np.random.default_rng(config.seed)
    means = np.asarray(config.class_means, dtype=float)
    sd = np.sqrt(np.asarray(config.shared_covariance_diagonal, dtype=float))

    def draw(n, mean, scale):
        return mean + rng.standard_normal((n, 3)) * sd * scale

    n_s = (int(config.n_source_class1), int(config.n_source_class2))
    n_t = (int(config.n_target_class1), int(config.n_target_class2))
    shifts = (config.target_shift_class1, config.target_shift_class2)
    scales = (1.0, np.sqrt(config.target_variance_scale_class2))

    src = np.vstack([draw(n_s[c], means[c], 1.0) for c in range(2)])
    src_labels = np.repeat(["1", "2"], n_s)

    tgt_parts = []
    for c in range(2):
        part = draw(n_t[c], means[c], scales[c])
        part[:, 1] += shifts[c]
        tgt_parts.append(part)
    tgt = np.vstack(tgt_parts)
    tgt_labels = np.repeat(["1", "2"], n_t)

    return (
        Dataset(src, src_labels, list(FEATURES_3D)),
        Dataset(tgt, None, list(FEATURES_3D)),
        tgt_labels,
    )
