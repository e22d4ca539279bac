"""Block-constant pair weights for the supervised, target and cross blocks.

The N x N weight matrix is never formed. Source weights depend only on the
class pair, so they reduce to an n x n matrix of effective constants; target
weights are a single constant; cross weights are a single constant applied to
the kNN pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class WeightSpecError(ValueError):
    pass


@dataclass
class DeltaSpec:
    """Class-pair repulsion and within-class attraction.

    ``between_class`` is either a scalar (same repulsion for every pair of
    classes), a 1D vector ``R`` of per-class positions giving
    ``delta_ij = |R_i - R_j|``, or a full symmetric n x n matrix whose diagonal
    is ignored. ``within_class_attraction`` is a nonnegative scalar or
    per-class vector; the minus sign is applied internally.
    """

    between_class: Union[float, np.ndarray] = 1.0
    within_class_attraction: Union[float, np.ndarray] = 1.0

    def repulsion_matrix(self, n_classes: int) -> np.ndarray:
        b = np.asarray(self.between_class, dtype=float)
        if b.ndim == 0:
            if b < 0:
                raise WeightSpecError("scalar repulsion must be nonnegative")
            delta = np.full((n_classes, n_classes), float(b))
        elif b.ndim == 1:
            if b.shape[0] != n_classes:
                raise WeightSpecError(
                    f"repulsion vector has {b.shape[0]} entries for {n_classes} classes"
                )
            delta = np.abs(b[:, None] - b[None, :])
        elif b.ndim == 2:
            if b.shape != (n_classes, n_classes):
                raise WeightSpecError(
                    f"repulsion matrix must be {n_classes}x{n_classes}, got {b.shape}"
                )
            if not np.allclose(b, b.T, rtol=0, atol=1e-12 * max(1.0, np.abs(b).max())):
                raise WeightSpecError("repulsion matrix must be symmetric")
            off = ~np.eye(n_classes, dtype=bool)
            if np.any(b[off] < 0):
                raise WeightSpecError("repulsion matrix off-diagonal entries must be >= 0")
            delta = b.copy()
        else:
            raise WeightSpecError("between_class must be scalar, vector or matrix")
        np.fill_diagonal(delta, 0.0)
        return delta

    def attraction_vector(self, n_classes: int) -> np.ndarray:
        a = np.asarray(self.within_class_attraction, dtype=float)
        if a.ndim == 0:
            a = np.full(n_classes, float(a))
        elif a.shape != (n_classes,):
            raise WeightSpecError(
                f"attraction vector has {a.shape[0]} entries for {n_classes} classes"
            )
        if np.any(a < 0):
            raise WeightSpecError("attraction magnitudes must be nonnegative")
        return a


@dataclass
class EffectiveBlockConstants:
    """Per class-pair weight ``D[p, r]`` shared by every observation pair.

    ``classes[p]`` is the label of block ``p``; ``counts[p]`` its size.
    """

    matrix: np.ndarray
    classes: np.ndarray
    counts: np.ndarray


def parse_delta(text: str) -> Union[float, np.ndarray]:
    """Parse a repulsion spec: ``"1.5"``, ``"1,2,4"`` or a path to a matrix CSV."""
    text = text.strip()
    if "," not in text:
        try:
            return float(text)
        except ValueError:
            pass
        try:
            mat = np.loadtxt(text, delimiter=",", ndmin=2)
        except OSError as exc:
            raise WeightSpecError(f"cannot read repulsion matrix {text!r}: {exc}") from exc
        return mat
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise WeightSpecError(f"bad repulsion vector {text!r}") from exc


def build_delta(spec: DeltaSpec, labels) -> EffectiveBlockConstants:
    """Normalize a :class:`DeltaSpec` by the class sizes.

    Between classes p != r the weight is ``delta_pr / (2 N_p N_r)``; within
    class r it is ``-alpha_r / (N_r (N_r - 1))``.
    """
    classes, counts = np.unique(np.asarray(labels), return_counts=True)
    if classes.size == 0:
        raise WeightSpecError("no labels given")
    small = classes[counts < 2]
    if small.size:
        raise WeightSpecError(f"classes with fewer than 2 members: {list(small)}")
    n = classes.size
    delta = spec.repulsion_matrix(n)
    alpha = spec.attraction_vector(n)
    nc = counts.astype(float)
    d_eff = delta / (2.0 * np.outer(nc, nc))
    np.fill_diagonal(d_eff, -alpha / (nc * (nc - 1.0)))
    return EffectiveBlockConstants(d_eff, classes, counts)


def row_sum_constants(d_eff: EffectiveBlockConstants) -> np.ndarray:
    """Row sum of the (zero-diagonal) weight matrix for one member of each class."""
    D = d_eff.matrix
    nc = d_eff.counts.astype(float)
    return D @ nc - np.diag(D)


def target_pair_weight(beta: float, n_target: int) -> float:
    """Uniform repulsion weight between two distinct target observations."""
    if beta < 0:
        raise WeightSpecError("beta must be nonnegative")
    if n_target < 2:
        return 0.0
    return beta / (n_target * (n_target - 1.0))


def cross_pair_weight(gamma: float, k: int, n_target: int) -> float:
    """Attraction weight between a target point and one of its k source neighbours."""
    if gamma < 0:
        raise WeightSpecError("gamma must be nonnegative")
    if k < 1:
        raise WeightSpecError("k must be >= 1")
    return -gamma / (k * n_target)
