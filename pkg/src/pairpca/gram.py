"""Assembly of the quadratic-form matrix ``Q = Z^T (diag(W 1) - W) Z``.

The accelerated paths work from per-class Gram matrices and column sums and
never touch an N x N array. ``gram_oracle`` evaluates the definition
literally from a dense weight matrix and is meant for verification only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .weights import (
    EffectiveBlockConstants,
    cross_pair_weight,
    row_sum_constants,
    target_pair_weight,
)


class GramError(ValueError):
    pass


@dataclass
class GramMatrix:
    """Symmetric d x d quadratic form split into a fixed and a kNN-dependent part."""

    constant: np.ndarray
    cross: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.cross is None:
            self.cross = np.zeros_like(self.constant)

    @property
    def q(self) -> np.ndarray:
        return self.constant + self.cross

    def with_cross(self, cross: np.ndarray) -> "GramMatrix":
        return GramMatrix(self.constant, cross)


def _values(data) -> np.ndarray:
    return np.asarray(getattr(data, "values", data), dtype=float)


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def supervised_part(X: np.ndarray, labels, d_eff: EffectiveBlockConstants) -> np.ndarray:
    """Class-block contribution of a labeled matrix ``X``."""
    labels = np.asarray(labels)
    d = X.shape[1]
    D = d_eff.matrix
    n = d_eff.classes.size
    w = row_sum_constants(d_eff)

    sums = np.empty((n, d))
    q = np.zeros((d, d))
    for p, cls in enumerate(d_eff.classes):
        block = X[labels == cls]
        if block.shape[0] != d_eff.counts[p]:
            raise GramError(
                f"class {cls!r} has {block.shape[0]} rows, weights expect {d_eff.counts[p]}"
            )
        sums[p] = block.sum(axis=0)
        # the self pair is excluded from the row sum, so it is also dropped from X^T W X
        q += (w[p] + D[p, p]) * (block.T @ block)
    if labels.size != int(d_eff.counts.sum()):
        raise GramError("labels contain classes absent from the weight constants")
    # sum_{p,r} D_pr s_p s_r^T
    q -= sums.T @ D @ sums
    return _symmetrize(q)


def uniform_part(Y: np.ndarray, pair_weight: float) -> np.ndarray:
    """Contribution of a block where every distinct pair has the same weight."""
    n = Y.shape[0]
    if n == 0 or pair_weight == 0.0:
        return np.zeros((Y.shape[1], Y.shape[1]))
    s = Y.sum(axis=0)
    return _symmetrize(pair_weight * (n * (Y.T @ Y) - np.outer(s, s)))


def _check_dims(source, target):
    if source.shape[1] != target.shape[1]:
        raise GramError(
            f"feature dimension mismatch: source {source.shape[1]}, target {target.shape[1]}"
        )


def gram_supervised(source, d_eff: EffectiveBlockConstants, labels=None) -> GramMatrix:
    """Quadratic form of supervised PCA on a labeled source."""
    if labels is None:
        labels = getattr(source, "labels", None)
    if labels is None:
        raise GramError("supervised assembly needs source labels")
    return GramMatrix(supervised_part(_values(source), labels, d_eff))


def gram_semi_supervised(source, target, d_eff, beta: float, labels=None) -> GramMatrix:
    """Supervised source blocks plus uniform repulsion ``beta`` inside the target."""
    X, Y = _values(source), _values(target)
    _check_dims(X, Y)
    g = gram_supervised(X, d_eff, labels if labels is not None else source.labels)
    return GramMatrix(g.constant + uniform_part(Y, target_pair_weight(beta, Y.shape[0])))


def mean_attraction_part(X: np.ndarray, Y: np.ndarray, phi: float) -> np.ndarray:
    if phi < 0:
        raise GramError("phi must be nonnegative")
    if phi == 0 or X.shape[0] == 0 or Y.shape[0] == 0:
        return np.zeros((X.shape[1], X.shape[1]))
    diff = X.mean(axis=0) - Y.mean(axis=0)
    return -phi * np.outer(diff, diff)


def gram_stca(source, target, d_eff, beta: float, phi: float, labels=None) -> GramMatrix:
    """Semi-supervised form minus ``phi`` times the outer product of the mean gap."""
    X, Y = _values(source), _values(target)
    g = gram_semi_supervised(source, target, d_eff, beta, labels)
    return GramMatrix(g.constant + mean_attraction_part(X, Y, phi))


def check_assignment(neighbors: np.ndarray, n_source: int, n_target: int) -> np.ndarray:
    nb = np.asarray(neighbors)
    if nb.ndim != 2 or nb.shape[0] != n_target:
        raise GramError(f"assignment must have shape ({n_target}, k), got {nb.shape}")
    if nb.size and (nb.min() < 0 or nb.max() >= n_source):
        raise GramError("neighbor index out of range")
    srt = np.sort(nb, axis=1)
    if np.any(srt[:, 1:] == srt[:, :-1]):
        raise GramError("duplicate neighbor within one target row")
    return nb.astype(np.intp)


def gram_cross_term(source, target, neighbors, gamma: float) -> np.ndarray:
    """Laplacian form of the target-to-source kNN attraction.

    ``neighbors[i]`` lists the k source rows matched to target row i. Every
    (source, target) pair carries weight ``-gamma / (k N_Y)``.
    """
    X, Y = _values(source), _values(target)
    _check_dims(X, Y)
    nb = check_assignment(neighbors, X.shape[0], Y.shape[0])
    d = X.shape[1]
    if gamma == 0 or Y.shape[0] == 0:
        return np.zeros((d, d))
    k = nb.shape[1]
    w = cross_pair_weight(gamma, k, Y.shape[0])
    counts = np.bincount(nb.ravel(), minlength=X.shape[0]).astype(float)
    # row i: sum of the k source neighbours of target row i
    nbr_sum = X[nb].sum(axis=1)
    xy = nbr_sum.T @ Y
    q = (X * counts[:, None]).T @ X + k * (Y.T @ Y) - xy - xy.T
    return _symmetrize(w * q)


# ---------------------------------------------------------------------------
# dense reference path


def gram_oracle(joined, dense_w) -> np.ndarray:
    """Evaluate ``sum_i (sum_r W_ir) z_i z_i^T - sum_ij W_ij z_i z_j^T`` directly."""
    Z = _values(joined)
    W = np.asarray(dense_w, dtype=float)
    if W.shape != (Z.shape[0], Z.shape[0]):
        raise GramError(f"weight matrix shape {W.shape} does not match {Z.shape[0]} rows")
    if not np.allclose(W, W.T, rtol=0, atol=1e-14 * max(1.0, np.abs(W).max())):
        raise GramError("weight matrix must be symmetric")
    row = W.sum(axis=1)
    return (Z * row[:, None]).T @ Z - Z.T @ W @ Z


def dense_weights(labels, n_target: int, d_eff: EffectiveBlockConstants,
                  beta: float = 0.0, neighbors=None, gamma: float = 0.0) -> np.ndarray:
    """Build the full (N_X + N_Y) square weight matrix entry by entry.

    Source rows come first, then target rows. The diagonal is zero.
    """
    labels = np.asarray(labels)
    nx = labels.size
    N = nx + n_target
    W = np.zeros((N, N))
    index = {c: p for p, c in enumerate(d_eff.classes)}
    cls = [index[l] for l in labels]
    for i in range(nx):
        for j in range(nx):
            if i != j:
                W[i, j] = d_eff.matrix[cls[i], cls[j]]
    if n_target > 1 and beta:
        wy = beta / (n_target * (n_target - 1.0))
        W[nx:, nx:] = wy
    if neighbors is not None and gamma:
        nb = np.asarray(neighbors)
        wc = -gamma / (nb.shape[1] * n_target)
        for i in range(n_target):
            for j in nb[i]:
                W[nx + i, j] = wc
                W[j, nx + i] = wc
    np.fill_diagonal(W, 0.0)
    return W
