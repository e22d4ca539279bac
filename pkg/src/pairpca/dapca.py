"""Model fitting: single-shot PCA variants and the iterative DAPCA loop."""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .dataset import Dataset
from .eigen import ProjectionModel, eig_sym, select_components
from .gram import (
    GramMatrix,
    gram_cross_term,
    gram_semi_supervised,
    gram_stca,
    gram_supervised,
    uniform_part,
)
from .weights import DeltaSpec, build_delta

logger = logging.getLogger(__name__)

METHODS = ("pca", "spca", "sspca", "stca", "dapca")


class FitError(ValueError):
    """Raised when a model cannot be fitted; ``stage`` names the failing step."""

    def __init__(self, message, stage="fit"):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class FitConfig:
    method: str = "dapca"
    q: int = 2
    delta: object = 1.0
    alpha: object = 1.0
    beta: float = 1.0
    gamma: float = 100.0
    phi: float = 0.0
    k: int = 5
    max_iterations: int = 30
    knn_space: str = "raw"
    objective_tol: float = 1e-9
    components: Optional[str] = None
    seed: Optional[int] = None

    @property
    def component_rule(self) -> str:
        """``"nonnegative"`` drops negative-eigenvalue components, ``"top"`` keeps exactly q.

        Unset means ``"top"`` for dapca, whose kNN attraction typically makes
        most of the spectrum negative, and ``"nonnegative"`` otherwise.
        """
        if self.components is not None:
            return self.components
        return "top" if self.method == "dapca" else "nonnegative"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise FitError(f"unknown method {self.method!r}; choose from {METHODS}", "config")
        if self.q < 1:
            raise FitError("q must be >= 1", "config")
        if self.k < 1:
            raise FitError("k must be >= 1", "config")
        if self.max_iterations < 1:
            raise FitError("max_iterations must be >= 1", "config")
        for name in ("beta", "gamma", "phi"):
            if getattr(self, name) < 0:
                raise FitError(f"{name} must be nonnegative", "config")
        if self.knn_space not in ("raw", "pca"):
            raise FitError("knn_space must be 'raw' or 'pca'", "config")
        if self.components not in (None, "nonnegative", "top"):
            raise FitError("components must be 'nonnegative' or 'top'", "config")

    @property
    def delta_spec(self) -> DeltaSpec:
        return DeltaSpec(self.delta, self.alpha)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("delta", "alpha"):
            v = out[key]
            out[key] = np.asarray(v).tolist() if not np.isscalar(v) else float(v)
        return out


@dataclass
class KnnAssignment:
    """Indices (ascending distance) and distances of the k source neighbours of each target row."""

    indices: np.ndarray
    distances: np.ndarray

    def digest(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.indices).tobytes()).hexdigest()


def knn_match(source_points, target_points, k: int, chunk: int = 256) -> KnnAssignment:
    """Exact Euclidean kNN of every target row among the source rows.

    Ties are resolved towards the lower source index.
    """
    X = np.asarray(source_points, dtype=float)
    Y = np.asarray(target_points, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise FitError("source and target must be 2D with equal width", "knn")
    if k > X.shape[0]:
        raise FitError(f"k={k} exceeds the {X.shape[0]} source points", "knn")
    if k < 1:
        raise FitError("k must be >= 1", "knn")
    idx = np.empty((Y.shape[0], k), dtype=np.intp)
    dist = np.empty((Y.shape[0], k))
    for start in range(0, Y.shape[0], chunk):
        block = Y[start:start + chunk]
        # explicit differences keep equal distances bit-identical for tie breaking
        d2 = ((block[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        idx[start:start + chunk] = order
        dist[start:start + chunk] = np.sqrt(np.take_along_axis(d2, order, axis=1))
    return KnnAssignment(idx, dist)


def objective(basis, gram) -> float:
    """Weighted pair scatter ``trace(E^T Q E)`` of the projection onto ``basis``."""
    q = np.asarray(getattr(gram, "q", gram))
    E = np.asarray(basis)
    return float(np.trace(E.T @ q @ E))


def _solve(gram: GramMatrix, config: FitConfig, stage: str):
    q = gram.q
    scale = np.abs(q).max()
    if scale == 0:
        raise FitError("quadratic form is identically zero; all pair weights vanish", stage)
    vals, vecs = eig_sym(q)
    if config.component_rule == "top":
        n = min(config.q, vals.size)
        return vals[:n], vecs[:, :n]
    try:
        return select_components(vals, vecs, config.q)
    except ValueError as exc:
        raise FitError(str(exc), stage) from exc


def _require_labels(source: Dataset, method: str):
    if source.labels is None:
        raise FitError(f"method {method!r} needs source labels", "input")


def _require_target(target, source, method):
    if target is None:
        raise FitError(f"method {method!r} needs a target dataset", "input")
    if target.n_features != source.n_features:
        raise FitError(
            f"source has {source.n_features} features, target {target.n_features}", "input"
        )


def _pca_basis(Z: np.ndarray, q: int) -> np.ndarray:
    vals, vecs = eig_sym(uniform_part(Z, 1.0))
    return select_components(vals, vecs, q)[1]


def constant_gram(source: Dataset, target: Optional[Dataset], config: FitConfig) -> GramMatrix:
    """The kNN-independent part of the quadratic form for ``config.method``."""
    method = config.method
    if method == "pca":
        Z = source.values if target is None else np.vstack([source.values, target.values])
        return GramMatrix(uniform_part(Z, 1.0))
    _require_labels(source, method)
    try:
        d_eff = build_delta(config.delta_spec, source.labels)
    except ValueError as exc:
        raise FitError(str(exc), "weights") from exc
    if method == "spca":
        return gram_supervised(source, d_eff)
    _require_target(target, source, method)
    if method == "sspca":
        return gram_semi_supervised(source, target, d_eff, config.beta)
    return gram_stca(source, target, d_eff, config.beta, config.phi)


def fit(source: Dataset, target: Optional[Dataset] = None,
        config: Optional[FitConfig] = None) -> ProjectionModel:
    """Fit a projection model.

    ``pca`` uses uniform weights over the source (and target, if given);
    ``spca``, ``sspca`` and ``stca`` solve one eigenproblem; ``dapca``
    alternates kNN matching in the current projection with re-solving the
    eigenproblem until the matching stops changing, the objective stalls,
    a matching repeats, or ``max_iterations`` is reached.
    """
    config = config or FitConfig()
    config.validate()
    const = constant_gram(source, target, config)
    if config.method != "dapca":
        lam, E = _solve(const, config, "eigen")
        return ProjectionModel(
            E, lam, config.method, config.to_dict(),
            {"objective": [float(lam.sum())], "iterations": 1, "knn_stable": None},
        )
    return _fit_dapca(source, target, config, const)


def _fit_dapca(source, target, config, const):
    X, Y = source.values, target.values
    if Y.shape[0] == 0 or config.gamma == 0:
        cross_needed = False
    else:
        cross_needed = True
    if cross_needed and config.k > X.shape[0]:
        raise FitError(f"k={config.k} exceeds the {X.shape[0]} source points", "knn")

    if config.knn_space == "pca":
        P = _pca_basis(np.vstack([X, Y]), config.q)
        assignment = knn_match(X @ P, Y @ P, config.k) if cross_needed else None
    else:
        assignment = knn_match(X, Y, config.k) if cross_needed else None

    trace = []
    iterates = []
    seen = set()
    stop_reason = "max_iterations"
    stable = False
    for it in range(1, config.max_iterations + 1):
        if assignment is not None:
            seen.add(assignment.digest())
            cross = gram_cross_term(X, Y, assignment.indices, config.gamma)
        else:
            cross = np.zeros_like(const.constant)
        gram = const.with_cross(cross)
        lam, E = _solve(gram, config, f"eigen (iteration {it})")
        h = objective(E, gram)
        trace.append(h)
        iterates.append((h, lam, E, assignment))
        logger.debug("dapca iteration %d: objective %.12g", it, h)

        if assignment is None:
            stop_reason, stable = "no-cross-term", True
            break
        new = knn_match(X @ E, Y @ E, config.k)
        if np.array_equal(new.indices, assignment.indices):
            stop_reason, stable = "assignments-stable", True
            break
        if it > 1:
            prev = trace[-2]
            if h - prev <= config.objective_tol * max(abs(prev), 1e-300):
                stop_reason = "objective-stalled"
                break
        if new.digest() in seen:
            stop_reason = "cycle"
            break
        assignment = new

    best = len(iterates) - 1
    if stop_reason == "cycle":
        best = int(np.argmax([t[0] for t in iterates]))
    h, lam, E, assignment = iterates[best]
    diagnostics = {
        "objective": trace,
        "iterations": len(trace),
        "knn_stable": stable,
        "stop_reason": stop_reason,
        "assignment": assignment,
    }
    diagnostics["n_negative_kept"] = int(np.sum(lam < 0))
    return ProjectionModel(E, lam, "dapca", config.to_dict(), diagnostics)
