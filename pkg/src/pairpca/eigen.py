"""Symmetric eigendecomposition, component selection and projection."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

ZERO_TOL = 1e-12


class ComponentSelectionError(ValueError):
    """No eigenvalue of the quadratic form is nonnegative."""


class TruncationWarning(UserWarning):
    pass


@dataclass
class ProjectionModel:
    basis: np.ndarray
    eigenvalues: np.ndarray
    method: str
    fit_config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]

    def transform(self, data) -> np.ndarray:
        return project(self, data)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eig_sym(q) -> tuple:
    """Full spectrum of a symmetric matrix, eigenvalues in descending order.

    Each eigenvector is signed so its largest-magnitude entry is positive
    (first such entry on ties).
    """
    q = np.asarray(getattr(q, "q", q), dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("matrix has non-finite entries")
    vals, vecs = scipy.linalg.eigh(0.5 * (q + q.T))
    order = np.argsort(vals, kind="stable")[::-1]
    return vals[order], _fix_signs(vecs[:, order])


def n_nonnegative(eigenvalues, tol: float = ZERO_TOL) -> int:
    vals = np.asarray(eigenvalues, dtype=float)
    if vals.size == 0:
        return 0
    lam_max = vals.max()
    if lam_max < 0:
        return 0
    return int(np.sum(vals >= -tol * lam_max))


def select_components(eigenvalues, eigenvectors, q_requested: int, tol: float = ZERO_TOL):
    """Keep at most ``q_requested`` leading components with nonnegative eigenvalue.

    Components with negative eigenvalues cannot increase the objective and
    are dropped; a :class:`TruncationWarning` is issued when that reduces the
    count. Zero is judged relative to the largest eigenvalue.
    """
    if q_requested < 1:
        raise ValueError("q_requested must be >= 1")
    n_ok = n_nonnegative(eigenvalues, tol)
    if n_ok == 0:
        raise ComponentSelectionError(
            "the quadratic form has no nonnegative eigenvalues; "
            "attraction dominates every direction"
        )
    q = min(q_requested, n_ok, len(eigenvalues))
    if q < q_requested:
        warnings.warn(
            f"kept {q} of {q_requested} requested components "
            f"({q_requested - q} dropped: negative eigenvalue or dimension limit)",
            TruncationWarning,
            stacklevel=2,
        )
    return np.asarray(eigenvalues)[:q], np.asarray(eigenvectors)[:, :q]


def project(model: ProjectionModel, data) -> np.ndarray:
    X = np.asarray(getattr(data, "values", data), dtype=float)
    if X.ndim != 2 or X.shape[1] != model.basis.shape[0]:
        raise ValueError(
            f"data has {X.shape[-1]} features, model expects {model.basis.shape[0]}"
        )
    return X @ model.basis


# ---------------------------------------------------------------------------
# persistence: "key=value" metadata lines, a "basis" marker, then basis rows


def save_model(model: ProjectionModel, path) -> None:
    meta = {
        "method": model.method,
        "n_features": model.basis.shape[0],
        "n_components": model.basis.shape[1],
        "eigenvalues": ",".join(repr(float(v)) for v in model.eigenvalues),
        "fit_config": json.dumps(model.fit_config, sort_keys=True, default=str),
        "iterations": model.diagnostics.get("iterations", 1),
    }
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")
        fh.write("basis\n")
        for row in model.basis:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_model(path) -> ProjectionModel:
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        lines = iter(fh.read().splitlines())
        for line in lines:
            if line == "basis":
                break
            key, _, value = line.partition("=")
            meta[key] = value
        for line in lines:
            if line.strip():
                rows.append([float(v) for v in line.split(",")])
    basis = np.array(rows, dtype=float).reshape(int(meta["n_features"]), int(meta["n_components"]))
    eig = np.array([float(v) for v in meta["eigenvalues"].split(",") if v], dtype=float)
    return ProjectionModel(
        basis=basis,
        eigenvalues=eig,
        method=meta["method"],
        fit_config=json.loads(meta.get("fit_config", "{}")),
        diagnostics={"iterations": int(meta.get("iterations", 1))},
    )
