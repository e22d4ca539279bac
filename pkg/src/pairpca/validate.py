"""Evaluation of fitted projections: balanced accuracy, direct and reverse
validation, domain-mixing score and the adaptation benefit ratio."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .dataset import Dataset
from .dapca import FitConfig, FitError, fit


@dataclass
class ValidationReport:
    balanced_accuracy: Optional[float] = None
    per_class_recall: dict = field(default_factory=dict)
    self_consistency: Optional[float] = None
    mixing_accuracy: Optional[float] = None
    mixing_accuracy_normalized: Optional[float] = None
    benefit_b: Optional[float] = None
    n_components: Optional[int] = None
    iterations: Optional[int] = None

    def as_row(self) -> dict:
        row = {k: v for k, v in asdict(self).items() if k != "per_class_recall"}
        for cls, r in sorted(self.per_class_recall.items()):
            row[f"recall_{cls}"] = r
        return row

    def to_text(self) -> str:
        return "".join(f"{k}={'' if v is None else v}\n" for k, v in self.as_row().items())


def per_class_recall(true_labels, predicted_labels) -> dict:
    t = np.asarray(true_labels)
    p = np.asarray(predicted_labels)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape[0]} true vs {p.shape[0]} predicted labels")
    if t.size == 0:
        raise ValueError("no labels")
    return {str(c): float(np.mean(p[t == c] == c)) for c in np.unique(t)}


def balanced_accuracy(true_labels, predicted_labels) -> float:
    """Mean over the true classes of the per-class recall."""
    return float(np.mean(list(per_class_recall(true_labels, predicted_labels).values())))


def _sorted_neighbors(train: np.ndarray, test: np.ndarray, k: int, exclude_self=False):
    """Indices of the k nearest train rows per test row; ties go to the lower index."""
    out = np.empty((test.shape[0], k), dtype=np.intp)
    for start in range(0, test.shape[0], 256):
        block = test[start:start + 256]
        d2 = ((block[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
        if exclude_self:
            rows = np.arange(block.shape[0])
            d2[rows, start + rows] = np.inf
        out[start:start + 256] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def knn_classify(train_points, train_labels, test_points, k: int = 5) -> np.ndarray:
    """Majority vote of the k Euclidean nearest training points.

    A tied vote goes to the tied class whose member is nearest; remaining
    ties (not reachable with distinct ranks) fall back to the lower label.
    """
    train = np.asarray(train_points, dtype=float)
    test = np.asarray(test_points, dtype=float)
    labels = np.asarray(train_labels)
    if k > train.shape[0]:
        raise ValueError(f"k={k} exceeds the {train.shape[0]} training points")
    classes, codes = np.unique(labels, return_inverse=True)
    nb_codes = codes[_sorted_neighbors(train, test, k)]
    pred = np.empty(test.shape[0], dtype=np.intp)
    for i, row in enumerate(nb_codes):
        votes = np.bincount(row, minlength=classes.size)
        tied = np.flatnonzero(votes == votes.max())
        if tied.size == 1:
            pred[i] = tied[0]
        else:
            pred[i] = next(c for c in row if c in tied)
    return classes[pred]


def _project_pair(model, source, target):
    return source.values @ model.basis, target.values @ model.basis


def direct_validate(source: Dataset, target: Dataset, hidden_target_labels,
                    config: FitConfig, classifier_k: int = 5) -> ValidationReport:
    """Fit, classify the projected target from the projected source, score against hidden labels."""
    model = fit(source, target, config)
    ps, pt = _project_pair(model, source, target)
    pred = knn_classify(ps, source.labels, pt, classifier_k)
    recalls = per_class_recall(hidden_target_labels, pred)
    return ValidationReport(
        balanced_accuracy=float(np.mean(list(recalls.values()))),
        per_class_recall=recalls,
        n_components=model.n_components,
        iterations=model.diagnostics.get("iterations"),
    )


def stratified_split(labels, fraction: float, seed: int):
    """Indices of a seeded per-class split; ``fraction`` of each class goes to the first part."""
    if not 0 < fraction < 1:
        raise ValueError("split fraction must be in (0, 1)")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    first, second = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        n_first = int(round(fraction * idx.size))
        if n_first < 2 or idx.size - n_first < 2:
            raise FitError(
                f"class {cls!r} ({idx.size} members) cannot give >= 2 members to both parts",
                "reverse-split",
            )
        first.append(idx[:n_first])
        second.append(idx[n_first:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def reverse_validate(source: Dataset, target: Dataset, config: FitConfig,
                     split_fraction: float = 0.5, classifier_k: int = 5, seed: int = 0) -> float:
    """Self-consistency of adaptation without target labels.

    The source is split into a training and a test part. Adapting the
    training part to the target yields pseudo-labels for the target; adapting
    the pseudo-labeled target back to the test part yields predictions for the
    test part, which are scored by balanced accuracy.
    """
    train_idx, test_idx = stratified_split(source.labels, split_fraction, seed)
    x_l = Dataset(source.values[train_idx], source.labels[train_idx])
    x_t = Dataset(source.values[test_idx], None)
    l_t = source.labels[test_idx]

    forward = fit(x_l, target, config)
    pl, py = _project_pair(forward, x_l, target)
    pseudo = knn_classify(pl, x_l.labels, py, classifier_k)
    classes, counts = np.unique(pseudo, return_counts=True)
    if classes.size < 2:
        raise FitError(
            f"forward step predicted a single class {classes[0]!r} for the target", "reverse"
        )
    if np.any(counts < 2):
        raise FitError(
            f"forward step predicted classes with < 2 members: {list(classes[counts < 2])}",
            "reverse",
        )

    y_src = Dataset(target.values, pseudo)
    backward = fit(y_src, x_t, config)
    pb, pt = _project_pair(backward, y_src, x_t)
    pred = knn_classify(pb, pseudo, pt, classifier_k)
    return balanced_accuracy(l_t, pred)


def _loo_vote_share(points: np.ndarray, codes: np.ndarray, nb: np.ndarray) -> float:
    return float(np.mean(codes[nb] == codes[:, None]))


def mixing_score(projected_source, projected_target, k: int = 20,
                 n_permutations: int = 20, seed: int = 0):
    """How well a leave-one-out kNN can tell the two domains apart.

    Each pooled point is scored by the share of its k nearest other points
    that come from its own domain; the accuracy is the mean share. The
    baseline is the same quantity under random permutations of the domain
    labels, and the normalized value is ``(acc - base) / (1 - base)``
    clipped to [-1, 1]. Values near 0 mean the domains are indistinguishable.
    """
    a = np.asarray(projected_source, dtype=float)
    b = np.asarray(projected_target, dtype=float)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("both point sets must be nonempty")
    pts = np.vstack([a, b])
    if k >= pts.shape[0]:
        raise ValueError(f"k={k} needs more than {pts.shape[0]} pooled points")
    codes = np.r_[np.zeros(a.shape[0], dtype=int), np.ones(b.shape[0], dtype=int)]
    nb = _sorted_neighbors(pts, pts, k, exclude_self=True)
    acc = _loo_vote_share(pts, codes, nb)

    rng = np.random.default_rng(seed)
    base = np.mean([_loo_vote_share(pts, rng.permutation(codes), nb)
                    for _ in range(max(1, n_permutations))])
    normalized = float(np.clip((acc - base) / (1.0 - base), -1.0, 1.0))
    return acc, normalized


def benefit(a_da: float, a_noda: float, a_top: float) -> float:
    """Fraction of the gap between no adaptation and the label-trained ceiling that adaptation recovers."""
    denom = a_top - a_noda
    if denom == 0:
        raise ZeroDivisionError("a_top equals a_noda; benefit is undefined")
    return (a_da - a_noda) / denom


def sweep(source, target, hidden_labels, base: FitConfig, alphas, gammas,
          classifier_k=5, split_fraction=0.5, seed=0, reverse=True):
    """Direct (and optionally reverse) validation over an alpha x gamma grid.

    Rows are returned in grid order, alpha outer.
    """
    rows = []
    for alpha in alphas:
        for gamma in gammas:
            cfg = replace(base, alpha=alpha, gamma=gamma)
            row = {"alpha": alpha, "gamma": gamma}
            if hidden_labels is not None:
                rep = direct_validate(source, target, hidden_labels, cfg, classifier_k)
                row["balanced_accuracy"] = rep.balanced_accuracy
                row["iterations"] = rep.iterations
            if reverse:
                try:
                    row["self_consistency"] = reverse_validate(
                        source, target, cfg, split_fraction, classifier_k, seed)
                except FitError as exc:
                    row["self_consistency"] = float("nan")
                    row["error"] = str(exc)
            rows.append(row)
    return rows


def write_rows(rows, path) -> None:
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in keys})
