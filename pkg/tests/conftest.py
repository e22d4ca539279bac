import numpy as np
import pytest


def pairwise_objective(Z, W, E):
    """0.5 * sum_ij W_ij ||E^T (z_i - z_j)||^2 evaluated pair by pair (vectorized over j)."""
    P = Z @ E
    total = 0.0
    for i in range(Z.shape[0]):
        diff = P[i] - P
        total += W[i] @ np.einsum("ij,ij->i", diff, diff)
    return 0.5 * total


def dense_w_from_rules(labels, n_target, delta, alpha, beta=0.0, neighbors=None, gamma=0.0):
    """Weight matrix written straight from the pair rules, no shared helpers.

    Source rows first, then target rows. ``delta`` is a full class matrix,
    ``alpha`` a per-class vector, both indexed by sorted unique label.
    """
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    size = {c: int(np.sum(labels == c)) for c in classes}
    pos = {c: i for i, c in enumerate(classes)}
    nx = labels.size
    N = nx + n_target
    W = np.zeros((N, N))
    for i in range(nx):
        for j in range(nx):
            if i == j:
                continue
            p, r = labels[i], labels[j]
            if p == r:
                W[i, j] = -alpha[pos[p]] / (size[p] * (size[p] - 1))
            else:
                W[i, j] = delta[pos[p], pos[r]] / (2 * size[p] * size[r])
    for i in range(nx, N):
        for j in range(nx, N):
            if i != j:
                W[i, j] = beta / (n_target * (n_target - 1))
    if neighbors is not None:
        k = len(neighbors[0])
        for i, row in enumerate(neighbors):
            for j in row:
                W[nx + i, j] = -gamma / (k * n_target)
                W[j, nx + i] = -gamma / (k * n_target)
    return W


def random_instance(rng, n_max=200, d_max=15, c_max=5):
    """Random labeled source, target, repulsion matrix, attraction vector and kNN lists."""
    n_classes = int(rng.integers(1, c_max + 1))
    d = int(rng.integers(1, d_max + 1))
    n_x = int(rng.integers(2 * n_classes + 2, max(2 * n_classes + 3, n_max // 2)))
    labels = np.concatenate([np.arange(n_classes).repeat(2),
                             rng.integers(0, n_classes, n_x - 2 * n_classes)])
    rng.shuffle(labels)
    labels = np.array([f"c{l}" for l in labels])
    n_y = int(rng.integers(2, max(3, n_max - n_x)))
    scale = rng.uniform(0.1, 10.0)
    X = rng.normal(size=(n_x, d)) * scale + rng.normal(size=d) * 3
    Y = rng.normal(size=(n_y, d)) * scale + rng.normal(size=d) * 3
    delta = rng.uniform(0, 5, size=(n_classes, n_classes))
    delta = delta + delta.T
    alpha = rng.uniform(0, 5, size=n_classes)
    k = int(rng.integers(1, min(6, n_x) + 1))
    neighbors = np.array([rng.choice(n_x, size=k, replace=False) for _ in range(n_y)])
    return dict(X=X, Y=Y, labels=labels, delta=delta, alpha=alpha,
                beta=float(rng.uniform(0, 5)), gamma=float(rng.uniform(0, 50)),
                phi=float(rng.uniform(0, 20)), neighbors=neighbors)


def rel_err(a, b):
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-300)
    return np.abs(a - b).max() / scale


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
