"""Linear k-means (k-means++ seeding + Lloyd) and k-means objectives."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix

MAX_ITER = 100
TOL = 1e-9


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray
    k: int
    iterations_run: int = 0
    converged: bool = True
    history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("assignments must be a non-empty 1-D sequence")
        if a.min() < 0 or a.max() >= self.k:
            raise ValueError(f"cluster ids must lie in [0, {self.k})")
        object.__setattr__(self, "assignments", a)

    @property
    def n(self):
        return self.assignments.size

    @property
    def objective(self):
        return self.history[-1] if self.history else None

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


def _rows(b):
    return as_matrix(getattr(b, "B", b), "features")


def kmeans_pp_init(b, k, seed=0):
    """k-means++ (D^2) seeding; returns a ``k x s`` array of distinct rows of ``b``."""
    x = _rows(b)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be positive")
    if k > n or k > np.unique(x, axis=0).shape[0]:
        raise ValueError(f"k={k} exceeds the number of distinct rows")
    rng = np.random.default_rng([seed, 7])
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return x[chosen].copy()


def _sq_dist(x, centroids):
    out = np.empty((x.shape[0], centroids.shape[0]))
    for j, mu in enumerate(centroids):
        diff = x - mu
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def _assign(x, centroids, n_jobs):
    """Nearest centroid per row, lowest index on ties; chunking never changes the result."""
    if n_jobs == 1 or x.shape[0] < 2 * n_jobs:
        d = _sq_dist(x, centroids)
    else:
        chunks = np.array_split(np.arange(x.shape[0]), n_jobs)
        with ThreadPoolExecutor(n_jobs) as pool:
            d = np.vstack(list(pool.map(lambda idx: _sq_dist(x[idx], centroids), chunks)))
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(x.shape[0]), labels]


def _centroids(x, labels, k):
    out = np.zeros((k, x.shape[1]))
    for j in range(k):
        out[j] = x[labels == j].mean(axis=0)
    return out


def _repair_empty(labels, dist, k):
    labels = labels.copy()
    dist = dist.copy()
    for j in range(k):
        sizes = np.bincount(labels, minlength=k)
        if sizes[j]:
            continue
        candidates = np.flatnonzero(sizes[labels] >= 2)
        far = candidates[np.argmax(dist[candidates])]
        labels[far] = j
        dist[far] = 0.0
    return labels


def lloyd(b, k, init, max_iter=MAX_ITER, tol=TOL, n_jobs=1):
    """Lloyd iterations from the given centroids.

    Stops when assignments repeat, the relative objective decrease falls below
    ``tol``, or after ``max_iter`` iterations. An empty cluster receives the point
    farthest from its centroid.
    """
    x = _rows(b)
    n = x.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    centroids = as_matrix(init, "init")
    if centroids.shape != (k, x.shape[1]):
        raise ValueError(f"init must have shape {(k, x.shape[1])}")
    labels = None
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new_labels, dist = _assign(x, centroids, n_jobs)
        new_labels = _repair_empty(new_labels, dist, k)
        centroids = _centroids(x, new_labels, k)
        obj = float(np.sum((x - centroids[new_labels]) ** 2)) / n
        unchanged = labels is not None and np.array_equal(new_labels, labels)
        small = bool(history) and history[-1] - obj <= tol * max(history[-1], np.finfo(float).tiny)
        labels = new_labels
        history.append(obj)
        if unchanged or small or obj == 0.0:
            converged = True
            break
    return Clustering(labels, k, it, converged, tuple(history))


def kmeans(b, k, seed=0, restarts=1, max_iter=MAX_ITER, tol=TOL, n_jobs=1):
    """k-means++ seeding + Lloyd, best of ``restarts`` seeded runs."""
    best = None
    for r in range(restarts):
        init = kmeans_pp_init(b, k, seed=seed + 7919 * r)
        result = lloyd(b, k, init, max_iter=max_iter, tol=tol, n_jobs=n_jobs)
        if best is None or result.objective < best.objective:
            best = result
    return best


def indicator_matrix(clustering):
    """Cluster indicator matrix with ``1/sqrt(|J_j|)`` in column ``j`` of members of ``J_j``."""
    sizes = clustering.sizes()
    if np.any(sizes == 0):
        raise ValueError("indicator matrix is undefined with empty clusters")
    x = np.zeros((clustering.n, clustering.k))
    a = clustering.assignments
    x[np.arange(clustering.n), a] = 1.0 / np.sqrt(sizes[a])
    return x


def _labels(clustering):
    return clustering.assignments if isinstance(clustering, Clustering) else np.asarray(clustering, dtype=int)


def linear_objective(b, clustering):
    """``(1/n) sum_i sum_{j in J_i} |b_j - centroid(J_i)|^2``."""
    x = _rows(b)
    labels = _labels(clustering)
    if labels.size != x.shape[0]:
        raise ValueError("clustering and matrix sizes differ")
    total = 0.0
    for j in np.unique(labels):
        members = x[labels == j]
        total += np.sum((members - members.mean(axis=0)) ** 2)
    return float(total / x.shape[0])


def projection_objective(b, clustering):
    """``(1/n) ||B - X X^T B||_F^2`` with ``X`` the indicator matrix."""
    x = _rows(b)
    ind = indicator_matrix(clustering)
    resid = x - ind @ (ind.T @ x)
    return float(np.sum(resid * resid) / x.shape[0])


def kernel_objective(k, clustering, mode="feature"):
    """Kernel k-means cost from ``K`` alone.

    ``feature`` evaluates the feature-space objective through kernel entries;
    ``column`` runs the linear objective with the columns of ``K`` as points.
    """
    k = as_matrix(k, "K")
    if k.shape[0] != k.shape[1]:
        raise ValueError("K must be square")
    labels = _labels(clustering)
    n = k.shape[0]
    if labels.size != n:
        raise ValueError("clustering and K sizes differ")
    if mode == "column":
        return linear_objective(k.T, labels)
    if mode != "feature":
        raise ValueError(f"unknown objective mode {mode!r}")
    total = float(np.trace(k))
    for j in np.unique(labels):
        idx = np.flatnonzero(labels == j)
        total -= k[np.ix_(idx, idx)].sum() / idx.size
    return total / n
