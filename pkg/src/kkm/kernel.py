"""RBF kernel evaluation and the average-distance width heuristic."""
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix


@dataclass(frozen=True)
class DataMatrix:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = as_matrix(self.points, "points")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (pts.shape[0],):
                raise ValueError("labels must have one entry per point")
            object.__setattr__(self, "labels", labels.astype(int))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx)
        labels = None if self.labels is None else self.labels[idx]
        return DataMatrix(self.points[idx], labels)


@dataclass(frozen=True)
class KernelSpec:
    sigma: float
    family: str = "rbf"
    beta: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family != "rbf":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"kernel width must be positive, got {self.sigma}")

    @classmethod
    def from_data(cls, data, beta=1.0):
        return cls(sigma=sigma_heuristic(data, beta), beta=beta)


def sigma_heuristic(data, beta=1.0):
    """``beta * sqrt(mean over all ordered pairs of squared distance)``.

    Uses sum_ij |a_i - a_j|^2 = 2n sum_i |a_i|^2 - 2 |sum_i a_i|^2; the points are
    centred first, which leaves the value unchanged and avoids cancellation.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    a = data.points
    n = a.shape[0]
    if n < 2:
        raise ValueError("the width heuristic needs at least two points")
    a = a - a.mean(axis=0)
    total = 2.0 * n * np.sum(a * a) - 2.0 * np.sum(a.sum(axis=0) ** 2)
    return float(beta * np.sqrt(max(total, 0.0) / n**2))


def _column(points, j, gamma):
    diff = points - points[j]
    return np.exp(-gamma * np.einsum("ij,ij->i", diff, diff))


def kernel_columns(data, landmarks, spec):
    """Columns ``K[:, landmarks]`` without forming ``K``.

    Each column is computed independently from explicit differences, so any
    selection is bitwise equal to the same slice of :func:`kernel_matrix`.
    """
    idx = np.asarray(landmarks, dtype=int).ravel()
    n = data.n
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"landmark index out of range [0, {n})")
    gamma = 1.0 / (2.0 * spec.sigma**2)
    out = np.empty((n, idx.size))
    for col, j in enumerate(idx):
        out[:, col] = _column(data.points, j, gamma)
    return out


def kernel_matrix(data, spec):
    return kernel_columns(data, np.arange(data.n), spec)
