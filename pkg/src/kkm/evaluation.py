"""Clustering metrics, exact small-instance oracles and verification harnesses."""
import math
from dataclasses import dataclass

import numpy as np

from .approx import nystrom_from_kernel, rank_restricted_approx, trace_error_ratio
from .cluster import Clustering, indicator_matrix
from .linalg import as_matrix, psd_sqrt, random_orthonormal, sym_evd
from .sketch import SketchPlan, build_sketch, leverage_plan

BRUTE_FORCE_MAX_N = 14
EPS_GRID = (0.1, 0.25, 0.5, 1.0)


def _entropy(p):
    p = np.sort(p[p > 0])
    return float(-np.sum(p * np.log(p)))


def nmi(a, b):
    """Normalised mutual information ``I(a;b) / sqrt(H(a) H(b))`` (natural log).

    Returns 0 whenever either labelling has zero entropy.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label sequences must be 1-D and of equal length")
    n = a.size
    if n == 0:
        raise ValueError("need at least one label")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    # sorted sums make the result exactly symmetric and invariant to relabelling
    ha = _entropy(table.sum(axis=1) / n)
    hb = _entropy(table.sum(axis=0) / n)
    if ha <= 0 or hb <= 0:
        return 0.0
    pij = np.sort(table[table > 0] / n)
    mi = float(np.sum(pij * np.log(pij))) + (ha + hb)
    value = max(mi, 0.0) / math.sqrt(ha * hb)
    return min(value, 1.0)


@dataclass(frozen=True)
class PcpReport:
    alpha: float
    lower_violations: int
    upper_violations: int
    trials: int
    epsilon_used: float
    k: int
    s: int
    max_lower_gap: float = 0.0
    max_upper_gap: float = 0.0


def _frobenius_tail(x, frame):
    """``||(I - F F^T) X||_F^2`` for an orthonormal frame ``F``."""
    resid = x - frame @ (frame.T @ x)
    return float(np.sum(resid * resid))


def pcp_check(k, features, num_clusters, trials=200, seed=0, epsilon=None, partitions=10, tol=1e-7):
    """Check the projection-cost sandwich for ``B`` against ``K^{1/2}``.

    For random rank-k frames and indicator projections of random partitions,
    counts violations of
    ``||(I-Pi)K^{1/2}||^2 <= ||(I-Pi)B||^2 + alpha <= (1+eps+k/s)||(I-Pi)K^{1/2}||^2``
    with ``alpha = trace(K - B B^T)``. ``eps`` defaults to the measured trace
    ratio minus one.
    """
    k = as_matrix(k, "K")
    b = as_matrix(getattr(features, "B", features), "B")
    n, s = b.shape
    if k.shape != (n, n):
        raise ValueError("K and B disagree on n")
    scale = float(np.trace(k))
    gap = sym_evd(k - b @ b.T).values.min() if n else 0.0
    if gap < -tol * max(scale, 1e-300):
        raise ValueError(f"B B^T exceeds K (min eigenvalue of K - B B^T is {gap:.3e})")
    alpha = scale - float(np.sum(b * b))
    if epsilon is None:
        epsilon = trace_error_ratio(k, b @ b.T, s) - 1.0
    bound = 1.0 + epsilon + num_clusters / s
    root = psd_sqrt(k)
    rng = np.random.default_rng([seed, 31])
    frames = [random_orthonormal(n, num_clusters, rng) for _ in range(trials)]
    for _ in range(partitions):
        labels = np.concatenate([np.arange(num_clusters), rng.integers(0, num_clusters, n - num_clusters)])
        frames.append(indicator_matrix(Clustering(rng.permutation(labels), num_clusters)))
    lower = upper = 0
    worst_lower = worst_upper = -math.inf
    slack = tol * scale
    for f in frames:
        exact = _frobenius_tail(root, f)
        sketched = _frobenius_tail(b, f) + alpha
        worst_lower = max(worst_lower, exact - sketched)
        worst_upper = max(worst_upper, sketched - bound * exact)
        lower += exact > sketched + slack
        upper += sketched > bound * exact + slack
    return PcpReport(alpha, int(lower), int(upper), len(frames), float(epsilon), num_clusters, s,
                     float(worst_lower), float(worst_upper))


def brute_force_kmeans(b, k):
    """Exact k-means minimum by branch-and-bound over set partitions (n <= 14).

    Returns ``(objective, labels)`` with the objective normalised by ``1/n``.
    """
    x = as_matrix(getattr(b, "B", b))
    n, d = x.shape
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}")
    counts = np.zeros(k)
    sums = np.zeros((k, d))
    labels = np.zeros(n, dtype=int)
    best = [math.inf, None]

    def visit(i, used, cost):
        if cost >= best[0]:
            return
        if n - i < k - used:
            return
        if i == n:
            best[0], best[1] = cost, labels.copy()
            return
        xi = x[i]
        for j in range(min(used + 1, k)):
            m = counts[j]
            delta = 0.0 if m == 0 else m / (m + 1) * float(np.sum((xi - sums[j] / m) ** 2))
            counts[j] += 1
            sums[j] += xi
            labels[i] = j
            visit(i + 1, max(used, j + 1), cost + delta)
            counts[j] -= 1
            sums[j] -= xi

    visit(0, 0, 0.0)
    return best[0] / n, best[1]


def brute_force_kernel_kmeans(k, num_clusters):
    """Exact kernel k-means minimum via the rows of ``K^{1/2}``."""
    return brute_force_kmeans(psd_sqrt(k), num_clusters)


def synthetic_spsd(eigenvalues, seed=0):
    """``Q diag(eigenvalues) Q^T`` with Haar-random ``Q``."""
    lam = np.asarray(eigenvalues, dtype=float)
    q = random_orthonormal(lam.size, lam.size, np.random.default_rng([seed, 41]))
    k = (q * lam) @ q.T
    return 0.5 * (k + k.T)


def spectrum(profile, n):
    """Named eigenvalue profiles: ``power`` (i^-2) and ``exp`` (0.7^i), i = 1..n."""
    i = np.arange(1, n + 1, dtype=float)
    if profile == "power":
        return i**-2.0
    if profile == "exp":
        return 0.7**i
    raise ValueError(f"unknown spectrum profile {profile!r}")


def sketch_for(kind, k, s, c, seed):
    """Sketch of size ``c`` for ``K``; leverage sampling uses the scores of ``V_s``."""
    n = k.shape[0]
    if kind == "leverage":
        return build_sketch(leverage_plan(sym_evd(k).vectors[:, :s], c, seed))
    return build_sketch(SketchPlan(kind, n, c, seed))


def theorem1_sweep(eigenvalues, s, kinds, c_grid, seeds, eps_grid=EPS_GRID, matrix_seed=0):
    """Trace-error ratios of ``(C W^+ C^T)_s`` over kinds, sketch sizes and seeds.

    Returns one row per (kind, c) with the success fraction for each eps.
    """
    k = synthetic_spsd(eigenvalues, seed=matrix_seed)
    rows = []
    for kind in kinds:
        for c in c_grid:
            ratios = np.array([
                trace_error_ratio(k, rank_restricted_approx(nystrom_from_kernel(k, sketch_for(kind, k, s, c, sd)), s), s)
                for sd in seeds
            ])
            row = {"kind": kind, "c": int(c), "n": k.shape[0], "s": s, "trials": len(ratios),
                   "mean_ratio": float(ratios.mean()), "max_ratio": float(ratios.max()),
                   "min_ratio": float(ratios.min())}
            for eps in eps_grid:
                row[f"frac_le_{eps:g}"] = float(np.mean(ratios <= 1.0 + eps))
            rows.append(row)
    return rows
