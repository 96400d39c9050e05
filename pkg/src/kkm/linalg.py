"""Dense linear algebra primitives shared by the rest of the package.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Every public
function validates its input with :func:`as_matrix` so NaN/Inf never enter a
decomposition silently.
"""
from dataclasses import dataclass

import numpy as np

EPS = np.finfo(float).eps


class NotSPSDError(ValueError):
    """Raised when a nominally SPSD matrix has a significantly negative eigenvalue."""


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf")
    return m


def _check_square(m, name):
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")


def _check_symmetric(m, name, rtol=1e-8):
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > rtol * max(scale, np.finfo(float).tiny):
        raise ValueError(f"{name} is not symmetric within relative tolerance {rtol}")


def fix_signs(vectors):
    """Flip columns so the first entry with non-negligible magnitude is positive.

    Makes singular/eigen vectors reproducible across LAPACK builds.
    """
    v = np.array(vectors, dtype=float, copy=True)
    if v.size == 0:
        return v
    tol = 1e-12 * max(np.abs(v).max(), np.finfo(float).tiny)
    for j in range(v.shape[1]):
        nz = np.flatnonzero(np.abs(v[:, j]) > tol)
        if nz.size and v[nz[0], j] < 0:
            v[:, j] = -v[:, j]
    return v


@dataclass(frozen=True)
class EigDecomposition:
    vectors: np.ndarray
    values: np.ndarray

    def truncate(self, s):
        return EigDecomposition(self.vectors[:, :s], self.values[:s])

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


@dataclass(frozen=True)
class LeverageProfile:
    scores: np.ndarray
    coherence: float
    rank: int


def sym_evd(m):
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    m = as_matrix(m)
    _check_square(m, "sym_evd input")
    _check_symmetric(m, "sym_evd input")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(vals)[::-1]
    return EigDecomposition(fix_signs(vecs[:, order]), vals[order])


def truncated_svd(a, s):
    """Rank-``s`` truncated SVD ``(U_s, sigma_s, V_s)`` with ``A_s = U_s diag(sigma_s) V_s^T``."""
    a = as_matrix(a)
    if not 1 <= s <= min(a.shape):
        raise ValueError(f"s={s} outside [1, {min(a.shape)}]")
    u, sig, vt = np.linalg.svd(a, full_matrices=False)
    u = u[:, :s]
    v = vt[:s].T
    # align signs on V and carry the flip to U so the product is unchanged
    flip = np.sign(np.sum(fix_signs(v) * v, axis=0))
    flip[flip == 0] = 1.0
    return u * flip, sig[:s], v * flip


def pinv(m, rel_tol=None):
    """Moore-Penrose inverse; singular values below ``rel_tol * sigma_max`` are dropped.

    The default ``rel_tol`` is ``max(rows, cols) * machine epsilon``.
    """
    m = as_matrix(m)
    if rel_tol is None:
        rel_tol = max(m.shape) * EPS
    if rel_tol < 0:
        raise ValueError("rel_tol must be non-negative")
    if m.size == 0:
        return np.zeros(m.shape[::-1])
    u, sig, vt = np.linalg.svd(m, full_matrices=False)
    if sig.size == 0 or sig[0] == 0:
        return np.zeros(m.shape[::-1])
    keep = sig > rel_tol * sig[0]
    return (vt[keep].T / sig[keep]) @ u[:, keep].T


def norm(a, kind="frobenius"):
    a = as_matrix(a)
    if kind == "frobenius":
        return float(np.sqrt(np.sum(a * a)))
    if a.size == 0:
        return 0.0
    sig = np.linalg.svd(a, compute_uv=False)
    if kind == "spectral":
        return float(sig[0]) if sig.size else 0.0
    if kind == "trace":
        return float(np.sum(sig))
    raise ValueError(f"unknown norm kind {kind!r}")


def numerical_rank(sig, shape):
    if sig.size == 0 or sig[0] == 0:
        return 0
    return int(np.sum(sig > max(shape) * EPS * sig[0]))


def leverage_profile(a):
    """Row leverage scores and row coherence of ``a``."""
    a = as_matrix(a)
    u, sig, _ = np.linalg.svd(a, full_matrices=False)
    rho = numerical_rank(sig, a.shape)
    if rho == 0:
        raise ValueError("leverage scores are undefined for the zero matrix")
    scores = np.sum(u[:, :rho] ** 2, axis=1)
    n = a.shape[0]
    return LeverageProfile(scores=scores, coherence=float(n / rho * scores.max()), rank=rho)


def clamp_psd_eigenvalues(values, tol=1e-8):
    """Zero out slightly negative eigenvalues; raise if any is below ``-tol * max|value|``."""
    scale = np.max(np.abs(values)) if values.size else 0.0
    if values.size and values.min() < -tol * scale:
        raise NotSPSDError(
            f"eigenvalue {values.min():.3e} is below -{tol:g} * {scale:.3e}"
        )
    return np.clip(values, 0.0, None)


def psd_sqrt(k):
    """Symmetric PSD square root of an SPSD matrix."""
    evd = sym_evd(k)
    lam = clamp_psd_eigenvalues(evd.values)
    v = evd.vectors
    s = (v * np.sqrt(lam)) @ v.T
    return 0.5 * (s + s.T)


def random_orthonormal(n, k, rng):
    """Haar-distributed ``n x k`` matrix with orthonormal columns."""
    q, r = np.linalg.qr(rng.standard_normal((n, k)))
    return q * np.sign(np.diag(r))
