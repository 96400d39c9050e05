"""Normalised spectral clustering, exact and with a uniform Nystrom affinity.

The Nystrom variant can produce non-positive degrees; that outcome is returned
as a :class:`DegreeFailure` instead of raising, so experiment harnesses can
count and discard those trials.
"""
from dataclasses import dataclass

import numpy as np

from .approx import _psd_inverse_root, nystrom_factors
from .cluster import kmeans
from .linalg import EPS, as_matrix, sym_evd
from .sketch import SketchPlan, build_sketch


@dataclass(frozen=True)
class DegreeFailure:
    indices: np.ndarray
    degrees: np.ndarray


@dataclass(frozen=True)
class SpectralEmbedding:
    rows: np.ndarray
    zero_rows: int


def _normalise_rows(v):
    norms = np.linalg.norm(v, axis=1)
    out = np.zeros_like(v)
    nz = norms > 0
    out[nz] = v[nz] / norms[nz, None]
    return SpectralEmbedding(out, int(np.sum(~nz)))


def spectral_embedding_exact(k, num_clusters):
    k = as_matrix(k, "affinity")
    if k.shape[0] != k.shape[1]:
        raise ValueError("affinity must be square")
    if np.any(k < 0):
        raise ValueError("affinity must be elementwise non-negative")
    deg = k.sum(axis=1)
    if np.any(deg <= 0):
        raise ValueError("every point needs a positive degree")
    inv = 1.0 / np.sqrt(deg)
    norm_aff = inv[:, None] * k * inv[None, :]
    evd = sym_evd(0.5 * (norm_aff + norm_aff.T))
    return _normalise_rows(evd.vectors[:, :num_clusters])


def spectral_exact(k, num_clusters, seed=0, **kmeans_args):
    """Top-k eigenvectors of ``D^{-1/2} K D^{-1/2}``, row-normalised, then k-means."""
    emb = spectral_embedding_exact(k, num_clusters)
    return kmeans(emb.rows, num_clusters, seed=seed, **kmeans_args)


def nystrom_degrees(c_mat, w, rel_tol=None):
    """``C W^+ C^T 1`` without forming the ``n x n`` approximation."""
    if rel_tol is None:
        rel_tol = w.shape[0] * EPS
    vecs, inv_root = _psd_inverse_root(w, rel_tol)
    w_pinv = (vecs * inv_root**2) @ vecs.T
    return c_mat @ (w_pinv @ c_mat.sum(axis=0))


def spectral_embedding_nystrom(c_mat, w, num_clusters, rel_tol=None):
    """Row-normalised top-k eigenvectors of ``D~^{-1/2} C W^+ C^T D~^{-1/2}`` in factored form.

    Returns a :class:`DegreeFailure` if any approximate degree is non-positive.
    """
    if rel_tol is None:
        rel_tol = w.shape[0] * EPS
    deg = nystrom_degrees(c_mat, w, rel_tol)
    bad = np.flatnonzero(deg <= 0)
    if bad.size:
        return DegreeFailure(bad, deg[bad])
    vecs, inv_root = _psd_inverse_root(w, rel_tol)
    root = (vecs * inv_root) @ vecs.T
    z = (c_mat / np.sqrt(deg)[:, None]) @ root
    inner = sym_evd(0.5 * (z.T @ z + (z.T @ z).T))
    m = min(num_clusters, int(np.sum(inner.values > 0)))
    lam = inner.values[:m]
    u = np.zeros((c_mat.shape[0], num_clusters))
    u[:, :m] = z @ (inner.vectors[:, :m] / np.sqrt(lam))
    return _normalise_rows(u)


def spectral_nystrom(data, spec, c, num_clusters, seed=0, sketch=None, **kmeans_args):
    """Spectral clustering on a uniform-sampling Nystrom affinity."""
    if sketch is None:
        if c > data.n:
            raise ValueError(f"need c <= n, got c={c}, n={data.n}")
        sketch = build_sketch(SketchPlan("uniform", data.n, c, seed))
    f = nystrom_factors(data, spec, sketch)
    emb = spectral_embedding_nystrom(f.C, f.W, num_clusters)
    if isinstance(emb, DegreeFailure):
        return emb
    return kmeans(emb.rows, num_clusters, seed=seed, **kmeans_args)
