"""Low-dimensional feature extraction for approximate kernel k-means.

All extractors return a :class:`FeatureMatrix` whose rows are fed to linear
k-means. For the Nystrom-type extractors ``B @ B.T`` is a rank-restricted
approximation of the kernel matrix.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernel import kernel_columns, kernel_matrix
from .linalg import EPS, as_matrix, sym_evd, truncated_svd
from .sketch import SketchPlan, apply_right, build_sketch

DEFAULT_MAX_DENSE = 5000


@dataclass(frozen=True)
class NystromFactors:
    C: np.ndarray
    W: np.ndarray
    sketch: object = field(default=None, repr=False)

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def c(self):
        return self.C.shape[1]


@dataclass(frozen=True)
class FeatureMatrix:
    B: np.ndarray
    provenance: str
    params: dict = field(default_factory=dict)

    @property
    def s(self):
        return self.B.shape[1]


def _as_operator(plan_or_op):
    return build_sketch(plan_or_op) if isinstance(plan_or_op, SketchPlan) else plan_or_op


def nystrom_factors(data, spec, sketch, max_dense=DEFAULT_MAX_DENSE):
    """``C = K P`` and ``W = P^T C`` from raw data.

    Sampling sketches only evaluate the selected kernel columns; projection
    sketches need all of ``K`` and are refused above ``max_dense`` points.
    """
    op = _as_operator(sketch)
    if op.n != data.n:
        raise ValueError(f"sketch built for n={op.n}, data has n={data.n}")
    if op.is_sampling:
        c_mat = kernel_columns(data, op.indices, spec) * op.scales
        w = op.scales[:, None] * c_mat[op.indices]
        return NystromFactors(c_mat, w, op)
    if data.n > max_dense:
        raise MemoryError(
            f"{op.plan.kind} sketch needs the full {data.n}x{data.n} kernel matrix; "
            f"raise max_dense (currently {max_dense}) to allow it"
        )
    return nystrom_from_kernel(kernel_matrix(data, spec), op)


def nystrom_from_kernel(k, sketch):
    """Nystrom factors of an explicit SPSD matrix."""
    k = as_matrix(k)
    op = _as_operator(sketch)
    c_mat = apply_right(k, op)
    w = apply_right(c_mat.T, op).T
    return NystromFactors(c_mat, w, op)


def _psd_inverse_root(w, rel_tol):
    """``(U, lam^{-1/2})`` over eigenpairs of ``w`` with ``lam > rel_tol * lam_max``."""
    evd = sym_evd(w)
    lam = evd.values
    top = lam[0] if lam.size else 0.0
    if top <= 0:
        return evd.vectors[:, :0], lam[:0]
    keep = lam > rel_tol * top
    return evd.vectors[:, keep], 1.0 / np.sqrt(lam[keep])


def _top_features(r, s):
    """``B = R V_s`` (left singular vectors times singular values), zero-padded to ``s`` columns."""
    n, width = r.shape
    b = np.zeros((n, s))
    m = min(s, width)
    if m:
        u, sig, _ = truncated_svd(r, m)
        b[:, :m] = u * sig
    return b


def rank_restricted_features(factors, s, ell=None, strict=False, eig_tol=1e-12):
    """Nystrom features with the ``ell``-truncated core inverse.

    Forms ``R = C U_{W,ell} Lambda_{W,ell}^{-1/2}`` and returns ``B = R V_s`` so that
    ``B B^T = (C W_ell^{-1} C^T)_s``. ``ell`` defaults to ``ceil(c / 2)``.
    Eigenvalues of ``W`` below ``eig_tol * lambda_max`` are never inverted: ``ell``
    shrinks to the count above that level (an error when ``strict``).
    """
    c = factors.c
    if ell is None:
        ell = math.ceil(c / 2)
    if not 1 <= s <= ell <= c:
        raise ValueError(f"need 1 <= s <= ell <= c, got s={s}, ell={ell}, c={c}")
    evd = sym_evd(factors.W)
    lam = evd.values[:ell]
    usable = int(np.sum(lam > eig_tol * max(evd.values[0], 0.0))) if lam.size else 0
    reduced = usable < ell
    if reduced:
        msg = f"W has only {usable} eigenvalues above {eig_tol:g} * lambda_max; ell reduced from {ell}"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    r = factors.C @ (evd.vectors[:, :usable] / np.sqrt(lam[:usable]))
    params = {"s": s, "ell": ell, "ell_used": usable, "ell_reduced": reduced, "c": c}
    return FeatureMatrix(_top_features(r, s), "nystrom", params)


def pinv_root_features(factors, s, rel_tol=None, provenance="nystrom"):
    """Features with ``B B^T = (C W^+ C^T)_s`` (unregularised pseudo-inverse)."""
    if rel_tol is None:
        rel_tol = factors.c * EPS
    vecs, inv_root = _psd_inverse_root(factors.W, rel_tol)
    r = factors.C @ (vecs * inv_root)
    return FeatureMatrix(_top_features(r, s), provenance, {"s": s, "c": factors.c, "rank_W": int(inv_root.size)})


def rank_restricted_approx(factors, s, rel_tol=None):
    """Explicit ``(C W^+ C^T)_s`` from the truncated SVD of ``(W^+)^{1/2} C^T``."""
    if not 1 <= s <= factors.c:
        raise ValueError(f"need 1 <= s <= c={factors.c}, got s={s}")
    b = pinv_root_features(factors, s, rel_tol).B
    approx = b @ b.T
    return 0.5 * (approx + approx.T)


def trace_error_ratio(k, approx, s):
    """``||K - approx||_* / ||K - K_s||_*`` with 0/0 read as 1."""
    k = as_matrix(k)
    approx = as_matrix(approx)
    if k.shape != approx.shape:
        raise ValueError("K and the approximation must have the same shape")
    lam = np.sort(np.abs(np.linalg.eigvalsh(0.5 * (k + k.T))))[::-1]
    denom = float(np.sum(lam[s:]))
    diff = k - approx
    num = float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.T)))))
    scale = max(float(np.sum(lam)), np.finfo(float).tiny)
    if denom <= 1e-12 * scale:
        return 1.0 if num <= 1e-10 * scale else math.inf
    return num / denom


def power_method_features(k, s, c, t, seed=0):
    """Subspace-iteration sketch followed by rank-restricted Nystrom.

    Each of the ``t`` products ``P <- K P`` is followed by re-orthonormalisation,
    which spans the same subspace as ``K^t P`` but does not lose it to
    floating-point collapse onto the leading eigenvector.
    """
    k = as_matrix(k)
    n = k.shape[0]
    if c < s:
        raise ValueError(f"power method needs c >= s, got c={c}, s={s}")
    if t < 1:
        raise ValueError("power method needs t >= 1")
    p = build_sketch(SketchPlan("gaussian", n, c, seed)).dense
    for _ in range(t):
        p, _ = np.linalg.qr(k @ p)
    u, _ = np.linalg.qr(p)
    c_mat = k @ u
    w = u.T @ c_mat
    feats = pinv_root_features(NystromFactors(c_mat, 0.5 * (w + w.T)), s, provenance="power")
    return FeatureMatrix(feats.B, "power", {"s": s, "c": c, "t": t})


def power_iterations(values, s, n, eps):
    """``ceil(log(n/eps) / log(sigma_s / sigma_{s+1}))`` from a (possibly estimated) spectrum."""
    values = np.sort(np.asarray(values, dtype=float))[::-1]
    if values.size <= s or values[s] <= 0:
        return 1
    gap = math.log(values[s - 1] / values[s])
    if gap <= 0:
        raise ValueError("no spectral gap at s; the iteration count is unbounded")
    return max(1, math.ceil(math.log(n / eps) / gap))


def kpca_features(k, s):
    """Exact top-``s`` kernel PCA features ``V_s Lambda_s^{1/2}``."""
    k = as_matrix(k)
    if not 1 <= s <= k.shape[0]:
        raise ValueError(f"need 1 <= s <= n, got s={s}")
    evd = sym_evd(k).truncate(s)
    b = evd.vectors * np.sqrt(np.clip(evd.values, 0.0, None))
    return FeatureMatrix(b, "kpca", {"s": s})


def rff_features(data, sigma, c, seed=0):
    """Random Fourier features ``sqrt(2/c) cos(A Omega + b)`` for the RBF kernel of width ``sigma``."""
    if c < 1:
        raise ValueError("need c >= 1")
    rng = np.random.default_rng([seed, 101])
    omega = rng.standard_normal((data.d, c)) / sigma
    phase = rng.uniform(0.0, 2 * np.pi, size=c)
    z = np.sqrt(2.0 / c) * np.cos(data.points @ omega + phase)
    return FeatureMatrix(z, "rff", {"c": c, "s": c})


def reduce_dimension(features, s):
    """Project features onto their top-``s`` right singular directions (``B = R V_s``)."""
    return FeatureMatrix(_top_features(features.B, s), features.provenance, {**features.params, "s": s})
