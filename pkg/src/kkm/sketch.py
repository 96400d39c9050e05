"""Random sketching operators ``P`` (n x c) and their quality diagnostics.

Sampling kinds (``uniform``, ``leverage``) keep one scaled nonzero per column,
``gaussian`` is dense, ``srht`` and ``countsketch`` are applied in structured
form and can be materialised for checking.
"""
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, leverage_profile

KINDS = ("uniform", "leverage", "gaussian", "srht", "countsketch")
SAMPLING_KINDS = ("uniform", "leverage")
# fixed offsets so different kinds never draw from the same stream
_STREAM = {kind: i + 1 for i, kind in enumerate(KINDS)}


@dataclass(frozen=True)
class SketchPlan:
    kind: str
    n: int
    c: int
    seed: int = 0
    probabilities: np.ndarray | None = field(default=None, repr=False)
    pad: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sketch kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1 or self.c < 1:
            raise ValueError("need n >= 1 and c >= 1")
        if self.kind == "srht":
            limit = _next_pow2(self.n) if self.pad else self.n
            if self.c > limit:
                raise ValueError(f"srht needs c <= {limit}, got c={self.c}")
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=float)
            if p.shape != (self.n,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-8:
                raise ValueError("probabilities must be n non-negative reals summing to 1")
            object.__setattr__(self, "probabilities", p)
        if self.kind == "leverage" and self.probabilities is None:
            raise ValueError("leverage sampling needs probabilities")

    def rng(self):
        return np.random.default_rng([self.seed, _STREAM[self.kind]])


@dataclass(frozen=True)
class SketchOperator:
    """A realised sketch.

    ``indices``/``scales`` hold sampling kinds (column ``j`` has ``scales[j]`` at
    row ``indices[j]``), ``dense`` the Gaussian matrix, ``signs`` the random signs
    of SRHT (length ``n_pad``) or CountSketch (length ``n``), ``buckets`` the
    CountSketch hash and ``indices`` the selected Hadamard columns for SRHT.
    """

    plan: SketchPlan
    indices: np.ndarray | None = None
    scales: np.ndarray | None = None
    dense: np.ndarray | None = None
    signs: np.ndarray | None = None
    buckets: np.ndarray | None = None

    @property
    def n(self):
        return self.plan.n

    @property
    def c(self):
        return self.plan.c

    @property
    def is_sampling(self):
        return self.plan.kind in SAMPLING_KINDS

    def to_dense(self):
        n, c = self.n, self.c
        kind = self.plan.kind
        if kind in SAMPLING_KINDS:
            p = np.zeros((n, c))
            p[self.indices, np.arange(c)] = self.scales
            return p
        if kind == "gaussian":
            return self.dense.copy()
        if kind == "countsketch":
            p = np.zeros((n, c))
            p[np.arange(n), self.buckets] = self.signs
            return p
        n_pad = self.signs.size
        h = _hadamard(n_pad) / np.sqrt(n_pad)
        full = self.signs[:, None] * h[:, self.indices] * np.sqrt(n_pad / c)
        return full[:n]


def _next_pow2(n):
    return 1 << (int(n) - 1).bit_length()


def _hadamard(m):
    h = np.ones((1, 1))
    while h.shape[0] < m:
        h = np.block([[h, h], [h, -h]])
    return h


def fwht(a):
    """Unnormalised fast Walsh-Hadamard transform along the last axis (length 2^q)."""
    x = np.array(a, dtype=float, copy=True)
    m = x.shape[-1]
    if m & (m - 1):
        raise ValueError("fwht length must be a power of two")
    lead = x.shape[:-1]
    h = 1
    while h < m:
        x = x.reshape(*lead, m // (2 * h), 2, h)
        top = x[..., 0, :].copy()
        bot = x[..., 1, :]
        x[..., 0, :] = top + bot
        x[..., 1, :] = top - bot
        x = x.reshape(*lead, m)
        h *= 2
    return x


def uniform_plan(n, c, seed=0):
    return SketchPlan("uniform", n, c, seed)


def leverage_plan(v, c, seed=0):
    """Leverage-score sampling plan from the rows of ``v`` (typically ``V_s`` of K)."""
    prof = leverage_profile(v)
    return SketchPlan("leverage", v.shape[0], c, seed, probabilities=prof.scores / prof.scores.sum())


def build_sketch(plan):
    rng = plan.rng()
    n, c = plan.n, plan.c
    if plan.kind in SAMPLING_KINDS:
        p = np.full(n, 1.0 / n) if plan.kind == "uniform" else plan.probabilities
        idx = rng.choice(n, size=c, replace=True, p=p)
        return SketchOperator(plan, indices=idx, scales=1.0 / np.sqrt(c * p[idx]))
    if plan.kind == "gaussian":
        return SketchOperator(plan, dense=rng.standard_normal((n, c)) / np.sqrt(c))
    if plan.kind == "countsketch":
        buckets = rng.integers(0, c, size=n)
        signs = rng.choice(np.array([-1.0, 1.0]), size=n)
        return SketchOperator(plan, signs=signs, buckets=buckets)
    n_pad = _next_pow2(n) if plan.pad else n
    if n_pad & (n_pad - 1):
        raise ValueError("srht without padding needs n to be a power of two")
    signs = rng.choice(np.array([-1.0, 1.0]), size=n_pad)
    cols = np.sort(rng.choice(n_pad, size=c, replace=False))
    return SketchOperator(plan, indices=cols, signs=signs)


def selection_sketch(indices, n, scales=None):
    """Deterministic column-selection operator, e.g. ``arange(n)`` for ``P = I``."""
    idx = np.asarray(indices, dtype=int)
    c = idx.size
    if scales is None:
        scales = np.ones(c)
    plan = SketchPlan("uniform", n, c, seed=-1)
    return SketchOperator(plan, indices=idx, scales=np.asarray(scales, dtype=float))


def apply_right(a, op):
    """``A @ P`` for an ``m x n`` matrix ``A``."""
    a = as_matrix(a)
    if a.shape[1] != op.n:
        raise ValueError(f"cannot apply a sketch with n={op.n} to a matrix with {a.shape[1]} columns")
    kind = op.plan.kind
    if kind in SAMPLING_KINDS:
        return a[:, op.indices] * op.scales
    if kind == "gaussian":
        return a @ op.dense
    if kind == "countsketch":
        out = np.zeros((a.shape[0], op.c))
        np.add.at(out.T, op.buckets, (a * op.signs).T)
        return out
    n_pad = op.signs.size
    padded = np.zeros((a.shape[0], n_pad))
    padded[:, : op.n] = a
    mixed = fwht(padded * op.signs) / np.sqrt(n_pad)
    return mixed[:, op.indices] * np.sqrt(n_pad / op.c)


def _check_orthonormal(v, tol=1e-8):
    v = as_matrix(v)
    gram = v.T @ v
    if np.linalg.norm(gram - np.eye(v.shape[1]), 2) > tol:
        raise ValueError("V must have orthonormal columns")
    return v


def embedding_score(v, op):
    """Subspace-embedding distortion ``||V^T P P^T V - I||_2``."""
    v = _check_orthonormal(v)
    vp = apply_right(v.T, op)
    return float(np.linalg.norm(vp @ vp.T - np.eye(v.shape[1]), 2))


def multiplication_score(v, y, op):
    """``||V^T P P^T Y - V^T Y||_F^2 / ||Y||_F^2``; zero when ``Y = 0``."""
    v = as_matrix(v)
    y = as_matrix(y)
    if v.shape[0] != y.shape[0]:
        raise ValueError("V and Y must have the same number of rows")
    denom = np.sum(y * y)
    if denom == 0:
        return 0.0
    approx = apply_right(v.T, op) @ apply_right(y.T, op).T
    return float(np.sum((approx - v.T @ y) ** 2) / denom)
