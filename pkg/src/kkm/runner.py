"""Experiment orchestration: seeded trials, paired comparisons and parameter sweeps."""
import dataclasses
import hashlib
import json
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import datasets
from .approx import (
    DEFAULT_MAX_DENSE,
    kpca_features,
    nystrom_factors,
    power_iterations,
    power_method_features,
    rank_restricted_features,
    reduce_dimension,
    rff_features,
    trace_error_ratio,
)
from .cluster import kernel_objective, kmeans
from .evaluation import nmi
from .io import ingest
from .kernel import DataMatrix, KernelSpec, kernel_matrix, sigma_heuristic
from .linalg import sym_evd
from .sketch import SketchPlan, build_sketch, leverage_plan
from .spectral import DegreeFailure, spectral_embedding_exact, spectral_embedding_nystrom

SCHEMA = 1
PIPELINES = (
    "kkmeans-nystrom",
    "kkmeans-power",
    "kkmeans-kpca",
    "kkmeans-rff",
    "spectral-nystrom",
    "spectral-exact",
)
NEEDS_K = ("kkmeans-power", "kkmeans-kpca", "spectral-exact")
METRICS = ("nmi", "objective_feature", "objective_column", "trace_ratio")


@dataclass
class RunConfig:
    dataset: str
    k: int
    command: str = "run"
    pipeline: str = "kkmeans-nystrom"
    format: str | None = None
    label_column: bool = True
    subsample: int | None = None
    kernel: str = "rbf"
    beta: float = 1.0
    sigma: float | None = None
    s: int | None = None
    c: int | None = None
    ell: int | None = None
    t: int | None = None
    sketch: str = "uniform"
    seed: int = 0
    trials: int = 20
    max_iter: int = 100
    restarts: int = 1
    objective: str = "both"
    trace_ratio: bool = False
    max_dense: int = DEFAULT_MAX_DENSE
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"unknown pipeline {self.pipeline!r}; expected one of {PIPELINES}")
        if self.objective not in ("both", "feature", "column", "none"):
            raise ValueError(f"unknown objective mode {self.objective!r}")
        if self.k < 1 or self.trials < 1 or self.max_iter < 1 or self.restarts < 1:
            raise ValueError("k, trials, max_iter and restarts must be positive")
        self.validate(None)

    def resolved_ell(self):
        if self.ell is not None:
            return self.ell
        return None if self.c is None else math.ceil(self.c / 2)

    def validate(self, n):
        """Reject parameter orderings the selected pipeline cannot honour.

        With ``n=None`` only the relations that do not involve the data size are checked.
        """
        k, s, c, p = self.k, self.s, self.c, self.pipeline
        bound = math.inf if n is None else n
        shown = "n" if n is None else f"n={n}"
        if k > bound:
            raise ValueError(f"k={k} exceeds n={n}")
        if p == "kkmeans-nystrom":
            ell = self.resolved_ell()
            if None in (s, c):
                raise ValueError("kkmeans-nystrom needs s and c")
            if not k <= s < ell <= c <= bound:
                raise ValueError(f"need k <= s < ell <= c <= n, got k={k}, s={s}, ell={ell}, c={c}, {shown}")
        elif p == "kkmeans-power":
            if None in (s, c) or not k <= s <= c <= bound:
                raise ValueError(f"kkmeans-power needs k <= s <= c <= n, got k={k}, s={s}, c={c}, {shown}")
        elif p == "kkmeans-kpca":
            if s is None or not k <= s <= bound:
                raise ValueError(f"kkmeans-kpca needs k <= s <= n, got k={k}, s={s}, {shown}")
        elif p == "kkmeans-rff":
            if c is None or c < 1 or (s is not None and not k <= s <= c):
                raise ValueError(f"kkmeans-rff needs c >= 1 and k <= s <= c, got s={s}, c={c}")
        elif p == "spectral-nystrom":
            if c is None or not k <= c <= bound:
                raise ValueError(f"spectral-nystrom needs k <= c <= n, got c={c}, {shown}")
        if p in NEEDS_K and n is not None and n > self.max_dense:
            raise ValueError(f"{p} forms the full kernel matrix; n={n} exceeds max_dense={self.max_dense}")
        if self.sketch == "leverage" and n is not None and n > self.max_dense:
            raise ValueError(f"leverage sampling needs the full kernel matrix; n={n} exceeds max_dense={self.max_dense}")

    def to_dict(self):
        return dataclasses.asdict(self)


def _coerce(value):
    low = value.strip()
    if low.lower() in ("none", "null", ""):
        return None
    if low.lower() in ("true", "false"):
        return low.lower() == "true"
    for cast in (int, float):
        try:
            return cast(low)
        except ValueError:
            pass
    return low.strip("\"'")


def parse_config_text(text):
    """JSON object or flat ``key = value`` lines (``#`` starts a comment)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        out[key.strip()] = _coerce(value)
    return out


def load_config(path, overrides=None, environ=None):
    with open(path, encoding="utf-8") as fh:
        values = parse_config_text(fh.read())
    values.update(overrides or {})
    environ = os.environ if environ is None else environ
    if "KKM_SEED" in environ:
        values["seed"] = int(environ["KKM_SEED"])
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**values)


def load_dataset(cfg):
    """Resolve ``cfg.dataset``: a file path, ``synthetic:<name>`` or ``sklearn:digits``."""
    name = cfg.dataset
    if name.startswith("synthetic:"):
        gen = datasets.GENERATORS[name.split(":", 1)[1]]
        data = gen(seed=cfg.seed)
    elif name == "sklearn:digits":
        from sklearn.datasets import load_digits

        raw = load_digits()
        data = DataMatrix(raw.data.astype(float), raw.target)
    else:
        data = ingest(name, cfg.format, cfg.label_column)
    if cfg.subsample is not None and cfg.subsample < data.n:
        rng = np.random.default_rng([cfg.seed, 997])
        data = data.subset(np.sort(rng.choice(data.n, cfg.subsample, replace=False)))
    return data


def _kernel_spec(cfg, data):
    if cfg.sigma is not None:
        return KernelSpec(cfg.sigma, cfg.kernel)
    return KernelSpec(sigma_heuristic(data, cfg.beta), cfg.kernel, beta=cfg.beta)


@dataclass
class _Context:
    data: DataMatrix
    spec: KernelSpec
    K: np.ndarray | None = None


def _sketch(cfg, ctx, seed):
    n = ctx.data.n
    if cfg.sketch == "leverage":
        if ctx.K is None:
            raise ValueError("leverage sampling needs the full kernel matrix")
        return build_sketch(leverage_plan(sym_evd(ctx.K).vectors[:, : cfg.s], cfg.c, seed))
    return build_sketch(SketchPlan(cfg.sketch, n, cfg.c, seed))


def _features(cfg, ctx, seed):
    """Return ``(rows to cluster, rank-restricted B or None, stage timings)``."""
    timings = {}
    p = cfg.pipeline
    t0 = time.perf_counter()
    if p == "kkmeans-nystrom":
        f = nystrom_factors(ctx.data, ctx.spec, _sketch(cfg, ctx, seed), max_dense=cfg.max_dense)
        t1 = time.perf_counter()
        with warnings.catch_warnings():
            # the reduction is recorded in the trial record instead
            warnings.simplefilter("ignore", RuntimeWarning)
            feats = rank_restricted_features(f, cfg.s, cfg.resolved_ell())
        timings = {"Nystrom": t1 - t0, "DR": time.perf_counter() - t1, "ell_used": feats.params["ell_used"]}
        return feats.B, feats.B, timings
    if p == "kkmeans-power":
        t_iter = cfg.t
        if t_iter is None:
            t_iter = estimate_power_iterations(ctx, cfg.s, cfg.c, seed)
        feats = power_method_features(ctx.K, cfg.s, cfg.c, t_iter, seed)
        return feats.B, feats.B, {"Nystrom": time.perf_counter() - t0, "DR": 0.0}
    if p == "kkmeans-kpca":
        feats = kpca_features(ctx.K, cfg.s)
        return feats.B, feats.B, {"Nystrom": 0.0, "DR": time.perf_counter() - t0}
    if p == "kkmeans-rff":
        raw = rff_features(ctx.data, ctx.spec.sigma, cfg.c, seed)
        t1 = time.perf_counter()
        feats = reduce_dimension(raw, cfg.s) if cfg.s is not None else raw
        return feats.B, None, {"Nystrom": t1 - t0, "DR": time.perf_counter() - t1}
    if p == "spectral-nystrom":
        f = nystrom_factors(ctx.data, ctx.spec, build_sketch(SketchPlan("uniform", ctx.data.n, cfg.c, seed)))
        t1 = time.perf_counter()
        emb = spectral_embedding_nystrom(f.C, f.W, cfg.k)
        timings = {"Nystrom": t1 - t0, "DR": time.perf_counter() - t1}
        if isinstance(emb, DegreeFailure):
            return emb, None, timings
        return emb.rows, None, timings
    emb = spectral_embedding_exact(ctx.K, cfg.k)
    return emb.rows, None, {"Nystrom": 0.0, "DR": time.perf_counter() - t0}


def estimate_power_iterations(ctx, s, c, seed, eps=0.5):
    """Iteration count from the spectrum of a uniform Nystrom core ``W`` (c x c)."""
    n = ctx.data.n
    f = nystrom_factors(ctx.data, ctx.spec, build_sketch(SketchPlan("uniform", n, c, seed)))
    lam = np.clip(sym_evd(f.W).values, 0.0, None)
    try:
        return power_iterations(lam, s, n, eps)
    except ValueError:
        return 1


def _trial(cfg, ctx, index):
    seed = cfg.seed + index
    record = {"trial": index, "seed": seed, "degree_failure": False}
    for m in METRICS:
        record[m] = None
    rows, b, timings = _features(cfg, ctx, seed)
    if "ell_used" in timings:
        record["ell_used"] = timings.pop("ell_used")
    if isinstance(rows, DegreeFailure):
        record["degree_failure"] = True
        record["failed_points"] = int(rows.indices.size)
        timings["kmeans"] = 0.0
        return record, timings
    t0 = time.perf_counter()
    clustering = kmeans(rows, cfg.k, seed=seed, restarts=cfg.restarts, max_iter=cfg.max_iter)
    timings["kmeans"] = time.perf_counter() - t0
    labels = clustering.assignments
    record["iterations"] = clustering.iterations_run
    record["converged"] = clustering.converged
    if ctx.data.labels is not None:
        record["nmi"] = nmi(ctx.data.labels, labels)
    if ctx.K is not None:
        if cfg.objective in ("both", "feature"):
            record["objective_feature"] = kernel_objective(ctx.K, labels, "feature")
        if cfg.objective in ("both", "column"):
            record["objective_column"] = kernel_objective(ctx.K, labels, "column")
        if cfg.trace_ratio and b is not None:
            record["trace_ratio"] = trace_error_ratio(ctx.K, b @ b.T, cfg.s)
    return record, timings


def aggregate(records):
    """Mean and sample standard deviation of each metric over non-failed trials."""
    out = {}
    valid = [r for r in records if not r["degree_failure"]]
    for m in METRICS:
        vals = np.array([r[m] for r in valid if r.get(m) is not None], dtype=float)
        if vals.size == 0:
            out[m] = {"mean": None, "std": None, "count": 0}
            continue
        std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
        out[m] = {"mean": float(np.mean(vals)), "std": std, "count": int(vals.size)}
    out["degree_failures"] = len(records) - len(valid)
    return out


def prepare(cfg):
    data = load_dataset(cfg)
    cfg.validate(data.n)
    spec = _kernel_spec(cfg, data)
    ctx = _Context(data, spec)
    wants_k = cfg.pipeline in NEEDS_K or cfg.sketch == "leverage"
    wants_k = wants_k or cfg.objective != "none" or cfg.trace_ratio
    if wants_k and data.n <= cfg.max_dense:
        ctx.K = kernel_matrix(data, spec)
    return ctx


def run(cfg, ctx=None):
    """Run ``cfg.trials`` seeded trials; the report is deterministic apart from ``timings``."""
    if ctx is None:
        ctx = prepare(cfg)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(lambda i: _trial(cfg, ctx, i), range(cfg.trials)))
    else:
        results = [_trial(cfg, ctx, i) for i in range(cfg.trials)]
    records = [r for r, _ in results]
    return {
        "schema": SCHEMA,
        "config": cfg.to_dict(),
        "dataset": {"n": ctx.data.n, "d": ctx.data.d, "sigma": ctx.spec.sigma},
        "trials": records,
        "aggregate": aggregate(records),
        "timings": [{"trial": r["trial"], **t} for r, (_, t) in zip(records, results)],
    }


def digest(report):
    """SHA-256 over the report without its timing section."""
    body = {key: value for key, value in report.items() if key != "timings"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _same_setup(a, b):
    for key in ("dataset", "format", "subsample", "k", "trials", "seed"):
        if getattr(a, key) != getattr(b, key):
            raise ValueError(f"configs differ in {key!r}: {getattr(a, key)!r} vs {getattr(b, key)!r}")


def compare(cfg_a, cfg_b):
    """Run two configs on the same data and seeds; failed trials are excluded per side."""
    _same_setup(cfg_a, cfg_b)
    rep_a = run(cfg_a)
    rep_b = run(cfg_b)
    paired = []
    for ra, rb in zip(rep_a["trials"], rep_b["trials"]):
        row = {"trial": ra["trial"], "seed": ra["seed"]}
        for side, rec in (("a", ra), ("b", rb)):
            row[f"{side}_degree_failure"] = rec["degree_failure"]
            for m in METRICS:
                row[f"{side}_{m}"] = rec[m]
        paired.append(row)
    return {
        "schema": SCHEMA,
        "a": rep_a["config"],
        "b": rep_b["config"],
        "paired": paired,
        "aggregate": {"a": rep_a["aggregate"], "b": rep_b["aggregate"]},
        "timings": {"a": rep_a["timings"], "b": rep_b["timings"]},
    }


def _with(cfg, param, value):
    updates = {param: value}
    if param == "c" and cfg.ell is None:
        updates["ell"] = None
    return dataclasses.replace(cfg, **updates)


def sweep(cfg, param, values, against=None):
    """One aggregate row per value of ``param``; with ``against``, paired rows of two configs."""
    rows = []
    for value in values:
        if against is None:
            rep = run(_with(cfg, param, value))
            rows.append({param: value, **_flatten(rep["aggregate"])})
        else:
            rep = compare(_with(cfg, param, value), _with(against, param, value))
            rows.append({param: value, **_flatten(rep["aggregate"]["a"], "a_"), **_flatten(rep["aggregate"]["b"], "b_")})
    return {"schema": SCHEMA, "config": cfg.to_dict(), "param": param, "rows": rows}


def _flatten(agg, prefix=""):
    out = {f"{prefix}degree_failures": agg["degree_failures"]}
    for m in METRICS:
        out[f"{prefix}{m}_mean"] = agg[m]["mean"]
        out[f"{prefix}{m}_std"] = agg[m]["std"]
        out[f"{prefix}{m}_count"] = agg[m]["count"]
    return out
