"""Command-line entry point: ``kkm run|compare|sweep|verify``."""
import argparse
import csv
import json
import math
import sys

import numpy as np

from . import runner
from .approx import nystrom_from_kernel, rank_restricted_features
from .cluster import Clustering, kernel_objective, linear_objective
from .evaluation import pcp_check, spectrum, synthetic_spsd, theorem1_sweep
from .linalg import sym_evd
from .sketch import SketchPlan, build_sketch


def _parse_grid(text):
    key, sep, values = text.partition("=")
    if not sep or not values:
        raise argparse.ArgumentTypeError(f"grid must look like c=100,200,400, got {text!r}")
    return key.strip(), [runner._coerce(v) for v in values.split(",")]


def _write(report, out):
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(rows, path):
    if not rows:
        return
    names = list(dict.fromkeys(key for row in rows for key in row))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=names, restval="")
        w.writeheader()
        w.writerows(rows)


def cmd_run(args):
    cfg = runner.load_config(args.config)
    report = runner.run(cfg)
    report["digest"] = runner.digest(report)
    _write(report, args.out or cfg.out)
    if args.csv:
        _write_csv(report["trials"], args.csv)


def cmd_compare(args):
    a = runner.load_config(args.a)
    b = runner.load_config(args.b)
    if args.grid:
        key, values = args.grid
        report = runner.sweep(a, key, values, against=b)
        rows = report["rows"]
    else:
        report = runner.compare(a, b)
        rows = report["paired"]
    report["digest"] = runner.digest(report)
    _write(report, args.out)
    if args.csv:
        _write_csv(rows, args.csv)


def cmd_sweep(args):
    cfg = runner.load_config(args.config)
    key, values = args.grid
    report = runner.sweep(cfg, key, values)
    report["digest"] = runner.digest(report)
    _write(report, args.out or cfg.out)
    if args.csv:
        _write_csv(report["rows"], args.csv)


def verify_theorem1(n=300, s=10, eps=0.5, seeds=100):
    lam = spectrum("power", n)
    c = math.ceil(4 * s / eps)
    rows = theorem1_sweep(lam, s, ["gaussian"], [c], range(seeds), eps_grid=(eps,))
    return {"check": "theorem1", "passed": bool(rows[0][f"frac_le_{eps:g}"] >= 0.85), "rows": rows}


def verify_pcp(n=120, c=60, ell=30, s=20, k=4, seed=0):
    K = synthetic_spsd(spectrum("power", n), seed)
    f = nystrom_from_kernel(K, build_sketch(SketchPlan("uniform", n, c, seed)))
    rep = pcp_check(K, rank_restricted_features(f, s, ell), k, seed=seed)
    out = {"check": "pcp", "passed": rep.lower_violations == 0 and rep.upper_violations == 0}
    out.update({key: getattr(rep, key) for key in rep.__dataclass_fields__})
    return out


def verify_kernel_trick(cases=100, n=50, k=4, seed=0):
    rng = np.random.default_rng([seed, 53])
    worst = 0.0
    for _ in range(cases):
        K = synthetic_spsd(rng.uniform(0, 1, n), int(rng.integers(2**31)))
        labels = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
        part = Clustering(rng.permutation(labels), k)
        evd = sym_evd(K)
        feats = evd.vectors * np.sqrt(np.clip(evd.values, 0, None))
        a = kernel_objective(K, part, "feature")
        b = linear_objective(feats, part)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return {"check": "kernel-trick", "passed": bool(worst <= 1e-8), "cases": cases, "max_rel_error": worst}


VERIFIERS = {"theorem1": verify_theorem1, "pcp": verify_pcp, "kernel-trick": verify_kernel_trick}


def cmd_verify(args):
    result = VERIFIERS[args.check]()
    _write(result, args.out)
    return 0 if result["passed"] else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="kkm", description="Approximate kernel k-means experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run seeded trials of one pipeline")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="paired trials of two configs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--grid", type=_parse_grid, help="optional key=v1,v2,... for per-value paired rows")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="one aggregate row per grid value")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", type=_parse_grid, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run a built-in verification harness")
    p.add_argument("check", choices=sorted(VERIFIERS))
    p.set_defaults(func=cmd_verify)

    for name in ("run", "compare", "sweep", "verify"):
        sp = sub.choices[name]
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        if name != "verify":
            sp.add_argument("--csv", help="also write a CSV table")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except (ValueError, OSError) as exc:
        print(f"kkm: error: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
