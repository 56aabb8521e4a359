"""``dpds`` command line: run, rates, verify, sweep.

Exit codes: 0 success, 2 config error, 3 numerical divergence, 4 failed
verification suite.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, NonFiniteState, ThresholdViolation
from .graph import spectral
from .objective import Sampler, estimate_nu
from .rates import ProblemConstants, alpha_threshold

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 2, 3, 4


def cmd_run(args):
    cfg = harness.load_config(args.config)
    rec = harness.run_experiment(cfg)
    harness.write_csv(rec, args.out)
    harness.write_meta(rec, cfg, str(args.out) + ".json")
    final = rec.rows[-1][rec.columns.index("residual")]
    print(f"config {rec.config_hash[:12]}  samples {len(rec.rows)}  final residual {final:.3e}")
    if rec.fit is not None:
        print(f"fit: slope {rec.fit.slope:.6g}  R^2 {rec.fit.r_squared:.6f}  "
              f"factor {rec.fit.per_iter_factor:.8f}  ({rec.fit.points} points)")
    return EXIT_OK


def rates_table(cfg) -> dict:
    graph = harness.make_graph(cfg.graph)
    obj = harness.make_objective(cfg.objective, graph.n)
    if obj.nu is None:
        obj = estimate_nu(obj, Sampler(10_000, cfg.init.low, cfg.init.high, cfg.init.seed))
    a = cfg.algorithm
    pc = ProblemConstants.from_problem(spectral(graph), obj, a.alpha, a.beta)
    out = {"n": pc.n, "L_f": pc.L_f, "nu": pc.nu, "nu_estimated": obj.nu_estimated,
           "nu_sampled": obj.nu_raw, "rho2": pc.rho2, "rho": pc.rho, "alpha": a.alpha,
           "beta": a.beta, "alpha_threshold": alpha_threshold(pc)}
    rc = harness.problem_rates(graph, obj, a.alpha, a.beta)
    if rc is None:
        out["note"] = "alpha does not exceed the threshold; no guarantees apply"
        return out
    out.update(rc.as_dict())
    out["h"] = a.h
    out["dt_rate_at_h"] = rc.dt_rate(a.h) if a.h < rc.h_max else None
    return out


def cmd_rates(args):
    cfg = harness.load_config(args.config)
    table = rates_table(cfg)
    if args.json:
        print(json.dumps(table, indent=2, sort_keys=True))
        return EXIT_OK
    for key, val in table.items():
        if isinstance(val, float):
            val = f"{val:.10g}"
        print(f"{key:>16}  {val}")
    return EXIT_OK


def cmd_verify(args):
    cfg = harness.load_config(args.config)
    res = harness.verify_suite(cfg, args.suite)
    for line in res.lines:
        print(line)
    if args.out and res.rows:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_or_k", "V1", "V2", "V3", "V", "bound"])
            for row in res.rows:
                w.writerow([format(c, ".17g") for c in row])
    print(f"{args.suite}: {'PASS' if res.passed else 'FAIL'}")
    return EXIT_OK if res.passed else EXIT_VERIFY


def _parse_value(text):
    try:
        return int(text)
    except ValueError:
        return float(text)


def cmd_sweep(args):
    cfg = harness.load_config(args.config)
    values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
    results = harness.sweep(cfg, args.param, values, args.out_dir, args.workers)
    print(f"{args.param:>12}  {'final residual':>15}  {'factor':>12}  {'R^2':>8}")
    for val, rec in results:
        final = rec.rows[-1][rec.columns.index("residual")]
        factor = rec.fit.per_iter_factor if rec.fit else math.nan
        r2 = rec.fit.r_squared if rec.fit else math.nan
        print(f"{val!s:>12}  {final:15.3e}  {factor:12.8f}  {r2:8.5f}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="dpds", description="Distributed primal-dual gradient experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment and write a CSV")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, type=Path)
    r.set_defaults(func=cmd_run)

    r = sub.add_parser("rates", help="print the convergence constants for a config")
    r.add_argument("--config", required=True)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_rates)

    r = sub.add_parser("verify", help="run a verification suite")
    r.add_argument("--suite", required=True, choices=["rsi", "lyapunov", "extra", "gradients"])
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="per-sample CSV for the lyapunov suite")
    r.set_defaults(func=cmd_verify)

    r = sub.add_parser("sweep", help="run a parameter sweep")
    r.add_argument("--config", required=True)
    r.add_argument("--param", required=True, help="e.g. h, alpha or output.record_every")
    r.add_argument("--values", required=True, help="comma-separated values")
    r.add_argument("--out-dir", default=None)
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteState as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ThresholdViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
