"""Command-line entry point: ``mxpbf {mean,cov,simulate,roc}``.

Exit codes: 0 success, 1 test-level error (bad data, degenerate input),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import baselines
from .core_numeric import MxpbfError
from .cov_test import CovTestConfig, decide_cov, mxpbf_cov
from .harness import ExperimentReport, read_matrix_csv, read_values, roc_from_samples, run_experiment
from .mean_test import DEFAULT_ALPHA, DEFAULT_C_TH, MeanTestConfig, decide_mean, mxpbf_mean
from .scenarios import PRESETS, ScenarioSpec, preset

EQUAL_COV_NOTE = "note: the mean test assumes both populations share one covariance matrix; this is not checked"


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid {kind.__name__}: {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return value

    return parse


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("MXPBF_THREADS")
    return int(env) if env and env.isdigit() and int(env) > 0 else None


def _emit(payload: dict, as_json: bool, out=None):
    stream = out or sys.stdout
    if as_json:
        stream.write(json.dumps(payload, indent=2) + "\n")
    else:
        for key, value in payload.items():
            stream.write(f"{key}: {value}\n")


def _finite_or_str(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def cmd_mean(args) -> int:
    x = read_matrix_csv(args.x, header=args.header)
    y = read_matrix_csv(args.y, header=args.header)
    res = mxpbf_mean(x, y, MeanTestConfig(alpha=args.alpha))
    reject = decide_mean(res, args.c_th)
    print(EQUAL_COV_NOTE, file=sys.stderr)
    payload = {
        "test": "mean",
        "n1": x.n,
        "n2": y.n,
        "p": x.p,
        "alpha": args.alpha,
        "gamma": res.gamma,
        "log_mxpbf": _finite_or_str(res.log_mxpbf),
        "argmax_column": res.argmax_index + 1,
        "c_th": args.c_th,
        "decision": "reject H0" if reject else "retain H0",
        "degenerate_columns": res.n_degenerate,
    }
    _emit(payload, args.json)
    return 0


def cmd_cov(args) -> int:
    x = read_matrix_csv(args.x, header=args.header)
    y = read_matrix_csv(args.y, header=args.header)
    b01 = args.b01 if args.b01 is not None else args.b0
    b02 = args.b02 if args.b02 is not None else args.b0
    cfg = CovTestConfig(alpha=args.alpha, a0=args.a0, b0=args.b0, b01=b01, b02=b02)
    res = mxpbf_cov(x, y, cfg, center=args.center, top_k=args.top_k, threads=_threads(args))
    reject = decide_cov(res, args.c_th)
    i, j = res.argmax_pair
    payload = {
        "test": "cov",
        "n1": x.n,
        "n2": y.n,
        "p": x.p,
        "centered": args.center,
        "alpha": args.alpha,
        "gamma": res.gamma,
        "log_mxpbf": _finite_or_str(res.log_mxpbf),
        "argmax_pair": [i + 1, j + 1],
        "c_th": args.c_th,
        "decision": "reject H0" if reject else "retain H0",
        "evaluated_pairs": res.evaluated_pairs,
        "skipped_pairs": res.skipped_pairs,
        "top_k": [{"pair": [a + 1, b + 1], "log_pbf": _finite_or_str(v)} for (a, b), v in res.top_k],
    }
    _emit(payload, args.json)
    return 0


def cmd_simulate(args) -> int:
    if args.spec:
        spec = ScenarioSpec.load(args.spec)
        overrides = {k: v for k, v in (("n", args.n), ("p", args.p), ("signal", args.signal), ("seed", args.seed))
                     if v is not None}
        if overrides:
            spec = ScenarioSpec(**{**spec.to_dict(), **overrides})
    else:
        if not args.preset:
            raise SystemExit("simulate: one of --preset or --spec is required")
        spec = preset(
            args.preset,
            n=args.n if args.n is not None else 100,
            p=args.p if args.p is not None else 100,
            signal=args.signal if args.signal is not None else 0.0,
            seed=args.seed if args.seed is not None else 0,
        )
    cov_cfg = None
    if not spec.kind.is_mean:
        cov_cfg = CovTestConfig(alpha=args.alpha, a0=args.a0, b0=args.b0, b01=args.b0, b02=args.b0)
    report = run_experiment(
        spec,
        args.methods.split(","),
        args.reps,
        threads=_threads(args),
        alpha=args.alpha,
        c_th=args.c_th,
        cov_cfg=cov_cfg,
        level=args.level,
    )
    text = report.to_json(include_timing=args.timing)
    if args.out:
        Path(args.out).write_text(text)
        for m in report.methods:
            print(f"{m.name}: auc={m.roc.auc:.4f} rejection_rate={m.rejection_rate:.3f} "
                  f"false_rejection_rate={m.false_rejection_rate:.3f}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_roc(args) -> int:
    curves = {}
    if args.report:
        report = ExperimentReport.from_dict(json.loads(Path(args.report).read_text()))
        for m in report.methods:
            curves[m.name] = m.roc
    elif args.h0 and args.h1:
        curves["samples"] = roc_from_samples(read_values(args.h0), read_values(args.h1))
    else:
        raise SystemExit("roc: give --report, or both --h0 and --h1")
    if args.json:
        payload = {name: {"auc": c.auc, "n_h0": c.n_h0, "n_h1": c.n_h1, "points": c.points}
                   for name, c in curves.items()}
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        sys.stdout.write("method,fpr,tpr\n")
        for name, c in curves.items():
            for f, t in c.points:
                sys.stdout.write(f"{name},{f:.17g},{t:.17g}\n")
        for name, c in curves.items():
            print(f"{name}: auc={c.auc:.6f}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mxpbf", description="Maximum pairwise Bayes factor two-sample tests")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("--x", required=True, help="CSV, rows are observations of population 1")
        p.add_argument("--y", required=True, help="CSV, rows are observations of population 2")
        p.add_argument("--header", action="store_true", help="skip one header line in each CSV")
        p.add_argument("--json", action="store_true", help="print JSON instead of key: value lines")
        p.add_argument("--alpha", type=_positive(float), default=DEFAULT_ALPHA)
        p.add_argument("--c-th", dest="c_th", type=_positive(float), default=DEFAULT_C_TH,
                       help="Bayes factor threshold (default 10)")

    def prior_args(p):
        p.add_argument("--a0", type=_positive(float), default=0.01)
        p.add_argument("--b0", type=_positive(float), default=0.01)

    def thread_arg(p):
        p.add_argument("--threads", type=_positive(int), default=None,
                       help="worker threads (default: $MXPBF_THREADS or CPU count)")

    p_mean = sub.add_parser("mean", help="two-sample mean test")
    data_args(p_mean)
    p_mean.set_defaults(func=cmd_mean)

    p_cov = sub.add_parser("cov", help="two-sample covariance test")
    data_args(p_cov)
    prior_args(p_cov)
    p_cov.add_argument("--b01", type=_positive(float), default=None, help="defaults to --b0")
    p_cov.add_argument("--b02", type=_positive(float), default=None, help="defaults to --b0")
    p_cov.add_argument("--center", action=argparse.BooleanOptionalAction, default=True,
                       help="subtract per-population column means first (default on)")
    p_cov.add_argument("--top-k", dest="top_k", type=_positive(int), default=10)
    thread_arg(p_cov)
    p_cov.set_defaults(func=cmd_cov)

    p_sim = sub.add_parser("simulate", help="Monte Carlo experiment with ROC summaries")
    p_sim.add_argument("--preset", choices=sorted(PRESETS))
    p_sim.add_argument("--spec", help="key=value scenario file (overrides --preset)")
    p_sim.add_argument("--n", type=_positive(int), default=None)
    p_sim.add_argument("--p", type=_positive(int), default=None)
    p_sim.add_argument("--signal", type=float, default=None)
    p_sim.add_argument("--reps", type=_positive(int), default=50)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--methods", default="mxpbf", help="comma list: mxpbf,bs,sd (mean) or mxpbf,clx,lc,sch (cov)")
    p_sim.add_argument("--alpha", type=_positive(float), default=DEFAULT_ALPHA)
    prior_args(p_sim)
    p_sim.add_argument("--c-th", dest="c_th", type=_positive(float), default=DEFAULT_C_TH)
    p_sim.add_argument("--level", type=_positive(float), default=baselines.DEFAULT_LEVEL)
    p_sim.add_argument("--out", help="write the JSON report here instead of stdout")
    p_sim.add_argument("--timing", action="store_true", help="include wall time (breaks byte-reproducibility)")
    thread_arg(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_roc = sub.add_parser("roc", help="ROC points and AUC")
    p_roc.add_argument("--report", help="JSON report written by simulate")
    p_roc.add_argument("--h0", help="file of null statistics, one per line")
    p_roc.add_argument("--h1", help="file of alternative statistics, one per line")
    p_roc.add_argument("--json", action="store_true")
    p_roc.set_defaults(func=cmd_roc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            parser.print_usage(sys.stderr)
            print(f"{parser.prog}: error: {exc.code}", file=sys.stderr)
            return 2
        raise
    except (MxpbfError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
