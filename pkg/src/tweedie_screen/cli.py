"""Command-line entry point.

Subcommands: ``screen`` (full pipeline), ``simulate`` (synthetic matrix
generation), ``fit`` (pooled prior only), ``dist`` (density/CDF point
evaluation).  Flags override values read from a ``--config`` file.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import ScreenConfig, read_config_file, parse_columns
from .matrix_io import ExpressionMatrix, load_matrix, save_matrix
from .mlfit import fit_pooled
from .pipeline import emit_plots, run_screen, write_results
from .simulate import SimSpec, generate
from .tweedie import NaturalParams, RegimeShift, cdf, log_density


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tweedie-screen",
        description="Empirical-Bayes Tweedie screening of expression matrices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("screen", help="run the full screening pipeline")
    sc.add_argument("--input", required=True, help="delimited matrix file")
    sc.add_argument("--out", required=True, help="output directory")
    sc.add_argument("--config", help="key = value config file")
    sc.add_argument("--control-cols", help="1-based ranges, e.g. 1-44")
    sc.add_argument("--test-cols", help="1-based ranges, e.g. 45-92")
    sc.add_argument("--row-frac", type=float, help="fraction of rows (default 1)")
    sc.add_argument("--ctrl-frac", type=float, help="fraction of control columns (default 1)")
    sc.add_argument("--test-frac", type=float, help="fraction of test columns (default 1)")
    sc.add_argument("--seed", type=int, help="subsampling seed (default 0)")
    sc.add_argument("--inits", help="ML starting xi,phi (default 1.5,2)")
    sc.add_argument("--shift", help="regime shift psi,delta,rho (default 2,2,1)")
    sc.add_argument("--targets", help="difference targets (default 20,40,60,80)")
    sc.add_argument("--pi0-grid", help="start,stop,step (default 0.001,0.999,0.001)")
    sc.add_argument("--ngridpts", type=int, help="quadrature points per dimension (default 10)")
    sc.add_argument("--prune", type=float, help="quadrature pruning fraction (default 0.2)")
    sc.add_argument("--zeta", type=float, help="Beta prior shape for pi0 (default 5)")
    sc.add_argument("--digits", type=int, help="output rounding digits (default 3)")
    sc.add_argument("--alt-cov", choices=["empirical", "control"],
                    help="alternative-prior covariance source (default empirical)")
    sc.add_argument("--metrics-mode", choices=["plugin", "predictive"],
                    help="survival-table parameter mode (default plugin)")

    sim = sub.add_parser("simulate", help="generate a labelled synthetic dataset")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--n-rows", type=int, default=200)
    sim.add_argument("--m-control", type=int, default=10)
    sim.add_argument("--m-test", type=int, default=10)
    sim.add_argument("--pi0", type=float, default=0.8)
    sim.add_argument("--base", default="1.5,5,2", help="population center xi,mu,phi")
    sim.add_argument("--spread", type=float, default=0.05,
                     help="diagonal population variance in transformed space")
    sim.add_argument("--shift", default="2,20,1", help="psi,delta,rho for shifted rows")
    sim.add_argument("--seed", type=int, default=0)

    ft = sub.add_parser("fit", help="pooled ML prior fit only")
    ft.add_argument("--input", required=True)
    ft.add_argument("--control-cols", required=True)
    ft.add_argument("--inits", default="1.5,2")

    ds = sub.add_parser("dist", help="evaluate density/CDF at a point")
    ds.add_argument("--xi", type=float, required=True)
    ds.add_argument("--mu", type=float, required=True)
    ds.add_argument("--phi", type=float, required=True)
    ds.add_argument("--x", type=float, required=True)
    ds.add_argument("--cdf", action="store_true", help="report the CDF instead")
    return parser


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _screen_config(args) -> ScreenConfig:
    kw = read_config_file(args.config) if args.config else {}
    if args.control_cols:
        kw["control_cols"] = parse_columns(args.control_cols)
    if args.test_cols:
        kw["test_cols"] = parse_columns(args.test_cols)
    for flag, key in (
        ("row_frac", "row_fraction"),
        ("ctrl_frac", "control_fraction"),
        ("test_frac", "test_fraction"),
        ("seed", "seed"),
        ("ngridpts", "ngridpts"),
        ("prune", "prune"),
        ("zeta", "zeta"),
        ("digits", "digits"),
        ("alt_cov", "alt_cov"),
        ("metrics_mode", "metrics_mode"),
    ):
        v = getattr(args, flag)
        if v is not None:
            kw[key] = v
    for flag, key in (("inits", "inits"), ("targets", "targets"), ("pi0_grid", "pi0_grid")):
        v = getattr(args, flag)
        if v is not None:
            kw[key] = _floats(v)
    if args.shift is not None:
        kw["shift"] = RegimeShift(*_floats(args.shift))
    if "shift" in kw and not isinstance(kw["shift"], RegimeShift):
        kw["shift"] = RegimeShift(*kw["shift"])
    if not kw.get("control_cols") or not kw.get("test_cols"):
        raise SystemExit("screen requires --control-cols and --test-cols (or a config file)")
    return ScreenConfig.from_dict(kw)


def _cmd_screen(args) -> int:
    matrix = load_matrix(args.input)
    cfg = _screen_config(args)
    print(f"loaded {matrix.shape[0]} x {matrix.shape[1]} matrix from {args.input}")
    run = run_screen(matrix, cfg)
    write_results(run.ct, run.tc, run.tables, cfg, args.out, timings=run.timings)
    emit_plots(run.ct, run.tc, args.out)
    print(f"screened {len(run.row_ids)} rows; results in {args.out}")
    print(f"E[pi0] CT = {run.ct.pi0.e_pi0:.4f}, TC = {run.tc.pi0.e_pi0:.4f}")
    return 0


def _cmd_simulate(args) -> int:
    base = NaturalParams(*_floats(args.base))
    spec = SimSpec(
        n_rows=args.n_rows,
        m_control=args.m_control,
        m_test=args.m_test,
        pi0_true=args.pi0,
        base=base,
        eta_spread=args.spread * np.eye(3),
        shift=RegimeShift(*_floats(args.shift)),
        seed=args.seed,
    )
    Xc, Xt, labels = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    row_ids = tuple(f"row{i}" for i in range(spec.n_rows))
    ctl_ids = tuple(f"c{j}" for j in range(spec.m_control))
    tst_ids = tuple(f"t{j}" for j in range(spec.m_test))
    save_matrix(ExpressionMatrix(row_ids, ctl_ids, Xc), out / "control.csv")
    save_matrix(ExpressionMatrix(row_ids, tst_ids, Xt), out / "test.csv")
    with (out / "labels.csv").open("w") as fh:
        fh.write("gene,different_process\n")
        for rid, lab in zip(row_ids, labels):
            fh.write(f"{rid},{int(lab)}\n")
    print(f"wrote {spec.n_rows} rows to {out} ({int(labels.sum())} different-process)")
    return 0


def _cmd_fit(args) -> int:
    matrix = load_matrix(args.input)
    cols = np.array(parse_columns(args.control_cols), int) - 1
    data = matrix.values[:, cols].ravel()
    report = fit_pooled(data, _floats(args.inits))
    nat = report.prior.natural
    print(json.dumps({
        "xi": nat.xi,
        "mu": nat.mu,
        "phi": nat.phi,
        "eta_mean": list(report.prior.mean),
        "cov": [list(r) for r in report.prior.cov],
        "corr": [list(r) for r in report.corr],
        "neg_log_lik": report.neg_log_lik,
        "iterations": report.iterations,
        "converged": report.converged,
    }, indent=2))
    return 0


def _cmd_dist(args) -> int:
    p = NaturalParams(args.xi, args.mu, args.phi)
    if args.cdf:
        print(f"{cdf(args.x, p):.6f}")
    else:
        print(f"{math.exp(log_density(args.x, p)):.6f}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "screen": _cmd_screen,
        "simulate": _cmd_simulate,
        "fit": _cmd_fit,
        "dist": _cmd_dist,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
