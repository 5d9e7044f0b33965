"""End-to-end orchestration: subsample, screen both directions, build
survival tables, and serialize results, plots, and the run manifest."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScreenConfig
from .matrix_io import ExpressionMatrix, subsample
from .metrics import SurvivalTable, build_survival_table
from .quadrature import affine_map
from .screening import (
    DirectionResult,
    build_unit_rule,
    etas_to_natural,
    row_loglik_at_points,
    run_both,
)
from .tweedie import NaturalParams

PGAM0_HEADER = ("gene", "Lik_Rat_CT", "P.gam.eq.0_CT", "Lik_Rat_TC", "P.gam.eq.0_TC")


@dataclass
class ScreenRun:
    ct: DirectionResult
    tc: DirectionResult
    tables: dict  # ("CT"|"TC") -> SurvivalTable
    row_ids: tuple[str, ...]
    timings: dict


def _fmt(v: float, digits: int) -> str:
    return f"{v:.{digits}f}"


def run_screen(matrix: ExpressionMatrix, cfg: ScreenConfig,
               workers: int | None = None) -> ScreenRun:
    """Subsample per the config, screen both orientations, and compute
    survival tables for each."""
    t0 = time.perf_counter()
    Xc, Xt, row_ids, _, _ = subsample(matrix, cfg)
    ct, tc = run_both(Xc, Xt, cfg, row_ids, workers=workers)
    t1 = time.perf_counter()
    tables = {}
    for label, res, X in (("CT", ct, Xc), ("TC", tc, Xt)):
        if cfg.metrics_mode == "predictive":
            control, shifted = _predictive_mixtures(X, res, cfg)
        else:
            control, shifted = res.control_natural, res.shifted_natural
        tables[label] = build_survival_table(
            row_ids, control, shifted, cfg.targets, workers=workers
        )
    t2 = time.perf_counter()
    timings = {"screen_seconds": t1 - t0, "tables_seconds": t2 - t1, "total_seconds": t2 - t0}
    return ScreenRun(ct, tc, tables, row_ids, timings)


def _predictive_mixtures(X: np.ndarray, res: DirectionResult, cfg: ScreenConfig,
                         keep_mass: float = 1.0 - 1e-6):
    """Per-row posterior mixtures over the quadrature rule (renormalized
    weights, lightest components dropped once keep_mass is covered).

    Noticeably slower than plug-in mode; pick a small ngridpts when using
    predictive survival tables.
    """
    unit = build_unit_rule(cfg)
    rule = affine_map(unit, res.prior.mean, res.prior.cov)
    log_w = np.log(rule.weights)
    psi, delta, rho = cfg.shift.psi, cfg.shift.delta, cfg.shift.rho

    control, shifted = [], []
    for row in X:
        t = log_w + row_loglik_at_points(np.asarray(row, float), rule.points)
        row_w = np.exp(t - t.max())
        row_w /= row_w.sum()
        order = np.argsort(row_w)[::-1]
        mass = np.cumsum(row_w[order])
        keep = order[: int(np.searchsorted(mass, keep_mass)) + 1]
        w = row_w[keep] / row_w[keep].sum()
        nats = etas_to_natural(rule.points[keep])
        control.append([(float(wk), NaturalParams(*nk)) for wk, nk in zip(w, nats)])
        xi = nats[:, 0]
        new_xi = ((2 * psi - 1) * xi + 2 * (1 - psi)) / ((psi - 1) * xi + 2 - psi)
        snats = np.column_stack([new_xi, nats[:, 1] + delta, rho * nats[:, 2]])
        shifted.append([(float(wk), NaturalParams(*nk)) for wk, nk in zip(w, snats)])
    return control, shifted


def write_results(ct: DirectionResult, tc: DirectionResult, tables: dict,
                  cfg: ScreenConfig, out_dir, timings: dict | None = None) -> list[Path]:
    """Emit pgam0.csv, pi0_curves.csv, the six survival CSVs, and the run
    manifest.  Values are rounded only here, at cfg.digits."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digits = cfg.digits
    written = []

    path = out / "pgam0.csv"
    with path.open("w", newline="") as fh:
        fh.write(",".join(PGAM0_HEADER) + "\n")
        for i, gene in enumerate(ct.row_ids):
            fields = (
                gene,
                _fmt(float(np.exp(ct.log_bf[i])), digits),
                _fmt(ct.p_same[i], digits),
                _fmt(float(np.exp(tc.log_bf[i])), digits),
                _fmt(tc.p_same[i], digits),
            )
            fh.write(",".join(fields) + "\n")
    written.append(path)

    written.append(write_pi0_curves(ct, tc, out))

    for pair_label, attr in (("11", "same"), ("12", "diff")):
        for variant in (0, 1, 2):
            path = out / f"diffs_{pair_label}_{variant}.csv"
            tab_ct: SurvivalTable = tables["CT"]
            tab_tc: SurvivalTable = tables["TC"]
            header = ["gene"]
            header += [f"d={d:g}_CT" for d in tab_ct.targets]
            header += [f"d={d:g}_TC" for d in tab_tc.targets]
            a = getattr(tab_ct, attr)[variant]
            b = getattr(tab_tc, attr)[variant]
            with path.open("w", newline="") as fh:
                fh.write(",".join(header) + "\n")
                for i, gene in enumerate(tab_ct.row_ids):
                    vals = [_fmt(v, digits) for v in np.concatenate([a[i], b[i]])]
                    fh.write(",".join([gene] + vals) + "\n")
            written.append(path)

    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "version": __version__,
        "n_rows": len(ct.row_ids),
        "timings": timings,
    }
    mpath = out / "run_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2) + "\n")
    written.append(mpath)
    return written


def write_pi0_curves(ct: DirectionResult, tc: DirectionResult, out_dir) -> Path:
    path = Path(out_dir) / "pi0_curves.csv"
    with path.open("w", newline="") as fh:
        fh.write("pi0,density_CT,density_TC,cdf_CT,cdf_TC\n")
        for i, g in enumerate(ct.pi0.grid):
            fh.write(
                f"{g:.6g},{float(ct.pi0.density[i])!r},{float(tc.pi0.density[i])!r},"
                f"{float(ct.pi0.cdf[i])!r},{float(tc.pi0.cdf[i])!r}\n"
            )
    return path


def emit_plots(ct: DirectionResult, tc: DirectionResult, out_dir) -> list[Path]:
    """Overlay density and cdf curves for the two orientations as SVG,
    plus the backing CSV for external reproduction."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_pi0_curves(ct, tc, out)]
    specs = [
        ("pi0_density.svg", "density", r"$f(\pi_0)$"),
        ("pi0_cdf.svg", "cdf", r"$F(\pi_0)$"),
    ]
    for fname, attr, ylabel in specs:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(ct.pi0.grid, getattr(ct.pi0, attr), "-", color="black", label="CT")
        ax.plot(tc.pi0.grid, getattr(tc.pi0, attr), "--", color="black", label="TC")
        ax.set_xlabel(r"$\pi_0$")
        ax.set_ylabel(ylabel)
        ax.legend()
        fig.tight_layout()
        path = out / fname
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written
