"""Survival metrics for test-minus-control differences and ratios.

Three variants per target difference d: conditional on a zero control
outcome, conditional on a positive control outcome, and the mixture of
the two (law of total probability).  Evaluated either at plug-in
posterior-mean parameters (default) or as quadrature mixtures over the
row posterior ("predictive" mode).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .parallel import ordered_map
from .tweedie import NaturalParams, cdf, log_density, zero_mass

DEFAULT_TARGETS = (20.0, 40.0, 60.0, 80.0)

# One component = (weight, params); a plug-in evaluation is the singleton
# mixture with weight 1.
Mixture = list[tuple[float, NaturalParams]]


def _as_mixture(p) -> Mixture:
    if isinstance(p, NaturalParams):
        return [(1.0, p)]
    total = sum(w for w, _ in p)
    return [(w / total, comp) for w, comp in p]


def _mix_zero_mass(mix: Mixture) -> float:
    return sum(w * zero_mass(comp) for w, comp in mix)


def _mix_cdf(x, mix: Mixture):
    out = 0.0
    for w, comp in mix:
        out = out + w * cdf(x, comp)
    return out


def _mix_density(x, mix: Mixture):
    out = 0.0
    for w, comp in mix:
        out = out + w * np.exp(log_density(x, comp))
    return out


def tail_quantile(p, prob: float = 1.0 - 1e-9) -> float:
    """Upper quantile by bisection on the CDF (internal integration bound)."""
    mix = _as_mixture(p)
    hi = max(c.mu + 40.0 * np.sqrt(c.phi * c.mu ** c.xi) for _, c in mix)
    while _mix_cdf(hi, mix) < prob:
        hi *= 2.0
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _mix_cdf(mid, mix) < prob:
            lo = mid
        else:
            hi = mid
    return hi


def surv_given_zero(pT, d: float) -> float:
    """P(X_T > d) - the difference exceeds d when the control is zero."""
    if d < 0:
        raise ValueError("d must be nonnegative")
    return float(1.0 - _mix_cdf(float(d), _as_mixture(pT)))


def _positive_part_integral(pC, integrand_tail, tol: float = 1e-6,
                            max_refine: int = 4) -> float:
    """Composite-Simpson integral of f_C(x) * tail(x) over the positive
    support of the control density, normalized by 1 - P(X_C = 0).

    tail(x) receives the full node vector; refinement halves the step
    until successive estimates agree within tol.
    """
    mixC = _as_mixture(pC)
    p0 = _mix_zero_mass(mixC)
    if p0 >= 1.0 - 1e-300:
        return 0.0
    upper = tail_quantile(pC)

    # The continuous control density diverges (integrably) at 0 whenever
    # the smallest Gamma shape is below 1, which defeats node-based
    # quadrature of f_C directly.  Instead each cell's exact mass comes
    # from CDF differences and the slowly varying tail factor is taken at
    # the cell midpoint, on a mesh graded cubically toward 0 so the CDF's
    # x^a behavior there does not degrade the O(h^2) rate.  The mass
    # beyond the truncation point (<= 1e-9) contributes at the tail value
    # of the last edge.
    def stieltjes(n_cells: int) -> float:
        edges = upper * np.linspace(0.0, 1.0, n_cells + 1) ** 3
        Fc = _mix_cdf(edges, mixC)
        mass = np.diff(Fc)
        mids = 0.5 * (edges[:-1] + edges[1:])
        total = float(np.sum(mass * integrand_tail(mids)))
        total += (1.0 - Fc[-1]) * float(integrand_tail(edges[-1:])[0])
        return total

    n = 2000
    prev = stieltjes(n)
    for _ in range(max_refine):
        n *= 2
        cur = stieltjes(n)
        if abs(cur - prev) < tol:
            return cur / (1.0 - p0)
        prev = cur
    raise RuntimeError("survival integral did not converge after refinement")


def surv_given_positive(pC, pT, d: float) -> float:
    """P(X_T - X_C > d | X_C > 0)."""
    if d < 0:
        raise ValueError("d must be nonnegative")
    mixT = _as_mixture(pT)
    return _positive_part_integral(pC, lambda x: 1.0 - _mix_cdf(x + d, mixT))


def surv_unconditional(pC, pT, d: float) -> float:
    """Mixture over the control atom: P(X_T - X_C > d)."""
    p0 = _mix_zero_mass(_as_mixture(pC))
    return p0 * surv_given_zero(pT, d) + (1.0 - p0) * surv_given_positive(pC, pT, d)


def ratio_surv(pC, pT, r: float) -> float:
    """P(X_T / X_C > r | X_C > 0); the control atom never enters."""
    if r <= 0:
        raise ValueError("r must be positive")
    mixT = _as_mixture(pT)
    return _positive_part_integral(pC, lambda x: 1.0 - _mix_cdf(r * x, mixT))


def posterior_mixture_surv(p_same: float, surv_same: float, surv_diff: float) -> float:
    """Posterior-weighted survival across the same/different hypotheses."""
    for v in (p_same, surv_same, surv_diff):
        if not 0.0 <= v <= 1.0:
            raise ValueError("inputs must be probabilities")
    return p_same * surv_same + (1.0 - p_same) * surv_diff


@dataclass(frozen=True)
class SurvivalTable:
    """Per-row survival values: variants 0/1/2 (control zero, control
    positive, unconditional) for the same-process pair (control, control)
    and the different-process pair (control, shifted)."""

    row_ids: tuple[str, ...]
    targets: tuple[float, ...]
    same: dict  # variant -> (N, T) array
    diff: dict


def _surv1_pair(mixC, p0, upper, mixes, targets, tol=1e-6, max_refine=5):
    """surv_given_positive for every target and both test mixtures,
    sharing the control cell masses across all of them."""

    def level(n_cells):
        edges = upper * np.linspace(0.0, 1.0, n_cells + 1) ** 3
        Fc = _mix_cdf(edges, mixC)
        mass = np.diff(Fc)
        mids = 0.5 * (edges[:-1] + edges[1:])
        out = {}
        for label, mixT in mixes.items():
            vals = []
            for d in targets:
                v = float(np.sum(mass * (1.0 - _mix_cdf(mids + d, mixT))))
                v += (1.0 - Fc[-1]) * (1.0 - float(_mix_cdf(upper + d, mixT)))
                vals.append(v)
            out[label] = np.array(vals)
        return out

    n = 1000
    prev = level(n)
    for _ in range(max_refine):
        n *= 2
        cur = level(n)
        if all(np.all(np.abs(cur[k] - prev[k]) < tol) for k in cur):
            return {k: v / (1.0 - p0) for k, v in cur.items()}
        prev = cur
    raise RuntimeError("survival integral did not converge after refinement")


def _row_survivals(pair, targets):
    pc, ps = pair  # each a NaturalParams or a weighted mixture
    mixC = _as_mixture(pc)
    p0 = _mix_zero_mass(mixC)
    upper = tail_quantile(pc)
    mixes = {"same": mixC, "diff": _as_mixture(ps)}
    s1 = _surv1_pair(mixC, p0, upper, mixes, targets)
    out = {}
    for label, mixT in mixes.items():
        s0 = np.array([1.0 - float(_mix_cdf(float(d), mixT)) for d in targets])
        out[label] = (s0, s1[label], p0 * s0 + (1.0 - p0) * s1[label])
    return out


def build_survival_table(row_ids, control, shifted,
                         targets=DEFAULT_TARGETS, workers=None) -> SurvivalTable:
    """Survival table over all rows at the configured target differences.

    `control` and `shifted` are either N x 3 arrays of plug-in natural
    parameters or per-row weighted mixtures for predictive-mode tables.
    """
    targets = tuple(float(d) for d in targets)
    if any(d <= 0 for d in targets):
        raise ValueError("targets must be positive")
    if isinstance(control, np.ndarray):
        control = [NaturalParams(*row) for row in np.atleast_2d(control)]
    if isinstance(shifted, np.ndarray):
        shifted = [NaturalParams(*row) for row in np.atleast_2d(shifted)]
    pairs = list(zip(control, shifted))
    rows = ordered_map(partial(_row_survivals, targets=targets), pairs, workers=workers)
    same = {v: np.array([r["same"][v] for r in rows]) for v in (0, 1, 2)}
    diff = {v: np.array([r["diff"][v] for r in rows]) for v in (0, 1, 2)}
    return SurvivalTable(tuple(row_ids), targets, same, diff)
