"""Per-row Bayesian screen: marginal likelihoods under the control prior
and a regime-shifted alternative, Bayes factors, the posterior of the
same-process proportion pi0, and per-row P(gamma_i = 0).

All pi0 integrals are uniform-grid Riemann sums on the configured grid
(999 points by default); the Beta(zeta, 1) prior on pi0 is folded into
the exponent of the unnormalized density.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.special import logsumexp

from .config import ScreenConfig
from .mlfit import PriorSpec, fit_pooled
from .parallel import ordered_map
from .quadrature import QuadratureRule, affine_map, prune_rule, tensor_rule
from .tweedie import (
    NaturalParams,
    RegimeShift,
    TransformedParams,
    _series_logpdf_params,
    from_transformed,
    log_zero_mass_params,
)


@dataclass(frozen=True)
class RowPosterior:
    log_marginal: float
    post_mean_eta: np.ndarray

    @property
    def post_mean_natural(self) -> NaturalParams:
        return from_transformed(TransformedParams(*self.post_mean_eta))


@dataclass(frozen=True)
class AlternativePrior:
    """Row-specific shifted prior means with a shared covariance."""

    mean_eta: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class Pi0Posterior:
    grid: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    e_pi0: float
    zeta: float

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])


@dataclass(frozen=True)
class DirectionResult:
    """One control/test orientation of the screen."""

    row_ids: tuple[str, ...]
    log_bf: np.ndarray
    p_same: np.ndarray
    pi0: Pi0Posterior
    control_label: str
    prior: PriorSpec
    control_posteriors: list[RowPosterior]
    control_natural: np.ndarray  # N x 3 posterior-mean (xi, mu, phi)
    shifted_natural: np.ndarray  # N x 3 after the regime shift
    alt_cov: np.ndarray

    @property
    def bayes_factor(self) -> np.ndarray:
        return np.exp(self.log_bf)


def etas_to_natural(etas: np.ndarray) -> np.ndarray:
    """(K, 3) transformed vectors -> (K, 3) natural (xi, mu, phi)."""
    etas = np.atleast_2d(etas)
    xi = 1.0 + 1.0 / (1.0 + np.exp(-etas[:, 0]))
    xi = np.minimum(xi, np.nextafter(2.0, 1.0))
    return np.column_stack([xi, np.exp(etas[:, 1]), np.exp(etas[:, 2])])


def natural_to_etas(nats: np.ndarray) -> np.ndarray:
    nats = np.atleast_2d(nats)
    xi, mu, phi = nats[:, 0], nats[:, 1], nats[:, 2]
    return np.column_stack([np.log((xi - 1.0) / (2.0 - xi)), np.log(mu), np.log(phi)])


def row_loglik_at_points(row: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Row log likelihood at each quadrature point in eta-space.

    Zeros enter through the analytic atom; repeated positive values are
    evaluated once and weighted by their multiplicity.
    """
    nat = etas_to_natural(points)
    xi, mu, phi = nat[:, 0], nat[:, 1], nat[:, 2]
    L = np.zeros(points.shape[0])
    n_zero = int(np.sum(row == 0))
    if n_zero:
        L += n_zero * log_zero_mass_params(xi, mu, phi)
    pos, counts = np.unique(row[row > 0], return_counts=True)
    for x, c in zip(pos, counts):
        L += c * _series_logpdf_params(float(x), xi, mu, phi)
    return L


def row_marginal_and_postmean(row, rule: QuadratureRule) -> RowPosterior:
    """Marginal density and self-normalized posterior mean of eta under
    the prior encoded by the (affine-mapped) rule."""
    row = np.asarray(row, float)
    if row.size < 1:
        raise ValueError("row must contain at least one observation")
    L = row_loglik_at_points(row, rule.points)
    t = np.log(rule.weights) + L
    log_marg = float(logsumexp(t))
    if not np.isfinite(log_marg):
        raise ValueError("all quadrature likelihoods vanished for this row")
    post = np.exp(t - log_marg)
    return RowPosterior(log_marg, post @ rule.points)


def build_alternative(post_means_eta: np.ndarray, shift: RegimeShift,
                      ridge: float = 1e-8) -> AlternativePrior:
    """Shift each row's natural posterior mean, re-transform, and take the
    empirical covariance of the shifted vectors across rows."""
    post_means_eta = np.atleast_2d(post_means_eta)
    if post_means_eta.shape[0] < 2:
        raise ValueError("need at least 2 rows for an empirical covariance")
    nats = etas_to_natural(post_means_eta)
    if np.any(nats[:, 1] + shift.delta <= 0):
        raise ValueError("regime shift drives a row mean nonpositive")
    psi = shift.psi
    xi = nats[:, 0]
    new_xi = ((2.0 * psi - 1.0) * xi + 2.0 * (1.0 - psi)) / ((psi - 1.0) * xi + 2.0 - psi)
    shifted = np.column_stack([new_xi, nats[:, 1] + shift.delta, shift.rho * nats[:, 2]])
    new_etas = natural_to_etas(shifted)
    cov = np.cov(new_etas, rowvar=False)
    vals = np.linalg.eigvalsh(cov)
    if vals.min() <= 1e-12 * max(vals.max(), 1e-300):
        warnings.warn("singular alternative covariance; adding ridge", RuntimeWarning)
        cov = cov + ridge * np.eye(3)
    return AlternativePrior(new_etas, cov)


def bayes_factor(test_row, same_mean, same_cov, alt: AlternativePrior,
                 unit_rule: QuadratureRule) -> float:
    """Marginal-likelihood ratio of the shifted prior to the same-process
    prior for one test row."""
    same_rule = affine_map(unit_rule, same_mean, same_cov)
    diff_rule = affine_map(unit_rule, np.ravel(alt.mean_eta), alt.cov)
    lm_same = row_marginal_and_postmean(test_row, same_rule).log_marginal
    lm_diff = row_marginal_and_postmean(test_row, diff_rule).log_marginal
    return float(np.exp(lm_diff - lm_same))


def pi0_posterior(B=None, grid=None, zeta: float = 5.0, *, log_b=None) -> Pi0Posterior:
    """Posterior of pi0 on a uniform grid under a Beta(zeta, 1) prior.

    Unnormalized log density: (N + zeta - 1) log(pi) plus the sum over
    rows of log(1 + ((1 - pi)/pi) B_i), evaluated stably in log space.
    Accepts Bayes factors directly or as logs (log_b wins if given).
    """
    if log_b is None:
        B = np.asarray(B, float)
        if np.any(B < 0) or np.any(~np.isfinite(B)):
            raise ValueError("Bayes factors must be finite and nonnegative")
        with np.errstate(divide="ignore"):
            log_b = np.log(B)
    log_b = np.asarray(log_b, float)
    grid = np.asarray(grid, float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    step = float(grid[1] - grid[0])

    n = log_b.size
    log_ratio = np.log1p(-grid) - np.log(grid)  # log((1-pi)/pi)
    finite = log_b[np.isfinite(log_b)]  # B_i = 0 rows contribute log(1) = 0
    terms = np.logaddexp(0.0, log_ratio[:, None] + finite[None, :]).sum(axis=1)
    logq = (n + zeta - 1.0) * np.log(grid) + terms
    density = np.exp(logq - logq.max())
    density /= density.sum() * step
    cdf = np.cumsum(density) / density.sum()
    e_pi0 = 1.0 - step * float(cdf.sum())
    return Pi0Posterior(grid, density, cdf, e_pi0, zeta)


def ppost_gamma(gamma: int, B: float, pi0) -> np.ndarray:
    """Conditional posterior probability of gamma given pi0 and one Bayes
    factor; gamma = 0 means same process."""
    pi0 = np.asarray(pi0, float)
    r = (1.0 - pi0) / pi0
    if gamma == 0:
        return 1.0 / (1.0 + r * B)
    return r * B / (1.0 + r * B)


def p_gamma0(B: float | None, post: Pi0Posterior, *, log_b: float | None = None) -> float:
    """Riemann-sum expectation of 1/(1 + ((1-pi)/pi) B) under the pi0
    posterior; equals E[pi0] at B = 1 and 1 at B = 0."""
    if log_b is None:
        if B < 0:
            raise ValueError("Bayes factor must be nonnegative")
        log_b = np.log(B) if B > 0 else -np.inf
    if log_b == -np.inf:
        return float(np.sum(post.density) * post.step)
    log_ratio = np.log1p(-post.grid) - np.log(post.grid)
    inv = np.exp(-np.logaddexp(0.0, log_ratio + log_b))
    return float(np.sum(post.density * inv) * post.step)


def build_unit_rule(cfg: ScreenConfig) -> QuadratureRule:
    rule = tensor_rule(cfg.ngridpts, 3)
    if cfg.prune > 0:
        rule = prune_rule(rule, cfg.prune)
    return rule


def _control_row_task(row, rotated, mean, log_w):
    rp = row_marginal_and_postmean_points(row, rotated + mean, log_w)
    return rp


def row_marginal_and_postmean_points(row, points, log_w) -> RowPosterior:
    L = row_loglik_at_points(np.asarray(row, float), points)
    t = log_w + L
    log_marg = float(logsumexp(t))
    post = np.exp(t - log_marg)
    return RowPosterior(log_marg, post @ points)


def _test_row_task(args, rot_same, rot_alt, log_w):
    row, mean_same, mean_alt = args
    lm_same = row_marginal_and_postmean_points(row, rot_same + mean_same, log_w).log_marginal
    lm_diff = row_marginal_and_postmean_points(row, rot_alt + mean_alt, log_w).log_marginal
    return lm_diff - lm_same


def _rotation(unit_points: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Unit points mapped through the covariance factor, before the mean
    translation (which is the only per-row part)."""
    mapped = affine_map(QuadratureRule(unit_points, np.ones(len(unit_points))), np.zeros(3), cov)
    return mapped.points


def run_direction(Xc: np.ndarray, Xt: np.ndarray, cfg: ScreenConfig,
                  row_ids=None, control_label: str = "control",
                  workers: int | None = None) -> DirectionResult:
    """Full screen in one orientation.

    Steps: pooled ML prior from the control matrix; per-row control
    posteriors; regime-shifted alternative prior; test-row marginals under
    both priors giving Bayes factors; pi0 posterior; per-row P(gamma = 0).
    """
    Xc = np.asarray(Xc, float)
    Xt = np.asarray(Xt, float)
    if Xc.shape[0] != Xt.shape[0]:
        raise ValueError("control and test matrices must share rows")
    n_rows = Xc.shape[0]
    if row_ids is None:
        row_ids = tuple(f"row{i}" for i in range(n_rows))
    row_ids = tuple(row_ids)

    fit = fit_pooled(Xc.ravel(), cfg.inits)
    prior = fit.prior
    unit = build_unit_rule(cfg)
    log_w = np.log(unit.weights)
    rot_ctrl = _rotation(unit.points, prior.cov)

    task = partial(_control_row_task, rotated=rot_ctrl, mean=prior.mean, log_w=log_w)
    control_posts = ordered_map(task, list(Xc), workers=workers)
    post_means = np.array([rp.post_mean_eta for rp in control_posts])
    control_nat = etas_to_natural(post_means)

    alt = build_alternative(post_means, cfg.shift)
    alt_cov = prior.cov if cfg.alt_cov == "control" else alt.cov
    shifted_nat = etas_to_natural(alt.mean_eta)
    rot_alt = _rotation(unit.points, alt_cov)

    test_task = partial(_test_row_task, rot_same=rot_ctrl, rot_alt=rot_alt, log_w=log_w)
    pairs = [(Xt[i], post_means[i], alt.mean_eta[i]) for i in range(n_rows)]
    log_bf = np.array(ordered_map(test_task, pairs, workers=workers))

    pi0 = pi0_posterior(grid=cfg.pi0_points(), zeta=cfg.zeta, log_b=log_bf)
    p_same = np.array([p_gamma0(None, pi0, log_b=lb) for lb in log_bf])
    return DirectionResult(
        row_ids=row_ids,
        log_bf=log_bf,
        p_same=p_same,
        pi0=pi0,
        control_label=control_label,
        prior=prior,
        control_posteriors=control_posts,
        control_natural=control_nat,
        shifted_natural=shifted_nat,
        alt_cov=alt_cov,
    )


def run_both(Xc, Xt, cfg: ScreenConfig, row_ids=None,
             workers: int | None = None) -> tuple[DirectionResult, DirectionResult]:
    """Run the screen in both orientations (control/test swapped)."""
    ct = run_direction(Xc, Xt, cfg, row_ids, control_label="CT", workers=workers)
    tc = run_direction(Xt, Xc, cfg, row_ids, control_label="TC", workers=workers)
    return ct, tc
