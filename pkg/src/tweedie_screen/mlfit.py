"""Pooled maximum-likelihood estimation of transformed Tweedie parameters.

All control observations are flattened into one sample; the optimum and
the inverse numerical Hessian define the multivariate-normal
Empirical-Bayes prior used by the screening engine.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .tweedie import (
    NaturalParams,
    TransformedParams,
    from_transformed,
    log_density,
    to_transformed,
    zero_mass,
)

DEFAULT_INITS = (1.5, 2.0)


@dataclass(frozen=True)
class PriorSpec:
    """Normal prior on transformed parameters: mean vector and 3x3 PD
    covariance, plus the natural-scale image of the mean."""

    mean: np.ndarray
    cov: np.ndarray
    natural: NaturalParams


@dataclass(frozen=True)
class FitReport:
    prior: PriorSpec
    neg_log_lik: float
    iterations: int
    converged: bool
    corr: np.ndarray


def neg_log_lik(eta, data: np.ndarray) -> float:
    """Negative pooled log likelihood at transformed parameters eta."""
    data = np.asarray(data, float)
    if data.size == 0:
        raise ValueError("data must be nonempty")
    if isinstance(eta, TransformedParams):
        eta = eta.as_array()
    p = from_transformed(TransformedParams(*np.asarray(eta, float)))
    n_zero = int(np.sum(data == 0))
    pos = data[data > 0]
    total = 0.0
    if n_zero:
        total += n_zero * np.log(zero_mass(p))
    if pos.size:
        total += float(np.sum(log_density(pos, p)))
    return -total


def numerical_hessian(f, at, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with per-coordinate step scaled by
    1 + |at_i|; symmetrized as (H + H') / 2."""
    at = np.asarray(at, float)
    k = at.size
    h = step * (1.0 + np.abs(at))
    H = np.empty((k, k))
    f0 = f(at)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        H[i, i] = (f(at + ei) - 2.0 * f0 + f(at - ei)) / h[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(at + ei + ej) - f(at + ei - ej) - f(at - ei + ej) + f(at - ei - ej)
            ) / (4.0 * h[i] * h[j])
    if not np.all(np.isfinite(H)):
        raise ValueError("non-finite value encountered in Hessian evaluation")
    return 0.5 * (H + H.T)


def fit_pooled(data, inits=DEFAULT_INITS, max_evals: int = 2000) -> FitReport:
    """Fit the pooled prior by Nelder-Mead on the transformed scale.

    Starts at (logit(xi0 - 1), log(mean of positive data), log(phi0));
    prior covariance is the inverse of the central-difference Hessian at
    the optimum, ridged if ill-conditioned.
    """
    data = np.asarray(data, float).ravel()
    if data.size < 10:
        raise ValueError("need at least 10 observations for a pooled fit")
    pos = data[data > 0]
    if pos.size == 0:
        raise ValueError("need at least one positive observation")
    xi0, phi0 = inits
    if not (1.0 < xi0 < 2.0) or phi0 <= 0:
        raise ValueError(f"invalid inits {inits}")

    eta0 = to_transformed(NaturalParams(xi0, float(pos.mean()), phi0)).as_array()
    obj = lambda e: neg_log_lik(e, data)  # noqa: E731
    f0 = obj(eta0)
    res = minimize(
        obj,
        eta0,
        method="Nelder-Mead",
        options={
            "fatol": 1e-8 * max(1.0, abs(f0)),
            "xatol": 1e-6,
            "maxfev": max_evals,
            "maxiter": max_evals,
        },
    )
    H = numerical_hessian(obj, res.x)
    cov = _invert_hessian(H)
    d = np.sqrt(np.diag(cov))
    corr = cov / np.outer(d, d)
    mean = np.asarray(res.x, float)
    prior = PriorSpec(mean, cov, from_transformed(TransformedParams(*mean)))
    return FitReport(prior, float(res.fun), int(res.nit), bool(res.success), corr)


def _invert_hessian(H: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e12:
        warnings.warn(
            "ill-conditioned Hessian; adding diagonal ridge", RuntimeWarning
        )
        H = H + 1e-8 * (np.trace(H) / H.shape[0]) * np.eye(H.shape[0])
    cov = np.linalg.inv(H)
    # enforce exact symmetry for downstream eigendecompositions
    return 0.5 * (cov + cov.T)
