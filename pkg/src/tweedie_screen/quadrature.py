"""Gauss-Hermite quadrature against normal kernels.

Rules use the normal-kernel convention: for an unpruned rule,
sum(w_k * g(v_k)) approximates E[g(Z)] with Z standard (multivariate)
normal, and the weights sum to 1.  Pruning drops low-weight tensor points
WITHOUT renormalizing; the resulting uniform deflation of marginal
densities cancels in Bayes-factor ratios and self-normalized means.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

_TENSOR_CAP = 1_000_000


@dataclass(frozen=True)
class QuadratureRule:
    """Immutable K x d abscissae with positive weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, float)))
        object.__setattr__(self, "weights", np.asarray(self.weights, float))
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("points and weights disagree in length")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def hermite_rule_1d(n: int) -> QuadratureRule:
    """n-point rule exact for polynomials of degree <= 2n-1 under the
    standard normal kernel."""
    if not 1 <= n <= 100:
        raise ValueError(f"n must be in [1, 100], got {n}")
    # physicists' nodes/weights (kernel exp(-t^2)); change variables
    t, w = np.polynomial.hermite.hermgauss(n)
    return QuadratureRule(t.reshape(-1, 1) * np.sqrt(2.0), w / np.sqrt(np.pi))


def tensor_rule(n: int, d: int) -> QuadratureRule:
    """Full n^d Cartesian grid with product weights."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if n ** d > _TENSOR_CAP:
        raise ValueError(f"tensor rule size {n}^{d} exceeds cap {_TENSOR_CAP}")
    base = hermite_rule_1d(n)
    pts1 = base.points[:, 0]
    w1 = base.weights
    idx = np.array(list(itertools.product(range(n), repeat=d)))
    return QuadratureRule(pts1[idx], w1[idx].prod(axis=1))


def prune_rule(r: QuadratureRule, frac: float) -> QuadratureRule:
    """Drop every point whose weight is <= the frac-quantile of the
    weights (strict > retained).  Weights are not renormalized."""
    if not 0.0 <= frac < 1.0:
        raise ValueError(f"prune fraction must be in [0, 1), got {frac}")
    qwt = np.quantile(r.weights, frac)
    keep = r.weights > qwt
    if not np.any(keep):
        raise ValueError("pruning removed every quadrature point")
    return QuadratureRule(r.points[keep], r.weights[keep])


def renormalize(r: QuadratureRule) -> QuadratureRule:
    """Rescale weights to sum to 1 (opt-in; pruning deliberately does not)."""
    return QuadratureRule(r.points, r.weights / r.weights.sum())


def affine_map(r: QuadratureRule, mean, cov) -> QuadratureRule:
    """Map a unit rule to integrate against Normal(mean, cov) via the
    eigendecomposition cov = V diag(e) V'; weights are untouched."""
    mean = np.asarray(mean, float)
    cov = np.asarray(cov, float)
    if cov.shape != (r.dim, r.dim) or mean.shape != (r.dim,):
        raise ValueError("mean/cov dimensions do not match the rule")
    vals, vecs = np.linalg.eigh(cov)
    if np.min(vals) <= 1e-12 * np.max(vals):
        raise np.linalg.LinAlgError("covariance is numerically singular")
    # descending eigenvalues, first nonzero eigenvector component positive
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        lead = col[np.flatnonzero(np.abs(col) > 1e-14)[0]]
        if lead < 0:
            vecs[:, j] = -col
    rot = vecs @ np.diag(np.sqrt(vals))
    return QuadratureRule(r.points @ rot.T + mean, r.weights)
