"""Synthetic control/test matrices with known same/different labels, and
operating-characteristic scoring of screen output."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tweedie import NaturalParams, RegimeShift, sample, shift_params, to_transformed


@dataclass
class SimSpec:
    n_rows: int = 200
    m_control: int = 10
    m_test: int = 10
    pi0_true: float = 0.8
    base: NaturalParams = field(default_factory=lambda: NaturalParams(1.5, 5.0, 2.0))
    eta_spread: np.ndarray = field(default_factory=lambda: 0.05 * np.eye(3))
    shift: RegimeShift = field(default_factory=lambda: RegimeShift(2.0, 20.0, 1.0))
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pi0_true <= 1.0:
            raise ValueError("pi0_true must lie in [0, 1]")
        if min(self.n_rows, self.m_control, self.m_test) < 1:
            raise ValueError("counts must be >= 1")
        self.eta_spread = np.asarray(self.eta_spread, float)


@dataclass(frozen=True)
class ScreenScore:
    auc: float | None
    mdr_at_threshold: float
    fdr_at_threshold: float
    threshold: float


def generate(spec: SimSpec):
    """Draw (Xc, Xt, labels); label True marks a different-process row.

    Each row gets its own parameter vector from the population normal in
    transformed space; different-process rows sample their test values
    from the regime-shifted parameters.  Per-row generator streams are
    split from the seed, so output is deterministic and order-independent.
    """
    root = np.random.SeedSequence(spec.seed)
    label_rng = np.random.default_rng(root.spawn(1)[0])
    labels = label_rng.random(spec.n_rows) < (1.0 - spec.pi0_true)

    base_eta = to_transformed(spec.base).as_array()
    chol = np.linalg.cholesky(spec.eta_spread)
    Xc = np.empty((spec.n_rows, spec.m_control))
    Xt = np.empty((spec.n_rows, spec.m_test))
    for i, ss in enumerate(root.spawn(spec.n_rows + 1)[1:]):
        rng = np.random.default_rng(ss)
        eta = base_eta + chol @ rng.standard_normal(3)
        xi = 1.0 + 1.0 / (1.0 + np.exp(-eta[0]))
        params = NaturalParams(min(xi, np.nextafter(2.0, 1.0)), np.exp(eta[1]), np.exp(eta[2]))
        Xc[i] = sample(params, spec.m_control, rng)
        test_params = shift_params(params, spec.shift) if labels[i] else params
        Xt[i] = sample(test_params, spec.m_test, rng)
    return Xc, Xt, labels


def score(labels, p_same, threshold: float) -> ScreenScore:
    """AUC (different-process rows ranked below same-process by P(gamma=0),
    ties counting one half), missed-discovery rate, and false-discovery
    rate at the given P(gamma=0) threshold."""
    labels = np.asarray(labels, bool)
    p_same = np.asarray(p_same, float)
    if labels.shape != p_same.shape:
        raise ValueError("labels and scores must have equal length")

    diff_scores = p_same[labels]
    same_scores = p_same[~labels]
    if diff_scores.size == 0 or same_scores.size == 0:
        auc = None
    else:
        less = (diff_scores[:, None] < same_scores[None, :]).sum()
        ties = (diff_scores[:, None] == same_scores[None, :]).sum()
        auc = float((less + 0.5 * ties) / (diff_scores.size * same_scores.size))

    flagged = p_same < threshold
    mdr = float(np.mean(~flagged[labels])) if labels.any() else 0.0
    fdr = float(np.mean(~labels[flagged])) if flagged.any() else 0.0
    return ScreenScore(auc, mdr, fdr, float(threshold))
