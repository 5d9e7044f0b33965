"""Empirical-Bayes screening of nonnegative expression matrices with
Tweedie (compound Poisson-Gamma) likelihoods."""

__version__ = "0.1.0"

from .tweedie import (  # noqa: F401
    CompoundPoissonDecomposition,
    NaturalParams,
    RegimeShift,
    TransformedParams,
    cdf,
    decompose,
    from_transformed,
    log_density,
    sample,
    shift_params,
    to_transformed,
    zero_mass,
)
from .quadrature import (  # noqa: F401
    QuadratureRule,
    affine_map,
    hermite_rule_1d,
    prune_rule,
    renormalize,
    tensor_rule,
)
from .mlfit import FitReport, PriorSpec, fit_pooled, neg_log_lik, numerical_hessian  # noqa: F401
from .screening import (  # noqa: F401
    AlternativePrior,
    DirectionResult,
    Pi0Posterior,
    RowPosterior,
    bayes_factor,
    build_alternative,
    p_gamma0,
    pi0_posterior,
    ppost_gamma,
    row_marginal_and_postmean,
    run_both,
    run_direction,
)
from .metrics import (  # noqa: F401
    SurvivalTable,
    build_survival_table,
    posterior_mixture_surv,
    ratio_surv,
    surv_given_positive,
    surv_given_zero,
    surv_unconditional,
)
from .config import ScreenConfig  # noqa: F401
from .matrix_io import ExpressionMatrix, load_matrix, save_matrix, subsample  # noqa: F401
from .simulate import ScreenScore, SimSpec, generate, score  # noqa: F401
