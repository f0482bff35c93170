"""Predictive densities for multivariate normals under shrinkage priors.

Extended plug-in predictives ``N(mu_hat, Sigma_hat)`` built from posterior
first and second moments, the Bayesian predictive under Stein's harmonic
prior, and a Monte Carlo engine for their Kullback-Leibler risk.
"""

from .estimators import (
    ConjugateNormal,
    EmpiricalBayes,
    ExtendedEstimateE1,
    ExtendedEstimateE2,
    MarginalDerivatives,
    Stein,
    Uniform,
    estimate,
    estimate_conjugate,
    estimate_stein,
    estimate_uniform,
    marginal_log_density_and_derivatives,
    stein_shrinkage_factors,
)
from .gaussian import (
    FullNormal,
    NotPositiveDefiniteError,
    ProblemConfig,
    SphericalNormal,
    kl_divergence,
    log_density,
    sample,
    substream,
)
from .predictive import (
    SteinMixture,
    TauPosterior,
    check_stein_ratio,
    make_method,
    predictive_eb,
    predictive_plugin,
    predictive_stein_bayes,
    predictive_uniform,
    stein_log_ratio,
    stein_posterior_moments,
)
from .risk import (
    RiskCurve,
    RiskEstimate,
    estimate_risk,
    risk_curve,
    risk_integration_check,
    theorem1_derivative_check,
    uniform_risk,
)
from .special import (
    QuadratureError,
    QuadratureRule,
    build_quadrature,
    lower_incomplete_gamma_regularized,
    phi,
    phi_at_zero,
)

__version__ = "0.1.0"

__all__ = [
    "ConjugateNormal",
    "EmpiricalBayes",
    "ExtendedEstimateE1",
    "ExtendedEstimateE2",
    "FullNormal",
    "MarginalDerivatives",
    "NotPositiveDefiniteError",
    "ProblemConfig",
    "QuadratureError",
    "QuadratureRule",
    "RiskCurve",
    "RiskEstimate",
    "SphericalNormal",
    "Stein",
    "SteinMixture",
    "TauPosterior",
    "Uniform",
    "build_quadrature",
    "check_stein_ratio",
    "estimate",
    "estimate_conjugate",
    "estimate_risk",
    "estimate_stein",
    "estimate_uniform",
    "kl_divergence",
    "log_density",
    "lower_incomplete_gamma_regularized",
    "make_method",
    "marginal_log_density_and_derivatives",
    "phi",
    "phi_at_zero",
    "predictive_eb",
    "predictive_plugin",
    "predictive_stein_bayes",
    "predictive_uniform",
    "risk_curve",
    "risk_integration_check",
    "sample",
    "stein_log_ratio",
    "stein_posterior_moments",
    "stein_shrinkage_factors",
    "substream",
    "theorem1_derivative_check",
    "uniform_risk",
]
