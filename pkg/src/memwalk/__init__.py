"""Toolkit for a multidimensional random walk with memory and bias.

Samples the process exactly, evaluates every closed-form asymptotic
prediction (law of large numbers, phase boundary, diffusive and critical
covariances, superdiffusive exponent and limit moments), and verifies
the predictions against exact small-instance enumeration and desk-scale
Monte Carlo.
"""

from .model import (
    InitialSpec,
    ModelParams,
    WalkState,
    conditional_law,
    initial_step,
    simulate,
    step,
    validate_params,
)
from .montecarlo import (
    EnsembleSummary,
    VerificationReport,
    VerifyBudget,
    cross_time_covariance,
    default_budget,
    gaussianity_check,
    run_ensemble,
    scaling_exponent,
    verify,
)
from .theory import (
    Regime,
    RegimeMismatchError,
    classify_regime,
    critical_covariance,
    critical_probability,
    diffusive_covariance,
    exact_moments,
    limit_moments,
    lln_limit,
    martingale_coefficients,
    martingale_square_series,
    spectral_decomposition,
)

__version__ = "0.1.0"

__all__ = [
    "InitialSpec",
    "ModelParams",
    "WalkState",
    "conditional_law",
    "initial_step",
    "simulate",
    "step",
    "validate_params",
    "EnsembleSummary",
    "VerificationReport",
    "VerifyBudget",
    "cross_time_covariance",
    "default_budget",
    "gaussianity_check",
    "run_ensemble",
    "scaling_exponent",
    "verify",
    "Regime",
    "RegimeMismatchError",
    "classify_regime",
    "critical_covariance",
    "critical_probability",
    "diffusive_covariance",
    "exact_moments",
    "limit_moments",
    "lln_limit",
    "martingale_coefficients",
    "martingale_square_series",
    "spectral_decomposition",
    "__version__",
]
