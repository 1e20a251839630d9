"""Bayesian adaptive trial simulation."""

from ._trialsim import (
    Design,
    TrialResult,
    beta_params_from_mean_var,
    calibrate,
    idp,
    load_config,
    parse_config,
    pooled_prior_effective_n,
    simulate,
    sqrt_control_prob,
    summarize,
    version,
)

__all__ = [
    "Design",
    "TrialResult",
    "beta_params_from_mean_var",
    "calibrate",
    "idp",
    "load_config",
    "parse_config",
    "pooled_prior_effective_n",
    "simulate",
    "sqrt_control_prob",
    "summarize",
    "version",
]
