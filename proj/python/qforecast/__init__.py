"""Forecasting of non-Markovian qubit dephasing records."""

from ._core import (
    NumericalError,
    ParameterError,
    ShapeError,
    analytic_covariance,
    expand_sweep,
    fit_ar,
    gpr_predict,
    kappa,
    measure,
    prediction_horizon,
    run_experiment,
    synthesize_truth,
)

__all__ = [
    "NumericalError",
    "ParameterError",
    "ShapeError",
    "analytic_covariance",
    "expand_sweep",
    "fit_ar",
    "gpr_predict",
    "kappa",
    "measure",
    "prediction_horizon",
    "run_experiment",
    "synthesize_truth",
]
