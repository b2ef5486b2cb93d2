"""Full conformal prediction intervals by root-finding on the typicalness function."""

from .core import (
    ABSOLUTE,
    ConformalConfig,
    ConformalError,
    ConformalInterval,
    Dataset,
    FitBudgetExceeded,
    InitializationError,
    InvalidInputError,
    NumericalError,
    ScoreFunction,
    UnsupportedError,
    empirical_quantile,
    rank_of_last,
    score,
    typicalness,
    typicalness_with_slack,
)
from .interp import build_interp_map, interp_conformal_interval, interp_interval, interp_predict
from .oracle import exact_ridge_set
from .regressors import KNN, Lasso, Ridge, affine_coefficients, fit, fit_with_warm_start
from .root import bisect_edge, check_interval_condition, conformal_interval, initialize
from .smooth import SmoothingConfig, delta, phi, smooth_conformal_interval, smooth_rank, smooth_typicalness
from .split import SplitConfig, split_interval

__version__ = "0.1.0"

__all__ = [
    "ABSOLUTE",
    "ConformalConfig",
    "ConformalError",
    "ConformalInterval",
    "Dataset",
    "FitBudgetExceeded",
    "InitializationError",
    "InvalidInputError",
    "NumericalError",
    "ScoreFunction",
    "UnsupportedError",
    "empirical_quantile",
    "rank_of_last",
    "score",
    "typicalness",
    "typicalness_with_slack",
    "build_interp_map",
    "interp_conformal_interval",
    "interp_interval",
    "interp_predict",
    "exact_ridge_set",
    "KNN",
    "Lasso",
    "Ridge",
    "affine_coefficients",
    "fit",
    "fit_with_warm_start",
    "bisect_edge",
    "check_interval_condition",
    "conformal_interval",
    "initialize",
    "SmoothingConfig",
    "delta",
    "phi",
    "smooth_conformal_interval",
    "smooth_rank",
    "smooth_typicalness",
    "SplitConfig",
    "split_interval",
]
