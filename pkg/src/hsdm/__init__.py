"""Hierarchical semi-parametric duration models for trade event streams.

The package models integer millisecond durations between trades: a
conditional kernel density on smoothed log-durations, an intraday trend on
the normal scores of its generalized residuals, and an ARFIMA on the
detrended series, plus ACD-family benchmarks, residual diagnostics, and a
synthetic-market simulator whose latent traces make exact oracles possible.
"""

from ._kernels import HAVE_NATIVE
from .arfima import (
    ArfimaForecaster,
    ArfimaModel,
    fit_arfima,
    frac_diff_coeffs,
    select_order,
    simulate_arfima,
)
from .benchmarks import (
    ACD_FLAVORS,
    AcdBenchmark,
    DiurnalSpline,
    fiacd_lambda_coeffs,
    fit_acd_family,
    fit_diurnal_spline,
)
from .cond_kde import CondDensityModel, fit_cond_kde
from .data import DaySeries, TradeRecord, ingest_csv, write_csv
from .diagnostics import (
    DiagnosticReport,
    compare_models,
    evaluate_residuals,
    ks_uniform,
    ljung_box,
    smoothing_ratio,
)
from .model import (
    HsdmModel,
    PredictionResult,
    PredictiveContext,
    fit_hsdm,
    hazard,
)
from .simulate import (
    MixtureLaw,
    ScenarioSpec,
    SimulatedDay,
    bimodal_scenario,
    oracle_residuals,
    simulate,
    unit_marginal_sigma,
)
from .smoothing import SmoothedSeries, general_pit, smooth_durations, t_from_y, y_from_t
from .trend import (
    OnlineTrendState,
    PmTrendState,
    TrendParams,
    detrend,
    joint_quasi_ml_fit,
    quasi_ml_fit,
)

__version__ = "0.1.0"

__all__ = [
    "HAVE_NATIVE",
    "__version__",
    "ArfimaForecaster",
    "ArfimaModel",
    "fit_arfima",
    "frac_diff_coeffs",
    "select_order",
    "simulate_arfima",
    "ACD_FLAVORS",
    "AcdBenchmark",
    "DiurnalSpline",
    "fiacd_lambda_coeffs",
    "fit_acd_family",
    "fit_diurnal_spline",
    "CondDensityModel",
    "fit_cond_kde",
    "DaySeries",
    "TradeRecord",
    "ingest_csv",
    "write_csv",
    "DiagnosticReport",
    "compare_models",
    "evaluate_residuals",
    "ks_uniform",
    "ljung_box",
    "smoothing_ratio",
    "HsdmModel",
    "PredictionResult",
    "PredictiveContext",
    "fit_hsdm",
    "hazard",
    "MixtureLaw",
    "ScenarioSpec",
    "SimulatedDay",
    "bimodal_scenario",
    "oracle_residuals",
    "simulate",
    "unit_marginal_sigma",
    "SmoothedSeries",
    "general_pit",
    "smooth_durations",
    "t_from_y",
    "y_from_t",
    "OnlineTrendState",
    "PmTrendState",
    "TrendParams",
    "detrend",
    "joint_quasi_ml_fit",
    "quasi_ml_fit",
]
