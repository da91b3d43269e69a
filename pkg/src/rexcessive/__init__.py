"""Boundary classification and r-excessive martingale diagnostics for 1-d diffusions."""
from ._grid import GridConfig, Tabulation
from .boundary import (BoundaryClass, BoundaryKind, ExtendedRealVerdict, classify_boundary,
                       improper_feller_integral)
from .config import RunConfig, load_config, parse_expression
from .diffusion import (DiffusionSpec, HittingTime, IntervalSpec, ScaleSpeed, catalog,
                        derive_scale_speed)
from .estimators import BoundaryClassifier, ExcessiveFunctionEstimator, MartingaleClassifier
from .exceptions import (ConfigError, InconclusiveError, QuadratureError, RexcessiveError,
                         SimulationError, SolverError)
from .excessive import (DECREASING, INCREASING, DiscountRate, ExcessiveFunction, evaluate,
                        make_tabulation, scale_derivative_at, solve_excessive)
from .martingale import (LimitEstimate, MartingaleVerdict, Regime, Report, Verdict, full_report,
                         kotani_verdict, row_B, row_C, row_D, row_E, row_F, verdict_from_boundary)
from .montecarlo import (EstimateWithCI, PathEnsemble, SimulationConfig, deficit_curve,
                         hitting_laplace, martingale_deficit, ratio_identity_check, scale_gap,
                         simulate)

__version__ = "0.1.0"

__all__ = [
    "BoundaryClass", "BoundaryClassifier", "BoundaryKind", "ConfigError", "DECREASING",
    "DiffusionSpec", "DiscountRate", "EstimateWithCI", "ExcessiveFunction",
    "ExcessiveFunctionEstimator", "ExtendedRealVerdict", "GridConfig", "HittingTime",
    "INCREASING", "InconclusiveError", "IntervalSpec", "LimitEstimate", "MartingaleClassifier",
    "MartingaleVerdict", "PathEnsemble", "QuadratureError", "Regime", "Report", "RexcessiveError",
    "RunConfig", "ScaleSpeed", "SimulationConfig", "SimulationError", "SolverError", "Tabulation",
    "Verdict", "catalog", "classify_boundary", "deficit_curve", "derive_scale_speed", "evaluate",
    "full_report", "hitting_laplace", "improper_feller_integral", "kotani_verdict",
    "load_config", "make_tabulation", "martingale_deficit", "parse_expression",
    "ratio_identity_check", "row_B", "row_C", "row_D", "row_E", "row_F", "scale_derivative_at",
    "scale_gap", "simulate", "solve_excessive", "verdict_from_boundary",
]
