"""Block-wise Granger causality testing and forecasting for
high-dimensional ARX time-series models.

The pipeline: stack an ARX(p) design from raw panels (`design`), fit it by
an adaptive lasso with ridge-derived weights and BIC-chosen penalty and lag
order (`estimators`), test block-zero restrictions with a residual
bootstrap Wald statistic (`inference`), and evaluate everything through a
Monte Carlo harness (`simulation`) and a rolling forecast engine
(`forecast`).  The `hdgranger` command exposes the same functionality from
the shell.
"""

__version__ = "0.1.0"

from .design import (ArxDesign, BlockStructure, Column, TimeSeriesPanel,
                     build_design, center, difference, drop_block,
                     read_block_map, read_panel_csv, split_panel)
from .errors import (DegeneratePanelError, DimensionError, HdGrangerError,
                     NotComputableError, ScaleError, StructureError)
from .estimators import (FactorFit, PenalizedFit, adaptive_lasso_fit,
                         bic_path, compute_adaptive_weights, factor_fit,
                         fit_design, minnesota_fit, ols_fit, refit_selected,
                         ridge_fit, select_arx)
from .forecast import (ESTIMATORS, SELECTIONS, ForecastReport, default_window,
                       forecast_grid, rolling_forecast)
from .inference import (GrangerTestResult, RestrictionMatrix, coef_covariance,
                        granger_lasso_selection, granger_lasso_test,
                        mid_p_value, restriction_matrix, wald_block_test,
                        wald_statistic, wald_test_selection)
from .simulation import (SimulationDesign, SizePowerCurve, builtin_designs,
                         simulate, simulate_pvalues, simulated_size,
                         size_power_curve)

__all__ = [
    "ArxDesign", "BlockStructure", "Column", "TimeSeriesPanel",
    "build_design", "center", "difference", "drop_block", "read_block_map",
    "read_panel_csv", "split_panel",
    "HdGrangerError", "DimensionError", "StructureError", "ScaleError",
    "DegeneratePanelError", "NotComputableError",
    "PenalizedFit", "FactorFit", "ridge_fit", "compute_adaptive_weights",
    "adaptive_lasso_fit", "bic_path", "fit_design", "refit_selected",
    "select_arx", "ols_fit", "minnesota_fit", "factor_fit",
    "RestrictionMatrix", "GrangerTestResult", "restriction_matrix",
    "wald_statistic", "coef_covariance", "granger_lasso_test",
    "granger_lasso_selection", "wald_block_test", "wald_test_selection",
    "mid_p_value",
    "SimulationDesign", "SizePowerCurve", "builtin_designs", "simulate",
    "simulate_pvalues", "simulated_size", "size_power_curve",
    "ForecastReport", "SELECTIONS", "ESTIMATORS", "default_window",
    "rolling_forecast", "forecast_grid",
    "__version__",
]
