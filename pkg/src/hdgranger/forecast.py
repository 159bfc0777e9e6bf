"""Rolling-window one-step-ahead forecasting over a selection/estimation grid.

Forecasting is a two-step procedure.  For each window ending at time t
(rows t-S+1..t), a selection technique decides which predictor blocks stay
in the model, then an estimation technique fits an ARX on the retained
blocks and forecasts y at t+1.  Accuracy is the mean absolute forecast
error over the T-S forecasts.

Selection techniques: keep everything ("all"), classical Wald test per
block ("wald"), nonzero penalized coefficients ("glasso_selection"), or the
bootstrap Wald test per block ("glasso_test"); the test-based techniques
retain blocks with p-value below alpha.  Estimation techniques: least
squares, the adaptive lasso, Minnesota-prior shrinkage, or a
principal-component factor model.

Cells needing least squares (the "wald" row and the "ols" column) are
reported as not computable whenever the full model has at least as many
coefficients as a window provides rows, mirroring how such entries are
presented in results tables regardless of how much the selection step
might shrink the model.

Every window is fit on its own rows only: series are re-centered per
window, and all random streams are keyed by window position rather than
data, so forecasts never depend on observations after t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import BlockStructure, TimeSeriesPanel, build_design, center
from .errors import DimensionError
from .estimators import factor_fit, minnesota_fit, ols_fit, select_arx
from .inference import granger_lasso_selection, granger_lasso_test, wald_test_selection
from .seeding import child

SELECTIONS = ("all", "wald", "glasso_selection", "glasso_test")
ESTIMATORS = ("ols", "adaptive_lasso", "minnesota", "factor")

# spawn-key namespace for per-window test randomness
_NS_WINDOW = 3


@dataclass(frozen=True)
class ForecastReport:
    """Rolling forecast of one selection/estimation combination.

    path holds the T-S one-step forecasts; selected_blocks the retained
    block names per window.  A combination that needs least squares in a
    regime where it does not exist carries mafe=None, path=None and a
    reason string instead.
    """

    target: str
    S: int
    selection: str
    estimator: str
    mafe: float | None
    path: np.ndarray | None
    selected_blocks: tuple[tuple[str, ...], ...] | None
    na_reason: str | None = None

    @property
    def not_computable(self) -> bool:
        return self.mafe is None


def default_window(T: int) -> int:
    """The default rolling window length, 90% of the sample."""
    return int(np.floor(0.9 * T))


def _needs_ols(selection: str, estimator: str) -> bool:
    return selection == "wald" or estimator == "ols"


def _ols_exists(S: int, p_max: int, k: int) -> bool:
    # strict: the window's stacked system must have more rows than coefficients
    return S - p_max > p_max * (1 + k)


def window_selections(y: TimeSeriesPanel, x: TimeSeriesPanel,
                      blocks: BlockStructure, selection: str, S: int,
                      alpha: float = 0.01, B: int = 200, B_cov: int = 50,
                      p_max: int = 1, seed=0, jobs: int = 1,
                      select_once: bool = False) -> tuple[tuple[str, ...], ...]:
    """Run one selection technique on every rolling window.

    Returns, per window, the retained block names in block order.  Window w
    (forecasting row S+w) derives its test randomness from spawn key
    (_NS_WINDOW, w, block_index) under `seed`, independent of the estimator
    that will consume the selection.

    With select_once the first window is selected as usual (same spawn keys)
    and its result is reused for every later window, trading per-window
    adaptivity for a large saving in bootstrap tests.
    """
    if selection not in SELECTIONS:
        raise ValueError(f"selection must be one of {SELECTIONS}")
    T = y.T
    names = blocks.names
    stop = S + 1 if select_once else T
    out: list[tuple[str, ...]] = []
    for w, t in enumerate(range(S, stop)):
        ywin = TimeSeriesPanel(y.values[t - S:t], y.labels, y.frequency)
        xwin = TimeSeriesPanel(x.values[t - S:t], x.labels, x.frequency)
        if selection == "all":
            out.append(names)
        elif selection == "wald":
            out.append(wald_test_selection(ywin, xwin, blocks, alpha, p=p_max))
        elif selection == "glasso_selection":
            out.append(granger_lasso_selection(ywin, xwin, blocks, p_max=p_max))
        else:
            kept = []
            for bi, name in enumerate(names):
                res = granger_lasso_test(ywin, xwin, blocks, name, B=B,
                                         seed=child(seed, _NS_WINDOW, w, bi),
                                         p_max=p_max, B_cov=B_cov, jobs=jobs)
                if res.mid_p < alpha:
                    kept.append(name)
            out.append(tuple(kept))
    if select_once:
        return tuple(out) * (T - S)
    return tuple(out)


def _restrict(x: TimeSeriesPanel, blocks: BlockStructure,
              keep: tuple[str, ...]) -> tuple[TimeSeriesPanel, BlockStructure]:
    """Predictor panel and block structure reduced to the kept blocks."""
    cols: list[int] = []
    new_blocks: list[tuple[str, tuple[int, ...]]] = []
    for name, idx in blocks.blocks:
        if name in keep:
            start = len(cols)
            cols.extend(idx)
            new_blocks.append((name, tuple(range(start, start + len(idx)))))
    panel = TimeSeriesPanel(x.values[:, cols],
                            tuple(x.labels[i] for i in cols), x.frequency)
    return panel, BlockStructure(tuple(new_blocks))


def _ar_forecast(yv: np.ndarray, p: int) -> float:
    """Least-squares AR(p) forecast (tiny-ridge fallback), for windows whose
    selection leaves too few predictors for the requested estimator."""
    n = yv.shape[0] - p
    X = np.column_stack([yv[p - j:yv.shape[0] - j] for j in range(1, p + 1)])
    G = X.T @ X
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= ev[-1] * 1e-10 or n <= p:
        G = G + max(n, 1) * 1e-6 * np.eye(p)
    beta = np.linalg.solve(G, X.T @ yv[p:])
    return float(beta @ yv[-1:-p - 1:-1])


def _window_forecast(ywin: TimeSeriesPanel, xwin: TimeSeriesPanel,
                     blocks: BlockStructure, estimator: str,
                     p_max: int) -> float:
    """Fit one window (centered internally) and forecast the next value."""
    ywin_c, y_means = center(ywin)
    xwin_c, _ = center(xwin)
    add_back = float(y_means[0])
    yv = ywin_c.values[:, 0]

    if estimator == "adaptive_lasso":
        p, fit = select_arx(ywin_c, xwin_c, blocks, p_max)
        beta = fit.beta
    elif estimator == "factor":
        if xwin_c.k < 2:
            return _ar_forecast(yv, p_max) + add_back
        ff = factor_fit(xwin_c.values, yv, p_max)
        return ff.forecast(yv, xwin_c.values) + add_back
    else:
        p = p_max
        design = build_design(ywin_c, xwin_c, p, blocks)
        if estimator == "ols":
            beta, _ = ols_fit(design)
        elif estimator == "minnesota":
            beta = minnesota_fit(design)
        else:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")

    row = np.empty(p * (1 + xwin_c.k))
    for j in range(1, p + 1):
        row[j - 1] = yv[-j]
        row[p + (j - 1) * xwin_c.k:p + j * xwin_c.k] = xwin_c.values[-j]
    return float(beta @ row) + add_back


def rolling_forecast(y: TimeSeriesPanel, x: TimeSeriesPanel,
                     blocks: BlockStructure, selection: str, estimator: str,
                     S: int | None = None, alpha: float = 0.01, B: int = 200,
                     B_cov: int = 50, p_max: int = 1, seed=0,
                     jobs: int = 1, select_once: bool = False) -> ForecastReport:
    """Roll one selection/estimation combination through the sample.

    For each t = S..T-1 the model is selected and fit on rows t-S+1..t only
    and forecasts y at t+1; the report carries the forecast path and its
    mean absolute error.  Combinations requiring least squares return a
    not-computable report when the full model is too large for the window.
    select_once reuses the first window's selection everywhere instead of
    re-testing per window.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}")
    if selection not in SELECTIONS:
        raise ValueError(f"selection must be one of {SELECTIONS}")
    blocks.validate_against(x.k)
    T = y.T
    if x.T != T:
        raise DimensionError("response and predictor panels differ in length")
    if S is None:
        S = default_window(T)
    if not p_max < S < T:
        raise DimensionError(f"window S={S} must satisfy p_max < S < T={T}")
    target = y.labels[0]

    if _needs_ols(selection, estimator) and not _ols_exists(S, p_max, x.k):
        reason = (f"least squares needs more rows than coefficients: "
                  f"window gives {S - p_max}, full model has {p_max * (1 + x.k)}")
        return ForecastReport(target=target, S=S, selection=selection,
                              estimator=estimator, mafe=None, path=None,
                              selected_blocks=None, na_reason=reason)

    selections = window_selections(y, x, blocks, selection, S, alpha=alpha,
                                   B=B, B_cov=B_cov, p_max=p_max, seed=seed,
                                   jobs=jobs, select_once=select_once)
    return _forecast_with_selections(y, x, blocks, selections, selection,
                                     estimator, S, p_max)


def _forecast_with_selections(y: TimeSeriesPanel, x: TimeSeriesPanel,
                              blocks: BlockStructure,
                              selections: tuple[tuple[str, ...], ...],
                              selection: str, estimator: str, S: int,
                              p_max: int) -> ForecastReport:
    T = y.T
    path = np.empty(T - S)
    for w, t in enumerate(range(S, T)):
        ywin = TimeSeriesPanel(y.values[t - S:t], y.labels, y.frequency)
        xwin = TimeSeriesPanel(x.values[t - S:t], x.labels, x.frequency)
        xsel, bsel = _restrict(xwin, blocks, selections[w])
        path[w] = _window_forecast(ywin, xsel, bsel, estimator, p_max)
    actual = y.values[S:, 0]
    mafe = float(np.mean(np.abs(path - actual)))
    return ForecastReport(target=y.labels[0], S=S, selection=selection,
                          estimator=estimator, mafe=mafe, path=path,
                          selected_blocks=selections)


def forecast_grid(y: TimeSeriesPanel, x: TimeSeriesPanel,
                  blocks: BlockStructure, S: int | None = None,
                  selections: tuple[str, ...] = SELECTIONS,
                  estimators: tuple[str, ...] = ESTIMATORS,
                  alpha: float = 0.01, B: int = 200, B_cov: int = 50,
                  p_max: int = 1, seed=0, jobs: int = 1,
                  select_once: bool = False) -> dict[tuple[str, str], ForecastReport]:
    """The full selection-by-estimation MAFE comparison.

    Each cell is bit-identical to a direct rolling_forecast call with the
    same seed: selection randomness is keyed by window and block only, so
    one selection pass per technique serves every estimator in its row.
    """
    if S is None:
        S = default_window(y.T)
    out: dict[tuple[str, str], ForecastReport] = {}
    for sel in selections:
        cached = None
        for est in estimators:
            if _needs_ols(sel, est) and not _ols_exists(S, p_max, x.k):
                out[(sel, est)] = rolling_forecast(
                    y, x, blocks, sel, est, S=S, alpha=alpha, B=B,
                    B_cov=B_cov, p_max=p_max, seed=seed, jobs=jobs,
                    select_once=select_once)
                continue
            if cached is None:
                cached = window_selections(y, x, blocks, sel, S, alpha=alpha,
                                           B=B, B_cov=B_cov, p_max=p_max,
                                           seed=seed, jobs=jobs,
                                           select_once=select_once)
            out[(sel, est)] = _forecast_with_selections(
                y, x, blocks, cached, sel, est, S, p_max)
    return out
