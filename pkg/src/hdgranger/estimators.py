"""Fitting procedures for the stacked ARX regression.

The central estimator is the adaptive lasso: a weighted-L1 penalized least
squares fit whose weights are reciprocals of ridge coefficients, with the
penalty level chosen by BIC over a log-spaced grid and the lag order chosen
by BIC across candidate designs.  Ordinary least squares, Minnesota-prior
shrinkage and a principal-component factor model are provided as forecasting
benchmarks.

Objective conventions (n = effective sample size, rows of the design):

    ridge:          (1/n)||y - Xb||^2 + lambda_ridge * sum b_i^2
    adaptive lasso: (1/n)||y - Xb||^2 + lambda * sum w_i |b_i|
    BIC:            n*log(RSS/n) + df*log(n)

The lasso path runs on internally standardized columns (each divided by its
root mean square); this rescaling maps the problem onto an equivalent one,
so returned coefficients are exact solutions on the original scale and
stored zeros are exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import lasso_path
from .design import OWN, ArxDesign, BlockStructure, TimeSeriesPanel, build_design
from .errors import (DegeneratePanelError, DimensionError, NotComputableError,
                     ScaleError, StructureError)

EPS_WEIGHT = 1e-6          # floor for |ridge beta| in the adaptive weights
CD_TOL = 1e-7              # coordinate descent: max abs coefficient change
CD_MAX_SWEEPS = 10_000
LAMBDA_GRID_SIZE = 50
LAMBDA_GRID_RATIO = 1e-3   # smallest grid point relative to lambda_max
# candidate ridge penalties for the weight-generating fit, largest first
RIDGE_GRID = np.logspace(2, -4, 20)


@dataclass(frozen=True)
class PenalizedFit:
    """Result of a weighted-L1 fit at one penalty level.

    beta is on the original column scale; df counts exact nonzeros;
    bic = n*log(RSS/n) + df*log(n) with n the effective sample size.
    """

    beta: np.ndarray
    lam: float
    weights: np.ndarray
    df: int
    residuals: np.ndarray
    bic: float
    sigma2: float

    def __post_init__(self):
        if self.df != int(np.count_nonzero(self.beta)):
            raise ValueError("df does not match the number of nonzero coefficients")
        if self.beta.shape != self.weights.shape:
            raise ValueError("beta and weights length mismatch")


@dataclass(frozen=True)
class FactorFit:
    """Principal-component factor model of the predictors plus a forecast
    regression of the response on own lags and factor lags.

    factors holds scores for every input row (T x r), so lagging for the
    regression happens downstream; x_mean / x_scale are the standardization
    applied to new predictor rows before scoring.
    """

    r: int
    loadings: np.ndarray        # k x r
    factors: np.ndarray         # T x r
    forecast_coeffs: np.ndarray  # length p*(1+r), own lags then factor lags
    p: int
    x_mean: np.ndarray
    x_scale: np.ndarray
    eigenvalues: np.ndarray

    def forecast(self, y_recent: np.ndarray, x_recent: np.ndarray) -> float:
        """One-step-ahead forecast from the last p observations.

        y_recent and x_recent are the most recent rows, oldest first; only
        the final p entries/rows are used.
        """
        p = self.p
        if y_recent.shape[0] < p or x_recent.shape[0] < p:
            raise DimensionError(f"need at least p={p} trailing observations")
        scores = ((x_recent[-p:] - self.x_mean) / self.x_scale) @ self.loadings
        row = np.empty(p * (1 + self.r))
        for j in range(1, p + 1):
            row[j - 1] = y_recent[-j]
            row[p + (j - 1) * self.r:p + j * self.r] = scores[-j]
        return float(self.forecast_coeffs @ row)


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divide each column by its root mean square (zero columns left alone)."""
    scale = np.sqrt(np.mean(X * X, axis=0)) if X.size else np.ones(X.shape[1])
    scale = np.where(scale > 0.0, scale, 1.0)
    return np.asfortranarray(X / scale), scale


def ridge_fit(design: ArxDesign, lambda_ridge: float) -> np.ndarray:
    """Ridge coefficients: argmin (1/n)RSS + lambda_ridge * ||b||^2."""
    if lambda_ridge <= 0:
        raise ValueError(f"lambda_ridge must be > 0, got {lambda_ridge}")
    X, y = design.X, design.y
    n = design.n
    G = X.T @ X + n * lambda_ridge * np.eye(X.shape[1])
    return np.linalg.solve(G, X.T @ y)


def compute_adaptive_weights(ridge_beta: np.ndarray) -> np.ndarray:
    """w_i = 1 / max(|ridge_beta_i|, EPS_WEIGHT)."""
    ridge_beta = np.asarray(ridge_beta, dtype=float)
    if not np.isfinite(ridge_beta).all():
        raise ValueError("ridge coefficients must be finite")
    return 1.0 / np.maximum(np.abs(ridge_beta), EPS_WEIGHT)


def _ridge_bic_std(Xs: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """BIC-selected ridge fit on a standardized design.

    Degrees of freedom = trace of the hat matrix.  The eigendecomposition is
    taken on whichever Gram matrix is smaller (X'X or XX'), so the cost is
    min(n, P)^3 even when P >> n.  Ties prefer the larger penalty.

    Penalties whose hat-trace exceeds half the sample are not eligible: when
    interpolation is reachable (P >= n) the likelihood term of the BIC falls
    without bound as lambda -> 0, so an unguarded minimum lands on a fit
    that reproduces noise and carries no information about coefficient
    ordering.  The cap never binds when P <= n/2.
    """
    n, P = Xs.shape
    df_cap = 0.5 * n
    best_bic = np.inf
    logn = np.log(n)
    if n >= P:
        evals, V = np.linalg.eigh(Xs.T @ Xs)
        evals = np.maximum(evals, 0.0)
        c = V.T @ (Xs.T @ y)
        best = None
        for lam in RIDGE_GRID:
            denom = evals + n * lam
            df = float(np.sum(evals / denom))
            if df > df_cap:
                continue
            beta = V @ (c / denom)
            resid = y - Xs @ beta
            rss = float(resid @ resid)
            bic = n * np.log(max(rss, 1e-300) / n) + df * logn
            if bic < best_bic:
                best_bic, best = bic, (beta, lam)
        if best is None:   # every penalty over the cap: keep the largest
            lam = RIDGE_GRID[0]
            best = (V @ (c / (evals + n * lam)), lam)
        return best
    evals, U = np.linalg.eigh(Xs @ Xs.T)
    evals = np.maximum(evals, 0.0)
    uy = U.T @ y
    best_lam, best_scaled = None, None
    for lam in RIDGE_GRID:
        denom = evals + n * lam
        df = float(np.sum(evals / denom))
        if df > df_cap:
            continue
        fitted = U @ (evals / denom * uy)
        rss = float(np.sum((y - fitted) ** 2))
        bic = n * np.log(max(rss, 1e-300) / n) + df * logn
        if bic < best_bic:
            best_bic, best_lam, best_scaled = bic, lam, uy / denom
    if best_lam is None:
        best_lam = RIDGE_GRID[0]
        best_scaled = uy / (evals + n * best_lam)
    beta = Xs.T @ (U @ best_scaled)
    return beta, best_lam


def _lambda_max(Xs: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Smallest penalty that zeroes every coefficient (from the stationarity
    condition at b = 0): max_i |(2/n) X_i'y| / w_i.

    Inflated by 1e-10 relative so the all-zero solution survives the
    floating-point reordering between this reduction and the path kernel's;
    without it the boundary coordinate can come back as +-1e-17 instead of 0.
    """
    n = Xs.shape[0]
    grad = 2.0 * (Xs.T @ y) / n
    if grad.size == 0:
        return 0.0
    return float(np.max(np.abs(grad) / w)) * (1.0 + 1e-10)


def _lambda_grid(lam_max: float) -> np.ndarray:
    return np.geomspace(lam_max, lam_max * LAMBDA_GRID_RATIO, LAMBDA_GRID_SIZE)


class _FitArrays:
    """Raw result of the standardize/ridge-weights/BIC-path pipeline."""

    __slots__ = ("beta", "lam", "weights", "df", "residuals", "rss", "bic")

    def __init__(self, beta, lam, weights, df, residuals, rss, bic):
        self.beta = beta
        self.lam = lam
        self.weights = weights
        self.df = df
        self.residuals = residuals
        self.rss = rss
        self.bic = bic


def _fit_arrays(X: np.ndarray, y: np.ndarray) -> _FitArrays:
    """Full pipeline on plain arrays: ridge weights, lambda grid, BIC choice.

    Fits whose support exceeds half the sample are not eligible for the BIC
    minimum (same degeneracy as in the ridge selection: with P >= n the
    criterion otherwise walks to an interpolating fit), and the path stops
    refining once the support crosses that cap.
    """
    n = y.shape[0]
    Xs, scale = _standardize(X)
    beta_ridge_std, _ = _ridge_bic_std(Xs, y)
    w_std = compute_adaptive_weights(beta_ridge_std)
    lam_max = _lambda_max(Xs, y, w_std)
    if lam_max <= 0.0:
        # y orthogonal to every column: the zero fit is the unique solution
        resid = y.copy()
        rss = float(resid @ resid)
        bic = n * np.log(max(rss, 1e-300) / n)
        return _FitArrays(np.zeros(X.shape[1]), 0.0, w_std * scale, 0,
                          resid, rss, bic)
    grid = _lambda_grid(lam_max)
    df_cap = max(1, n // 2)
    betas, rss, dfs, n_valid = lasso_path(Xs, y, w_std, grid,
                                          CD_TOL, CD_MAX_SWEEPS, df_cap)
    bics = n * np.log(np.maximum(rss, 1e-300) / n) + dfs * np.log(n)
    best = 0
    for j in range(1, n_valid):
        if dfs[j] > df_cap:
            continue
        if bics[j] < bics[best]:   # ties keep the larger penalty
            best = j
    beta_std = betas[best]
    resid = y - Xs @ beta_std
    return _FitArrays(beta_std / scale, float(grid[best]), w_std * scale,
                      int(dfs[best]), resid, float(rss[best]), float(bics[best]))


def _as_penalized(fa: _FitArrays, n: int) -> PenalizedFit:
    return PenalizedFit(beta=fa.beta, lam=fa.lam, weights=fa.weights, df=fa.df,
                        residuals=fa.residuals, bic=fa.bic, sigma2=fa.rss / n)


def fit_design(design: ArxDesign) -> PenalizedFit:
    """Adaptive-lasso fit of one design with everything chosen by BIC:
    ridge weights from a BIC-selected ridge, then the penalty from a
    50-point log grid."""
    fa = _fit_arrays(design.X, design.y)
    return _as_penalized(fa, design.n)


def refit_selected(design: ArxDesign, fit: PenalizedFit) -> PenalizedFit:
    """Least squares restricted to the support of a penalized fit.

    Undoes the shrinkage on the selected coefficients while keeping the
    zeros at zero; the penalty's job here was variable selection only.
    With an empty support there is nothing to refit, and with a support as
    large as the sample least squares would interpolate, so in both cases
    the input fit is returned unchanged.
    """
    support = np.flatnonzero(fit.beta)
    n = design.n
    if support.size == 0 or support.size >= n:
        return fit
    b, *_ = np.linalg.lstsq(design.X[:, support], design.y, rcond=None)
    beta = np.zeros_like(fit.beta)
    beta[support] = b
    resid = design.y - design.X[:, support] @ b
    rss = float(resid @ resid)
    df = int(np.count_nonzero(beta))
    bic = n * np.log(max(rss, 1e-300) / n) + df * np.log(n)
    return PenalizedFit(beta=beta, lam=0.0, weights=fit.weights, df=df,
                        residuals=resid, bic=float(bic), sigma2=rss / n)


def adaptive_lasso_fit(design: ArxDesign, lam: float,
                       weights: np.ndarray) -> PenalizedFit:
    """Weighted-L1 fit at a fixed penalty with caller-supplied weights.

    Satisfies the stationarity conditions to 1e-6: for nonzero b_i,
    (2/n) X_i'(y - Xb) = lam * w_i * sign(b_i); for zero b_i the gradient
    is within lam * w_i in absolute value.  A sweep-delta stopping rule can
    leave larger stationarity residuals on wide correlated designs, so the
    solve is repeated at tighter tolerances until the residual itself meets
    the contract.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (design.n_coef,):
        raise ValueError(f"expected {design.n_coef} weights, got {weights.shape}")
    if not np.isfinite(weights).all() or np.any(weights <= 0):
        raise ValueError("weights must be strictly positive and finite")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    n = design.n
    Xs, scale = _standardize(design.X)
    w_std = weights / scale
    # tighter tolerances move slowly across near-singular plateaus, so the
    # sweep budget has to grow along with them
    for tol, sweeps in ((CD_TOL, CD_MAX_SWEEPS), (1e-9, 100_000),
                        (1e-11, 300_000), (1e-13, 1_000_000)):
        betas, rss, dfs, _ = lasso_path(Xs, design.y, w_std,
                                        np.array([float(lam)]), tol,
                                        sweeps, design.n_coef)
        beta_std = betas[0]
        grad = 2.0 * Xs.T @ (design.y - Xs @ beta_std) / n
        active = beta_std != 0.0
        # per-coordinate residuals, rescaled to the caller's coordinates
        v = np.where(active,
                     np.abs(grad - lam * w_std * np.sign(beta_std)),
                     np.maximum(np.abs(grad) - lam * w_std, 0.0))
        if float(np.max(v * scale, initial=0.0)) < 0.5e-6:
            break
    resid = design.y - Xs @ beta_std
    bic = n * np.log(max(float(rss[0]), 1e-300) / n) + int(dfs[0]) * np.log(n)
    return PenalizedFit(beta=beta_std / scale, lam=float(lam), weights=weights,
                        df=int(dfs[0]), residuals=resid, bic=float(bic),
                        sigma2=float(rss[0]) / n)


def bic_path(design: ArxDesign, lambda_grid: np.ndarray,
             weights: np.ndarray) -> tuple[PenalizedFit, list[PenalizedFit]]:
    """Fit every penalty in a decreasing grid (warm starts) and return the
    BIC minimizer plus all fits.  Ties go to the larger penalty."""
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if grid.size > 1 and not np.all(np.diff(grid) < 0):
        raise ValueError("lambda grid must be strictly decreasing")
    weights = np.asarray(weights, dtype=float)
    if not np.isfinite(weights).all() or np.any(weights <= 0):
        raise ValueError("weights must be strictly positive and finite")
    n = design.n
    Xs, scale = _standardize(design.X)
    w_std = weights / scale
    # no support cap here: a user grid is fit in full, whatever it selects
    betas, rss, dfs, _ = lasso_path(Xs, design.y, w_std, grid,
                                    CD_TOL, CD_MAX_SWEEPS, design.n_coef)
    fits = []
    for j in range(grid.size):
        beta_std = betas[j]
        resid = design.y - Xs @ beta_std
        bic = n * np.log(max(float(rss[j]), 1e-300) / n) + int(dfs[j]) * np.log(n)
        fits.append(PenalizedFit(beta=beta_std / scale, lam=float(grid[j]),
                                 weights=weights, df=int(dfs[j]), residuals=resid,
                                 bic=float(bic), sigma2=float(rss[j]) / n))
    chosen = fits[0]
    for fit in fits[1:]:
        if fit.bic < chosen.bic:
            chosen = fit
    return chosen, fits


def default_lambda_grid(design: ArxDesign, weights: np.ndarray) -> np.ndarray:
    """The 50-point log-spaced grid from lambda_max down to lambda_max/1000."""
    Xs, scale = _standardize(design.X)
    lam_max = _lambda_max(Xs, design.y, np.asarray(weights, float) / scale)
    if lam_max <= 0.0:
        raise ValueError("lambda_max is zero: y is orthogonal to every column")
    return _lambda_grid(lam_max)


def select_arx(y: TimeSeriesPanel, x: TimeSeriesPanel, blocks: BlockStructure,
               p_max: int) -> tuple[int, PenalizedFit]:
    """Choose the lag order by BIC over p = 1..p_max.

    Every candidate is fit on the common effective sample (the last
    T - p_max response rows) so BIC values are comparable; ties prefer the
    smaller p.  Returns the winning order and its fit.
    """
    if p_max < 1:
        raise DimensionError(f"p_max must be >= 1, got {p_max}")
    if y.T <= p_max:
        raise DimensionError(f"need more than p_max={p_max} rows, got {y.T}")
    best: tuple[int, _FitArrays] | None = None
    for p in range(1, p_max + 1):
        off = p_max - p
        yp = TimeSeriesPanel(y.values[off:], y.labels, y.frequency)
        xp = TimeSeriesPanel(x.values[off:], x.labels, x.frequency)
        design = build_design(yp, xp, p, blocks)
        fa = _fit_arrays(design.X, design.y)
        if best is None or fa.bic < best[1].bic:
            best = (p, fa)
    p_star, fa = best
    return p_star, _as_penalized(fa, y.T - p_max)


def ols_fit(design: ArxDesign) -> tuple[np.ndarray, np.ndarray]:
    """Least squares with its classical covariance sigma2 * (X'X)^-1.

    Raises NotComputableError when there are at least as many coefficients
    as rows or the design is rank deficient; callers surface this as "NA".
    """
    X, y = design.X, design.y
    n, P = X.shape
    if n <= P:
        raise NotComputableError(
            f"least squares needs n > #coefficients, got n={n}, P={P}")
    G = X.T @ X
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise NotComputableError("design matrix is rank deficient") from None
    Xty = X.T @ y
    beta = _chol_solve(L, Xty)
    resid = y - X @ beta
    sigma2 = float(resid @ resid) / (n - P)
    Ginv = _chol_solve(L, np.eye(P))
    return beta, sigma2 * Ginv


def _chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    from scipy.linalg import solve_triangular
    z = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, z, lower=False)


def minnesota_fit(design: ArxDesign, tightness: float = 0.2,
                  cross_shrink: float = 0.5) -> np.ndarray:
    """Posterior-mean coefficients under independent zero-mean normal priors.

    Prior standard deviations decay with the lag: tightness/j for own-lag j,
    tightness * cross_shrink * (s_y/s_x) / j for a predictor at lag j, where
    the s are design-column standard deviations.  Equivalent to a
    generalized ridge, so it exists in any dimension.
    """
    if tightness <= 0:
        raise ValueError(f"tightness must be > 0, got {tightness}")
    if not 0 < cross_shrink <= 1:
        raise ValueError(f"cross_shrink must be in (0, 1], got {cross_shrink}")
    X, y = design.X, design.y
    n, P = X.shape
    s_y = float(np.std(design.y))
    if s_y == 0.0:
        raise ScaleError("response has zero variance")
    col_std = np.std(X, axis=0)
    prior_sd = np.empty(P)
    for i, c in enumerate(design.colmap):
        if c.kind == OWN:
            prior_sd[i] = tightness / c.lag
        else:
            if col_std[i] == 0.0:
                raise ScaleError(f"design column {i} has zero variance")
            prior_sd[i] = tightness * cross_shrink * (s_y / col_std[i]) / c.lag
    G = X.T @ X + np.diag(1.0 / prior_sd ** 2)
    return np.linalg.solve(G, X.T @ y)


def factor_fit(x, y, p: int) -> FactorFit:
    """Principal-component factors of the predictors plus a forecast
    regression of y on (own lags 1..p, factor lags 1..p).

    The factor count r maximizes the ratio of consecutive eigenvalues of the
    predictor correlation matrix over j = 1..k-1, with the search restricted
    to strictly positive eigenvalue pairs.  The regression is least squares
    with a tiny-ridge fallback (1e-6) if the normal equations are singular.
    """
    x = np.asarray(x.values if isinstance(x, TimeSeriesPanel) else x, float)
    yv = np.asarray(y.values if isinstance(y, TimeSeriesPanel) else y, float)
    if yv.ndim == 2:
        if yv.shape[1] != 1:
            raise StructureError("response must be a single series")
        yv = yv[:, 0]
    T, k = x.shape
    if k < 2:
        raise DegeneratePanelError(f"factor model needs k >= 2 predictors, got {k}")
    if T != yv.shape[0]:
        raise DimensionError("response and predictors have different lengths")
    if T <= p + 1:
        raise DimensionError(f"need T > p+1 rows, got T={T}, p={p}")

    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    if np.any(sd == 0.0):
        raise ScaleError("a predictor column has zero variance")
    Z = (x - mu) / sd
    evals, V = np.linalg.eigh(Z.T @ Z / T)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    V = V[:, order]

    tol = max(evals[0], 0.0) * 1e-12
    n_pos = int(np.sum(evals > tol))
    if n_pos < 2:
        raise DegeneratePanelError("fewer than two positive eigenvalues")
    ratios = evals[:n_pos - 1] / evals[1:n_pos]
    r = int(np.argmax(ratios)) + 1

    loadings = V[:, :r]
    factors = Z @ loadings

    n = T - p
    cols = [yv[p - j:T - j] for j in range(1, p + 1)]
    for j in range(1, p + 1):
        cols.extend(factors[p - j:T - j, i] for i in range(r))
    F = np.column_stack(cols)
    G = F.T @ F
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= ev[-1] * 1e-10:
        G = G + n * 1e-6 * np.eye(G.shape[0])
    coeffs = np.linalg.solve(G, F.T @ yv[p:])
    return FactorFit(r=r, loadings=loadings, factors=factors,
                     forecast_coeffs=coeffs, p=p, x_mean=mu, x_scale=sd,
                     eigenvalues=evals)
