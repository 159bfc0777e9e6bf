"""Block-restriction Wald statistic, residual-bootstrap p-values, and the
three block-selection techniques.

The null hypothesis "block j does not Granger cause the response" is the
zero restriction R_j beta = 0, where R_j selects the block's coefficients
at every lag.  The test statistic is the Wald form

    Q = (R_j b)' [Cov(R_j b)]^-1 (R_j b)

computed on the adaptive-lasso fit.  Its null distribution is estimated by
a residual bootstrap: resample centered residuals of the restricted model
(the block removed, selected support refit by least squares), rebuild the
response recursively with predictors held fixed, refit the unrestricted
model, and recompute Q.  The reported mid p-value gives half weight to
exact ties, which handles the point mass at zero created when the lasso
zeroes the whole block.

The coefficient covariance has no classical plug-in when coefficients
outnumber observations, so it is estimated once from preliminary bootstrap
replicates and held fixed across the observed statistic and every bootstrap
statistic.  Inside the test the preliminary replicates are generated under
the restricted model, exactly like the main bootstrap, and refit without
the restriction: the covariance then describes the same null law the
bootstrap statistics are drawn from, which keeps the observed and bootstrap
statistics on the same scale whichever columns the penalty happens to pick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import chi2

from ._kernels import arx_recursion
from .design import (ArxDesign, BlockStructure, TimeSeriesPanel,
                     build_design, center)
from .errors import DimensionError, StructureError
from .estimators import (PenalizedFit, _fit_arrays, fit_design, ols_fit,
                         refit_selected, select_arx)
from .parallel import parallel_map
from .seeding import child, generator

COV_RIDGE_REL = 1e-8    # relative ridge added to the bootstrap covariance
COV_RIDGE_ABS = 1e-12   # absolute floor when the covariance trace is zero
COV_EIG_FLOOR_REL = 0.1   # spectral floor as a fraction of the top eigenvalue

# spawn-key namespaces under a test's seed
_NS_COV = 1
_NS_BOOT = 2


@dataclass(frozen=True)
class RestrictionMatrix:
    """0/1 matrix selecting one block's coefficients at all lags.

    Rows are ordered lag-major, then by the block's columns in panel order;
    `columns` lists the selected design-column indices in row order.
    """

    block: str
    matrix: np.ndarray
    columns: tuple[int, ...]

    @property
    def n_restrictions(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class GrangerTestResult:
    """Bootstrap Wald test of one block-zero restriction."""

    block: str
    Q: float
    q_boot: np.ndarray
    mid_p: float
    B: int
    p_used: int
    lambda_used: float

    def recompute_mid_p(self) -> float:
        return mid_p_value(self.Q, self.q_boot)


def mid_p_value(q_obs: float, q_boot: np.ndarray) -> float:
    """(1/B) * sum[ I(Q*_b > Q) + 0.5 * I(Q*_b = Q) ]; ties are exact
    floating-point equality."""
    q_boot = np.asarray(q_boot, dtype=float)
    greater = np.count_nonzero(q_boot > q_obs)
    ties = np.count_nonzero(q_boot == q_obs)
    return (greater + 0.5 * ties) / q_boot.size


def restriction_matrix(design: ArxDesign, block: str) -> RestrictionMatrix:
    """Build R_j for `block`: one row per (lag, block column)."""
    cols = design.block_columns(block)   # lag-major by design ordering
    R = np.zeros((len(cols), design.n_coef))
    for row, col in enumerate(cols):
        R[row, col] = 1.0
    return RestrictionMatrix(block=block, matrix=R, columns=cols)


def wald_statistic(beta: np.ndarray, R: RestrictionMatrix,
                   cov: np.ndarray) -> float:
    """Q = (R beta)' cov^-1 (R beta); cov is the restricted-block covariance."""
    rb = R.matrix @ np.asarray(beta, dtype=float)
    if not np.any(rb):
        return 0.0
    try:
        factor = cho_factor(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"covariance for block {R.block!r} is not positive definite") from exc
    return float(rb @ cho_solve(factor, rb))


def _residual_pool(fit: PenalizedFit, n: int) -> np.ndarray:
    """Centered residuals of a generating fit, rescaled by sqrt(n/(n - df))
    so the resampling pool carries an unbiased innovation variance.  With a
    short sample and a sizable support the raw residuals can understate the
    noise by a third or more, which makes every replicate too quiet."""
    pool = fit.residuals - fit.residuals.mean()
    if 0 < fit.df < n:
        pool = pool * np.sqrt(n / (n - fit.df))
    return pool


def _initial_conditions(design: ArxDesign) -> np.ndarray:
    """Recover the p pre-sample response values (oldest first) from the
    own-lag columns of the first design row."""
    p = design.p
    return design.X[0, :p][::-1].copy()


def _own_and_drive(design: ArxDesign, beta: np.ndarray) -> tuple[np.ndarray,
                                                                 np.ndarray]:
    """Split a fit into own-lag coefficients and the fixed predictor part of
    the recursion (X_pred @ beta_pred, one value per row)."""
    p = design.p
    own = np.ascontiguousarray(beta[:p])
    drive = design.X[:, p:] @ beta[p:]
    return own, drive


def _replicate_design_matrix(design: ArxDesign, y_star: np.ndarray,
                             init: np.ndarray) -> np.ndarray:
    """Design matrix for a bootstrap response: own-lag columns rebuilt from
    (init, y_star), predictor columns reused unchanged."""
    p = design.p
    n = design.n
    y_full = np.concatenate([init, y_star])
    X = np.empty_like(design.X)
    for j in range(1, p + 1):
        X[:, j - 1] = y_full[p - j:p - j + n]
    X[:, p:] = design.X[:, p:]
    return X


def coef_covariance(design: ArxDesign, fit: PenalizedFit, block: str,
                    B_cov: int = 200, seed=0, jobs: int = 1,
                    dgp_design: ArxDesign | None = None,
                    dgp_fit: PenalizedFit | None = None) -> np.ndarray:
    """Bootstrap covariance of the block's coefficient estimates.

    Runs B_cov residual-bootstrap replicates of the response, refits the
    full pipeline on `design` each time, and returns the sample covariance
    of R_j beta* plus a small ridge (1e-8 of the mean diagonal) so the Wald
    form is always invertible.  Eigenvalues are floored at a fraction of
    the largest one, which bounds the condition number of the Wald metric.

    Replicates are generated from `fit` itself unless a different generating
    model is passed via (dgp_design, dgp_fit).  The test passes the
    restricted model's least-squares refit here so the covariance is
    estimated under the same null law that the bootstrap statistics are
    drawn from; the generating design must share the refit design's lag
    order and sample.
    """
    if B_cov < 50:
        raise ValueError(f"B_cov must be >= 50, got {B_cov}")
    if (dgp_design is None) != (dgp_fit is None):
        raise ValueError("dgp_design and dgp_fit must be given together")
    if dgp_design is None:
        dgp_design, dgp_fit = design, fit
    if dgp_design.n != design.n or dgp_design.p != design.p:
        raise DimensionError(
            f"generating design (n={dgp_design.n}, p={dgp_design.p}) does not "
            f"match refit design (n={design.n}, p={design.p})")
    cols = np.asarray(design.block_columns(block))
    pool = _residual_pool(dgp_fit, dgp_design.n)
    own, drive = _own_and_drive(dgp_design, dgp_fit.beta)
    init = _initial_conditions(design)
    n = design.n
    base = child(seed)

    def one(b: int) -> np.ndarray:
        rng = generator(base, b)
        eps = pool[rng.integers(0, n, n)]
        y_star = arx_recursion(own, drive + eps, init)
        X = _replicate_design_matrix(design, y_star, init)
        return _fit_arrays(X, y_star).beta[cols]

    draws = np.asarray(parallel_map(one, range(B_cov), jobs))
    cov = np.cov(draws, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    trace = float(np.trace(cov))
    eps_c = COV_RIDGE_REL * trace / cov.shape[0] if trace > 0 else COV_RIDGE_ABS
    cov = cov + eps_c * np.eye(cov.shape[0])
    # coordinates the penalized fit rarely activates can go unseen in the
    # replicate draws, leaving ~zero variance; without a spectral floor a
    # single later activation in that direction dominates the Wald form
    vals, vecs = np.linalg.eigh(cov)
    floor = COV_EIG_FLOOR_REL * vals[-1]
    if vals[0] < floor:
        cov = (vecs * np.maximum(vals, floor)) @ vecs.T
    return cov


def granger_lasso_test(y: TimeSeriesPanel, x: TimeSeriesPanel,
                       blocks: BlockStructure, block: str, B: int = 500,
                       seed=0, p_max: int = 1, B_cov: int = 200,
                       jobs: int = 1) -> GrangerTestResult:
    """Bootstrap Wald test that `block` does not Granger cause the response.

    Steps: (1) select and fit the restricted model (block removed), then
    undo its shrinkage by least squares on the selected support; that refit
    is the generating model, and its centered residuals, rescaled to an
    unbiased innovation variance, are the resampling pool;
    (2) fit the unrestricted model at the selected lag order and compute Q
    against a covariance estimated from preliminary replicates generated
    under the restricted refit; (3) for each of B replicates, resample
    residuals, rebuild the response recursively from the refit coefficients
    (first p observed values as initial conditions, predictors fixed),
    refit the unrestricted model with its penalty re-selected by BIC, and
    recompute Q with the same restriction and covariance.  Returns the mid
    p-value over the B replicates.

    The least-squares step matters: penalized coefficients are shrunk
    toward zero, so replicates generated from them carry less persistence
    and signal than the data, which tilts every bootstrap statistic low and
    inflates rejection rates.

    Both panels are mean-centered at entry, so results are invariant to
    location shifts of the inputs.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1, got {B}")
    if block not in blocks.names:
        raise StructureError(f"unknown block {block!r}")
    y_c, _ = center(y)
    x_c, _ = center(x)

    # restricted pipeline: lag order by BIC, then a full-sample refit at p*
    keep = [(name, idx) for name, idx in blocks.blocks if name != block]
    drop_idx = blocks.indices(block)
    keep_cols = [i for i in range(x.k) if i not in set(drop_idx)]
    remap = {old: new for new, old in enumerate(keep_cols)}
    blocks_r = BlockStructure(tuple(
        (name, tuple(remap[i] for i in idx)) for name, idx in keep))
    x_r = TimeSeriesPanel(x_c.values[:, keep_cols],
                          tuple(x_c.labels[i] for i in keep_cols), x_c.frequency)
    p_star, _ = select_arx(y_c, x_r, blocks_r, p_max)
    design_r = build_design(y_c, x_r, p_star, blocks_r)
    gen_r = refit_selected(design_r, fit_design(design_r))

    # observed statistic on the unrestricted model at the same lag order
    design_u = build_design(y_c, x_c, p_star, blocks)
    fit_u = fit_design(design_u)
    R = restriction_matrix(design_u, block)
    cov = coef_covariance(design_u, fit_u, block, B_cov=B_cov,
                          seed=child(seed, _NS_COV), jobs=jobs,
                          dgp_design=design_r, dgp_fit=gen_r)
    q_obs = wald_statistic(fit_u.beta, R, cov)

    pool = _residual_pool(gen_r, design_r.n)
    own_r, drive_r = _own_and_drive(design_r, gen_r.beta)
    init = _initial_conditions(design_u)
    cols = np.asarray(R.columns)
    factor = cho_factor(cov, lower=True)
    n = design_u.n
    base = child(seed, _NS_BOOT)

    def one(b: int) -> float:
        rng = generator(base, b)
        eps = pool[rng.integers(0, n, n)]
        y_star = arx_recursion(own_r, drive_r + eps, init)
        X = _replicate_design_matrix(design_u, y_star, init)
        rb = _fit_arrays(X, y_star).beta[cols]
        if not np.any(rb):
            return 0.0
        return float(rb @ cho_solve(factor, rb))

    q_boot = np.asarray(parallel_map(one, range(B), jobs))
    return GrangerTestResult(block=block, Q=q_obs, q_boot=q_boot,
                             mid_p=mid_p_value(q_obs, q_boot), B=B,
                             p_used=p_star, lambda_used=fit_u.lam)


def granger_lasso_selection(y: TimeSeriesPanel, x: TimeSeriesPanel,
                            blocks: BlockStructure,
                            p_max: int = 1) -> tuple[str, ...]:
    """Blocks whose fitted coefficients are nonzero at any lag.

    Fits the full model with lag order and penalty chosen by BIC; a block is
    selected as soon as one of its coefficients survives the penalty.
    Returns block names in block order.
    """
    y_c, _ = center(y)
    x_c, _ = center(x)
    p_star, fit = select_arx(y_c, x_c, blocks, p_max)
    off = p_max - p_star
    design = build_design(
        TimeSeriesPanel(y_c.values[off:], y_c.labels, y_c.frequency),
        TimeSeriesPanel(x_c.values[off:], x_c.labels, x_c.frequency),
        p_star, blocks)
    selected = []
    for name in blocks.names:
        cols = design.block_columns(name)
        if np.any(fit.beta[list(cols)] != 0.0):
            selected.append(name)
    return tuple(selected)


def wald_block_test(y: TimeSeriesPanel, x: TimeSeriesPanel,
                    blocks: BlockStructure, block: str,
                    p: int = 1) -> tuple[float, float]:
    """Classical Wald test of one block on the least-squares fit.

    Returns (Q, p-value) with the chi-square reference distribution on
    p * k_j degrees of freedom.  Raises NotComputableError in regimes where
    least squares does not exist.
    """
    y_c, _ = center(y)
    x_c, _ = center(x)
    design = build_design(y_c, x_c, p, blocks)
    beta, cov = ols_fit(design)
    R = restriction_matrix(design, block)
    cols = np.asarray(R.columns)
    q = wald_statistic(beta, R, cov[np.ix_(cols, cols)])
    return q, float(chi2.sf(q, len(cols)))


def wald_test_selection(y: TimeSeriesPanel, x: TimeSeriesPanel,
                        blocks: BlockStructure, alpha: float,
                        p: int = 1) -> tuple[str, ...]:
    """Blocks whose classical Wald p-value is below alpha.

    One least-squares fit of the full model, then one chi-square test per
    block.  Raises NotComputableError when least squares does not exist.
    """
    y_c, _ = center(y)
    x_c, _ = center(x)
    design = build_design(y_c, x_c, p, blocks)
    beta, cov = ols_fit(design)
    selected = []
    for name in blocks.names:
        R = restriction_matrix(design, name)
        cols = np.asarray(R.columns)
        q = wald_statistic(beta, R, cov[np.ix_(cols, cols)])
        if chi2.sf(q, len(cols)) < alpha:
            selected.append(name)
    return tuple(selected)
