"""Monte Carlo harness: data-generating designs, simulated size, and
size-power curves.

The generating process is a stationary ARX(1),

    y_t = 0.5 y_{t-1} + a1' x_{t-1} + e_t,      e_t ~ N(0, 0.1)
    x_t = 0.5 x_{t-1} + u_t,                    u_t ~ N_k(0, 0.1 I)

started from zero with a burn-in that is discarded.  Each built-in design
partitions the predictors into blocks; the null and alternative coefficient
vectors differ only in the second block, which is the block every test
targets.  Sizes are rejection rates of that test over independent panels;
size-power curves pair the empirical p-value distributions under the null
and the alternative, generated with common random numbers so the curves
are comparable point by point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import BlockStructure, TimeSeriesPanel
from .errors import StructureError
from .inference import granger_lasso_test, wald_block_test
from .parallel import parallel_map
from .seeding import child, generator

TESTS = ("granger_lasso", "wald")
HYPOTHESES = ("H0", "HA")


@dataclass(frozen=True)
class SimulationDesign:
    """One data-generating configuration of the ARX(1) process above."""

    name: str
    T: int
    k: int
    block_sizes: tuple[int, ...]
    a1_h0: np.ndarray
    a1_ha: np.ndarray
    own_coef: float = 0.5
    x_coef: float = 0.5
    noise_var: float = 0.1
    burn_in: int = 50

    def __post_init__(self):
        a0 = np.asarray(self.a1_h0, dtype=float)
        a1 = np.asarray(self.a1_ha, dtype=float)
        if a0.shape != (self.k,) or a1.shape != (self.k,):
            raise StructureError("coefficient vectors must have length k")
        if sum(self.block_sizes) != self.k:
            raise StructureError("block sizes must sum to k")
        object.__setattr__(self, "a1_h0", a0)
        object.__setattr__(self, "a1_ha", a1)
        object.__setattr__(self, "block_sizes", tuple(int(s) for s in self.block_sizes))

    def coefficients(self, hypothesis: str) -> np.ndarray:
        if hypothesis not in HYPOTHESES:
            raise ValueError(f"hypothesis must be one of {HYPOTHESES}")
        return self.a1_h0 if hypothesis == "H0" else self.a1_ha

    def blocks(self) -> BlockStructure:
        return BlockStructure.from_sizes(self.block_sizes)

    @property
    def tested_block(self) -> str:
        """The second block, the one whose coefficients differ across
        hypotheses."""
        return self.blocks().names[1]


def _coef_vector(k: int, fills: list[tuple[int, int, float]]) -> np.ndarray:
    a = np.zeros(k)
    for lo, hi, val in fills:
        a[lo:hi] = val
    return a


def builtin_designs() -> tuple[SimulationDesign, ...]:
    """The four study designs.

    Designs 1-3: T=100 with k = 25, 50, 75, blocks of sizes (5, 5, 5, k-15);
    under the null the first 5 predictors carry coefficient 0.2, under the
    alternative the first 10 do.  Design 4: T=40, k=150, ten blocks of 9
    then ten blocks of 6; coefficient 0.4 on the first 9 (null) or 18
    (alternative) predictors.
    """
    designs = []
    for k in (25, 50, 75):
        designs.append(SimulationDesign(
            name=f"T100_k{k}", T=100, k=k,
            block_sizes=(5, 5, 5, k - 15),
            a1_h0=_coef_vector(k, [(0, 5, 0.2)]),
            a1_ha=_coef_vector(k, [(0, 10, 0.2)])))
    k = 150
    designs.append(SimulationDesign(
        name="T40_k150", T=40, k=k,
        block_sizes=(9,) * 10 + (6,) * 10,
        a1_h0=_coef_vector(k, [(0, 9, 0.4)]),
        a1_ha=_coef_vector(k, [(0, 18, 0.4)])))
    return tuple(designs)


def get_design(spec) -> SimulationDesign:
    """Look a built-in design up by 1-based number or by name."""
    designs = builtin_designs()
    if isinstance(spec, SimulationDesign):
        return spec
    if isinstance(spec, int) or (isinstance(spec, str) and spec.isdigit()):
        idx = int(spec)
        if not 1 <= idx <= len(designs):
            raise ValueError(f"design number must be in 1..{len(designs)}")
        return designs[idx - 1]
    for d in designs:
        if d.name == spec:
            return d
    raise ValueError(f"unknown design {spec!r}")


def simulate(design: SimulationDesign, hypothesis: str,
             seed=0) -> tuple[TimeSeriesPanel, TimeSeriesPanel]:
    """Draw one (response, predictors) panel pair from the design."""
    a1 = design.coefficients(hypothesis)
    rng = generator(seed)
    M = design.burn_in + design.T
    scale = float(np.sqrt(design.noise_var))
    u = rng.normal(0.0, scale, size=(M, design.k))
    e = rng.normal(0.0, scale, size=M)
    x = np.empty((M, design.k))
    y = np.empty(M)
    x_prev = np.zeros(design.k)
    y_prev = 0.0
    for t in range(M):
        y[t] = design.own_coef * y_prev + a1 @ x_prev + e[t]
        x[t] = design.x_coef * x_prev + u[t]
        x_prev = x[t]
        y_prev = y[t]
    y_panel = TimeSeriesPanel(y[design.burn_in:, None], ("y",))
    x_panel = TimeSeriesPanel(x[design.burn_in:],
                              tuple(f"x{i + 1}" for i in range(design.k)))
    return y_panel, x_panel


def _one_pvalue(args) -> float:
    design, hypothesis, test, B, B_cov, p_max, seed, j = args
    panel_seed = child(seed, j, 0)
    y, x = simulate(design, hypothesis, panel_seed)
    blocks = design.blocks()
    block = design.tested_block
    if test == "granger_lasso":
        res = granger_lasso_test(y, x, blocks, block, B=B,
                                 seed=child(seed, j, 1), p_max=p_max,
                                 B_cov=B_cov)
        return res.mid_p
    _, pval = wald_block_test(y, x, blocks, block, p=p_max)
    return pval


def simulate_pvalues(design: SimulationDesign, hypothesis: str, test: str,
                     N: int, B: int = 200, seed=0, jobs: int = 1,
                     p_max: int = 1, B_cov: int = 200) -> np.ndarray:
    """P-values of the tested block over N independent panels.

    Run j derives its panel from spawn key (j, 0) and its test randomness
    from (j, 1); both depend on the hypothesis only through the generated
    data, so null and alternative streams share random numbers.
    """
    if test not in TESTS:
        raise ValueError(f"test must be one of {TESTS}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    args = [(design, hypothesis, test, B, B_cov, p_max, seed, j)
            for j in range(N)]
    return np.asarray(parallel_map(_one_pvalue, args, jobs))


def simulated_size(design: SimulationDesign, test: str, alpha: float,
                   N: int, B: int = 200, seed=0, jobs: int = 1,
                   p_max: int = 1, B_cov: int = 200) -> float:
    """Rejection rate of a true null: fraction of runs with p-value < alpha."""
    pvals = simulate_pvalues(design, "H0", test, N, B=B, seed=seed, jobs=jobs,
                             p_max=p_max, B_cov=B_cov)
    return float(np.mean(pvals < alpha))


@dataclass(frozen=True)
class SizePowerCurve:
    """Empirical p-value CDFs under H0 (size axis) and HA (power axis),
    evaluated on a common grid of thresholds."""

    x: np.ndarray
    f_h0: np.ndarray
    f_ha: np.ndarray

    def power_at_size(self, size: float) -> float:
        """Interpolate the power the curve reaches at a given size level."""
        return float(np.interp(size, self.f_h0, self.f_ha))


def empirical_cdf(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    values = np.sort(np.asarray(values, dtype=float))
    return np.searchsorted(values, grid, side="right") / values.size


def size_power_curve(design: SimulationDesign, test: str, N: int,
                     B: int = 200, m: int = 101, seed=0, jobs: int = 1,
                     p_max: int = 1, B_cov: int = 200) -> SizePowerCurve:
    """Paired size-power curve of one test on one design.

    The H0 and HA p-value streams use identical spawn keys, so a design
    whose two hypotheses coincide yields the 45-degree line exactly.
    """
    if m < 2:
        raise ValueError(f"grid size m must be >= 2, got {m}")
    p0 = simulate_pvalues(design, "H0", test, N, B=B, seed=seed, jobs=jobs,
                          p_max=p_max, B_cov=B_cov)
    p1 = simulate_pvalues(design, "HA", test, N, B=B, seed=seed, jobs=jobs,
                          p_max=p_max, B_cov=B_cov)
    x = np.linspace(0.0, 1.0, m)
    return SizePowerCurve(x=x, f_h0=empirical_cdf(p0, x),
                          f_ha=empirical_cdf(p1, x))
