"""Data-generating designs, p-value streams, and size-power curves.

The generating recursion is checked against what it claims to produce: on a
long panel, least squares on (own lag, predictor lags) recovers the design's
coefficients, and the innovation variance matches.  Seeding is checked by
replaying the documented spawn keys by hand.
"""

import numpy as np
import pytest

from hdgranger.errors import StructureError
from hdgranger.inference import granger_lasso_test, wald_block_test
from hdgranger.seeding import child
from hdgranger.simulation import (
    SimulationDesign,
    SizePowerCurve,
    builtin_designs,
    empirical_cdf,
    get_design,
    simulate,
    simulate_pvalues,
    simulated_size,
    size_power_curve,
)


def small_design(a1_h0=(0.3, 0.0, 0.2, 0.0), a1_ha=None, T=60):
    a1_h0 = np.asarray(a1_h0, dtype=float)
    if a1_ha is None:
        a1_ha = a1_h0
    return SimulationDesign(name="small", T=T, k=4, block_sizes=(2, 2),
                            a1_h0=a1_h0, a1_ha=np.asarray(a1_ha, dtype=float))


class TestDesigns:
    def test_builtin_catalog(self):
        designs = builtin_designs()
        assert [d.name for d in designs] == [
            "T100_k25", "T100_k50", "T100_k75", "T40_k150"]
        for d, k in zip(designs[:3], (25, 50, 75)):
            assert (d.T, d.k) == (100, k)
            assert d.block_sizes == (5, 5, 5, k - 15)
            assert np.array_equal(d.a1_h0[:5], [0.2] * 5)
            assert np.all(d.a1_h0[5:] == 0.0)
            assert np.array_equal(d.a1_ha[:10], [0.2] * 10)
            assert np.all(d.a1_ha[10:] == 0.0)
        d4 = designs[3]
        assert (d4.T, d4.k) == (40, 150)
        assert d4.block_sizes == (9,) * 10 + (6,) * 10
        assert np.array_equal(d4.a1_h0[:9], [0.4] * 9)
        assert np.array_equal(d4.a1_ha[:18], [0.4] * 18)
        for d in designs:
            assert d.tested_block == "b2"
            assert (d.own_coef, d.x_coef, d.noise_var) == (0.5, 0.5, 0.1)

    def test_lookup(self):
        designs = builtin_designs()
        assert get_design(2).name == "T100_k50"
        assert get_design("4").name == "T40_k150"
        assert get_design("T100_k75").name == "T100_k75"
        assert get_design(designs[0]) is designs[0]
        with pytest.raises(ValueError):
            get_design(0)
        with pytest.raises(ValueError):
            get_design("T9_k9")

    def test_validation(self):
        with pytest.raises(StructureError):
            SimulationDesign(name="bad", T=50, k=4, block_sizes=(2, 2),
                             a1_h0=np.zeros(3), a1_ha=np.zeros(4))
        with pytest.raises(StructureError):
            SimulationDesign(name="bad", T=50, k=4, block_sizes=(3, 2),
                             a1_h0=np.zeros(4), a1_ha=np.zeros(4))
        d = small_design()
        with pytest.raises(ValueError):
            d.coefficients("H2")
        assert np.array_equal(d.coefficients("H0"), d.a1_h0)


class TestSimulate:
    def test_shapes_and_determinism(self):
        d = small_design()
        y, x = simulate(d, "H0", seed=5)
        assert y.values.shape == (60, 1)
        assert x.values.shape == (60, 4)
        assert x.labels == ("x1", "x2", "x3", "x4")
        y2, x2 = simulate(d, "H0", seed=5)
        assert np.array_equal(y.values, y2.values)
        assert np.array_equal(x.values, x2.values)
        y3, _ = simulate(d, "H0", seed=6)
        assert not np.array_equal(y.values, y3.values)

    def test_hypotheses_share_random_numbers(self):
        # predictors and innovations are drawn before the hypothesis enters,
        # so H0 and HA panels differ only through the coefficient vector
        d = small_design(a1_h0=(0.3, 0.0, 0.0, 0.0),
                         a1_ha=(0.3, 0.0, 0.4, 0.0))
        y0, x0 = simulate(d, "H0", seed=7)
        y1, x1 = simulate(d, "HA", seed=7)
        assert np.array_equal(x0.values, x1.values)
        assert not np.array_equal(y0.values, y1.values)

    def test_recursion_recovers_coefficients(self):
        """Long-panel least squares on (y lag, x lags) recovers the design's
        own coefficient, a1, and the innovation variance."""
        d = small_design(T=4000)
        y, x = simulate(d, "H0", seed=8)
        yv = y.values[:, 0]
        Z = np.column_stack([yv[:-1], x.values[:-1]])
        b = np.linalg.lstsq(Z, yv[1:], rcond=None)[0]
        assert abs(b[0] - 0.5) < 0.05
        assert np.allclose(b[1:], d.a1_h0, atol=0.05)
        resid = yv[1:] - Z @ b
        assert abs(resid.var() - 0.1) < 0.01
        # predictor recursion: pooled lag-1 autocoefficient close to 0.5
        num = float(np.sum(x.values[1:] * x.values[:-1]))
        den = float(np.sum(x.values[:-1] ** 2))
        assert abs(num / den - 0.5) < 0.05

    def test_stationary_no_blowup(self):
        d = get_design(4)
        y, x = simulate(d, "HA", seed=9)
        assert np.abs(y.values).max() < 50
        assert np.abs(x.values).max() < 50


class TestPvalueStreams:
    def test_wald_stream_replays_documented_seeding(self):
        d = small_design()
        pvals = simulate_pvalues(d, "H0", "wald", N=3, seed=0)
        by_hand = []
        for j in range(3):
            y, x = simulate(d, "H0", child(0, j, 0))
            by_hand.append(wald_block_test(y, x, d.blocks(),
                                           d.tested_block, p=1)[1])
        assert np.array_equal(pvals, by_hand)

    def test_lasso_stream_replays_documented_seeding(self):
        d = small_design()
        pvals = simulate_pvalues(d, "H0", "granger_lasso", N=2, B=30,
                                 seed=0, B_cov=50)
        by_hand = []
        for j in range(2):
            y, x = simulate(d, "H0", child(0, j, 0))
            res = granger_lasso_test(y, x, d.blocks(), d.tested_block,
                                     B=30, seed=child(0, j, 1), B_cov=50)
            by_hand.append(res.mid_p)
        assert np.array_equal(pvals, by_hand)

    def test_serial_matches_parallel(self):
        d = small_design()
        a = simulate_pvalues(d, "H0", "wald", N=6, seed=1, jobs=1)
        b = simulate_pvalues(d, "H0", "wald", N=6, seed=1, jobs=2)
        assert np.array_equal(a, b)

    def test_validation(self):
        d = small_design()
        with pytest.raises(ValueError):
            simulate_pvalues(d, "H0", "student-t", N=2)
        with pytest.raises(ValueError):
            simulate_pvalues(d, "H0", "wald", N=0)

    def test_size_is_mean_rejection(self):
        d = small_design()
        pvals = simulate_pvalues(d, "H0", "wald", N=40, seed=2)
        size = simulated_size(d, "wald", alpha=0.1, N=40, seed=2)
        assert size == np.mean(pvals < 0.1)


class TestSizePower:
    def test_empirical_cdf_by_hand(self):
        vals = np.array([0.1, 0.2, 0.2, 0.9])
        grid = np.array([0.0, 0.1, 0.2, 0.5, 1.0])
        assert np.array_equal(empirical_cdf(vals, grid),
                              [0.0, 0.25, 0.75, 0.75, 1.0])

    def test_power_at_size_interpolates(self):
        curve = SizePowerCurve(x=np.linspace(0, 1, 3),
                               f_h0=np.array([0.0, 0.5, 1.0]),
                               f_ha=np.array([0.0, 0.8, 1.0]))
        assert np.isclose(curve.power_at_size(0.25), 0.4)
        assert curve.power_at_size(0.0) == 0.0
        assert curve.power_at_size(1.0) == 1.0

    def test_identical_hypotheses_give_diagonal(self):
        # a1_ha defaults to a1_h0, and both streams reuse the same spawn
        # keys, so the "alternative" p-values are bit-identical to the null
        d = small_design()
        curve = size_power_curve(d, "wald", N=25, m=21, seed=3)
        assert np.array_equal(curve.f_h0, curve.f_ha)

    def test_grid_validation(self):
        d = small_design()
        with pytest.raises(ValueError):
            size_power_curve(d, "wald", N=5, m=1)
