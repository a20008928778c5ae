import math

import numpy as np
import pytest

from mtfcost.config import STATS
from mtfcost.core.analytic import stationary_law, transient_law
from mtfcost.core.errors import InvalidArgumentError
from mtfcost.core.exact_oracle import DiscretePmf
from mtfcost.core.simulator import SampleBatch, batch_transient
from mtfcost.core.stats import (
    EmpiricalCdf,
    dkw_band,
    empirical_pmf,
    ks_distance,
    ks_report,
    ks_two_sample,
    stochastic_order_check,
    tv_binned,
    tv_binned_threshold,
    tv_discrete,
)


class TestEmpiricalCdf:
    def test_steps(self):
        ecdf = EmpiricalCdf.from_values([0.2, 0.4, 0.4, 0.9])
        assert ecdf(0.1) == 0.0
        assert ecdf(0.4) == 0.75
        assert ecdf(1.0) == 1.0
        np.testing.assert_allclose(ecdf([0.2, 0.5]), [0.25, 0.75])

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            EmpiricalCdf.from_values([])


class TestDistances:
    def test_ks_of_single_point(self):
        # a point mass at 1/2 against the uniform law
        assert ks_distance([0.5], lambda x: np.clip(x, 0, 1)) == pytest.approx(0.5)

    def test_ks_uniform_sample(self, rng):
        assert ks_distance(rng.random(20_000), lambda x: np.clip(x, 0, 1)) <= 0.015

    def test_two_sample(self, rng):
        statistic, pvalue = ks_two_sample(rng.random(2000), rng.random(2000))
        assert statistic < 0.06
        assert pvalue > 0.001
        statistic, _ = ks_two_sample(np.zeros(10), np.ones(10))
        assert statistic == 1.0

    def test_tv_discrete_pads(self):
        a = DiscretePmf(np.array([0.5, 0.5]))
        b = DiscretePmf(np.array([0.5, 0.25, 0.25]))
        assert tv_discrete(a, b) == pytest.approx(0.25)
        assert tv_discrete(a, a) == 0.0

    def test_tv_binned(self, rng):
        uniform = lambda x: np.clip(x, 0, 1)
        assert tv_binned(rng.random(50_000), uniform, bins=20) <= 0.02
        assert tv_binned(np.full(100, 0.05), uniform, bins=10) == pytest.approx(0.9)

    def test_tv_binned_on_cost_lattice(self, rng):
        uniform = lambda x: np.clip(x, 0, 1)
        values = rng.integers(1, 501, 50_000) / 500
        # 200 bins of 2.5 atoms each alternate between 2 and 3 atoms
        assert tv_binned(values, uniform, bins=200) > 0.08
        assert tv_binned(values, uniform, bins=200, lattice=500) < 0.05

    def test_tv_binned_threshold(self, monkeypatch):
        monkeypatch.setitem(STATS, "tv_threshold", 0.05)
        assert tv_binned_threshold(20_000, bins=200) == pytest.approx(0.15)
        with pytest.raises(InvalidArgumentError):
            tv_binned_threshold(0)


class TestDkwBand:
    def test_value(self):
        assert dkw_band(100_000, 0.99) == pytest.approx(0.005147, abs=1e-6)

    def test_shrinks_with_m(self):
        assert dkw_band(400, 0.99) == pytest.approx(dkw_band(100, 0.99) / 2.0)

    @pytest.mark.parametrize("m,confidence", [(0, 0.99), (10, 0.0), (10, 1.0)])
    def test_rejects(self, m, confidence):
        with pytest.raises(InvalidArgumentError):
            dkw_band(m, confidence)


class TestEmpiricalPmf:
    def test_zero_based(self):
        batch = SampleBatch(values=np.array([0.25, 0.25, 1.0]), raw_costs=np.array([1, 1, 4]), n=4)
        np.testing.assert_allclose(empirical_pmf(batch).probabilities, [2 / 3, 0, 0, 1 / 3])

    def test_needs_raw_costs(self):
        with pytest.raises(InvalidArgumentError):
            empirical_pmf(SampleBatch(values=np.array([0.5])))

    def test_rejects_costs_beyond_n(self):
        batch = SampleBatch(values=np.array([1.0]), raw_costs=np.array([5]), n=4)
        with pytest.raises(InvalidArgumentError):
            empirical_pmf(batch)


class TestStochasticOrder:
    def test_laws_in_order(self, exp_law):
        report = stochastic_order_check(transient_law(exp_law, "dec", 1.0), transient_law(exp_law, "inc", 1.0))
        assert report.passed
        assert report.statistic == "stochastic_order_violation"
        assert report.value == 0.0

    def test_laws_out_of_order(self, exp_law):
        report = stochastic_order_check(transient_law(exp_law, "inc", 1.0), transient_law(exp_law, "dec", 1.0))
        assert not report.passed
        assert report.value > 0.05
        assert report.details["worst_x"] > 0.5

    def test_batches_carry_band(self, exp_law):
        lower = batch_transient(exp_law, 200, "dec", 1.0, 5000, seed=1)
        upper = batch_transient(exp_law, 200, "inc", 1.0, 5000, seed=2)
        report = stochastic_order_check(lower, upper)
        assert report.passed
        assert report.threshold == pytest.approx(2 * dkw_band(5000) + 1e-8)

    def test_rejects_tiny_grid(self, exp_law):
        scl = stationary_law(exp_law)
        with pytest.raises(InvalidArgumentError):
            stochastic_order_check(scl, scl, grid=1)


class TestKsReport:
    def test_passes_for_limit_draws(self, exp_law):
        batch = batch_transient(exp_law, 300, "ex", 1.0, 5000, seed=3)
        report = ks_report(batch, transient_law(exp_law, "ex", 1.0), threshold=0.05)
        assert report.passed
        assert report.details["m"] == 5000
        assert report.threshold == 0.05

    def test_fails_against_wrong_law(self, exp_law):
        batch = batch_transient(exp_law, 300, "ex", math.inf, 5000, seed=3)
        report = ks_report(batch, transient_law(exp_law, "inc", 0.5), threshold=0.02)
        assert not report.passed
