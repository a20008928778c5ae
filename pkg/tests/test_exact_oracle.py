import itertools
import math

import numpy as np
import pytest

from mtfcost.core.errors import InvalidArgumentError, SizeError
from mtfcost.core.exact_oracle import (
    DiscretePmf,
    exact_marginal_e,
    exact_marginal_o,
    exact_scaled_laplace,
    exact_search_cost_law,
    exact_stationary_law,
    initial_position_law,
    poisson_binomial,
    requested_mass,
)
from mtfcost.core.popularity import RequestProfile, make_iid_profile


def _brute_force(qs):
    pmf = np.zeros(len(qs) + 1)
    for bits in itertools.product((0, 1), repeat=len(qs)):
        pmf[sum(bits)] += math.prod(q if b else 1.0 - q for q, b in zip(qs, bits))
    return pmf


class TestDiscretePmf:
    """Partial and full pmfs over 0-based positions."""

    def test_indexing_outside_is_zero(self):
        pmf = DiscretePmf([0.25, 0.75])
        assert pmf[1] == 0.75
        assert pmf[5] == 0.0
        assert pmf[-1] == 0.0

    def test_sum_and_mean(self):
        total = DiscretePmf([0.1, 0.2]) + DiscretePmf([0.0, 0.3, 0.4])
        np.testing.assert_allclose(total.probabilities, [0.1, 0.5, 0.4])
        assert total.total == pytest.approx(1.0)
        assert total.mean() == pytest.approx(1.3)

    def test_rejects_negative_entries(self):
        with pytest.raises(InvalidArgumentError):
            DiscretePmf([0.5, -0.1])


class TestPoissonBinomial:
    """Iterative convolution of Bernoulli pmfs."""

    def test_three_parameters(self):
        np.testing.assert_allclose(
            poisson_binomial([0.1, 0.2, 0.3]).probabilities,
            [0.504, 0.398, 0.092, 0.006],
            atol=1e-12,
        )

    def test_empty_is_point_mass(self):
        np.testing.assert_array_equal(poisson_binomial([]).probabilities, [1.0])

    def test_matches_enumeration(self, rng):
        for _ in range(100):
            qs = rng.random(int(rng.integers(1, 13)))
            np.testing.assert_allclose(poisson_binomial(qs).probabilities, _brute_force(qs), atol=1e-12)

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            poisson_binomial([0.5, 1.5])


class TestExactSearchCostLaw:
    """Exact transient laws of a fixed profile."""

    def test_single_item(self):
        profile = RequestProfile(weights=np.array([1.0]))
        pmf_e, pmf_o = exact_search_cost_law(profile, 2.0)
        assert pmf_e[0] == pytest.approx(1.0 - math.exp(-2.0), abs=1e-10)
        assert pmf_o[0] == pytest.approx(math.exp(-2.0), abs=1e-14)

    def test_time_zero_is_initial_position_law(self, small_profile):
        pmf_e, pmf_o = exact_search_cost_law(small_profile, 0.0)
        assert pmf_e.total == 0.0
        np.testing.assert_allclose(pmf_o.probabilities, initial_position_law(small_profile).probabilities, atol=1e-15)

    def test_mass_and_event_identity(self, rng):
        profile = RequestProfile(weights=rng.random(6) + 0.05)
        pmf_e, pmf_o = exact_search_cost_law(profile, 1.5)
        assert pmf_e.total + pmf_o.total == pytest.approx(1.0, abs=1e-9)
        assert pmf_e.total == pytest.approx(requested_mass(profile, 1.5), abs=1e-9)

    def test_marginals_add_up(self, rng):
        profile = RequestProfile(weights=rng.random(5) + 0.1)
        p = profile.popularities
        pmf_e, pmf_o = exact_search_cost_law(profile, 1.0)
        for k in range(profile.n):
            e = sum(p[i] * exact_marginal_e(profile, i, 1.0, k) for i in range(profile.n))
            o = sum(p[i] * exact_marginal_o(profile, i, 1.0, k) for i in range(profile.n))
            assert e == pytest.approx(pmf_e[k], abs=1e-9)
            assert o == pytest.approx(pmf_o[k], abs=1e-12)

    def test_marginal_outside_range(self, small_profile):
        assert exact_marginal_o(small_profile, 0, 1.0, 7) == 0.0
        with pytest.raises(InvalidArgumentError):
            exact_marginal_e(small_profile, 4, 1.0, 0)

    def test_size_cap(self, rng):
        profile = RequestProfile(weights=rng.random(10) + 0.1)
        with pytest.raises(SizeError):
            exact_search_cost_law(profile, 1.0, max_n=8)

    def test_invalid_times(self, small_profile):
        with pytest.raises(InvalidArgumentError):
            exact_search_cost_law(small_profile, math.inf)
        with pytest.raises(InvalidArgumentError):
            exact_search_cost_law(small_profile, -1.0)

    def test_scaled_laplace_at_zero_is_total_mass(self, small_profile):
        a, b = exact_scaled_laplace(small_profile, 2.0, 0.0)
        assert a + b == pytest.approx(1.0, abs=1e-9)
        a1, b1 = exact_scaled_laplace(small_profile, 2.0, 1.0)
        assert a1 < a and b1 < b

    def test_requested_mass_approaches_limit(self, exp_law):
        """1 - |phi'(t)|/mu = 0.75 for Exp(1) at t = 1, on the n mu t clock."""
        errors = []
        for n in (8, 64):
            values = [requested_mass(make_iid_profile(exp_law, n, "ex", seed), float(n)) for seed in range(400)]
            errors.append(abs(np.mean(values) - 0.75))
        assert errors[1] < errors[0]


class TestExactStationaryLaw:
    """Stationary laws from the truncated age integral."""

    def test_equal_weights_are_uniform(self):
        profile = RequestProfile(weights=np.ones(4))
        np.testing.assert_allclose(exact_stationary_law(profile).probabilities, 0.25, atol=1e-9)

    def test_two_items(self):
        # the requested item is behind the other one iff that one was requested more recently
        profile = RequestProfile(weights=np.array([1.0, 3.0]))
        pmf = exact_stationary_law(profile)
        p, q = 0.25, 0.75
        assert pmf[1] == pytest.approx(p * q + q * p, abs=1e-9)
        assert pmf.total == pytest.approx(1.0, abs=1e-9)

    def test_zero_rate_items_carry_no_mass(self):
        profile = RequestProfile(weights=np.array([2.0, 0.0, 1.0]))
        pmf = exact_stationary_law(profile)
        assert pmf.total == pytest.approx(1.0, abs=1e-9)
        assert pmf[2] == pytest.approx(0.0, abs=1e-12)
