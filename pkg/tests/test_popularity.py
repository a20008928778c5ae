import math

import numpy as np
import pytest
from scipy import special

from mtfcost.core.errors import DegenerateLawError, InvalidArgumentError, InvalidDensityError, OutOfRangeError
from mtfcost.core.numerics import integrate
from mtfcost.core.popularity import (
    BernoulliLaw,
    BetaLaw,
    DiracLaw,
    DiscreteMeasure,
    GammaLaw,
    GeometricLaw,
    Ordering,
    ParetoLaw,
    PushforwardLaw,
    RequestProfile,
    empirical_measure,
    law_from_descriptor,
    make_density_increment_profile,
    make_iid_profile,
    make_zipf_profile,
    profile_from_family,
    sample_weight_rows,
    size_biased,
    wasserstein1,
    zipf_limiting_law,
)
from mtfcost.models import LawDescriptor, ProfileDescriptor


class TestOrdering:
    """Ordering tags and their aliases."""

    def test_aliases(self):
        assert Ordering.parse("dec") is Ordering.DECREASING
        assert Ordering.parse("Increasing") is Ordering.INCREASING
        assert Ordering.parse(Ordering.EXCHANGEABLE) is Ordering.EXCHANGEABLE

    def test_unknown(self):
        with pytest.raises(InvalidArgumentError):
            Ordering.parse("sideways")

    def test_short_and_monotone(self):
        assert Ordering.DECREASING.short == "dec"
        assert Ordering.DECREASING.monotone
        assert not Ordering.EXCHANGEABLE.monotone


class TestGammaLaw:
    """Exp(1) = Gamma(1) closed forms."""

    def test_laplace_and_derivatives(self, exp_law):
        assert exp_law.laplace(1.0) == pytest.approx(0.5, abs=1e-15)
        assert exp_law.dlaplace(1.0) == pytest.approx(-0.25, abs=1e-15)
        assert exp_law.d2laplace(1.0) == pytest.approx(0.25, abs=1e-15)
        np.testing.assert_allclose(exp_law.laplace(np.array([0.0, 3.0])), [1.0, 0.25])

    def test_cdf_and_expectation(self, exp_law):
        assert exp_law.cdf(1.0) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-14)
        assert exp_law.zero_atom == 0.0
        assert exp_law.expect(lambda x: x) == pytest.approx(1.0, abs=1e-8)

    def test_partial_moment_reaches_full_moment(self, exp_law):
        for k in range(3):
            assert exp_law.partial_moment(0.7, 1e6, k) == pytest.approx(exp_law.moment_laplace(0.7, k), rel=1e-12)

    def test_inverses(self, exp_law):
        assert exp_law.laplace_inverse(0.5) == pytest.approx(1.0, abs=1e-14)
        assert exp_law.laplace_inverse(1.0) == 0.0
        assert exp_law.slope_inverse(0.25) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(exp_law.slope_inverse(np.array([1.0, 1.0 / 9.0])), [0.0, 2.0], atol=1e-12)
        assert math.isinf(exp_law.slope_inverse(0.0))

    def test_partial_moment_inverse_round_trip(self, exp_law):
        for k in (0, 1):
            level = exp_law.partial_moment(1.0, 0.7, k)
            assert exp_law.partial_moment_inverse(1.0, level, k) == pytest.approx(0.7, abs=1e-9)

    def test_shape_two(self):
        law = GammaLaw(2.0)
        assert law.laplace(1.0) == pytest.approx(0.25)
        assert law.mean == 2.0
        assert law.label() == "gamma(2,1)"

    def test_label(self, exp_law):
        assert exp_law.label() == "exp(1)"

    def test_rejects_bad_shape(self):
        with pytest.raises(InvalidArgumentError):
            GammaLaw(0.0)


class TestGeometricLaw:
    """Geometric law on {0, 1, ...}."""

    def test_laplace_and_atom(self, ln2):
        law = GeometricLaw(0.5)
        assert law.mean == pytest.approx(1.0)
        assert law.zero_atom == pytest.approx(0.5)
        assert law.laplace(ln2) == pytest.approx(2.0 / 3.0, abs=1e-14)

    def test_partial_moments(self):
        law = GeometricLaw(0.5)
        assert law.partial_moment(0.0, 2.0, 0) == pytest.approx(0.875, abs=1e-14)
        assert law.partial_moment(0.0, 2.5, 1) == pytest.approx(0.5, abs=1e-14)
        assert law.partial_moment(0.0, -0.5, 0) == 0.0

    def test_quantile(self):
        law = GeometricLaw(0.5)
        np.testing.assert_array_equal(law.quantile(np.array([0.25, 0.5, 0.75, 0.8])), [0.0, 0.0, 1.0, 2.0])

    def test_laplace_inverse_below_atom(self):
        law = GeometricLaw(0.5)
        assert math.isinf(law.laplace_inverse(0.5))
        assert law.laplace_inverse(2.0 / 3.0) == pytest.approx(math.log(2.0), abs=1e-12)


class TestBernoulliAndDirac:
    """Two-point and one-point laws."""

    def test_bernoulli(self):
        law = BernoulliLaw(0.5)
        assert law.zero_atom == 0.5
        assert math.isinf(law.laplace_inverse(0.5))
        assert law.laplace_inverse(0.6) == pytest.approx(-math.log(0.2), abs=1e-12)
        assert law.expect(lambda x: x * x) == pytest.approx(0.5)

    def test_dirac(self, dirac_law):
        assert dirac_law.laplace(2.0) == pytest.approx(math.exp(-2.0))
        assert dirac_law.laplace_inverse(math.exp(-1.0)) == pytest.approx(1.0, abs=1e-14)
        assert dirac_law.partial_moment(1.0, 0.5, 0) == 0.0
        assert dirac_law.partial_moment_inverse(1.0, 0.1) == 1.0

    def test_bad_parameters(self):
        with pytest.raises(InvalidArgumentError):
            BernoulliLaw(0.0)
        with pytest.raises(InvalidArgumentError):
            DiracLaw(-1.0)


class TestParetoLaw:
    """Pareto law with tail x^(1/alpha)."""

    def test_moments(self, pareto_law):
        assert pareto_law.mean == pytest.approx(2.0)
        assert pareto_law.laplace(0.0) == pytest.approx(1.0)
        assert pareto_law.laplace(0.8) == pytest.approx(2.0 * special.expn(3, 0.8), rel=1e-12)
        assert pareto_law.moment_laplace(0.8, 1) == pytest.approx(2.0 * special.expn(2, 0.8), rel=1e-12)
        assert math.isinf(pareto_law.moment_laplace(0.0, 2))

    def test_cdf_matches_quantile(self, pareto_law):
        assert pareto_law.cdf(2.0) == pytest.approx(0.75)
        assert pareto_law.quantile(0.75) == pytest.approx(2.0)
        assert pareto_law.cdf(0.5) == 0.0

    def test_partial_moment_to_infinity(self, pareto_law):
        assert pareto_law.partial_moment(1.0, math.inf, 1) == pytest.approx(pareto_law.moment_laplace(1.0, 1), rel=1e-12)

    def test_laplace_inverse_round_trip(self, pareto_law):
        value = pareto_law.laplace(0.8)
        assert pareto_law.laplace_inverse(value) == pytest.approx(0.8, rel=1e-8)

    def test_expectation(self, pareto_law):
        assert pareto_law.expect(lambda x: x) == pytest.approx(2.0, rel=1e-9)

    def test_alpha_range(self):
        with pytest.raises(InvalidArgumentError):
            ParetoLaw(0.5)


class TestBetaLaw:
    """Standard Beta law, series and quadrature branches."""

    def test_mean_and_cdf(self, beta_law):
        assert beta_law.mean == pytest.approx(1.0 / 3.0)
        assert beta_law.partial_moment(0.0, 0.5, 0) == pytest.approx(0.75)
        assert beta_law.cdf(0.5) == pytest.approx(0.75)

    @pytest.mark.parametrize("s", [2.0, 45.0])
    def test_moments_match_direct_quadrature(self, beta_law, s):
        for k in (0, 1, 2):
            expected = integrate(lambda z: z ** k * math.exp(-s * z) * 2.0 * (1.0 - z), 0.0, 1.0)
            assert beta_law.moment_laplace(s, k) == pytest.approx(expected, rel=1e-8)


class TestPushforwardLaw:
    """Law of q(cU) for a monotone density q."""

    def test_linear_preset_is_uniform_on_zero_two(self):
        law = law_from_descriptor("linear(1)")
        assert isinstance(law, PushforwardLaw)
        assert law.ordering is Ordering.DECREASING
        assert law.mean == pytest.approx(1.0)
        assert law.cdf(0.5) == pytest.approx(0.25, abs=1e-10)
        assert law.quantile(0.25) == pytest.approx(0.5)
        assert law.laplace(1.0) == pytest.approx((1.0 - math.exp(-2.0)) / 2.0, rel=1e-10)

    def test_ramp_is_increasing(self):
        assert law_from_descriptor("ramp(1)").ordering is Ordering.INCREASING

    def test_unnormalized_density(self):
        with pytest.raises(InvalidDensityError):
            PushforwardLaw(lambda x: 1.0, 3.0)

    def test_non_monotone_density(self):
        with pytest.raises(InvalidDensityError):
            PushforwardLaw(lambda x: 0.5 + 2.0 * abs(x - 0.5), 1.0)


class TestDerivedLaws:
    """Size-biasing and Zipf limits."""

    def test_size_biased_exponential_is_gamma_two(self, exp_law):
        biased = size_biased(exp_law)
        assert biased.laplace(1.0) == pytest.approx(0.25)
        assert biased.mean == pytest.approx(2.0)
        assert biased.quantile(0.5) == pytest.approx(float(special.gammaincinv(2.0, 0.5)), abs=1e-9)

    def test_zipf_limits(self):
        assert isinstance(zipf_limiting_law(0.5), BetaLaw)
        assert zipf_limiting_law(0.5).mean == pytest.approx(2.0 / 3.0)
        assert isinstance(zipf_limiting_law(0.0), DiracLaw)
        assert isinstance(zipf_limiting_law(-0.5), ParetoLaw)
        with pytest.raises(OutOfRangeError):
            zipf_limiting_law(-1.0)

    def test_descriptors(self):
        assert isinstance(law_from_descriptor("exp(1)"), GammaLaw)
        assert isinstance(law_from_descriptor(LawDescriptor.parse("geometric(0.5)")), GeometricLaw)
        assert law_from_descriptor("beta(1,2)").label() == "beta(1,2)"


class TestRequestProfile:
    """Validated weight vectors."""

    def test_popularities(self, small_profile):
        np.testing.assert_allclose(small_profile.popularities, [0.1, 0.2, 0.3, 0.4])
        assert small_profile.n == 4
        assert small_profile.total_weight == 10.0

    def test_weights_are_read_only(self, small_profile):
        with pytest.raises(ValueError):
            small_profile.weights[0] = 5.0

    def test_invalid_weights(self):
        with pytest.raises(InvalidArgumentError):
            RequestProfile(weights=np.array([1.0, -1.0]))
        with pytest.raises(DegenerateLawError):
            RequestProfile(weights=np.zeros(3))
        with pytest.raises(InvalidArgumentError):
            RequestProfile(weights=np.array([1.0, 2.0]), ordering="dec")

    def test_descriptor_round_trip_is_bit_exact(self, rng):
        weights = rng.random(7)
        profile = RequestProfile(weights=weights, seed=3)
        text = profile.to_descriptor().model_dump_json()
        restored = RequestProfile.from_descriptor(ProfileDescriptor.model_validate_json(text))
        np.testing.assert_array_equal(restored.weights, weights)

    def test_family_descriptor_regenerates(self, exp_law):
        profile = make_iid_profile(exp_law, 20, "dec", seed=5)
        restored = RequestProfile.from_descriptor(profile.to_descriptor(include_weights=False))
        np.testing.assert_array_equal(restored.weights, profile.weights)


class TestProfileFactories:
    """i.i.d., Zipf and density-increment profiles."""

    def test_iid_sorted_and_seeded(self, exp_law):
        profile = make_iid_profile(exp_law, 50, "dec", seed=1)
        assert np.all(np.diff(profile.weights) <= 0)
        np.testing.assert_array_equal(profile.weights, make_iid_profile(exp_law, 50, "dec", seed=1).weights)
        assert profile.limiting_law is exp_law

    def test_zipf(self):
        profile = make_zipf_profile(-0.5, 10)
        np.testing.assert_allclose(profile.weights, np.arange(1, 11) ** -0.5)
        assert profile.scale == pytest.approx(math.sqrt(10.0))
        assert profile.ordering is Ordering.DECREASING
        with pytest.raises(OutOfRangeError):
            make_zipf_profile(-1.0, 10)

    def test_density_increments(self):
        law = law_from_descriptor("linear(1)")
        profile = make_density_increment_profile(law.q, 1.0, 4, preset="linear")
        np.testing.assert_allclose(profile.weights, [0.4375, 0.3125, 0.1875, 0.0625], atol=1e-12)
        assert profile.scale == 4.0
        assert profile.ordering is Ordering.DECREASING

    def test_family_fixes_zipf_order(self):
        profile = profile_from_family(LawDescriptor.parse("zipf(0.5)"), 5, "ex", None)
        assert profile.ordering is Ordering.INCREASING

    def test_weight_rows_never_all_zero(self, rng):
        rows = sample_weight_rows(BernoulliLaw(0.1), 2, Ordering.EXCHANGEABLE, rng, 500)
        assert np.all(rows.sum(axis=1) > 0)

    def test_all_mass_at_zero(self, rng):
        with pytest.raises(DegenerateLawError):
            sample_weight_rows(_ZeroLaw(), 2, Ordering.EXCHANGEABLE, rng, 1)


class _ZeroLaw(BernoulliLaw):
    def __init__(self):
        super().__init__(1.0)

    @property
    def zero_atom(self):
        return 1.0


class TestWasserstein:
    """W1 between empirical weight measures and limiting laws."""

    def test_discrete_pair(self):
        a = DiscreteMeasure.from_atoms([(0.0, 1.0)])
        b = DiscreteMeasure.from_atoms([(1.0, 0.5), (3.0, 0.5)])
        assert b.mean == pytest.approx(2.0)
        assert wasserstein1(a, b) == pytest.approx(2.0)

    def test_invalid_masses(self):
        with pytest.raises(InvalidArgumentError):
            DiscreteMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.6]))

    @pytest.mark.parametrize("family", ["dirac(1)", "bernoulli(0.5)", "exp(1)", "gamma(2)", "geometric(0.5)", "pareto(-0.5)", "beta(1,2)"])
    def test_iid_profiles_are_close(self, family):
        law = law_from_descriptor(family)
        profile = make_iid_profile(law, 10_000, "ex", seed=11)
        assert wasserstein1(empirical_measure(profile, law.mean), law) <= 0.1

    @pytest.mark.parametrize("alpha", [-0.5, 0.5])
    def test_zipf_profiles_are_close(self, alpha):
        profile = make_zipf_profile(alpha, 10_000)
        law = profile.limiting_law
        assert wasserstein1(empirical_measure(profile, law.mean), law) <= 0.1

    def test_decreases_with_n(self, exp_law):
        distances = [
            np.mean([wasserstein1(empirical_measure(make_iid_profile(exp_law, n, "ex", seed=s), 1.0), exp_law, points=20_000) for s in range(5)])
            for n in (100, 10_000)
        ]
        assert distances[1] < distances[0]
