"""
Limiting Search-Cost Laws

Closed forms and quadrature for the limit S(t) of the normalized
move-to-front search cost under a popularity law P with Laplace
transform phi and mean mu:

- below the threshold 1 - phi(t) the density is the stationary one,
  f(x) = m2(s) / (mu m1(s)) with s = phi^-1(1 - x) and m_k(s) = E[X^k e^(-sX)];
- above the threshold it carries mass m1(t)/mu, spread uniformly for
  exchangeable weights and through the inverse of the partial Laplace
  integral L_t(y) = E[e^(-tX); X <= y] for monotone initial orderings.

Scaled time t = inf denotes the stationary regime.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from prometheus_client import Counter

from mtfcost.core.errors import (
    ConstructionError,
    DegenerateLawError,
    InvalidArgumentError,
    OutOfRangeError,
    ToleranceNotMetError,
)
from mtfcost.core.numerics import QuadratureSpec, integrate, upper_incomplete_gamma
from mtfcost.core.popularity import ArrayLike, Ordering, ParetoLaw, PopularityLaw, elementwise
from mtfcost.core.simulator import SampleBatch, _generator

logger = logging.getLogger(__name__)

limiting_samples = Counter('mtf_limiting_samples_total', 'Samples drawn from limiting laws', ['ordering'])

# construction checks of SearchCostLaw
_CONSTRUCTION_TOLERANCE = 1e-6
_VERIFY_SPEC_LOOSENING = 100.0
_SERIES_LAMBDA = 1e-6
_EDGE_SLACK = 1e-12


def _require_mean(law: PopularityLaw) -> float:
    mu = law.mean
    if not (0 < mu < math.inf):
        raise DegenerateLawError(f"{law.label()} needs a finite positive mean, got {mu}")
    return mu


def _check_transient_time(t: float) -> float:
    t = float(t)
    if math.isinf(t):
        raise InvalidArgumentError("t = inf is the stationary regime; use the stationary forms")
    if not t > 0:
        raise InvalidArgumentError(f"t must be positive, got {t}")
    return t


def _integrate_loose(f, a: float, b: float, points=None) -> float:
    """Quadrature for consistency checks; a missed tolerance keeps the best estimate."""
    spec = QuadratureSpec().loosened(_VERIFY_SPEC_LOOSENING)
    try:
        return integrate(f, a, b, spec, points=points)
    except ToleranceNotMetError as exc:
        logger.warning(f"Check quadrature on [{a}, {b}] kept estimate {exc.best_estimate} (error {exc.error_estimate})")
        return exc.best_estimate


def _m(law: PopularityLaw, s: float, k: int) -> float:
    return float(law.moment_laplace(s, k))


def stationary_density(law: PopularityLaw, x: float) -> float:
    """f(x) = -(1/mu) phi''(s)/phi'(s) at s = phi^-1(1 - x) on [0, 1 - p0); 0 elsewhere."""
    mu = _require_mean(law)
    if x < 0.0 or x >= 1.0 - law.zero_atom:
        return 0.0
    s = law.laplace_inverse(1.0 - x)
    if math.isinf(s):
        return 0.0
    slope = _m(law, s, 1)
    if slope <= 0.0:
        return 0.0
    return _m(law, s, 2) / (mu * slope)


def stationary_cdf(law: PopularityLaw, x: float) -> float:
    """F(x) = 1 - |phi'(phi^-1(1 - x))| / mu."""
    mu = _require_mean(law)
    if x <= 0.0:
        return 0.0
    if x >= 1.0 - law.zero_atom:
        return 1.0
    s = law.laplace_inverse(1.0 - x)
    if math.isinf(s):
        return 1.0
    return min(1.0, max(0.0, 1.0 - _m(law, s, 1) / mu))


def _stationary_quantile(law: PopularityLaw, u: np.ndarray) -> np.ndarray:
    """x with F(x) = u: solve |phi'(s)| = mu (1 - u), then x = 1 - phi(s)."""
    mu = _require_mean(law)
    u = np.asarray(u, dtype=float)
    s = np.asarray(law.slope_inverse(mu * (1.0 - u)), dtype=float)
    finite = np.isfinite(s)
    phi = np.asarray(law.laplace(np.where(finite, s, 0.0)), dtype=float)
    return np.where(finite, 1.0 - phi, 1.0 - law.zero_atom)


def g_t(law: PopularityLaw, ordering: Union[Ordering, str], t: float, y: float) -> float:
    """Partial Laplace integral: E[e^(-tX); X <= y] (decreasing) or E[e^(-tX); X > y] (increasing)."""
    ordering = Ordering.parse(ordering)
    if not ordering.monotone:
        raise InvalidArgumentError("g_t is defined for the monotone orderings only")
    t = _check_transient_time(t)
    if y < 0:
        raise InvalidArgumentError(f"y must be nonnegative, got {y}")
    lower = float(law.partial_moment(t, y, 0))
    if ordering is Ordering.DECREASING:
        return lower
    return max(0.0, float(law.laplace(t)) - lower)


def tilde_g_t(law: PopularityLaw, ordering: Union[Ordering, str], t: float, x: float) -> float:
    """
    Weight found at position x of the out-of-equilibrium block, x in [1 - phi(t), 1].

    Decreasing: L_t^-1(1 - x). Increasing: L_t^-1(x - (1 - phi(t))). Inverses
    follow the inf convention and are capped at the support cap of P.
    """
    ordering = Ordering.parse(ordering)
    if not ordering.monotone:
        raise InvalidArgumentError("tilde_g_t is defined for the monotone orderings only")
    t = _check_transient_time(t)
    phi = float(law.laplace(t))
    threshold = 1.0 - phi
    if x < threshold - _EDGE_SLACK or x > 1.0 + _EDGE_SLACK:
        raise OutOfRangeError(f"x={x} lies outside [{threshold}, 1]")
    x = min(max(x, threshold), 1.0)
    target = 1.0 - x if ordering is Ordering.DECREASING else x - threshold
    target = min(max(target, 0.0), phi)
    return float(law.partial_moment_inverse(t, target, 0))


def transient_density(law: PopularityLaw, ordering: Union[Ordering, str], t: float, x: float) -> float:
    ordering = Ordering.parse(ordering)
    t = _check_transient_time(t)
    mu = _require_mean(law)
    if x < 0.0 or x > 1.0:
        return 0.0
    phi = float(law.laplace(t))
    threshold = 1.0 - phi
    if x < threshold:
        return stationary_density(law, x)
    if ordering is Ordering.EXCHANGEABLE:
        return _m(law, t, 1) / (mu * phi)
    return tilde_g_t(law, ordering, t, x) / mu


def _out_block_mass(law: PopularityLaw, ordering: Ordering, t: float, span: float) -> float:
    """(1/mu) * integral of tilde_g_t over the first `span` of the out block, in inverse coordinates."""
    mu = law.mean
    phi = float(law.laplace(t))
    span = min(max(span, 0.0), phi)
    m1 = _m(law, t, 1)
    if ordering is Ordering.DECREASING:
        # positions [thr, thr + span] carry the largest weights: v = 1 - x runs over [phi - span, phi]
        level = phi - span
        y = float(law.partial_moment_inverse(t, level, 0))
        area = m1 - float(law.partial_moment(t, y, 1)) + y * (float(law.partial_moment(t, y, 0)) - level)
    else:
        y = float(law.partial_moment_inverse(t, span, 0))
        area = float(law.partial_moment(t, y, 1)) - y * (float(law.partial_moment(t, y, 0)) - span)
    return min(max(area / mu, 0.0), m1 / mu)


def transient_cdf(law: PopularityLaw, ordering: Union[Ordering, str], t: float, x: float) -> float:
    """CDF of S(t): the stationary CDF below the threshold, the out block integrated in closed form above it."""
    ordering = Ordering.parse(ordering)
    t = _check_transient_time(t)
    mu = _require_mean(law)
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    phi = float(law.laplace(t))
    threshold = 1.0 - phi
    if x < threshold:
        return stationary_cdf(law, x)
    m1 = _m(law, t, 1)
    base = 1.0 - m1 / mu
    if ordering is Ordering.EXCHANGEABLE:
        return min(1.0, base + (x - threshold) * m1 / (mu * phi))
    return min(1.0, base + _out_block_mass(law, ordering, t, x - threshold))


def _out_block_positions(law: PopularityLaw, ordering: Ordering, t: float, w: np.ndarray) -> np.ndarray:
    """
    Offsets v in [0, phi(t)] of the out block at conditional level w.

    The conditional CDF in v is (1/m1) integral_0^v L^-1, inverted exactly
    through the first partial moment M_t: y = M^-1(w m1), v = L(y) - (M(y) - w m1)/y.
    """
    m1 = _m(law, t, 1)
    level = np.asarray(w, dtype=float) * m1
    y = np.atleast_1d(np.asarray(law.partial_moment_inverse(t, level, 1), dtype=float))
    level = np.atleast_1d(level)
    lower = np.atleast_1d(np.asarray(law.partial_moment(t, y, 0), dtype=float))
    first = np.atleast_1d(np.asarray(law.partial_moment(t, y, 1), dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(y > 0, lower - (first - level) / np.where(y > 0, y, 1.0), 0.0)
    return np.clip(v, 0.0, float(law.laplace(t)))


def transient_quantile(law: PopularityLaw, ordering: Union[Ordering, str], t: float, u: ArrayLike) -> ArrayLike:
    """Inverse of transient_cdf, exact in every piece."""
    ordering = Ordering.parse(ordering)
    t = _check_transient_time(t)
    mu = _require_mean(law)
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any((u < 0) | (u > 1)):
        raise InvalidArgumentError("quantile levels must lie in [0, 1]")

    phi = float(law.laplace(t))
    threshold = 1.0 - phi
    out_mass = _m(law, t, 1) / mu
    cut = 1.0 - out_mass
    result = np.empty_like(u)

    inside = u <= cut
    if np.any(inside):
        result[inside] = np.minimum(_stationary_quantile(law, u[inside]), threshold)
    above = ~inside
    if np.any(above):
        w = np.clip((u[above] - cut) / out_mass, 0.0, 1.0)
        if ordering is Ordering.EXCHANGEABLE:
            result[above] = threshold + w * phi
        elif ordering is Ordering.DECREASING:
            result[above] = 1.0 - _out_block_positions(law, ordering, t, 1.0 - w)
        else:
            result[above] = threshold + _out_block_positions(law, ordering, t, w)
    result = np.clip(result, 0.0, 1.0)
    return float(result[0]) if scalar else result


@dataclass(frozen=True, eq=False)
class SearchCostLaw:
    """
    Limiting law of the normalized search cost at scaled time t (inf for stationary).

    threshold = 1 - phi(t) splits the equilibrium piece from the out block
    whose mass is out_mass = |phi'(t)| / mu.
    """

    law: PopularityLaw
    ordering: Ordering
    t: float
    threshold: float
    out_mass: float
    phi_t: float
    mu: float
    checks: dict = field(default_factory=dict, repr=False)

    @property
    def stationary(self) -> bool:
        return math.isinf(self.t)

    def piece(self, x: float) -> str:
        return "eq" if self.stationary or x < self.threshold else "out"

    def _density(self, x: float) -> float:
        if self.stationary:
            return stationary_density(self.law, x)
        return transient_density(self.law, self.ordering, self.t, x)

    def _cdf(self, x: float) -> float:
        if self.stationary:
            return stationary_cdf(self.law, x)
        return transient_cdf(self.law, self.ordering, self.t, x)

    def density(self, x: ArrayLike) -> ArrayLike:
        return elementwise(self._density, x)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return elementwise(self._cdf, x)

    def quantile(self, u: ArrayLike) -> ArrayLike:
        if self.stationary:
            values = _stationary_quantile(self.law, np.atleast_1d(np.asarray(u, dtype=float)))
            return float(values[0]) if np.ndim(u) == 0 else values
        return transient_quantile(self.law, self.ordering, self.t, u)

    def tabulated_cdf(self, points: int = 2049):
        """Linear interpolant of the CDF on a grid holding the threshold; for large batches."""
        grid = np.union1d(np.linspace(0.0, 1.0, points), [self.threshold])
        values = np.maximum.accumulate(np.asarray(self.cdf(grid), dtype=float))
        return lambda x: np.interp(x, grid, values)

    def breakpoints(self) -> list:
        points = [self.threshold, 1.0 - self.law.zero_atom]
        return sorted({p for p in points if 0.0 < p < 1.0})


def _verified(scl: SearchCostLaw) -> SearchCostLaw:
    """Check normalization and the out-block mass along two independent paths."""
    law, t = scl.law, scl.t
    eq_mass = _integrate_loose(lambda x: stationary_density(law, x), 0.0, scl.threshold, points=scl.breakpoints())
    if scl.stationary:
        out_alt = 0.0
    else:
        out_alt = law.expect(lambda y: y * math.exp(-y * t), tail_rate=t) / scl.mu
    total = eq_mass + scl.out_mass
    checks = {"equilibrium_mass": eq_mass, "out_mass_by_expectation": out_alt, "total_mass": total}
    if abs(total - 1.0) > _CONSTRUCTION_TOLERANCE:
        raise ConstructionError(f"{law.label()} at t={t}: density integrates to {total:.9f}")
    if abs(out_alt - scl.out_mass) > _CONSTRUCTION_TOLERANCE:
        raise ConstructionError(f"{law.label()} at t={t}: out mass {scl.out_mass:.9f} but expectation gives {out_alt:.9f}")
    scl.checks.update(checks)
    return scl


def transient_law(law: PopularityLaw, ordering: Union[Ordering, str], t: float, verify: bool = True) -> SearchCostLaw:
    ordering = Ordering.parse(ordering)
    t = _check_transient_time(t)
    mu = _require_mean(law)
    phi = float(law.laplace(t))
    scl = SearchCostLaw(
        law=law,
        ordering=ordering,
        t=t,
        threshold=1.0 - phi,
        out_mass=_m(law, t, 1) / mu,
        phi_t=phi,
        mu=mu,
    )
    return _verified(scl) if verify else scl


def stationary_law(law: PopularityLaw, verify: bool = True) -> SearchCostLaw:
    mu = _require_mean(law)
    p0 = law.zero_atom
    scl = SearchCostLaw(
        law=law,
        ordering=Ordering.EXCHANGEABLE,
        t=math.inf,
        threshold=1.0 - p0,
        out_mass=0.0,
        phi_t=p0,
        mu=mu,
    )
    return _verified(scl) if verify else scl


def search_cost_law(law: PopularityLaw, ordering: Union[Ordering, str], t: float, verify: bool = True) -> SearchCostLaw:
    """transient_law for finite t, stationary_law for t = inf."""
    if math.isinf(t):
        return stationary_law(law, verify)
    return transient_law(law, ordering, t, verify)


def sample_limiting(search_cost_law: SearchCostLaw, count: int, seed) -> SampleBatch:
    """
    i.i.d. draws of S(t).

    Exchangeable: draw S_inf by inverse CDF and replace it by an independent
    uniform on [1 - phi(t), 1] whenever it lands there. Monotone: inverse CDF
    of S(t).
    """
    if count < 1:
        raise InvalidArgumentError(f"count must be positive, got {count}")
    scl = search_cost_law
    rng = _generator(seed)
    if scl.stationary:
        values = _stationary_quantile(scl.law, rng.random(count))
    elif scl.ordering is Ordering.EXCHANGEABLE:
        stationary = _stationary_quantile(scl.law, rng.random(count))
        uniform = scl.threshold + scl.phi_t * rng.random(count)
        values = np.where(stationary > scl.threshold, uniform, stationary)
    else:
        values = scl.quantile(rng.random(count))
    limiting_samples.labels(ordering=scl.ordering.value).inc(count)
    return SampleBatch(
        values=np.clip(values, 0.0, 1.0),
        t_scaled=scl.t,
        seed=seed if isinstance(seed, int) else None,
        sampler="limiting",
        ordering=scl.ordering.value,
        family=scl.law.label(),
    )


def mean_search_cost(search_cost_law: SearchCostLaw) -> float:
    """E[S(t)] = integral over [0, 1] of 1 - F."""
    scl = search_cost_law
    return integrate(lambda x: 1.0 - scl._cdf(x), 0.0, 1.0, QuadratureSpec().loosened(_VERIFY_SPEC_LOOSENING), points=scl.breakpoints())


def laplace_equilibrium_limit(law: PopularityLaw, t: float, lam: float) -> float:
    """(1/mu) integral_0^t phi''(u) exp(-lam (1 - phi(u))) du."""
    mu = _require_mean(law)
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be nonnegative, got {lam}")
    if math.isnan(t) or t < 0 or math.isinf(t):
        raise InvalidArgumentError(f"t must be finite and nonnegative, got {t}")
    if t == 0.0:
        return 0.0

    def integrand(u: float) -> float:
        return _m(law, u, 2) * math.exp(-lam * (1.0 - float(law.laplace(u))))

    points = [t * f for f in (1e-3, 1e-2, 1e-1)]
    return integrate(integrand, 0.0, t, points=points) / mu


def laplace_out_limit(law: PopularityLaw, ordering: Union[Ordering, str], t: float, lam: float) -> float:
    """Limit of E[exp(-lam S_o/n); out of equilibrium] for the three orderings."""
    ordering = Ordering.parse(ordering)
    t = _check_transient_time(t)
    mu = _require_mean(law)
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be nonnegative, got {lam}")
    phi = float(law.laplace(t))
    out_mass = _m(law, t, 1) / mu
    shift = math.exp(-lam * (1.0 - phi))

    if ordering is Ordering.EXCHANGEABLE:
        z = lam * phi
        if lam < _SERIES_LAMBDA:
            ratio = 1.0 - z / 2.0 + z * z / 6.0
        else:
            ratio = -math.expm1(-z) / z if z > 0 else 1.0
        return out_mass * shift * ratio

    if ordering is Ordering.DECREASING:
        def kernel(y: float) -> float:
            return math.exp(-lam * (phi - float(law.partial_moment(t, y, 0))))
    else:
        def kernel(y: float) -> float:
            return math.exp(-lam * float(law.partial_moment(t, y, 0)))

    value = law.expect(lambda y: y * math.exp(-y * t) * kernel(y), tail_rate=t)
    return shift * value / mu


def tv_distance_to_stationary(law: PopularityLaw, ordering: Union[Ordering, str], t: float) -> Tuple[float, float]:
    """(exact, bound): half the L1 distance of the densities, and 2 |phi'(t)| / mu."""
    ordering = Ordering.parse(ordering)
    t = _check_transient_time(t)
    mu = _require_mean(law)
    phi = float(law.laplace(t))
    threshold = 1.0 - phi
    bound = 2.0 * _m(law, t, 1) / mu

    def gap(x: float) -> float:
        return abs(transient_density(law, ordering, t, x) - stationary_density(law, x))

    edge = 1.0 - law.zero_atom
    points = [edge] if threshold < edge < 1.0 else None
    if threshold >= 1.0:
        return 0.0, bound
    try:
        exact = 0.5 * integrate(gap, threshold, 1.0, points=points)
    except ToleranceNotMetError as exc:
        logger.warning(f"TV quadrature for {law.label()} at t={t} kept estimate {exc.best_estimate}")
        exact = 0.5 * exc.best_estimate
    return exact, bound


def _eta(law: PopularityLaw, delta: float) -> float:
    return law.laplace_inverse(1.0 - delta)


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")


def out_tail_quadrature(law: PopularityLaw, ordering: Union[Ordering, str], t: float, delta: float) -> float:
    """P(S(t) > delta) by direct quadrature of the density tail."""
    ordering = Ordering.parse(ordering)
    _check_delta(delta)
    t = _check_transient_time(t)
    mu = _require_mean(law)
    threshold = 1.0 - float(law.laplace(t))
    start = max(delta, threshold)
    total = 0.0
    if delta < threshold:
        total += _integrate_loose(lambda x: stationary_density(law, x), delta, threshold)
    if ordering is Ordering.EXCHANGEABLE:
        return total + (1.0 - start) * _m(law, t, 1) / (mu * float(law.laplace(t)))
    return total + _integrate_loose(lambda x: tilde_g_t(law, ordering, t, x), start, 1.0) / mu


def lru_fault_probability(law: PopularityLaw, ordering: Union[Ordering, str], t: float, delta: float) -> float:
    """
    Limiting LRU fault probability P(S(t) > delta) for a cache holding a fraction delta of the items.

    With eta = phi^-1(1 - delta): |phi'(eta)|/mu when eta < t; otherwise
    (1 - delta) |phi'(t)| / (mu phi(t)) for exchangeable weights and
    1 - F(delta) from the closed-form CDF for monotone orderings.
    """
    ordering = Ordering.parse(ordering)
    _check_delta(delta)
    mu = _require_mean(law)
    if math.isnan(t) or not t > 0:
        raise InvalidArgumentError(f"t must be positive, got {t}")
    eta = _eta(law, delta)
    if math.isinf(t):
        return 0.0 if math.isinf(eta) else _m(law, eta, 1) / mu
    if eta < t:
        return _m(law, eta, 1) / mu
    if ordering is Ordering.EXCHANGEABLE:
        return (1.0 - delta) * _m(law, t, 1) / (mu * float(law.laplace(t)))
    return max(0.0, 1.0 - transient_cdf(law, ordering, t, delta))


def pac_fault_probability(alpha: float, t: float, delta: float) -> float:
    """
    Fault probability for Pareto weights under a decreasing initial order, through incomplete gamma functions.

    With z = 1 + 1/alpha and eta = phi^-1(1 - delta):
    -((alpha+1)/alpha) eta^-z Gamma(z, eta) when eta < t, otherwise
    -((alpha+1)/alpha) t^-z [Gamma(z, t) - Gamma(z, t eps)] with eps = L_t^-1(1 - delta).
    """
    if not -1 < alpha < 0:
        raise InvalidArgumentError(f"alpha must lie in (-1, 0), got {alpha}")
    _check_delta(delta)
    if math.isnan(t) or not t > 0:
        raise InvalidArgumentError(f"t must be positive, got {t}")
    law = ParetoLaw(alpha)
    z = 1.0 + 1.0 / alpha
    factor = -(alpha + 1.0) / alpha
    eta = _eta(law, delta)
    if eta < t:
        return factor * eta ** (-z) * upper_incomplete_gamma(z, eta)
    eps = float(law.partial_moment_inverse(t, 1.0 - delta, 0))
    return factor * t ** (-z) * (upper_incomplete_gamma(z, t) - upper_incomplete_gamma(z, t * eps))
