"""
Popularity Laws and Request Profiles

A popularity law P on [0, inf) is carried by two families of functionals:
moment_laplace(s, k) = E[X^k e^(-sX)] and partial_moment(s, y, k) =
E[X^k e^(-sX); X <= y]. The Laplace transform, its derivatives, the CDF
and the partial Laplace integrals of the transient densities all derive
from them. Profiles are the finite weight vectors whose scaled empirical
measures converge to such a law.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Iterable, List, Optional, Tuple, Union

import numpy as np
from prometheus_client import Counter
from scipy import special
from scipy.stats import wasserstein_distance

from mtfcost.config import INVERSION, STATS
from mtfcost.core.errors import (
    DegenerateLawError,
    InvalidArgumentError,
    InvalidDensityError,
    OutOfRangeError,
)
from mtfcost.core.numerics import (
    expand_bracket,
    integrate,
    integrate_halfline,
    invert_monotone,
    invert_monotone_vec,
    upper_incomplete_gamma,
)
from mtfcost.models import LawDescriptor, ProfileDescriptor, ORDERING_ALIASES

logger = logging.getLogger(__name__)

zero_weight_resamples = Counter('mtf_zero_weight_resamples_total', 'All-zero weight vectors rejected and redrawn')

ArrayLike = Union[float, np.ndarray]

# Beta moments switch from the confluent series to quadrature above this s
_BETA_SERIES_LIMIT = 30.0
_DENSITY_TOLERANCE = 1e-6
_MONOTONE_GRID = 1025


class Ordering(str, Enum):
    EXCHANGEABLE = "exchangeable"
    DECREASING = "decreasing"
    INCREASING = "increasing"

    @classmethod
    def parse(cls, value: Any) -> "Ordering":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key not in ORDERING_ALIASES:
            raise InvalidArgumentError(f"Unknown ordering '{value}' (use ex, dec or inc)")
        return cls(ORDERING_ALIASES[key])

    @property
    def monotone(self) -> bool:
        return self is not Ordering.EXCHANGEABLE

    @property
    def short(self) -> str:
        return {"exchangeable": "ex", "decreasing": "dec", "increasing": "inc"}[self.value]


def _out(value: Any) -> ArrayLike:
    """Return Python floats for scalar results and arrays otherwise."""
    return float(value) if np.ndim(value) == 0 else value


def elementwise(fn: Callable[..., float], *args: ArrayLike) -> ArrayLike:
    if all(np.ndim(a) == 0 for a in args):
        return float(fn(*(float(a) for a in args)))
    return np.vectorize(fn, otypes=[float])(*args)


def _polylog_neg(j: int, x: np.ndarray) -> np.ndarray:
    """sum_{i>=0} i^j x^i for j = 0..3 and |x| < 1."""
    if j == 0:
        return 1.0 / (1.0 - x)
    if j == 1:
        return x / (1.0 - x) ** 2
    if j == 2:
        return x * (1.0 + x) / (1.0 - x) ** 3
    if j == 3:
        return x * (1.0 + 4.0 * x + x * x) / (1.0 - x) ** 4
    raise InvalidArgumentError(f"Moments of order {j} are not available for the geometric law")


class PopularityLaw(ABC):
    """
    Probability law P on the nonnegative reals.

    Subclasses provide mean, moment_laplace, partial_moment, quantile,
    sample and expect; everything else is derived here.
    """

    name = "law"

    @property
    @abstractmethod
    def mean(self) -> float:
        ...

    @property
    def support_upper(self) -> float:
        return math.inf

    @abstractmethod
    def moment_laplace(self, s: ArrayLike, k: int = 0) -> ArrayLike:
        """E[X^k exp(-sX)]."""

    @abstractmethod
    def partial_moment(self, s: ArrayLike, y: ArrayLike, k: int = 0) -> ArrayLike:
        """E[X^k exp(-sX); X <= y]."""

    @abstractmethod
    def quantile(self, u: ArrayLike) -> ArrayLike:
        """Generalized inverse inf{x : F(x) >= u}."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: Union[int, Tuple[int, ...]]) -> np.ndarray:
        ...

    @abstractmethod
    def expect(self, h: Callable[[float], float], tail_rate: float = 0.0) -> float:
        """Integral of h against P; tail_rate is the exponential decay rate of h, if any."""

    def descriptor(self) -> Optional[LawDescriptor]:
        return None

    def label(self) -> str:
        descriptor = self.descriptor()
        return descriptor.label() if descriptor else self.name

    def laplace(self, s: ArrayLike) -> ArrayLike:
        return self.moment_laplace(s, 0)

    def dlaplace(self, s: ArrayLike) -> ArrayLike:
        return _out(-np.asarray(self.moment_laplace(s, 1)))

    def d2laplace(self, s: ArrayLike) -> ArrayLike:
        return self.moment_laplace(s, 2)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return self.partial_moment(0.0, x, 0)

    @cached_property
    def zero_atom(self) -> float:
        return float(self.cdf(0.0))

    @cached_property
    def support_cap(self) -> float:
        """Upper end of the support, or the quantile at 1 - quantile_cap for unbounded support."""
        if math.isfinite(self.support_upper):
            return float(self.support_upper)
        return float(self.quantile(1.0 - INVERSION["quantile_cap"]))

    def laplace_inverse(self, v: float) -> float:
        """Solve phi(s) = v; targets at or below the zero atom map to +inf."""
        if v >= 1.0:
            return 0.0
        if v <= self.zero_atom:
            return math.inf
        s_max = expand_bracket(lambda s: self.laplace(s) > v)
        return invert_monotone(lambda s: -self.laplace(s), -v, 0.0, s_max)

    def slope_inverse(self, v: ArrayLike) -> ArrayLike:
        """Solve |phi'(s)| = v for v in (0, mu]; v <= 0 maps to +inf."""
        vs = np.atleast_1d(np.asarray(v, dtype=float))
        positive = vs[vs > 0]
        if positive.size == 0:
            return _out(np.full(np.shape(v), np.inf))
        floor = float(positive.min())
        s_max = expand_bracket(lambda s: self.moment_laplace(s, 1) > floor)
        s = invert_monotone_vec(lambda x: -np.asarray(self.moment_laplace(x, 1)), -vs, 0.0, s_max)
        s = np.where(vs > 0, s, np.inf)
        return _out(s.reshape(np.shape(v)))

    def partial_moment_inverse(self, s: float, v: ArrayLike, k: int = 0) -> ArrayLike:
        """inf{y : partial_moment(s, y, k) >= v}, capped at support_cap."""
        cap = self.support_cap
        if np.ndim(v) == 0:
            if v > self.partial_moment(s, cap, k):
                return cap
            return invert_monotone(lambda y: self.partial_moment(s, y, k), float(v), 0.0, cap)
        return invert_monotone_vec(lambda y: np.asarray(self.partial_moment(s, y, k)), v, 0.0, cap)


class DiracLaw(PopularityLaw):
    name = "dirac"

    def __init__(self, c: float = 1.0):
        if not c > 0:
            raise InvalidArgumentError(f"Dirac location must be positive, got {c}")
        self.c = float(c)

    @property
    def mean(self) -> float:
        return self.c

    @property
    def support_upper(self) -> float:
        return self.c

    def moment_laplace(self, s, k=0):
        return _out(self.c ** k * np.exp(-self.c * np.asarray(s, dtype=float)))

    def partial_moment(self, s, y, k=0):
        return _out(self.moment_laplace(s, k) * (np.asarray(y) >= self.c))

    def quantile(self, u):
        return _out(np.full(np.shape(u), self.c))

    def sample(self, rng, size):
        return np.full(size, self.c)

    def expect(self, h, tail_rate=0.0):
        return float(h(self.c))

    def laplace_inverse(self, v):
        if v >= 1.0:
            return 0.0
        if v <= 0.0:
            return math.inf
        return -math.log(v) / self.c

    def partial_moment_inverse(self, s, v, k=0):
        return _out(np.where(np.asarray(v) > 0, self.c, 0.0))

    def descriptor(self):
        return LawDescriptor(name="dirac", params=[self.c])


class BernoulliLaw(PopularityLaw):
    name = "bernoulli"

    def __init__(self, p: float):
        if not 0 < p <= 1:
            raise InvalidArgumentError(f"Bernoulli p must lie in (0, 1], got {p}")
        self.p = float(p)

    @property
    def mean(self) -> float:
        return self.p

    @property
    def support_upper(self) -> float:
        return 1.0

    def moment_laplace(self, s, k=0):
        top = self.p * np.exp(-np.asarray(s, dtype=float))
        return _out(1.0 - self.p + top if k == 0 else top)

    def partial_moment(self, s, y, k=0):
        y = np.asarray(y, dtype=float)
        top = self.p * np.exp(-np.asarray(s, dtype=float)) * (y >= 1.0)
        if k == 0:
            return _out((1.0 - self.p) * (y >= 0.0) + top)
        return _out(top)

    def quantile(self, u):
        return _out((np.asarray(u, dtype=float) > 1.0 - self.p).astype(float))

    def sample(self, rng, size):
        return (rng.random(size) < self.p).astype(float)

    def expect(self, h, tail_rate=0.0):
        return (1.0 - self.p) * float(h(0.0)) + self.p * float(h(1.0))

    def laplace_inverse(self, v):
        if v >= 1.0:
            return 0.0
        if v <= 1.0 - self.p:
            return math.inf
        return -math.log((v - (1.0 - self.p)) / self.p)

    def slope_inverse(self, v):
        vs = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            s = np.where(vs >= self.p, 0.0, np.log(self.p / np.where(vs > 0, vs, 1.0)))
        return _out(np.where(vs > 0, s, np.inf))

    def partial_moment_inverse(self, s, v, k=0):
        floor = self.partial_moment(s, 0.0, k)
        return _out(np.where(np.asarray(v) <= floor, 0.0, 1.0))

    def descriptor(self):
        return LawDescriptor(name="bernoulli", params=[self.p])


class GammaLaw(PopularityLaw):
    """Gamma law with the given shape and rate; phi(s) = (1 + s/rate)^(-shape)."""

    name = "gamma"

    def __init__(self, shape: float = 1.0, rate: float = 1.0):
        if not (shape > 0 and rate > 0):
            raise InvalidArgumentError(f"Gamma shape and rate must be positive, got {shape}, {rate}")
        self.shape = float(shape)
        self.rate = float(rate)

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def _coefficient(self, k: int) -> float:
        return math.exp(special.gammaln(self.shape + k) - special.gammaln(self.shape) + self.shape * math.log(self.rate))

    def moment_laplace(self, s, k=0):
        total_rate = self.rate + np.asarray(s, dtype=float)
        return _out(self._coefficient(k) * total_rate ** (-self.shape - k))

    def partial_moment(self, s, y, k=0):
        total_rate = self.rate + np.asarray(s, dtype=float)
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        return _out(self._coefficient(k) * total_rate ** (-self.shape - k) * special.gammainc(self.shape + k, total_rate * y))

    def quantile(self, u):
        return _out(special.gammaincinv(self.shape, np.asarray(u, dtype=float)) / self.rate)

    def sample(self, rng, size):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def density(self, x: float) -> float:
        if x <= 0:
            return 0.0
        return math.exp(self.shape * math.log(self.rate) + (self.shape - 1.0) * math.log(x) - self.rate * x - special.gammaln(self.shape))

    def expect(self, h, tail_rate=0.0):
        return integrate_halfline(lambda x: h(x) * self.density(x), tail_rate=self.rate + tail_rate)

    def laplace_inverse(self, v):
        if v >= 1.0:
            return 0.0
        if v <= 0.0:
            return math.inf
        return self.rate * (v ** (-1.0 / self.shape) - 1.0)

    def slope_inverse(self, v):
        vs = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            total_rate = (self._coefficient(1) / np.where(vs > 0, vs, 1.0)) ** (1.0 / (self.shape + 1.0))
        s = np.maximum(total_rate - self.rate, 0.0)
        return _out(np.where(vs > 0, s, np.inf))

    def partial_moment_inverse(self, s, v, k=0):
        total_rate = self.rate + s
        scale = self._coefficient(k) * total_rate ** (-self.shape - k)
        level = np.asarray(v, dtype=float) / scale
        y = special.gammaincinv(self.shape + k, np.clip(level, 0.0, 1.0)) / total_rate
        return _out(np.where(level >= 1.0, self.support_cap, np.minimum(y, self.support_cap)))

    def descriptor(self):
        if self.shape == 1.0:
            return LawDescriptor(name="exp", params=[self.rate])
        return LawDescriptor(name="gamma", params=[self.shape, self.rate])


class GeometricLaw(PopularityLaw):
    """Geometric law on {0, 1, 2, ...} with P(k) = p (1 - p)^k."""

    name = "geometric"

    def __init__(self, p: float):
        if not 0 < p < 1:
            raise InvalidArgumentError(f"Geometric p must lie in (0, 1), got {p}")
        self.p = float(p)
        self.r = 1.0 - self.p

    @property
    def mean(self) -> float:
        return self.r / self.p

    def moment_laplace(self, s, k=0):
        x = self.r * np.exp(-np.asarray(s, dtype=float))
        return _out(self.p * _polylog_neg(k, x))

    def partial_moment(self, s, y, k=0):
        x = self.r * np.exp(-np.asarray(s, dtype=float))
        y = np.asarray(y, dtype=float)
        m = np.floor(np.clip(y, -1.0, 1e12))
        a = m + 1.0
        tail = sum(math.comb(k, j) * a ** (k - j) * _polylog_neg(j, x) for j in range(k + 1))
        value = self.p * (_polylog_neg(k, x) - x ** a * tail)
        return _out(np.where(y >= 0.0, value, 0.0))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            k = np.ceil(np.log1p(-u) / math.log(self.r) - 1.0 - 1e-12)
        return _out(np.maximum(k, 0.0))

    def sample(self, rng, size):
        return rng.geometric(self.p, size) - 1.0

    def expect(self, h, tail_rate=0.0):
        terms = int(math.ceil(math.log(1e-18) / math.log(self.r))) + 1
        return math.fsum(self.p * self.r ** j * float(h(float(j))) for j in range(terms))

    def laplace_inverse(self, v):
        if v >= 1.0:
            return 0.0
        if v <= self.p:
            return math.inf
        return -math.log((1.0 - self.p / v) / self.r)

    def partial_moment_inverse(self, s, v, k=0):
        return _out(np.round(super().partial_moment_inverse(s, v, k)))

    def descriptor(self):
        return LawDescriptor(name="geometric", params=[self.p])


class ParetoLaw(PopularityLaw):
    """Pareto law with density (-1/alpha) x^(1/alpha - 1) on [1, inf), alpha in (-1, 0)."""

    name = "pareto"

    def __init__(self, alpha: float):
        if not -1 < alpha < 0:
            raise InvalidArgumentError(f"Pareto alpha must lie in (-1, 0), got {alpha}")
        self.alpha = float(alpha)
        self.tail_index = -1.0 / self.alpha

    @property
    def mean(self) -> float:
        return 1.0 / (1.0 + self.alpha)

    def _moment(self, s: float, k: int) -> float:
        beta = self.tail_index
        if s <= 0.0:
            return beta / (beta - k) if k < beta else math.inf

        return beta * s ** (beta - k) * upper_incomplete_gamma(k - beta, s)

    def _partial(self, s: float, y: float, k: int) -> float:
        beta = self.tail_index
        if y < 1.0:
            return 0.0
        if s <= 0.0:
            exponent = k - beta
            if math.isinf(y):
                return self._moment(0.0, k)
            if exponent == 0:
                return beta * math.log(y)
            return beta * (y ** exponent - 1.0) / exponent

        upper = 0.0 if math.isinf(y) else upper_incomplete_gamma(k - beta, s * y)
        return beta * s ** (beta - k) * (upper_incomplete_gamma(k - beta, s) - upper)

    def moment_laplace(self, s, k=0):
        return elementwise(lambda x: self._moment(x, k), s)

    def partial_moment(self, s, y, k=0):
        return elementwise(lambda a, b: self._partial(a, b, k), s, y)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = 1.0 - np.power(np.maximum(x, 1.0), -self.tail_index)
        return _out(np.where(x >= 1.0, value, 0.0))

    def quantile(self, u):
        return _out(np.power(1.0 - np.asarray(u, dtype=float), self.alpha))

    def sample(self, rng, size):
        return np.power(1.0 - rng.random(size), self.alpha)

    def expect(self, h, tail_rate=0.0):
        beta = self.tail_index
        # x = 1/u maps [1, inf) onto (0, 1]
        return integrate(lambda u: h(1.0 / u) * beta * u ** (beta - 1.0) if u > 0 else 0.0, 0.0, 1.0)

    def descriptor(self):
        return LawDescriptor(name="pareto", params=[self.alpha])


class BetaLaw(PopularityLaw):
    """Standard Beta(a, b) law on [0, 1]."""

    name = "beta"

    def __init__(self, a: float, b: float):
        if not (a > 0 and b > 0):
            raise InvalidArgumentError(f"Beta parameters must be positive, got {a}, {b}")
        self.a = float(a)
        self.b = float(b)
        self._log_norm = float(special.betaln(self.a, self.b))

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def support_upper(self) -> float:
        return 1.0

    def density(self, z: float) -> float:
        if z <= 0.0 or z >= 1.0:
            return 0.0
        return math.exp((self.a - 1.0) * math.log(z) + (self.b - 1.0) * math.log1p(-z) - self._log_norm)

    def _coefficient(self, k: int) -> float:
        return math.exp(special.betaln(self.a + k, self.b) - self._log_norm)

    def _tilted(self, s: float, k: int, upper: float) -> float:
        breaks = [v / s for v in (1.0, 10.0, 50.0)] if s > 0 else None
        return integrate(lambda z: z ** k * math.exp(-s * z) * self.density(z), 0.0, upper, points=breaks)

    def _moment(self, s: float, k: int) -> float:
        if s <= _BETA_SERIES_LIMIT:
            return self._coefficient(k) * float(special.hyp1f1(self.a + k, self.a + self.b + k, -s))
        return self._tilted(s, k, 1.0)

    def _partial(self, s: float, y: float, k: int) -> float:
        if y <= 0.0:
            return 0.0
        if y >= 1.0:
            return self._moment(s, k)
        if s == 0.0:
            return self._coefficient(k) * float(special.betainc(self.a + k, self.b, y))
        return self._tilted(s, k, y)

    def moment_laplace(self, s, k=0):
        return elementwise(lambda x: self._moment(x, k), s)

    def partial_moment(self, s, y, k=0):
        return elementwise(lambda a, b: self._partial(a, b, k), s, y)

    def cdf(self, x):
        return _out(special.betainc(self.a, self.b, np.clip(np.asarray(x, dtype=float), 0.0, 1.0)))

    def quantile(self, u):
        return _out(special.betaincinv(self.a, self.b, np.asarray(u, dtype=float)))

    def sample(self, rng, size):
        return rng.beta(self.a, self.b, size)

    def expect(self, h, tail_rate=0.0):
        return integrate(lambda z: h(z) * self.density(z), 0.0, 1.0)

    def descriptor(self):
        return LawDescriptor(name="beta", params=[self.a, self.b])


def _linear_density(c: float) -> Callable[[float], float]:
    return lambda x: 2.0 * (c - x) / (c * c)


def _ramp_density(c: float) -> Callable[[float], float]:
    return lambda x: 2.0 * x / (c * c)


def _uniform_density(c: float) -> Callable[[float], float]:
    return lambda x: 1.0 / c


DENSITY_PRESETS = {
    "linear": _linear_density,
    "ramp": _ramp_density,
    "uniform": _uniform_density,
}


class PushforwardLaw(PopularityLaw):
    """
    Law of q(cU) for U uniform on [0, 1] and a monotone probability density q on [0, c].

    This is the limit of density-increment profiles; its mean is 1/c.
    """

    name = "pushforward"

    def __init__(self, q: Callable[[float], float], c: float, preset: Optional[str] = None):
        if not c > 0:
            raise InvalidArgumentError(f"Support length must be positive, got {c}")
        self.q = q
        self.c = float(c)
        self.preset = preset

        grid = np.linspace(0.0, self.c, _MONOTONE_GRID)
        values = np.array([float(q(x)) for x in grid])
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidDensityError("q must be a finite nonnegative density on [0, c]")
        total = integrate(q, 0.0, self.c)
        if abs(total - 1.0) > _DENSITY_TOLERANCE:
            raise InvalidDensityError(f"q integrates to {total:.9f} on [0, {self.c}], expected 1")
        slack = 1e-12 * max(1.0, float(np.max(values)))
        steps = np.diff(values)
        if np.all(steps <= slack):
            self.decreasing = True
        elif np.all(steps >= -slack):
            self.decreasing = False
        else:
            raise InvalidDensityError("q must be monotone on [0, c]")
        self._q_vec = np.vectorize(lambda x: float(q(x)), otypes=[float])

    @property
    def ordering(self) -> Ordering:
        return Ordering.DECREASING if self.decreasing else Ordering.INCREASING

    @property
    def mean(self) -> float:
        return 1.0 / self.c

    @property
    def support_upper(self) -> float:
        return max(float(self.q(0.0)), float(self.q(self.c)))

    def _sublevel(self, y: float) -> Tuple[float, float]:
        """Interval of positions x in [0, c] with q(x) <= y."""
        q, c = self.q, self.c
        if self.decreasing:
            if q(c) > y:
                return c, c
            if q(0.0) <= y:
                return 0.0, c
            return invert_monotone(lambda x: 1.0 if q(x) <= y else 0.0, 0.5, 0.0, c), c
        if q(0.0) > y:
            return 0.0, 0.0
        if q(c) <= y:
            return 0.0, c
        return 0.0, invert_monotone(lambda x: 1.0 if q(x) > y else 0.0, 0.5, 0.0, c)

    def _moment(self, s: float, k: int) -> float:
        return integrate(lambda x: self.q(x) ** k * math.exp(-s * self.q(x)), 0.0, self.c) / self.c

    def _partial(self, s: float, y: float, k: int) -> float:
        lo, hi = self._sublevel(y)
        if hi <= lo:
            return 0.0
        return integrate(lambda x: self.q(x) ** k * math.exp(-s * self.q(x)), lo, hi) / self.c

    def moment_laplace(self, s, k=0):
        return elementwise(lambda x: self._moment(x, k), s)

    def partial_moment(self, s, y, k=0):
        return elementwise(lambda a, b: self._partial(a, b, k), s, y)

    def cdf(self, x):
        def length(y: float) -> float:
            lo, hi = self._sublevel(y)
            return (hi - lo) / self.c
        return elementwise(length, x)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        positions = self.c * (1.0 - u) if self.decreasing else self.c * u
        return _out(self._q_vec(positions))

    def sample(self, rng, size):
        return self._q_vec(self.c * rng.random(size))

    def expect(self, h, tail_rate=0.0):
        return integrate(lambda x: h(self.q(x)), 0.0, self.c) / self.c

    def descriptor(self):
        if self.preset is None:
            return None
        return LawDescriptor(name=self.preset, params=[self.c])


class SizeBiasedLaw(PopularityLaw):
    """Size-biased picking of a base law: P(dy) reweighted by y / mu."""

    name = "size_biased"

    def __init__(self, base: PopularityLaw):
        mu = base.mean
        if not (0 < mu < math.inf):
            raise DegenerateLawError(f"Size-biasing needs a finite positive mean, got {mu}")
        self.base = base
        self._mu = mu

    @property
    def mean(self) -> float:
        return float(self.base.moment_laplace(0.0, 2)) / self._mu

    @property
    def support_upper(self) -> float:
        return self.base.support_upper

    @cached_property
    def support_cap(self) -> float:
        if math.isfinite(self.support_upper):
            return float(self.support_upper)
        return float(self.quantile_scalar(1.0 - INVERSION["quantile_cap"]))

    def moment_laplace(self, s, k=0):
        return _out(np.asarray(self.base.moment_laplace(s, k + 1)) / self._mu)

    def partial_moment(self, s, y, k=0):
        return _out(np.asarray(self.base.partial_moment(s, y, k + 1)) / self._mu)

    def quantile_scalar(self, u: float) -> float:
        hi = expand_bracket(lambda x: self.cdf(x) < u, start=max(self.base.mean, 1e-3))
        return invert_monotone(lambda x: self.cdf(x), u, 0.0, hi)

    def quantile(self, u):
        return elementwise(self.quantile_scalar, u)

    def sample(self, rng, size):
        return np.asarray(self.quantile(rng.random(size)), dtype=float)

    def expect(self, h, tail_rate=0.0):
        return self.base.expect(lambda x: x * h(x) / self._mu, tail_rate)

    def label(self) -> str:
        return f"size_biased[{self.base.label()}]"


def size_biased(law: PopularityLaw) -> PopularityLaw:
    """Size-biased picking; the Laplace transform of the result is -phi'(s)/mu."""
    return SizeBiasedLaw(law)


def zipf_limiting_law(alpha: float) -> PopularityLaw:
    if alpha <= -1:
        raise OutOfRangeError(f"Zipf weights i^alpha have no limiting law for alpha={alpha} <= -1")
    if alpha > 0:
        return BetaLaw(1.0 / alpha, 1.0)
    if alpha == 0:
        return DiracLaw(1.0)
    return ParetoLaw(alpha)


def law_from_descriptor(descriptor: Union[LawDescriptor, str]) -> PopularityLaw:
    """Build the popularity law named by a descriptor; Zipf maps to its limiting law."""
    if isinstance(descriptor, str):
        descriptor = LawDescriptor.parse(descriptor)
    name, p = descriptor.name, descriptor.params
    if name == "dirac":
        return DiracLaw(p[0])
    if name == "bernoulli":
        return BernoulliLaw(p[0])
    if name == "exp":
        return GammaLaw(1.0, p[0] if p else 1.0)
    if name == "gamma":
        return GammaLaw(p[0], p[1] if len(p) > 1 else 1.0)
    if name == "geometric":
        return GeometricLaw(p[0])
    if name == "pareto":
        return ParetoLaw(p[0])
    if name == "beta":
        return BetaLaw(p[0], p[1])
    if name == "zipf":
        return zipf_limiting_law(p[0])
    if name in DENSITY_PRESETS:
        return PushforwardLaw(DENSITY_PRESETS[name](p[0]), p[0], preset=name)
    raise InvalidArgumentError(f"No law for family '{name}'")


@dataclass(frozen=True, eq=False)
class RequestProfile:
    """
    A finite list of n request weights, positioned by index (item i starts at position i).

    scale is Z_n, the factor making the empirical measure of Z_n w_i converge.
    """

    weights: np.ndarray
    ordering: Ordering = Ordering.EXCHANGEABLE
    scale: float = 1.0
    seed: Optional[int] = None
    family: Optional[LawDescriptor] = None
    kind: str = "explicit"
    limiting_law: Optional[PopularityLaw] = field(default=None, repr=False)

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 1 or weights.size < 1:
            raise InvalidArgumentError("weights must be a nonempty vector")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidArgumentError("weights must be finite and nonnegative")
        if not weights.sum() > 0:
            raise DegenerateLawError("Degenerate profile: weights sum to 0")
        ordering = Ordering.parse(self.ordering)
        if ordering is Ordering.DECREASING and np.any(np.diff(weights) > 0):
            raise InvalidArgumentError("decreasing profile needs nonincreasing weights")
        if ordering is Ordering.INCREASING and np.any(np.diff(weights) < 0):
            raise InvalidArgumentError("increasing profile needs nondecreasing weights")
        if not self.scale > 0:
            raise InvalidArgumentError(f"scale must be positive, got {self.scale}")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "ordering", ordering)

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def popularities(self) -> np.ndarray:
        p = self.weights / self.weights.sum()
        p.setflags(write=False)
        return p

    def to_descriptor(self, include_weights: bool = True) -> ProfileDescriptor:
        return ProfileDescriptor(
            n=self.n,
            ordering=self.ordering.value,
            seed=self.seed,
            scale=self.scale,
            kind=self.kind,
            family=self.family,
            weights_hex=[float(w).hex() for w in self.weights] if include_weights else None,
        )

    @classmethod
    def from_descriptor(cls, descriptor: ProfileDescriptor) -> "RequestProfile":
        if descriptor.weights_hex is None:
            return profile_from_family(descriptor.family, descriptor.n, descriptor.ordering, descriptor.seed)
        limiting = law_from_descriptor(descriptor.family) if descriptor.family else None
        return cls(
            weights=np.array([float.fromhex(h) for h in descriptor.weights_hex]),
            ordering=Ordering.parse(descriptor.ordering),
            scale=descriptor.scale,
            seed=descriptor.seed,
            family=descriptor.family,
            kind=descriptor.kind,
            limiting_law=limiting,
        )


def _arrange(weights: np.ndarray, ordering: Ordering) -> np.ndarray:
    if ordering is Ordering.DECREASING:
        return -np.sort(-weights, axis=-1)
    if ordering is Ordering.INCREASING:
        return np.sort(weights, axis=-1)
    return weights


def sample_weight_rows(
    law: PopularityLaw,
    n: int,
    ordering: Ordering,
    rng: np.random.Generator,
    rows: int,
) -> np.ndarray:
    """Draw `rows` independent weight vectors of length n, redrawing all-zero rows."""
    if law.zero_atom >= 1.0:
        raise DegenerateLawError(f"{law.label()} puts all its mass at 0")
    weights = np.asarray(law.sample(rng, (rows, n)), dtype=float)
    empty = np.flatnonzero(weights.sum(axis=1) <= 0)
    while empty.size:
        zero_weight_resamples.inc(empty.size)
        logger.debug(f"Redrawing {empty.size} all-zero weight vectors")
        weights[empty] = np.asarray(law.sample(rng, (empty.size, n)), dtype=float)
        empty = empty[weights[empty].sum(axis=1) <= 0]
    return _arrange(weights, ordering)


def make_iid_profile(law: PopularityLaw, n: int, ordering: Union[Ordering, str], seed: int) -> RequestProfile:
    """n i.i.d. weights from law, sorted per ordering; exchangeable keeps sample order."""
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    ordering = Ordering.parse(ordering)
    rng = np.random.default_rng(seed)
    weights = sample_weight_rows(law, n, ordering, rng, 1)[0]
    return RequestProfile(
        weights=weights,
        ordering=ordering,
        scale=1.0,
        seed=seed,
        family=law.descriptor(),
        kind="iid",
        limiting_law=law,
    )


def make_zipf_profile(alpha: float, n: int) -> RequestProfile:
    """Weights i^alpha, i = 1..n, with Z_n = n^(-alpha)."""
    if alpha <= -1:
        raise OutOfRangeError(f"Zipf alpha must exceed -1, got {alpha}")
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    weights = np.arange(1, n + 1, dtype=float) ** alpha
    if alpha < 0:
        ordering = Ordering.DECREASING
    elif alpha > 0:
        ordering = Ordering.INCREASING
    else:
        ordering = Ordering.EXCHANGEABLE
    return RequestProfile(
        weights=weights,
        ordering=ordering,
        scale=float(n) ** (-alpha),
        family=LawDescriptor(name="zipf", params=[alpha]),
        kind="zipf",
        limiting_law=zipf_limiting_law(alpha),
    )


def make_density_increment_profile(
    q: Callable[[float], float],
    c: float,
    n: int,
    preset: Optional[str] = None,
) -> RequestProfile:
    """Weights Q(ci/n) - Q(c(i-1)/n) for the distribution function Q of the density q on [0, c]."""
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    law = PushforwardLaw(q, c, preset=preset)
    edges = c * np.arange(n + 1) / n
    weights = np.array([integrate(q, edges[i], edges[i + 1]) for i in range(n)])
    weights = np.maximum(weights, 0.0)
    # quadrature noise must not break the monotone tag
    if law.decreasing:
        weights = np.minimum.accumulate(weights)
    else:
        weights = np.maximum.accumulate(weights)
    return RequestProfile(
        weights=weights,
        ordering=law.ordering,
        scale=n / c,
        family=law.descriptor(),
        kind="density",
        limiting_law=law,
    )


def profile_from_family(
    family: LawDescriptor,
    n: int,
    ordering: Union[Ordering, str],
    seed: Optional[int],
) -> RequestProfile:
    """Regenerate a profile from its family descriptor (seeded for i.i.d. families)."""
    if family.kind == "zipf":
        return make_zipf_profile(family.params[0], n)
    if family.kind == "density":
        c = family.params[0]
        return make_density_increment_profile(DENSITY_PRESETS[family.name](c), c, n, preset=family.name)
    return make_iid_profile(law_from_descriptor(family), n, ordering, seed if seed is not None else 0)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    locations: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        locations = np.asarray(self.locations, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        if locations.shape != masses.shape or locations.ndim != 1:
            raise InvalidArgumentError("locations and masses must be vectors of equal length")
        if np.any(masses < 0) or abs(masses.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError(f"masses must be nonnegative and sum to 1, got {masses.sum()}")
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Tuple[float, float]]) -> "DiscreteMeasure":
        pairs = list(atoms)
        return cls(np.array([a for a, _ in pairs]), np.array([m for _, m in pairs]))

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    @property
    def mean(self) -> float:
        return float(np.dot(self.locations, self.masses))


def empirical_measure(profile: RequestProfile, mu: float) -> DiscreteMeasure:
    """(1/n) sum_i delta at n mu p_i."""
    if not mu > 0:
        raise InvalidArgumentError(f"mu must be positive, got {mu}")
    n = profile.n
    return DiscreteMeasure(n * mu * profile.popularities, np.full(n, 1.0 / n))


def wasserstein1(a: DiscreteMeasure, b: Union[DiscreteMeasure, PopularityLaw], points: Optional[int] = None) -> float:
    """W1 distance on the line; a continuous law is discretized at `points` midpoint quantiles."""
    if not math.isfinite(a.mean):
        raise InvalidArgumentError("First measure has no finite first moment")
    if isinstance(b, DiscreteMeasure):
        if not math.isfinite(b.mean):
            raise InvalidArgumentError("Second measure has no finite first moment")
        return float(wasserstein_distance(a.locations, b.locations, a.masses, b.masses))
    if not math.isfinite(b.mean):
        raise InvalidArgumentError(f"{b.label()} has no finite first moment")
    points = points or STATS["w1_quantile_points"]
    levels = (np.arange(points) + 0.5) / points
    support = np.asarray(b.quantile(levels), dtype=float)
    return float(wasserstein_distance(a.locations, support, a.masses))
