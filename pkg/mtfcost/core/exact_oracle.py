"""
Exact Finite-n Search-Cost Laws

The cost of the next request splits on whether the requested item was
already requested during [0, t) (equilibrium part) or not (out-of-equilibrium
part). In both cases the number J of items in front of it is a sum of
independent Bernoulli variables, so every law here is a mixture of
Poisson-binomial pmfs. Positions are counted from 0 (J); the 1-based search
cost is J + 1.

All times are on the unit-total-rate clock: item i is requested at rate p_i.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad_vec

from mtfcost.config import EXACT
from mtfcost.core.errors import InvalidArgumentError, SizeError, ToleranceNotMetError
from mtfcost.core.numerics import QuadratureSpec, integrate
from mtfcost.core.popularity import RequestProfile

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscretePmf:
    """Probabilities indexed by position 0..len-1; partial laws carry their own sub-total."""

    probabilities: np.ndarray

    def __post_init__(self):
        probabilities = np.array(self.probabilities, dtype=float)
        if probabilities.ndim != 1:
            raise InvalidArgumentError("a pmf must be a vector")
        if np.any(probabilities < -1e-12) or not np.all(np.isfinite(probabilities)):
            raise InvalidArgumentError("pmf entries must be finite and nonnegative")
        probabilities = np.maximum(probabilities, 0.0)
        probabilities.setflags(write=False)
        object.__setattr__(self, "probabilities", probabilities)

    def __len__(self) -> int:
        return int(self.probabilities.size)

    def __getitem__(self, k: int) -> float:
        if 0 <= k < len(self):
            return float(self.probabilities[k])
        return 0.0

    def __add__(self, other: "DiscretePmf") -> "DiscretePmf":
        size = max(len(self), len(other))
        return DiscretePmf(self.padded(size) + other.padded(size))

    @property
    def total(self) -> float:
        return float(math.fsum(self.probabilities))

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(max(size, len(self)))
        out[: len(self)] = self.probabilities
        return out

    def normalized(self) -> "DiscretePmf":
        return DiscretePmf(self.probabilities / self.total)

    def mean(self) -> float:
        """Mean position (0-based) of a full law."""
        return float(np.dot(np.arange(len(self)), self.probabilities) / self.total)


def _validate_probabilities(qs: Sequence[float]) -> np.ndarray:
    qs = np.asarray(qs, dtype=float).ravel()
    if np.any(~np.isfinite(qs)) or np.any(qs < 0.0) or np.any(qs > 1.0):
        raise InvalidArgumentError("Bernoulli parameters must lie in [0, 1]")
    return qs


def _convolve_bernoulli(pmf: np.ndarray, q: float) -> np.ndarray:
    out = np.empty(pmf.size + 1)
    out[:-1] = pmf * (1.0 - q)
    out[-1] = 0.0
    out[1:] += pmf * q
    return out


def poisson_binomial(qs: Sequence[float]) -> DiscretePmf:
    """
    Pmf of a sum of independent Bernoulli(q_j) variables by iterative convolution.

    >>> poisson_binomial([0.5, 0.5]).probabilities.tolist()
    [0.25, 0.5, 0.25]
    """
    qs = _validate_probabilities(qs)
    pmf = np.ones(1)
    for q in qs:
        pmf = _convolve_bernoulli(pmf, q)
    return DiscretePmf(pmf)


def _leave_one_out(qs: np.ndarray) -> np.ndarray:
    """Row i is the Poisson-binomial pmf of all parameters except q_i (length n)."""
    n = qs.size
    prefix: List[np.ndarray] = [np.ones(1)]
    for q in qs[:-1]:
        prefix.append(_convolve_bernoulli(prefix[-1], q))
    suffix: List[Optional[np.ndarray]] = [None] * n
    suffix[n - 1] = np.ones(1)
    for i in range(n - 2, -1, -1):
        suffix[i] = _convolve_bernoulli(suffix[i + 1], qs[i + 1])
    rows = np.empty((n, n))
    for i in range(n):
        rows[i] = np.convolve(prefix[i], suffix[i])
    return rows


def _check_size(profile: RequestProfile, max_n: Optional[int]) -> None:
    cap = EXACT["max_n"] if max_n is None else max_n
    if profile.n > cap:
        raise SizeError(f"Exact laws are limited to n <= {cap} (got n={profile.n}); use the Monte-Carlo samplers")


def _check_time(t: float) -> None:
    if math.isnan(t) or t < 0:
        raise InvalidArgumentError(f"t must be nonnegative, got {t}")


def _panel_points(p: np.ndarray, upper: float) -> List[float]:
    """u where exp(-p_max u) crosses the configured panel levels."""
    p_max = float(p.max())
    return [-math.log(level) / p_max for level in EXACT["panel_levels"] if -math.log(level) / p_max < upper]


def _out_parameters(p: np.ndarray, i: int, t: float) -> np.ndarray:
    """Item j is in front of unrequested item i if j starts in front (j < i) or was requested during [0, t)."""
    qs = -np.expm1(-p * t)
    qs[:i] = 1.0
    return np.delete(qs, i)


def exact_marginal_e(profile: RequestProfile, i: int, t: float, k: int, spec: Optional[QuadratureSpec] = None) -> float:
    """P(item i has k items in front and was requested during [0, t)) for the next request of item i."""
    _check_time(t)
    n = profile.n
    if not 0 <= i < n:
        raise InvalidArgumentError(f"item index {i} outside 0..{n - 1}")
    if not 0 <= k < n:
        return 0.0
    p = np.asarray(profile.popularities, dtype=float)
    if t == 0.0 or p[i] == 0.0:
        return 0.0
    others = np.delete(p, i)

    def integrand(u: float) -> float:
        pmf = poisson_binomial(-np.expm1(-others * u))
        return p[i] * math.exp(-p[i] * u) * pmf[k]

    return integrate(integrand, 0.0, t, spec, points=_panel_points(p, t))


def exact_marginal_o(profile: RequestProfile, i: int, t: float, k: int) -> float:
    """P(item i has k items in front and was not requested during [0, t))."""
    _check_time(t)
    n = profile.n
    if not 0 <= i < n:
        raise InvalidArgumentError(f"item index {i} outside 0..{n - 1}")
    if not 0 <= k < n:
        return 0.0
    p = np.asarray(profile.popularities, dtype=float)
    pmf = poisson_binomial(_out_parameters(p, i, t))
    return pmf[k] * math.exp(-p[i] * t)


def _equilibrium_pmf(p: np.ndarray, upper: float, spec: QuadratureSpec) -> np.ndarray:
    def integrand(u: float) -> np.ndarray:
        rows = _leave_one_out(-np.expm1(-p * u))
        return (p * p * np.exp(-p * u)) @ rows

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, error = quad_vec(
            integrand,
            0.0,
            upper,
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            norm="max",
            points=_panel_points(p, upper) or None,
            limit=spec.subinterval_limit * 100,
        )
    tolerance = spec.abs_tol + spec.rel_tol * float(np.max(np.abs(value)))
    if error > 100 * tolerance:
        raise ToleranceNotMetError(
            f"Equilibrium pmf quadrature on [0, {upper}] reached error {error:.3e}",
            best_estimate=float(np.sum(value)),
            error_estimate=float(error),
        )
    return np.asarray(value, dtype=float)


def exact_search_cost_law(
    profile: RequestProfile,
    t: float,
    spec: Optional[QuadratureSpec] = None,
    max_n: Optional[int] = None,
) -> Tuple[DiscretePmf, DiscretePmf]:
    """
    Partial pmfs (pmf_e, pmf_o) of the 0-based search cost of the first request after t.

    pmf_e collects the requests of items already requested during [0, t),
    pmf_o the others; their masses add up to 1.
    """
    _check_size(profile, max_n)
    _check_time(t)
    if math.isinf(t):
        raise InvalidArgumentError("Use exact_stationary_law for t = inf")
    spec = spec or QuadratureSpec()
    p = np.asarray(profile.popularities, dtype=float)
    n = profile.n

    if t == 0.0:
        pmf_e = np.zeros(n)
    else:
        pmf_e = _equilibrium_pmf(p, t, spec)

    pmf_o = np.zeros(n)
    for i in range(n):
        if p[i] == 0.0:
            continue
        pmf_o += p[i] * math.exp(-p[i] * t) * poisson_binomial(_out_parameters(p, i, t)).probabilities

    logger.debug(f"Exact law n={n} t={t}: equilibrium mass {pmf_e.sum():.12f}, out mass {pmf_o.sum():.12f}")
    return DiscretePmf(pmf_e), DiscretePmf(pmf_o)


def exact_stationary_law(
    profile: RequestProfile,
    spec: Optional[QuadratureSpec] = None,
    max_n: Optional[int] = None,
) -> DiscretePmf:
    """
    Stationary pmf of the 0-based search cost.

    The time integral is truncated at T with exp(-p_min T) equal to the
    configured truncation level, p_min being the smallest positive popularity.
    Zero-rate items are never requested and never move in front of a
    requested item, so they carry no mass.
    """
    _check_size(profile, max_n)
    spec = spec or QuadratureSpec()
    p = np.asarray(profile.popularities, dtype=float)
    positive = p[p > 0]
    if positive.size < p.size:
        logger.warning(f"{p.size - positive.size} zero-rate items sit permanently behind all requested items")
    horizon = -math.log(EXACT["truncation"]) / float(positive.min())
    pmf = _equilibrium_pmf(p, horizon, spec)
    return DiscretePmf(pmf)


def exact_scaled_laplace(profile: RequestProfile, t: float, lam: float) -> Tuple[float, float]:
    """(A_n, B_n) = (E[exp(-lam J/n); requested], E[exp(-lam J/n); not requested]) at unit-rate time t."""
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be nonnegative, got {lam}")
    pmf_e, pmf_o = exact_search_cost_law(profile, t)
    weights = np.exp(-lam * np.arange(profile.n) / profile.n)
    return float(np.dot(weights, pmf_e.probabilities)), float(np.dot(weights, pmf_o.probabilities))


def initial_position_law(profile: RequestProfile) -> DiscretePmf:
    """The t = 0 law: item i sits at position i and is requested with probability p_i."""
    return DiscretePmf(np.array(profile.popularities, dtype=float))


def requested_mass(profile: RequestProfile, t: float) -> float:
    """P(the next requested item was already requested during [0, t)) = sum_i p_i (1 - exp(-p_i t))."""
    _check_time(t)
    p = np.asarray(profile.popularities, dtype=float)
    if math.isinf(t):
        return float(p[p > 0].sum())
    return float(math.fsum(p * -np.expm1(-p * t)))
