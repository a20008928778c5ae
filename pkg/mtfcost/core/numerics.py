"""
Numerical Kernels

Adaptive quadrature, monotone inversion and the upper incomplete gamma
function. Everything here is a pure function of its arguments.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from prometheus_client import Counter
from scipy import special
from scipy.integrate import IntegrationWarning, quad

from mtfcost.config import QUADRATURE, INVERSION
from mtfcost.core.errors import (
    EvaluationError,
    InvalidArgumentError,
    OutOfRangeError,
    ToleranceNotMetError,
)

logger = logging.getLogger(__name__)

quadrature_failures = Counter('mtf_quadrature_failures_total', 'Quadratures that missed their tolerance')

# Lentz continued fraction constants
_CF_TINY = 1e-300
_CF_EPS = 1e-16
_CF_MAX_ITER = 1000


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = field(default_factory=lambda: QUADRATURE["abs_tol"])
    rel_tol: float = field(default_factory=lambda: QUADRATURE["rel_tol"])
    max_depth: int = field(default_factory=lambda: QUADRATURE["max_depth"])

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise InvalidArgumentError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.rel_tol < 0:
            raise InvalidArgumentError(f"rel_tol must be nonnegative, got {self.rel_tol}")
        if self.max_depth < 1:
            raise InvalidArgumentError(f"max_depth must be at least 1, got {self.max_depth}")

    @property
    def subinterval_limit(self) -> int:
        """Number of Gauss-Kronrod panels the adaptive scheme may split into."""
        return 4 * self.max_depth

    def loosened(self, factor: float) -> "QuadratureSpec":
        return QuadratureSpec(self.abs_tol * factor, self.rel_tol * factor, self.max_depth)


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    spec: Optional[QuadratureSpec] = None,
    points: Optional[Sequence[float]] = None,
) -> float:
    """
    Adaptive Gauss-Kronrod integral of f over [a, b].

    Parameters
    ----------
    f : callable
        Bounded, piecewise-continuous integrand.
    a, b : float
        Finite limits with a <= b.
    spec : QuadratureSpec, optional
        Error targets; defaults come from QUADRATURE settings.
    points : sequence of float, optional
        Known breakpoints of f. Points outside (a, b) are ignored.

    Returns
    -------
    float
        Integral estimate within abs_tol + rel_tol * |integral|.
    """
    spec = spec or QuadratureSpec()
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidArgumentError(f"integration limits must be finite, got [{a}, {b}]")
    if a > b:
        raise InvalidArgumentError(f"lower limit {a} exceeds upper limit {b}")
    if a == b:
        return 0.0

    def guarded(x: float) -> float:
        value = float(f(x))
        if not math.isfinite(value):
            raise EvaluationError(f"Integrand returned {value} at x={x}")
        return value

    breakpoints = sorted({float(p) for p in points if a < p < b}) if points else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        result = quad(
            guarded,
            a,
            b,
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            limit=spec.subinterval_limit,
            points=breakpoints,
            full_output=1,
        )

    value, error = float(result[0]), float(result[1])
    if len(result) > 3 and error > spec.abs_tol + spec.rel_tol * abs(value):
        quadrature_failures.inc()
        logger.debug(f"Quadrature on [{a}, {b}] stopped at error {error:.3e}: {result[3]}")
        raise ToleranceNotMetError(
            f"Quadrature on [{a}, {b}] reached error {error:.3e} above tolerance",
            best_estimate=value,
            error_estimate=error,
        )
    return value


def integrate_halfline(
    f: Callable[[float], float],
    spec: Optional[QuadratureSpec] = None,
    tail_rate: float = 1.0,
    start: float = 0.0,
) -> float:
    """Integral of f over [start, inf) through the substitution x = start - ln(1 - u) / tail_rate."""
    if not tail_rate > 0:
        raise InvalidArgumentError(f"tail_rate must be positive, got {tail_rate}")

    def mapped(u: float) -> float:
        remaining = 1.0 - u
        if remaining <= 0.0:
            return 0.0
        x = start - math.log(remaining) / tail_rate
        if not math.isfinite(x):
            return 0.0
        return f(x) / (tail_rate * remaining)

    return integrate(mapped, 0.0, 1.0, spec)


def invert_monotone(
    g: Callable[[float], float],
    y: float,
    lo: float,
    hi: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> float:
    """
    Generalized inverse inf{x in [lo, hi] : g(x) >= y} of a nondecreasing g, by bisection.

    Flat regions resolve to their left endpoint and jumps to the jump location.
    """
    if lo > hi:
        raise InvalidArgumentError(f"Empty bracket [{lo}, {hi}]")
    tol = INVERSION["tol"] if tol is None else tol
    max_iter = INVERSION["max_iter"] if max_iter is None else max_iter

    if g(lo) >= y:
        return lo
    g_hi = g(hi)
    if g_hi < y:
        raise OutOfRangeError(f"Target {y} exceeds g(hi)={g_hi} on [{lo}, {hi}]")

    left, right = lo, hi
    for _ in range(max_iter):
        if right - left <= tol:
            break
        mid = 0.5 * (left + right)
        if mid <= left or mid >= right:
            break
        if g(mid) >= y:
            right = mid
        else:
            left = mid
    return right


def invert_monotone_vec(
    g: Callable[[np.ndarray], np.ndarray],
    ys: np.ndarray,
    lo: float,
    hi: float,
    iterations: int = 80,
) -> np.ndarray:
    """
    Vectorized generalized inverse for array-valued nondecreasing g.

    Targets at or below g(lo) map to lo; targets above g(hi) are capped at hi.
    """
    ys = np.asarray(ys, dtype=float)
    left = np.full(ys.shape, float(lo))
    right = np.full(ys.shape, float(hi))
    at_lo = np.asarray(g(left)) >= ys
    for _ in range(iterations):
        mid = 0.5 * (left + right)
        above = np.asarray(g(mid)) >= ys
        right = np.where(above, mid, right)
        left = np.where(above, left, mid)
    return np.where(at_lo, float(lo), right)


def expand_bracket(
    still_inside: Callable[[float], bool],
    start: float = 1.0,
    factor: float = 2.0,
    max_steps: int = 1100,
) -> float:
    """Grow x geometrically from start until still_inside(x) turns false; returns that x."""
    x = start
    for _ in range(max_steps):
        if not still_inside(x):
            return x
        x *= factor
    raise OutOfRangeError(f"No bracket found after {max_steps} expansions from {start}")


def upper_incomplete_gamma(z: float, y: float) -> float:
    """
    Upper incomplete gamma function Gamma(z, y) = int_y^inf x^(z-1) e^(-x) dx.

    Positive z goes through the regularized scipy function. Nonpositive z is
    accepted for y > 0: integer orders through generalized exponential
    integrals, other orders through a continued fraction (y >= 1) or a
    downward recurrence from the order in (0, 1) (y < 1).
    """
    if not (math.isfinite(z) and math.isfinite(y)):
        raise InvalidArgumentError(f"Gamma({z}, {y}) needs finite arguments")
    if y < 0:
        raise InvalidArgumentError(f"y must be nonnegative, got {y}")
    if z > 0:
        if y == 0:
            return float(special.gamma(z))
        return float(special.gammaincc(z, y) * special.gamma(z))
    if y == 0:
        raise InvalidArgumentError(f"Gamma({z}, 0) diverges for z <= 0")

    if float(z).is_integer():
        order = int(round(1 - z))
        if order == 1:
            return float(special.exp1(y))
        return float(y ** z * special.expn(order, y))

    if y >= 1.0:
        return _incomplete_gamma_continued_fraction(z, y)

    steps = int(math.ceil(-z))
    a = z + steps
    value = float(special.gammaincc(a, y) * special.gamma(a))
    log_y = math.log(y)
    for _ in range(steps):
        a -= 1.0
        value = (value - math.exp(a * log_y - y)) / a
    return value


def _incomplete_gamma_continued_fraction(z: float, y: float) -> float:
    b = y + 1.0 - z
    c = 1.0 / _CF_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER + 1):
        an = -i * (i - z)
        b += 2.0
        d = an * d + b
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = b + an / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return math.exp(z * math.log(y) - y) * h
    raise ToleranceNotMetError(
        f"Continued fraction for Gamma({z}, {y}) did not converge",
        best_estimate=math.exp(z * math.log(y) - y) * h,
    )
