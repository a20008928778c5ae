"""Empirical-distribution checks of sample batches against analytic and exact laws."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.stats

from mtfcost.config import STATS
from mtfcost.core.analytic import SearchCostLaw
from mtfcost.core.errors import InvalidArgumentError
from mtfcost.core.exact_oracle import DiscretePmf
from mtfcost.core.simulator import SampleBatch
from mtfcost.models import ValidationReport

logger = logging.getLogger(__name__)

Values = Union[SampleBatch, Sequence[float], np.ndarray]

# analytic CDFs are compared with this slack
_ANALYTIC_SLACK = 1e-8


def _values(data: Values) -> np.ndarray:
    values = data.values if isinstance(data, SampleBatch) else np.asarray(data, dtype=float).ravel()
    if values.size < 1:
        raise InvalidArgumentError("at least one value is needed")
    return values


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    sorted_values: np.ndarray
    count: int

    @classmethod
    def from_values(cls, data: Values) -> "EmpiricalCdf":
        values = np.sort(_values(data))
        return cls(values, int(values.size))

    def evaluate(self, x):
        """Fraction of values <= x."""
        result = np.searchsorted(self.sorted_values, np.asarray(x, dtype=float), side="right") / self.count
        return float(result) if np.ndim(result) == 0 else result

    __call__ = evaluate


def ks_distance(data: Values, cdf: Callable) -> float:
    """Two-sided sup distance between the empirical CDF and cdf, taken at the jumps."""
    return float(scipy.stats.kstest(_values(data), cdf).statistic)


def ks_two_sample(a: Values, b: Values) -> Tuple[float, float]:
    result = scipy.stats.ks_2samp(_values(a), _values(b))
    return float(result.statistic), float(result.pvalue)


def tv_discrete(a: DiscretePmf, b: DiscretePmf) -> float:
    """Half the L1 distance; the shorter pmf is zero-padded."""
    size = max(len(a), len(b))
    return 0.5 * float(np.abs(a.padded(size) - b.padded(size)).sum())


def tv_binned(data: Values, cdf: Callable, bins: Optional[int] = None, lattice: Optional[int] = None) -> float:
    """
    TV between a batch on [0, 1] and a continuous law, over equal-width bins.

    Values on the grid k/lattice are binned on edges snapped to that grid, each atom counted
    at the midpoint of the cell ((k-1)/lattice, k/lattice] it stands for. Normalized sample
    batches use their own n as the lattice. Still biased upward by the within-bin discrepancy
    the binning cannot see.
    """
    bins = bins or STATS["tv_bins"]
    values = _values(data)
    if lattice is None and isinstance(data, SampleBatch) and data.normalized:
        lattice = data.n
    edges = np.linspace(0.0, 1.0, bins + 1)
    if lattice:
        edges = np.unique(np.round(edges * lattice)) / lattice
        values = values - 0.5 / lattice
    counts, _ = np.histogram(values, bins=edges)
    expected = np.diff(np.asarray(cdf(edges), dtype=float))
    return 0.5 * float(np.abs(counts / values.size - expected).sum())


def tv_binned_threshold(m: int, bins: Optional[int] = None) -> float:
    """Fixed TV threshold plus sqrt(bins / m) for the sampling noise of a correct batch."""
    bins = bins or STATS["tv_bins"]
    if m < 1:
        raise InvalidArgumentError(f"m must be positive, got {m}")
    return STATS["tv_threshold"] + math.sqrt(bins / m)


def dkw_band(m: int, confidence: Optional[float] = None) -> float:
    """sqrt(ln(2 / (1 - confidence)) / (2 m))"""
    confidence = STATS["dkw_confidence"] if confidence is None else confidence
    if m < 1:
        raise InvalidArgumentError(f"m must be positive, got {m}")
    if not 0 < confidence <= 1 - 1e-12:
        raise InvalidArgumentError(f"confidence must lie in (0, 1 - 1e-12], got {confidence}")
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * m))


def empirical_pmf(batch: SampleBatch, n: Optional[int] = None) -> DiscretePmf:
    """Pmf over 0-based positions from the raw 1-based costs of a batch."""
    if batch.raw_costs is None:
        raise InvalidArgumentError("the batch carries no raw costs")
    n = n or batch.n
    costs = np.asarray(batch.raw_costs, dtype=np.int64)
    if np.any(costs < 1) or np.any(costs > n):
        raise InvalidArgumentError(f"costs must lie in 1..{n}")
    return DiscretePmf(np.bincount(costs - 1, minlength=n) / costs.size)


def _cdf_and_slack(side: Union[SampleBatch, SearchCostLaw], grid: np.ndarray, confidence: float) -> Tuple[np.ndarray, float]:
    if isinstance(side, SearchCostLaw):
        return np.asarray(side.cdf(grid), dtype=float), 0.0
    ecdf = EmpiricalCdf.from_values(side)
    return np.asarray(ecdf(grid), dtype=float), dkw_band(ecdf.count, confidence)


def stochastic_order_check(
    lower: Union[SampleBatch, SearchCostLaw],
    upper: Union[SampleBatch, SearchCostLaw],
    grid: int = 200,
    confidence: Optional[float] = None,
) -> ValidationReport:
    """
    Check that lower is stochastically smaller than upper: F_lower >= F_upper on a uniform grid.

    Batches contribute their DKW band to the slack; analytic laws contribute 1e-8.
    """
    if grid < 2:
        raise InvalidArgumentError(f"grid must hold at least 2 points, got {grid}")
    confidence = STATS["dkw_confidence"] if confidence is None else confidence
    xs = np.linspace(0.0, 1.0, grid)
    f_lower, slack_lower = _cdf_and_slack(lower, xs, confidence)
    f_upper, slack_upper = _cdf_and_slack(upper, xs, confidence)
    gap = f_upper - f_lower
    worst = int(np.argmax(gap))
    violation = max(0.0, float(gap[worst]))
    threshold = slack_lower + slack_upper + _ANALYTIC_SLACK
    passed = violation <= threshold
    if not passed:
        logger.warning(f"Stochastic order violated by {violation:.3e} at x={xs[worst]:.4f}")
    return ValidationReport(
        statistic="stochastic_order_violation",
        value=violation,
        threshold=threshold,
        passed=passed,
        details={"grid": grid, "worst_x": float(xs[worst]), "confidence": confidence},
    )


def ks_report(batch: SampleBatch, law: SearchCostLaw, threshold: Optional[float] = None) -> ValidationReport:
    """KS distance of a normalized batch to a limiting law, against a fixed threshold."""
    threshold = STATS["ks_threshold"] if threshold is None else threshold
    value = ks_distance(batch, law.tabulated_cdf())
    return ValidationReport(
        statistic="ks",
        value=value,
        threshold=threshold,
        passed=value <= threshold,
        details={"m": batch.count, "dkw_band": dkw_band(batch.count)},
    )
