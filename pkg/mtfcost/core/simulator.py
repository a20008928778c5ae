"""
Monte-Carlo Search-Cost Samplers

Three samplers of the 1-based cost of the first request after time t
(unit-total-rate clock): an explicit move-to-front list driven by a Poisson
request stream, a fast sampler built on last-request ages, and a stationary
sampler. Batch helpers draw many samples in fixed-size chunks whose streams
are keyed by (seed, chunk_index).
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from prometheus_client import Counter

from mtfcost.core.errors import DegenerateLawError, InvalidArgumentError
from mtfcost.core.popularity import (
    Ordering,
    PopularityLaw,
    RequestProfile,
    make_iid_profile,
    sample_weight_rows,
)
from mtfcost.models import BatchHeader, ProfileDescriptor
from mtfcost.tasks import run_chunks

logger = logging.getLogger(__name__)

samples_total = Counter('mtf_samples_total', 'Search-cost samples drawn', ['sampler'])

SeedLike = Union[int, np.random.Generator]
SAMPLERS = ("fast", "event", "stationary")


def _generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Samples of the search cost; values are costs/n in [0, 1] when normalized."""

    values: np.ndarray
    raw_costs: Optional[np.ndarray] = None
    normalized: bool = True
    n: Optional[int] = None
    t_scaled: Optional[float] = None
    t_unit_rate: Optional[float] = None
    t_original: Optional[float] = None
    seed: Optional[int] = None
    sampler: str = "fast"
    ordering: str = "exchangeable"
    family: Optional[str] = None
    quenched: bool = False
    profile_descriptor: Optional[ProfileDescriptor] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise InvalidArgumentError("a batch needs at least one value")
        if self.normalized and (np.any(values < 0.0) or np.any(values > 1.0)):
            raise InvalidArgumentError("normalized values must lie in [0, 1]")
        if self.raw_costs is not None and len(self.raw_costs) != values.size:
            raise InvalidArgumentError("raw_costs and values differ in length")
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return int(self.values.size)

    def header(self) -> BatchHeader:
        return BatchHeader(
            n=self.n or 0,
            ordering=self.ordering,
            t=None if self.t_scaled is None or math.isinf(self.t_scaled) else self.t_scaled,
            t_unit_rate=None if self.t_unit_rate is None or math.isinf(self.t_unit_rate) else self.t_unit_rate,
            t_original=None if self.t_original is None or math.isinf(self.t_original) else self.t_original,
            seed=self.seed if self.seed is not None else 0,
            m=self.count,
            family=self.family or "explicit",
            sampler=self.sampler,
            quenched=self.quenched,
        )

    def to_frame(self) -> pd.DataFrame:
        raw = self.raw_costs if self.raw_costs is not None else np.full(self.count, np.nan)
        return pd.DataFrame({
            "index": np.arange(self.count),
            "raw_cost": raw,
            "normalized_cost": self.values,
        })


def _pick(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF pick of an item index from cumulative popularities."""
    n = cdf.shape[-1]
    index = (cdf <= (u * cdf[..., -1])[..., None]).sum(axis=-1)
    return np.minimum(index, n - 1)


def simulate_event_driven(profile: RequestProfile, t: float, seed: SeedLike) -> int:
    """
    Run move-to-front on an explicit list until the first request after t.

    Requests arrive as a unit-rate Poisson stream with item marks drawn from
    the popularities; the list starts in index order. Returns the 1-based
    position of the first item requested after t.
    """
    if math.isnan(t) or t < 0 or math.isinf(t):
        raise InvalidArgumentError(f"t must be finite and nonnegative, got {t}")
    rng = _generator(seed)
    cdf = np.cumsum(profile.popularities)
    order = list(range(profile.n))
    position = list(range(profile.n))
    clock = 0.0
    while True:
        clock += rng.exponential(1.0)
        item = int(_pick(cdf, np.array(rng.random())))
        where = position[item]
        if clock >= t:
            return where + 1
        if where:
            # shift the prefix back by one and put the item in front
            for slot in range(where, 0, -1):
                moved = order[slot - 1]
                order[slot] = moved
                position[moved] = slot
            order[0] = item
            position[item] = 0


def _fast_costs(p: np.ndarray, t: float, rng: np.random.Generator) -> np.ndarray:
    """
    Vectorized last-request-age sampler; one row of popularities per sample.

    Item j was requested during [0, t) with probability 1 - exp(-p_j t) and then
    its age is Exp(p_j) conditioned below t. Requested items sit in front in
    age order; the others keep their initial order behind them. Ties in age are
    broken by item index.
    """
    rows, n = p.shape
    asked = -np.expm1(-p * t)
    requested = rng.random((rows, n)) < asked
    u = rng.random((rows, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        ages = np.where(requested, -np.log1p(-u * asked) / p, np.inf)
    target = _pick(np.cumsum(p, axis=1), rng.random(rows))
    row = np.arange(rows)
    target_age = ages[row, target][:, None]
    index = np.arange(n)[None, :]
    before_target = index < target[:, None]

    in_front_seen = (ages < target_age) | ((ages == target_age) & before_target)
    seen_cost = 1 + np.sum(requested & in_front_seen, axis=1)
    unseen_cost = 1 + requested.sum(axis=1) + np.sum(~requested & before_target, axis=1)
    return np.where(requested[row, target], seen_cost, unseen_cost).astype(np.int64)


def _stationary_costs(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Stationary ages E_j ~ Exp(p_j); zero-rate items get infinite ages and sink to the back."""
    rows, n = p.shape
    with np.errstate(divide="ignore"):
        ages = rng.standard_exponential((rows, n)) / p
    target = _pick(np.cumsum(p, axis=1), rng.random(rows))
    target_age = ages[np.arange(rows), target][:, None]
    index = np.arange(n)[None, :]
    in_front = (ages < target_age) | ((ages == target_age) & (index < target[:, None]))
    return (1 + in_front.sum(axis=1)).astype(np.int64)


def sample_transient_fast(profile: RequestProfile, t: float, seed: SeedLike) -> int:
    """Cost of the first request after t, in law equal to simulate_event_driven, in O(n)."""
    if math.isnan(t) or t < 0:
        raise InvalidArgumentError(f"t must be nonnegative, got {t}")
    rng = _generator(seed)
    p = np.asarray(profile.popularities, dtype=float)[None, :]
    if math.isinf(t):
        return int(_stationary_costs(p, rng)[0])
    return int(_fast_costs(p, t, rng)[0])


def sample_stationary(profile: RequestProfile, seed: SeedLike) -> int:
    """Stationary search cost: 1 + number of items with a more recent last request."""
    rng = _generator(seed)
    p = np.asarray(profile.popularities, dtype=float)[None, :]
    return int(_stationary_costs(p, rng)[0])


def scaled_time(profile: RequestProfile, mu: float, t: float) -> Tuple[float, float]:
    """(t_unit_rate, t_original) = (n mu t, n mu t / sum_j w_j)."""
    if not mu > 0:
        raise InvalidArgumentError(f"mu must be positive, got {mu}")
    total = profile.total_weight
    if not total > 0:
        raise DegenerateLawError("Degenerate profile: weights sum to 0")
    t_unit = profile.n * mu * t
    return t_unit, t_unit / total


def _costs_for(p: np.ndarray, t_unit: float, sampler: str, rng: np.random.Generator) -> np.ndarray:
    if sampler == "stationary" or math.isinf(t_unit):
        return _stationary_costs(p, rng)
    return _fast_costs(p, t_unit, rng)


def batch_profile(
    profile: RequestProfile,
    t: float,
    m: int,
    seed: int,
    sampler: str = "fast",
    mu: Optional[float] = None,
    chunk_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> SampleBatch:
    """
    m costs for one fixed profile.

    With mu given, t is the scaled time and is converted to n mu t; otherwise
    t is already on the unit-rate clock.
    """
    if sampler not in SAMPLERS:
        raise InvalidArgumentError(f"Unknown sampler '{sampler}' (use {', '.join(SAMPLERS)})")
    if m < 1:
        raise InvalidArgumentError(f"m must be positive, got {m}")
    if mu is not None:
        t_unit, t_original = scaled_time(profile, mu, t)
        t_scaled = t
    else:
        t_unit, t_original, t_scaled = t, t / profile.total_weight, None
    if sampler == "event" and math.isinf(t_unit):
        raise InvalidArgumentError("The event-driven sampler needs a finite time")

    p = np.asarray(profile.popularities, dtype=float)

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        if sampler == "event":
            return np.array([simulate_event_driven(profile, t_unit, rng) for _ in range(size)], dtype=np.int64)
        return _costs_for(np.broadcast_to(p, (size, p.size)), t_unit, sampler, rng)

    costs = run_chunks(f"batch_{sampler}", draw, m, seed, chunk_size, workers)
    samples_total.labels(sampler=sampler).inc(m)
    logger.info(f"Drew {m} {sampler} samples for a fixed profile of size {profile.n}")
    family = profile.family.label() if profile.family else None
    return SampleBatch(
        values=costs / profile.n,
        raw_costs=costs,
        n=profile.n,
        t_scaled=t_scaled,
        t_unit_rate=t_unit,
        t_original=t_original,
        seed=seed,
        sampler=sampler,
        ordering=profile.ordering.value,
        family=family,
        quenched=True,
        profile_descriptor=profile.to_descriptor(include_weights=profile.kind == "explicit"),
    )


def batch_transient(
    law: PopularityLaw,
    n: int,
    ordering: Union[Ordering, str],
    t: float,
    m: int,
    seed: int,
    quenched: bool = False,
    chunk_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> SampleBatch:
    """
    m normalized costs S(n mu t)/n with i.i.d. weights from law.

    Annealed batches draw a fresh weight vector per sample; quenched batches
    reuse the profile made from `seed`. t = inf samples the stationary law.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    if m < 1:
        raise InvalidArgumentError(f"m must be positive, got {m}")
    if math.isnan(t) or t < 0:
        raise InvalidArgumentError(f"t must be nonnegative, got {t}")
    ordering = Ordering.parse(ordering)
    mu = law.mean
    sampler = "stationary" if math.isinf(t) else "fast"

    if quenched:
        profile = make_iid_profile(law, n, ordering, seed)
        batch = batch_profile(profile, t, m, seed, sampler=sampler, mu=mu, chunk_size=chunk_size, workers=workers)
        return replace(batch, family=law.label())

    t_unit = n * mu * t

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        weights = sample_weight_rows(law, n, ordering, rng, size)
        totals = weights.sum(axis=1)
        costs = _costs_for(weights / totals[:, None], t_unit, sampler, rng)
        return np.column_stack([costs, totals])

    out = run_chunks(f"annealed_{sampler}", draw, m, seed, chunk_size, workers)
    costs = out[:, 0].astype(np.int64)
    t_original = math.inf if math.isinf(t_unit) else float(np.mean(t_unit / out[:, 1]))
    samples_total.labels(sampler=sampler).inc(m)
    logger.info(f"Drew {m} annealed {sampler} samples, n={n}, {ordering.value}, t={t}")
    return SampleBatch(
        values=costs / n,
        raw_costs=costs,
        n=n,
        t_scaled=t,
        t_unit_rate=t_unit,
        t_original=t_original,
        seed=seed,
        sampler=sampler,
        ordering=ordering.value,
        family=law.label(),
        quenched=False,
    )
