import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from mtfcost.config import STATS
from mtfcost.core.analytic import (
    SearchCostLaw,
    lru_fault_probability,
    out_tail_quadrature,
    pac_fault_probability,
    search_cost_law,
    tv_distance_to_stationary,
)
from mtfcost.core.errors import InvalidArgumentError, ValidationFailedError
from mtfcost.core.exact_oracle import exact_search_cost_law, exact_stationary_law, requested_mass
from mtfcost.core.popularity import (
    Ordering,
    PopularityLaw,
    PushforwardLaw,
    empirical_measure,
    law_from_descriptor,
    profile_from_family,
    wasserstein1,
)
from mtfcost.core.simulator import SampleBatch, batch_profile, batch_transient, scaled_time
from mtfcost.core.stats import (
    dkw_band,
    ks_distance,
    ks_report,
    stochastic_order_check,
    tv_binned,
    tv_binned_threshold,
)
from mtfcost.models import (
    AnalyticSummary,
    CommandResult,
    ConvergenceRow,
    ExperimentConfig,
    FaultReport,
    ValidationReport,
)
from mtfcost.services.export_service import ExportService, file_stem

logger = logging.getLogger(__name__)


def _parse_key_value(text: str) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"Config line {number} is not key=value: {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON object or flat key=value lines; keys may use dashes or underscores"""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        values = json.loads(text)
        if not isinstance(values, dict):
            raise InvalidArgumentError(f"Config file {path} must hold a JSON object")
    else:
        values = _parse_key_value(text)
    return {str(k).replace("-", "_"): v for k, v in values.items()}


def resolve_config(
    command: str,
    overrides: Optional[Mapping[str, Any]] = None,
    config_file: Optional[Union[str, Path]] = None,
) -> ExperimentConfig:
    """File values first, then every override that is not None"""
    values: Dict[str, Any] = load_config_file(config_file) if config_file else {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    # an explicit --t beats a stationary setting from the file and vice versa
    if "t" in overrides:
        values.pop("stationary", None)
    if overrides.get("stationary"):
        values.pop("t", None)
    values.update(overrides)
    values["command"] = command
    return ExperimentConfig(**values)


class ExperimentService:
    """Command bodies behind the CLI; every command writes a CSV table and a JSON sidecar"""

    def __init__(self, export_service: Optional[ExportService] = None):
        self.export_service = export_service

    def _exporter(self, config: ExperimentConfig) -> ExportService:
        return self.export_service or ExportService(config.out)

    @staticmethod
    def law_for(config: ExperimentConfig) -> PopularityLaw:
        return law_from_descriptor(config.family)

    @staticmethod
    def ordering_for(config: ExperimentConfig, law: PopularityLaw) -> Ordering:
        """Zipf and density families fix their own initial order"""
        family = config.family
        requested = Ordering.parse(config.ordering)
        if family.kind == "zipf":
            alpha = family.params[0]
            implied = Ordering.DECREASING if alpha < 0 else Ordering.INCREASING if alpha > 0 else Ordering.EXCHANGEABLE
        elif isinstance(law, PushforwardLaw):
            implied = law.ordering
        else:
            return requested
        if implied is not requested:
            logger.info(f"{family.label()} profiles are {implied.value}; ignoring ordering={requested.value}")
        return implied

    @staticmethod
    def _time_tag(config: ExperimentConfig) -> str:
        return "stationary" if config.stationary else f"t{config.t:g}"

    def _stem(self, config: ExperimentConfig, ordering: Optional[Ordering] = None, *extra: object) -> str:
        return file_stem(
            config.command,
            config.family.label(),
            ordering.short if ordering is not None else None,
            self._time_tag(config),
            *extra,
        )

    def _finish(
        self,
        config: ExperimentConfig,
        stem: str,
        frame: pd.DataFrame,
        reports: List[ValidationReport],
        summary: Dict[str, Any],
    ) -> CommandResult:
        exporter = self._exporter(config)
        csv_path = exporter.write_frame(stem, frame)
        result = CommandResult(
            command=config.command,
            files=[str(csv_path), str(exporter.out_dir / f"{stem}.json")],
            reports=reports,
            summary=summary,
            config=config.model_dump(mode="json", by_alias=True),
        )
        exporter.write_json(stem, result)
        if not result.passed:
            failed = ", ".join(f"{r.statistic}={r.value:.3g} > {r.threshold:.3g}" for r in reports if not r.passed)
            raise ValidationFailedError(f"{config.command} validation failed: {failed}")
        return result

    def sample(self, config: ExperimentConfig, law: PopularityLaw, ordering: Ordering, n: int) -> SampleBatch:
        """Annealed batch for i.i.d. families on the fast sampler, a fixed-profile batch otherwise"""
        t = config.time
        if config.family.kind == "iid" and not config.quenched and config.sampler == "fast":
            return batch_transient(law, n, ordering, t, config.m, config.seed)
        profile = profile_from_family(config.family, n, ordering, config.seed)
        sampler = "stationary" if config.stationary else config.sampler
        return batch_profile(profile, t, config.m, config.seed, sampler=sampler, mu=law.mean)

    def analytic(self, config: ExperimentConfig) -> CommandResult:
        """Density and CDF of the limiting search cost on a uniform grid"""
        law = self.law_for(config)
        ordering = self.ordering_for(config, law)
        logger.info(f"Analytic law for {config.family.label()}, {ordering.value}, {self._time_tag(config)}")
        scl = search_cost_law(law, ordering, config.time)

        xs = np.linspace(0.0, 1.0, config.grid)
        frame = pd.DataFrame({
            "x": xs,
            "f": np.asarray(scl.density(xs), dtype=float),
            "F": np.asarray(scl.cdf(xs), dtype=float),
            "piece": [scl.piece(float(x)) for x in xs],
        })
        if scl.stationary:
            tv_exact, tv_bound = 0.0, 0.0
        else:
            tv_exact, tv_bound = tv_distance_to_stationary(law, ordering, scl.t)

        summary = AnalyticSummary(
            family=config.family.label(),
            ordering=ordering.value,
            t=None if scl.stationary else scl.t,
            mu=scl.mu,
            phi_t=scl.phi_t,
            threshold=scl.threshold,
            out_mass=scl.out_mass,
            tv_exact=tv_exact,
            tv_bound=tv_bound,
        )
        return self._finish(config, self._stem(config, ordering), frame, [], summary.model_dump())

    def _validation_reports(self, batch: SampleBatch, scl: SearchCostLaw) -> List[ValidationReport]:
        ks = ks_report(batch, scl)
        out_fraction = float(np.mean(batch.values > scl.threshold))
        ks.details.update({"out_fraction": out_fraction, "out_mass": scl.out_mass})
        tv_value = tv_binned(batch, scl.tabulated_cdf())
        tv_threshold = tv_binned_threshold(batch.count)
        tv = ValidationReport(
            statistic="tv_binned",
            value=tv_value,
            threshold=tv_threshold,
            passed=tv_value <= tv_threshold,
            details={"bins": STATS["tv_bins"], "lattice": batch.n},
        )
        return [ks, tv]

    def simulate(self, config: ExperimentConfig) -> CommandResult:
        law = self.law_for(config)
        ordering = self.ordering_for(config, law)
        logger.info(f"Simulating m={config.m} costs, n={config.n}, {config.family.label()}, {ordering.value}")
        batch = self.sample(config, law, ordering, config.n)

        reports: List[ValidationReport] = []
        if config.validate_batch:
            scl = search_cost_law(law, ordering, config.time)
            reports = self._validation_reports(batch, scl)
            for report in reports:
                logger.info(f"{report.statistic} = {report.value:.5f} (threshold {report.threshold})")

        summary = {"header": batch.header().model_dump()}
        if batch.profile_descriptor is not None:
            summary["profile"] = batch.profile_descriptor.model_dump()
        stem = self._stem(config, ordering, f"n{config.n}", f"m{config.m}", config.seed)
        return self._finish(config, stem, batch.to_frame(), reports, summary)

    def exact(self, config: ExperimentConfig) -> CommandResult:
        """Exact pmfs of the 0-based position k, split by whether the item was requested before t"""
        law = self.law_for(config)
        ordering = self.ordering_for(config, law)
        profile = profile_from_family(config.family, config.n, ordering, config.seed)
        t_unit, t_original = scaled_time(profile, law.mean, config.time)

        if config.stationary:
            pmf_e = exact_stationary_law(profile)
            p_e, p_o = pmf_e.padded(profile.n), np.zeros(profile.n)
        else:
            pmf_e, pmf_o = exact_search_cost_law(profile, t_unit)
            p_e, p_o = pmf_e.padded(profile.n), pmf_o.padded(profile.n)

        frame = pd.DataFrame({"k": np.arange(profile.n), "p_e": p_e, "p_o": p_o, "p_total": p_e + p_o})
        mass_e = float(p_e.sum())
        summary = {
            "t_unit_rate": None if math.isinf(t_unit) else t_unit,
            "t_original": None if math.isinf(t_original) else t_original,
            "mass_e": mass_e,
            "mass_o": float(p_o.sum()),
            "requested_mass": requested_mass(profile, t_unit),
            "mean_cost": float(np.dot(np.arange(1, profile.n + 1), p_e + p_o)),
            "profile": profile.to_descriptor(include_weights=True).model_dump(),
        }
        logger.info(f"Exact law for n={profile.n}: mass_e={mass_e:.12f}, requested mass={summary['requested_mass']:.12f}")
        return self._finish(config, self._stem(config, ordering, f"n{profile.n}"), frame, [], summary)

    def convergence(self, config: ExperimentConfig) -> CommandResult:
        """Per-n distances of the finite system to its limit along a ladder of sizes"""
        law = self.law_for(config)
        ordering = self.ordering_for(config, law)
        scl = search_cost_law(law, ordering, config.time)
        cdf = scl.tabulated_cdf()
        ladder = config.ladder or [config.n]

        rows: List[ConvergenceRow] = []
        for n in ladder:
            profile = profile_from_family(config.family, n, ordering, config.seed)
            w1 = wasserstein1(empirical_measure(profile, law.mean), law)
            batch = self.sample(config, law, ordering, n)
            out_fraction = float(np.mean(batch.values > scl.threshold))
            row = ConvergenceRow(
                n=n,
                w1=w1,
                ks=ks_distance(batch, cdf),
                out_mass_error=abs(out_fraction - scl.out_mass),
                dkw_band=dkw_band(batch.count),
            )
            logger.info(f"n={n}: W1={row.w1:.5f} KS={row.ks:.5f} out-mass error={row.out_mass_error:.5f}")
            rows.append(row)

        ks_values = [r.ks for r in rows]
        summary = {
            "rows": [r.model_dump() for r in rows],
            "ks_increases": int(sum(b > a for a, b in zip(ks_values, ks_values[1:]))),
            "w1_increases": int(sum(b.w1 > a.w1 for a, b in zip(rows, rows[1:]))),
        }
        frame = pd.DataFrame([r.model_dump() for r in rows], columns=list(ConvergenceRow.model_fields))
        return self._finish(config, self._stem(config, ordering, f"m{config.m}"), frame, [], summary)

    def lru(self, config: ExperimentConfig) -> Tuple[CommandResult, FaultReport]:
        """Limiting LRU fault probability for a cache holding a fraction delta of the items"""
        law = self.law_for(config)
        ordering = self.ordering_for(config, law)
        if config.pac and ordering is not Ordering.DECREASING:
            logger.info("The incomplete-gamma fault probability assumes a decreasing order; using ordering=decreasing")
            ordering = Ordering.DECREASING
        t, delta = config.time, config.delta

        probability = lru_fault_probability(law, ordering, t, delta)
        tail = None if math.isinf(t) else out_tail_quadrature(law, ordering, t, delta)

        reports: List[ValidationReport] = []
        pac = None
        if config.pac:
            pac = pac_fault_probability(config.pac_alpha, t, delta)
            gap = abs(pac - probability)
            reports.append(ValidationReport(
                statistic="pac_agreement",
                value=gap,
                threshold=STATS["pac_agreement"],
                passed=gap <= STATS["pac_agreement"],
                details={"pac": pac, "closed_form": probability, "tail_quadrature": tail},
            ))
            agreement = gap
        else:
            agreement = None if tail is None else abs(probability - tail)

        fault = FaultReport(
            family=config.family.label(),
            ordering=ordering.value,
            t=None if math.isinf(t) else t,
            delta=delta,
            probability=probability,
            pac=pac,
            tail_quadrature=tail,
            agreement=agreement,
        )
        logger.info(f"LRU fault probability {probability:.10f} at delta={delta}")
        frame = pd.DataFrame([fault.model_dump()])
        result = self._finish(config, self._stem(config, ordering, f"d{delta:g}"), frame, reports, fault.model_dump())
        return result, fault

    def order_check(self, config: ExperimentConfig) -> CommandResult:
        """Check S(dec) <= S(ex) <= S(inc) in the usual stochastic order"""
        law = self.law_for(config)
        t = config.time
        orderings = (Ordering.DECREASING, Ordering.EXCHANGEABLE, Ordering.INCREASING)
        laws = {o: search_cost_law(law, o, t) for o in orderings}

        reports: List[ValidationReport] = []
        for lower, upper in zip(orderings, orderings[1:]):
            report = stochastic_order_check(laws[lower], laws[upper], grid=config.grid)
            report.details.update({"lower": lower.value, "upper": upper.value, "source": "analytic"})
            reports.append(report)

        if config.validate_batch:
            if config.family.kind != "iid":
                logger.warning(f"{config.family.label()} profiles have a fixed order; skipping sampled order checks")
            else:
                batches = {o: batch_transient(law, config.n, o, t, config.m, config.seed) for o in orderings}
                for lower, upper in zip(orderings, orderings[1:]):
                    report = stochastic_order_check(batches[lower], batches[upper], grid=config.grid)
                    report.details.update({"lower": lower.value, "upper": upper.value, "source": "sampled"})
                    reports.append(report)

        xs = np.linspace(0.0, 1.0, config.grid)
        frame = pd.DataFrame({"x": xs, **{f"F_{o.short}": np.asarray(laws[o].cdf(xs), dtype=float) for o in orderings}})
        summary = {o.value: {"threshold": laws[o].threshold, "out_mass": laws[o].out_mass} for o in orderings}
        return self._finish(config, self._stem(config), frame, reports, summary)

    def run(self, config: ExperimentConfig) -> CommandResult:
        handlers = {
            "analytic": self.analytic,
            "simulate": self.simulate,
            "exact": self.exact,
            "convergence": self.convergence,
            "lru": lambda c: self.lru(c)[0],
            "order-check": self.order_check,
        }
        return handlers[config.command](config)
