"""Rank GPU partition configurations against a workload and an objective.

For every cataloged configuration the advisor predicts workload throughput
and mean latency at the configuration's own degree of concurrency, then
sorts by the chosen objective. The query mix is dispatched identically to
every instance; per-instance specialization is out of scope.

The three objectives are artifact-defined (reports label them as such):
lowest mean latency, highest throughput, or highest throughput per unit of
GPU actually reserved.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .core import HardwareSpec, PartitionConfig, ResourceAllocation, allocation_of
from .errors import ConfigError, ValidationError
from .ingest import QueryProfile, aggregate
from .concurrency import WorkloadSpec, _instance_mean_times, estimate_qps
from .scaling import Confidence, slowdown_unified


class Objective(enum.Enum):
    MIN_LATENCY = "min-latency"
    MAX_THROUGHPUT = "max-throughput"
    MAX_THROUGHPUT_PER_RESOURCE = "throughput-per-resource"


@dataclass(frozen=True)
class WhatIfRow:
    config: PartitionConfig
    predicted_qps: float
    predicted_mean_latency: float
    resource_fraction_used: float
    confidence_flags: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "config": self.config.name,
            "instances": len(self.config.instances),
            "predicted_qps": self.predicted_qps,
            "predicted_mean_latency_s": self.predicted_mean_latency,
            "resource_fraction_used": self.resource_fraction_used,
            "confidence_flags": list(self.confidence_flags),
        }


@dataclass(frozen=True)
class WhatIfReport:
    rows: tuple[WhatIfRow, ...]
    ranked_by: Objective

    def to_dict(self) -> dict:
        return {
            "ranked_by": self.ranked_by.value,
            "rows": [row.to_dict() for row in self.rows],
        }


def enumerate_configs(hw: HardwareSpec) -> list[PartitionConfig]:
    """The hardware's partition catalog, in its deterministic file order."""
    if not hw.mig_catalog:
        raise ConfigError(
            f"hardware spec {hw.name!r} carries no partition catalog")
    return list(hw.mig_catalog)


def _evaluate_config(w: WorkloadSpec, hw: HardwareSpec,
                     config: PartitionConfig) -> WhatIfRow:
    doc = len(config.instances)
    scoped = replace(w, doc=doc)
    qps = estimate_qps(scoped, hw, config)
    means = _instance_mean_times(scoped, hw, config)
    mean_latency = sum(means) / doc
    sums = config.resource_sums()
    flags = set()
    budgeted = (("compute_fraction",) if config.shared_memory
                else tuple(sums.keys()))
    if any(sums[field] > 1.0 + 1e-9 for field in budgeted):
        flags.add("infeasible-allocation")
    for inst in config.instances:
        alloc = allocation_of(inst)
        for profile, _ in w.queries:
            metrics = aggregate(profile, hw)
            pred = slowdown_unified(metrics, metrics.total_duration, hw, alloc)
            if pred.confidence is Confidence.LOW_UPSIZE_MEMORY:
                flags.add("low-upsize-memory")
    return WhatIfRow(
        config=config,
        predicted_qps=qps,
        predicted_mean_latency=mean_latency,
        resource_fraction_used=max(sums.values()),
        confidence_flags=tuple(sorted(flags)),
    )


def _sort_key(objective: Objective):
    if objective is Objective.MIN_LATENCY:
        return lambda r: (r.predicted_mean_latency,
                          r.resource_fraction_used, r.config.name)
    if objective is Objective.MAX_THROUGHPUT:
        return lambda r: (-r.predicted_qps,
                          r.resource_fraction_used, r.config.name)
    return lambda r: (-r.predicted_qps / r.resource_fraction_used,
                      r.resource_fraction_used, r.config.name)


def advise(w: WorkloadSpec, hw: HardwareSpec, objective: Objective,
           configs: list[PartitionConfig] | None = None) -> WhatIfReport:
    """Evaluate every configuration and rank by the objective.

    The workload's own degree of concurrency is ignored; each configuration
    is evaluated at its instance count.
    """
    if configs is None:
        configs = enumerate_configs(hw)
    rows = [_evaluate_config(w, hw, config) for config in configs]
    rows.sort(key=_sort_key(objective))
    return WhatIfReport(rows=tuple(rows), ranked_by=objective)


def scaling_curve(profile: QueryProfile, hw: HardwareSpec,
                  fractions: list[float]) -> list[tuple[float, float]]:
    """Predicted time at uniform allocations, one point per fraction.

    Fractions must be ascending and in (0, 1]; all four resources are set
    to the same value, mirroring how physical slices couple them.
    """
    if not fractions:
        raise ValidationError("fractions must be non-empty")
    if any(not 0 < f <= 1 for f in fractions):
        raise ValidationError("every fraction must be in (0, 1]")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValidationError("fractions must be strictly ascending")
    metrics = aggregate(profile, hw)
    curve = []
    for f in fractions:
        alloc = ResourceAllocation(f, f, f, f)
        pred = slowdown_unified(metrics, metrics.total_duration, hw, alloc)
        curve.append((f, pred.predicted_time))
    return curve
