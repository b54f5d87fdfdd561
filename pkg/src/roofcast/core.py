"""Hardware description and resource-allocation types shared by every model.

All bandwidths are bytes/second (or integer-ops/second for compute) and all
capacities are bytes internally. Config files carry human units (GB/s,
Gops/s, MB, GB; decimal, 1 GB = 1e9 B) and are converted once at load time
so the model equations never touch unit conversions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

from .errors import ConfigError, SchemaError, ValidationError

GB = 1e9
GOPS = 1e9
MB = 1e6

DEFAULT_HW_NAME = "a100_40gb"


@dataclass(frozen=True)
class ResourceAllocation:
    """Fractional assignment of the four partitionable GPU resources.

    Fractions are relative to the full GPU. Values in (0, 1] describe
    downsized (MIG-style) allocations; values above 1 are hypothetical
    upsizing what-ifs and are flagged by the predictors that consume them.
    """

    compute_fraction: float
    dram_bw_fraction: float
    l2_bw_fraction: float
    mem_capacity_fraction: float

    def __post_init__(self):
        for field in ("compute_fraction", "dram_bw_fraction",
                      "l2_bw_fraction", "mem_capacity_fraction"):
            value = getattr(self, field)
            if not value > 0:
                raise ValidationError(f"{field} must be > 0, got {value}")

    def is_full(self) -> bool:
        return (self.compute_fraction == 1.0 and self.dram_bw_fraction == 1.0
                and self.l2_bw_fraction == 1.0
                and self.mem_capacity_fraction == 1.0)


@dataclass(frozen=True)
class PartitionInstance:
    """One physical slice of a partitioned GPU.

    Unlike ResourceAllocation, a physical slice can never exceed the GPU,
    so every fraction must lie in (0, 1].
    """

    name: str
    compute_fraction: float
    dram_bw_fraction: float
    l2_bw_fraction: float
    mem_capacity_fraction: float

    def __post_init__(self):
        for field in ("compute_fraction", "dram_bw_fraction",
                      "l2_bw_fraction", "mem_capacity_fraction"):
            value = getattr(self, field)
            if not 0 < value <= 1.0:
                raise ValidationError(
                    f"partition instance {self.name!r}: {field} must be in "
                    f"(0, 1], got {value}")


# Float tolerance for "fractions sum to at most the whole GPU" checks;
# catalogs expressed as repeating decimals (e.g. 3 * 1/3) must not be rejected.
_SUM_EPS = 1e-9

_RESOURCE_FIELDS = ("compute_fraction", "dram_bw_fraction",
                    "l2_bw_fraction", "mem_capacity_fraction")


@dataclass(frozen=True)
class PartitionConfig:
    """A named way of carving the GPU into concurrent instances.

    shared_memory marks MPS-style sharing: compute is split between
    instances but L2 and DRAM stay whole for everyone, so the sum budget
    applies to compute only.
    """

    name: str
    instances: tuple[PartitionInstance, ...]
    shared_memory: bool = False

    def __post_init__(self):
        if not self.instances:
            raise ValidationError(f"partition config {self.name!r} has no instances")
        object.__setattr__(self, "instances", tuple(self.instances))
        checked = (("compute_fraction",) if self.shared_memory
                   else _RESOURCE_FIELDS)
        for field in checked:
            total = sum(getattr(inst, field) for inst in self.instances)
            if total > 1.0 + _SUM_EPS:
                raise ValidationError(
                    f"partition config {self.name!r}: {field} sums to "
                    f"{total:.6f} > 1.0 across instances")

    def resource_sums(self) -> dict[str, float]:
        """Per-resource totals across instances, keyed by fraction field."""
        return {f: sum(getattr(i, f) for i in self.instances)
                for f in _RESOURCE_FIELDS}


@dataclass(frozen=True)
class HardwareSpec:
    """Peak bandwidths, cache geometry, and partition catalog of one GPU."""

    name: str
    sm_count: int
    peak_compute_bw: float      # integer ops / second
    peak_dram_bw: float         # bytes / second
    peak_l2_bw: float           # bytes / second
    l2_capacity_bytes: float
    dram_capacity_bytes: float
    host_link_bw: float         # bytes / second, CPU<->GPU link
    l2_request_bytes: int = 128
    mig_catalog: tuple[PartitionConfig, ...] = ()

    def __post_init__(self):
        positive = {
            "sm_count": self.sm_count,
            "peak_compute_bw": self.peak_compute_bw,
            "peak_dram_bw": self.peak_dram_bw,
            "peak_l2_bw": self.peak_l2_bw,
            "l2_capacity_bytes": self.l2_capacity_bytes,
            "dram_capacity_bytes": self.dram_capacity_bytes,
            "host_link_bw": self.host_link_bw,
            "l2_request_bytes": self.l2_request_bytes,
        }
        for field, value in positive.items():
            if not value > 0:
                raise ValidationError(f"{field} must be > 0, got {value}")
        if not self.peak_l2_bw > self.peak_dram_bw:
            raise ValidationError(
                "peak_l2_bw must exceed peak_dram_bw (cache sits above DRAM); "
                f"got L2 {self.peak_l2_bw} vs DRAM {self.peak_dram_bw}")
        if self.l2_request_bytes & (self.l2_request_bytes - 1):
            raise ValidationError(
                f"l2_request_bytes must be a power of two, got {self.l2_request_bytes}")
        object.__setattr__(self, "mig_catalog", tuple(self.mig_catalog))

    def with_catalog(self, catalog: tuple[PartitionConfig, ...]) -> "HardwareSpec":
        return replace(self, mig_catalog=tuple(catalog))


def full_allocation() -> ResourceAllocation:
    """The identity allocation: the whole GPU."""
    return ResourceAllocation(1.0, 1.0, 1.0, 1.0)


def allocation_of(instance: PartitionInstance) -> ResourceAllocation:
    """Resource allocation seen by a process running on one partition slice."""
    return ResourceAllocation(
        compute_fraction=instance.compute_fraction,
        dram_bw_fraction=instance.dram_bw_fraction,
        l2_bw_fraction=instance.l2_bw_fraction,
        mem_capacity_fraction=instance.mem_capacity_fraction,
    )


# ---------------------------------------------------------------------------
# Hardware spec config file
# ---------------------------------------------------------------------------
#
# YAML schema (all keys required unless noted, unknown keys rejected):
#
#   schema_version: 1
#   name: <text>
#   sm_count: <int>
#   peak_compute_gops: <Gops/s>
#   peak_dram_gbps: <GB/s>
#   peak_l2_gbps: <GB/s>
#   l2_capacity_mb: <MB>
#   dram_capacity_gb: <GB>
#   host_link_gbps: <GB/s>
#   l2_request_bytes: <int, optional, default 128>
#   mig_catalog:                    # optional
#     - name: <text>
#       instances:
#         - name: <text>
#           compute: <fraction>
#           dram_bw: <fraction>
#           l2_bw: <fraction>
#           mem_capacity: <fraction>

HW_SCHEMA_VERSION = 1

_HW_REQUIRED = {
    "schema_version", "name", "sm_count", "peak_compute_gops",
    "peak_dram_gbps", "peak_l2_gbps", "l2_capacity_mb",
    "dram_capacity_gb", "host_link_gbps",
}
_HW_OPTIONAL = {"l2_request_bytes", "mig_catalog"}

_INSTANCE_KEYS = {"name", "compute", "dram_bw", "l2_bw", "mem_capacity"}


def _reject_unknown(mapping: Mapping, allowed: set[str], context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise SchemaError(f"{context}: unknown keys {sorted(unknown)}")


def _parse_catalog(raw: object) -> tuple[PartitionConfig, ...]:
    if not isinstance(raw, list):
        raise SchemaError("mig_catalog must be a list of configs")
    configs = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise SchemaError(f"mig_catalog[{i}] must be a mapping")
        _reject_unknown(entry, {"name", "instances", "shared_memory"},
                        f"mig_catalog[{i}]")
        try:
            name = entry["name"]
            raw_instances = entry["instances"]
        except KeyError as exc:
            raise SchemaError(f"mig_catalog[{i}]: missing key {exc}") from None
        instances = []
        for j, inst in enumerate(raw_instances):
            _reject_unknown(inst, _INSTANCE_KEYS, f"mig_catalog[{i}].instances[{j}]")
            try:
                instances.append(PartitionInstance(
                    name=str(inst["name"]),
                    compute_fraction=float(inst["compute"]),
                    dram_bw_fraction=float(inst["dram_bw"]),
                    l2_bw_fraction=float(inst["l2_bw"]),
                    mem_capacity_fraction=float(inst["mem_capacity"]),
                ))
            except KeyError as exc:
                raise SchemaError(
                    f"mig_catalog[{i}].instances[{j}]: missing key {exc}") from None
        configs.append(PartitionConfig(
            name=str(name), instances=tuple(instances),
            shared_memory=bool(entry.get("shared_memory", False))))
    return tuple(configs)


def hardware_spec_from_dict(doc: Mapping) -> HardwareSpec:
    """Build a HardwareSpec from a parsed config document, converting units."""
    if not isinstance(doc, Mapping):
        raise SchemaError("hardware spec document must be a mapping")
    _reject_unknown(doc, _HW_REQUIRED | _HW_OPTIONAL, "hardware spec")
    missing = _HW_REQUIRED - set(doc)
    if missing:
        raise SchemaError(f"hardware spec: missing keys {sorted(missing)}")
    if doc["schema_version"] != HW_SCHEMA_VERSION:
        raise SchemaError(
            f"hardware spec: unsupported schema_version {doc['schema_version']!r}")
    try:
        spec = HardwareSpec(
            name=str(doc["name"]),
            sm_count=int(doc["sm_count"]),
            peak_compute_bw=float(doc["peak_compute_gops"]) * GOPS,
            peak_dram_bw=float(doc["peak_dram_gbps"]) * GB,
            peak_l2_bw=float(doc["peak_l2_gbps"]) * GB,
            l2_capacity_bytes=float(doc["l2_capacity_mb"]) * MB,
            dram_capacity_bytes=float(doc["dram_capacity_gb"]) * GB,
            host_link_bw=float(doc["host_link_gbps"]) * GB,
            l2_request_bytes=int(doc.get("l2_request_bytes", 128)),
            mig_catalog=_parse_catalog(doc.get("mig_catalog", [])),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise SchemaError(f"hardware spec: {exc}") from exc
    return spec


def load_hardware_spec(path: str | Path) -> HardwareSpec:
    """Load a hardware spec (and its partition catalog) from a YAML file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return hardware_spec_from_dict(doc)


def default_hardware_spec() -> HardwareSpec:
    """The bundled A100-40GB spec with its 18-entry partition catalog."""
    ref = resources.files("roofcast.data").joinpath(f"{DEFAULT_HW_NAME}.yaml")
    with resources.as_file(ref) as path:
        return load_hardware_spec(path)


def knee_ai(compute_bw: float, mem_bw: float) -> float:
    """Arithmetic intensity where the memory slope meets the compute ceiling."""
    if mem_bw <= 0 or not math.isfinite(mem_bw):
        raise ValidationError(f"mem_bw must be positive and finite, got {mem_bw}")
    return compute_bw / mem_bw
