"""Memory and compute power.

Memory follows ``P = p_bg * C + e_read * BW_read + e_write * BW_write`` with
capacity in GB and bandwidth in bits/s. Compute power is a linear
utilisation model whose default coefficients are calibrated so the
reference design (2048x128 PE array, VLEN 2048, SRAM2D + HBM3Ex4) has a
300.1 W TDP.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .catalog import GB, MemoryTechnology
from .errors import ContractViolation

BITS_PER_BYTE = 8.0
PE_REF = 2048 * 128
VLEN_REF = 2048
REFERENCE_TDP_W = 300.1
STATIC_FRACTION = 0.15
MAC_TO_VEC_RATIO = 4.0
# Memory share of the reference TDP: SRAM2D (7.68 + 3.2 W) + 4 x HBM3E (1.8 + 24 W).
_REF_MEMORY_PEAK_W = (0.256 * 30.0 + 0.1e-12 * 4e12 * 8) + 4 * (24 * 0.075 + 3e-12 * 1e12 * 8)


@dataclass(frozen=True)
class MemoryPowerCoefficients:
    p_bg: float  # W/GB
    e_read: float  # J/bit
    e_write: float  # J/bit

    def __post_init__(self):
        if min(self.p_bg, self.e_read, self.e_write) < 0:
            raise ContractViolation("power coefficients must be non-negative")

    @classmethod
    def of(cls, tech: MemoryTechnology) -> "MemoryPowerCoefficients":
        return cls(tech.p_bg, tech.e_read, tech.e_write)


def memory_tier_power(capacity: float, bw_read: float, bw_write: float,
                      coeffs: MemoryPowerCoefficients, peak_bandwidth: float | None = None) -> float:
    """Watts drawn by one tier of ``capacity`` bytes moving ``bw_*`` bytes/s."""
    if capacity < 0 or bw_read < 0 or bw_write < 0:
        raise ContractViolation("capacity and bandwidths must be non-negative")
    if peak_bandwidth is not None and bw_read + bw_write > peak_bandwidth * (1 + 1e-9):
        raise ContractViolation(
            f"achieved bandwidth {(bw_read + bw_write) / GB:.3f} GB/s exceeds tier peak "
            f"{peak_bandwidth / GB:.3f} GB/s"
        )
    return (coeffs.p_bg * capacity / GB
            + coeffs.e_read * bw_read * BITS_PER_BYTE
            + coeffs.e_write * bw_write * BITS_PER_BYTE)


@dataclass(frozen=True)
class ComputePowerModel:
    """Static power plus matrix and vector terms scaled by unit size."""

    p_static: float
    p_mac_peak: float
    p_vec_peak: float
    clock: float = 1e9
    pe_ref: int = PE_REF
    vlen_ref: int = VLEN_REF

    def __post_init__(self):
        for name in ("p_static", "p_mac_peak", "p_vec_peak", "clock", "pe_ref", "vlen_ref"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ContractViolation(f"compute power field {name} must be > 0, got {v!r}")

    @classmethod
    def calibrated(cls, clock: float = 1e9) -> "ComputePowerModel":
        peak = REFERENCE_TDP_W - _REF_MEMORY_PEAK_W
        static = STATIC_FRACTION * peak
        dynamic = peak - static
        mac = dynamic * MAC_TO_VEC_RATIO / (MAC_TO_VEC_RATIO + 1)
        return cls(static, mac, dynamic - mac, clock)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict | None) -> "ComputePowerModel":
        base = asdict(cls.calibrated())
        base.update(doc or {})
        return cls(**base)


DEFAULT_COMPUTE_POWER = ComputePowerModel.calibrated()


def compute_power(compute_spec, matrix_utilization: float, vector_utilization: float,
                  model: ComputePowerModel = DEFAULT_COMPUTE_POWER) -> float:
    for u in (matrix_utilization, vector_utilization):
        if not (0.0 <= u <= 1.0 + 1e-12):
            raise ContractViolation(f"utilization must lie in [0, 1], got {u}")
    pe_ratio = compute_spec.pe_rows * compute_spec.pe_cols / model.pe_ref
    vec_ratio = compute_spec.vlen / model.vlen_ref
    return (model.p_static
            + model.p_mac_peak * pe_ratio * matrix_utilization
            + model.p_vec_peak * vec_ratio * vector_utilization)


@dataclass(frozen=True)
class TierPower:
    tier: str
    background: float
    read: float
    write: float

    @property
    def total(self) -> float:
        return self.background + self.read + self.write


@dataclass(frozen=True)
class PowerReport:
    avg_power: float
    tdp: float
    per_tier: tuple[TierPower, ...]
    compute: float

    def to_dict(self) -> dict:
        return {
            "avg_power": self.avg_power,
            "tdp": self.tdp,
            "compute": self.compute,
            "per_tier": [asdict(t) for t in self.per_tier],
        }


@dataclass(frozen=True)
class Activity:
    """Achieved per-tier bandwidths (bytes/s) and unit utilisations."""

    read_bw: tuple[float, ...]
    write_bw: tuple[float, ...]
    matrix_utilization: float = 0.0
    vector_utilization: float = 0.0

    @classmethod
    def idle(cls, n_tiers: int) -> "Activity":
        return cls((0.0,) * n_tiers, (0.0,) * n_tiers)


def design_tdp(design) -> float:
    """Compute at full utilisation plus every tier at peak read bandwidth."""
    total = compute_power(design.compute, 1.0, 1.0, design.compute_power)
    for tier in design.hierarchy.tiers:
        total += memory_tier_power(tier.aggregate_capacity, tier.aggregate_peak_bandwidth, 0.0,
                                   MemoryPowerCoefficients.of(tier.tech))
    return total


def system_power(design, activity: Activity) -> PowerReport:
    tiers = design.hierarchy.tiers
    if len(activity.read_bw) != len(tiers) or len(activity.write_bw) != len(tiers):
        raise ContractViolation("activity must give one read and one write bandwidth per tier")
    per_tier = []
    for tier, rd, wr in zip(tiers, activity.read_bw, activity.write_bw):
        coeffs = MemoryPowerCoefficients.of(tier.tech)
        # validates rd + wr against the tier peak
        memory_tier_power(tier.aggregate_capacity, rd, wr, coeffs, tier.aggregate_peak_bandwidth)
        per_tier.append(TierPower(
            tier.label(),
            coeffs.p_bg * tier.aggregate_capacity / GB,
            coeffs.e_read * rd * BITS_PER_BYTE,
            coeffs.e_write * wr * BITS_PER_BYTE,
        ))
    comp = compute_power(design.compute, min(1.0, activity.matrix_utilization),
                         min(1.0, activity.vector_utilization), design.compute_power)
    avg = comp + sum(t.total for t in per_tier)
    return PowerReport(avg, design_tdp(design), tuple(per_tier), comp)


def check_tdp(report: PowerReport | float, budget: float) -> bool:
    tdp = report.tdp if isinstance(report, PowerReport) else float(report)
    return tdp <= budget


__all__ = [
    "Activity",
    "ComputePowerModel",
    "DEFAULT_COMPUTE_POWER",
    "MemoryPowerCoefficients",
    "PowerReport",
    "TierPower",
    "check_tdp",
    "compute_power",
    "design_tdp",
    "memory_tier_power",
    "system_power",
]
