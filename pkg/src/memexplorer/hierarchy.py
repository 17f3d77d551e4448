"""Multi-level memory hierarchy and the double-buffered transfer model.

Level 0 is the compute unit; tier ``i`` (1-based) sits ``i`` boundaries away.
Boundary ``i`` moves data out of tier ``i`` toward level ``i - 1`` at the
tier's effective bandwidth and pays the tier's latency once per request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .catalog import MemoryTechnology
from .errors import ContractViolation, InfeasibleBandwidthError

ALPHA_TOL = 1e-9


@dataclass(frozen=True)
class TierInstance:
    tech: MemoryTechnology
    units: int

    def __post_init__(self):
        if int(self.units) != self.units or self.units < 1:
            raise ContractViolation(f"{self.tech.name}: units must be a positive integer, got {self.units}")

    @property
    def aggregate_capacity(self) -> float:
        return self.units * self.tech.capacity_per_unit

    @property
    def aggregate_peak_bandwidth(self) -> float:
        return self.units * self.tech.bandwidth_per_unit

    @property
    def latency(self) -> float:
        return self.tech.latency

    def label(self) -> str:
        return f"{self.tech.name}x{self.units}"


@dataclass(frozen=True)
class HierarchySpec:
    tiers: tuple[TierInstance, ...]

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))
        if not self.tiers:
            raise ContractViolation("a hierarchy needs at least one tier")

    @classmethod
    def from_pairs(cls, catalog, pairs) -> "HierarchySpec":
        """``pairs`` is an iterable of ``(tech_name, units)``."""
        return cls(tuple(TierInstance(catalog[name], int(units)) for name, units in pairs))

    def __len__(self):
        return len(self.tiers)

    @property
    def peaks(self) -> list[float]:
        return [t.aggregate_peak_bandwidth for t in self.tiers]

    @property
    def latencies(self) -> list[float]:
        return [t.latency for t in self.tiers]

    @property
    def capacities(self) -> list[float]:
        return [t.aggregate_capacity for t in self.tiers]

    @property
    def total_capacity(self) -> float:
        return sum(self.capacities)

    @property
    def onchip_count(self) -> int:
        return sum(1 for t in self.tiers if t.tech.on_chip)

    def labels(self) -> list[str]:
        return [t.label() for t in self.tiers]


@dataclass(frozen=True)
class TransferRequest:
    total_bytes: float
    placement: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "placement", tuple(float(a) for a in self.placement))
        if self.total_bytes < 0 or not math.isfinite(self.total_bytes):
            raise ContractViolation(f"total_bytes must be finite and >= 0, got {self.total_bytes}")
        if any(a < -ALPHA_TOL or a > 1 + ALPHA_TOL for a in self.placement):
            raise ContractViolation(f"placement fractions must lie in [0, 1]: {self.placement}")
        if abs(sum(self.placement) - 1.0) > ALPHA_TOL:
            raise ContractViolation(f"placement must sum to 1, got {sum(self.placement)!r}")


def effective_bandwidths_from_peaks(peaks: Sequence[float]) -> list[float]:
    """Seed the deepest boundary with its peak and subtract inward."""
    n = len(peaks)
    beff = [0.0] * n
    deeper = 0.0
    for i in range(n - 1, -1, -1):
        beff[i] = peaks[i] - deeper
        deeper = beff[i]
    for i, b in enumerate(beff):
        if not b > 0:
            raise InfeasibleBandwidthError(i + 1, b)
    return beff


def effective_bandwidths(spec: HierarchySpec) -> list[float]:
    """Effective bandwidth of each boundary 1..L, in bytes/s."""
    return effective_bandwidths_from_peaks(spec.peaks)


def boundary_time(x: float, alpha: float, boundary: int, spec: HierarchySpec,
                  beff: Sequence[float] | None = None) -> float:
    """Latency plus transfer time of the ``alpha`` share of ``x`` at one boundary."""
    if beff is None:
        beff = effective_bandwidths(spec)
    i = boundary - 1
    return spec.tiers[i].latency + alpha * x / beff[i]


def transfer_time(x: float, alphas: Sequence[float], latencies: Sequence[float],
                  beff: Sequence[float]) -> float:
    """Recursive double-buffered transfer time on raw arrays.

    At each level the full remaining payload crossing the boundary is
    compared with the time the deeper levels need for their share; the
    larger of the two wins (the deeper supply is hidden or it stalls).
    """
    n = len(alphas)

    def level(i, xi):
        tau = latencies[i] + xi / beff[i]
        if i == n - 1:
            return tau
        deep = level(i + 1, (1.0 - alphas[i]) * xi)
        if deep <= tau:
            return tau
        return deep

    return level(0, float(x))


def _remaining_fractions(alphas: Sequence[float]) -> list[float]:
    """Turn absolute placement fractions into per-level shares of what remains."""
    out = []
    remaining = 1.0
    for a in alphas:
        if remaining <= 0:
            out.append(1.0)
        else:
            out.append(min(1.0, max(0.0, a / remaining)))
        remaining -= a
    out[-1] = 1.0
    return out


def total_transfer_time(req: TransferRequest, spec: HierarchySpec, share: float = 1.0,
                        beff: Sequence[float] | None = None) -> float:
    """Total time to deliver ``req`` to the compute unit.

    ``share`` scales every boundary's effective bandwidth (bandwidth split
    between matrix and vector streams).
    """
    if len(req.placement) != len(spec):
        raise ContractViolation(
            f"placement has {len(req.placement)} entries for a {len(spec)}-tier hierarchy"
        )
    if beff is None:
        beff = effective_bandwidths(spec)
    if share != 1.0:
        beff = [b * share for b in beff]
    # alpha_i in the recursion is relative to the payload still in flight at level i.
    return transfer_time(req.total_bytes, _remaining_fractions(req.placement), spec.latencies, beff)
