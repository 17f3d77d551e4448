"""Memory technology registry and die-shoreline integration limits.

The bundled ``catalog.json`` stores one object per technology in datasheet
units (ns, GB, GB/s, mm, mW/GB, pJ/bit). :func:`load_catalog` converts them
to SI so the rest of the package works in bytes, seconds, watts and joules.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CatalogParseError, CatalogValidationError, DomainError

GB = 1e9
RETICLE_EDGE_MM = 33.0
MAX_MEMORY_EDGE_MM = 2 * RETICLE_EDGE_MM

# Allowed unit counts per technology in constrained mode.
OFFCHIP_UNITS = (1, 2, 4, 8)
SRAM3D_LAYERS = (1, 2, 3, 4)
SRAM2D_UNITS = (1,)
MAX_OFFCHIP_TIERS = 3

CATALOG_ENV = "MEMEXPLORER_CATALOG"

_FIELDS = (
    "name",
    "kind",
    "latency",
    "capacity_per_unit",
    "bandwidth_per_unit",
    "shoreline_per_unit",
    "p_bg",
    "e_read",
    "e_write",
)


class MemoryKind(str, Enum):
    ON_CHIP = "OnChip"
    OFF_CHIP = "OffChip"


@dataclass(frozen=True)
class MemoryTechnology:
    """One memory technology, all fields in SI units.

    ``p_bg`` is watts per gigabyte of installed capacity; ``e_read`` and
    ``e_write`` are joules per bit.
    """

    name: str
    kind: MemoryKind
    latency: float
    capacity_per_unit: float
    bandwidth_per_unit: float
    shoreline_per_unit: float | None
    p_bg: float
    e_read: float
    e_write: float

    def __post_init__(self):
        for attr in ("latency", "capacity_per_unit", "bandwidth_per_unit", "p_bg", "e_read", "e_write"):
            value = getattr(self, attr)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise CatalogValidationError(f"{self.name}: field '{attr}' must be > 0, got {value!r}")
        if self.kind is MemoryKind.ON_CHIP:
            if self.shoreline_per_unit is not None:
                raise CatalogValidationError(
                    f"{self.name}: field 'shoreline_per_unit' must be absent for on-chip memory"
                )
        else:
            s = self.shoreline_per_unit
            if s is None or not (math.isfinite(s) and s > 0):
                raise CatalogValidationError(
                    f"{self.name}: field 'shoreline_per_unit' must be > 0 for off-chip memory, got {s!r}"
                )

    @property
    def on_chip(self) -> bool:
        return self.kind is MemoryKind.ON_CHIP

    @classmethod
    def from_record(cls, record: Mapping) -> "MemoryTechnology":
        """Build from a catalog record in datasheet units."""
        name = record.get("name", "<unnamed>")
        for key in _FIELDS:
            if key not in record:
                raise CatalogParseError(f"entry {name!r}: missing field '{key}'")
        unknown = set(record) - set(_FIELDS)
        if unknown:
            raise CatalogParseError(f"entry {name!r}: unknown field(s) {sorted(unknown)}")
        try:
            kind = MemoryKind(record["kind"])
        except ValueError:
            raise CatalogParseError(f"entry {name!r}: field 'kind' must be OnChip or OffChip") from None

        def num(key):
            value = record[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise CatalogParseError(f"entry {name!r}: field '{key}' is not a number")
            return float(value)

        shoreline = record["shoreline_per_unit"]
        if shoreline is not None:
            shoreline = num("shoreline_per_unit")
        return cls(
            name=str(name),
            kind=kind,
            latency=num("latency") * 1e-9,
            capacity_per_unit=num("capacity_per_unit") * GB,
            bandwidth_per_unit=num("bandwidth_per_unit") * GB,
            shoreline_per_unit=shoreline,
            p_bg=num("p_bg") * 1e-3,
            e_read=num("e_read") * 1e-12,
            e_write=num("e_write") * 1e-12,
        )

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "latency": self.latency * 1e9,
            "capacity_per_unit": self.capacity_per_unit / GB,
            "bandwidth_per_unit": self.bandwidth_per_unit / GB,
            "shoreline_per_unit": self.shoreline_per_unit,
            "p_bg": self.p_bg * 1e3,
            "e_read": self.e_read * 1e12,
            "e_write": self.e_write * 1e12,
        }


@dataclass(frozen=True)
class ShorelineBudget:
    """Die-edge length reserved for memory PHYs, plus a per-stack margin (mm)."""

    l_mem: float = MAX_MEMORY_EDGE_MM
    l_margin: float = 1.0

    def __post_init__(self):
        if not (0 < self.l_mem <= MAX_MEMORY_EDGE_MM):
            raise DomainError(f"l_mem must lie in (0, {MAX_MEMORY_EDGE_MM}] mm, got {self.l_mem}")
        if self.l_margin < 0:
            raise DomainError(f"l_margin must be >= 0, got {self.l_margin}")


def default_catalog_path() -> Path:
    override = os.environ.get(CATALOG_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("memexplorer") / "data" / "catalog.json"))


def parse_catalog(records: Iterable[Mapping]) -> dict[str, MemoryTechnology]:
    catalog: dict[str, MemoryTechnology] = {}
    for record in records:
        if not isinstance(record, Mapping):
            raise CatalogParseError(f"catalog entries must be objects, got {type(record).__name__}")
        tech = MemoryTechnology.from_record(record)
        if tech.name in catalog:
            raise CatalogParseError(f"duplicate entry {tech.name!r}")
        catalog[tech.name] = tech
    return catalog


def load_catalog(source: str | os.PathLike | None = None) -> dict[str, MemoryTechnology]:
    """Load a technology catalog (defaults to the bundled one).

    Raises :class:`CatalogParseError` for malformed documents and
    :class:`CatalogValidationError` when an entry breaks an invariant.
    """
    path = Path(source) if source is not None else default_catalog_path()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CatalogParseError(f"cannot read catalog {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogParseError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(doc, Mapping) and "technologies" in doc:
        doc = doc["technologies"]
    if not isinstance(doc, list):
        raise CatalogParseError(f"{path}: expected an array of technology objects")
    return parse_catalog(doc)


def max_stacks(tech: MemoryTechnology, budget: ShorelineBudget = ShorelineBudget()) -> int:
    """Largest number of units of ``tech`` that fits along the memory edge."""
    if tech.on_chip:
        raise DomainError(f"{tech.name} is on-chip; shoreline limits do not apply")
    return int(math.floor(budget.l_mem / (tech.shoreline_per_unit + budget.l_margin)))


@dataclass
class FeasibilityReport:
    feasible: bool
    shoreline_used: float
    l_mem: float
    reasons: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.feasible


def allowed_units(tech: MemoryTechnology) -> tuple[int, ...]:
    if not tech.on_chip:
        return OFFCHIP_UNITS
    if tech.name == "SRAM3D":
        return SRAM3D_LAYERS
    return SRAM2D_UNITS


def validate_hierarchy(spec, catalog=None, budget: ShorelineBudget = ShorelineBudget(),
                       constrained: bool = True) -> FeasibilityReport:
    """Check unit counts, summed shoreline and tier ordering of a hierarchy.

    Infeasibility is reported, never raised. With ``constrained=False`` the
    categorical unit-count and tier-count limits are skipped; the shoreline
    and ordering rules always apply.
    """
    reasons = []
    used = 0.0
    seen_offchip = False
    n_offchip = 0
    for level, tier in enumerate(spec.tiers, start=1):
        tech = tier.tech
        if catalog is not None and tech.name not in catalog:
            reasons.append(f"tier {level}: technology {tech.name!r} not in catalog")
        if constrained and tier.units not in allowed_units(tech):
            reasons.append(
                f"tier {level}: {tech.name} x{tier.units} not in allowed set {allowed_units(tech)}"
            )
        if tech.on_chip:
            if seen_offchip:
                reasons.append(f"tier {level}: on-chip {tech.name} placed after an off-chip tier")
        else:
            seen_offchip = True
            n_offchip += 1
            used += tier.units * (tech.shoreline_per_unit + budget.l_margin)
    if constrained and n_offchip > MAX_OFFCHIP_TIERS:
        reasons.append(f"{n_offchip} off-chip tiers exceed the L1..L{MAX_OFFCHIP_TIERS} limit")
    if used > budget.l_mem + 1e-9:
        reasons.append(
            f"off-chip shoreline {used:.2f} mm exceeds memory edge {budget.l_mem:.2f} mm "
            f"(stack limit floor(L_mem / (L_PHY + L_margin)))"
        )
    return FeasibilityReport(not reasons, used, budget.l_mem, reasons)
