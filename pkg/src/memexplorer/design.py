"""Design points: compute array, memory hierarchy, precision and strategy."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .catalog import MemoryKind, ShorelineBudget, load_catalog, validate_hierarchy
from .errors import ContractViolation, DomainError
from .hierarchy import HierarchySpec
from .power import DEFAULT_COMPUTE_POWER, ComputePowerModel
from .workload import PrecisionConfig, SoftwareStrategy

# Square-ish arrays enumerated for the search, plus the larger arrays used by
# the reference and tuned designs.
TABLE_PE_DIMS = ((128, 128), (64, 256), (32, 512), (16, 1024))
LARGE_PE_DIMS = ((2048, 64), (1024, 64), (2048, 128), (1024, 512), (2048, 256))
PE_DIMS = TABLE_PE_DIMS + LARGE_PE_DIMS
PE_COUNT_LIMIT = 2048 * 256
VLENS = (128, 256, 512, 1024, 2048)


@dataclass(frozen=True)
class ComputeSpec:
    pe_rows: int
    pe_cols: int
    vlen: int
    clock: float = 1e9

    def __post_init__(self):
        if min(self.pe_rows, self.pe_cols, self.vlen) < 1 or not self.clock > 0:
            raise ContractViolation("compute dimensions and clock must be positive")

    @property
    def pe_count(self) -> int:
        return self.pe_rows * self.pe_cols

    @property
    def peak_flops(self) -> float:
        return 2.0 * self.pe_count * self.clock

    def check_constrained(self):
        if (self.pe_rows, self.pe_cols) not in PE_DIMS:
            raise DomainError(f"PE array {self.pe_rows}x{self.pe_cols} not in the enumerated set")
        if self.pe_count > PE_COUNT_LIMIT:
            raise DomainError("PE array exceeds 2048x256")
        if self.vlen not in VLENS:
            raise DomainError(f"VLEN {self.vlen} not in {VLENS}")


@dataclass(frozen=True)
class DesignPoint:
    compute: ComputeSpec
    hierarchy: HierarchySpec
    precision: PrecisionConfig = PrecisionConfig()
    strategy: SoftwareStrategy = SoftwareStrategy()
    compute_power: ComputePowerModel = field(default=DEFAULT_COMPUTE_POWER)
    name: str = ""

    def feasibility(self, budget: ShorelineBudget = ShorelineBudget(), constrained: bool = True):
        return validate_hierarchy(self.hierarchy, None, budget, constrained)

    def to_dict(self) -> dict:
        doc = {
            "compute": {"pe_rows": self.compute.pe_rows, "pe_cols": self.compute.pe_cols,
                        "vlen": self.compute.vlen, "clock_hz": self.compute.clock},
            "hierarchy": [{"tech": t.tech.name, "units": t.units} for t in self.hierarchy.tiers],
            "precision": {"w": self.precision.weight_bits, "a": self.precision.activation_bits,
                          "kv": self.precision.kv_bits},
            "strategy": self.strategy.to_dict(),
        }
        if self.compute_power != DEFAULT_COMPUTE_POWER:
            doc["compute_power"] = self.compute_power.to_dict()
        if self.name:
            doc = {"name": self.name, **doc}
        return doc

    def canonical_json(self) -> str:
        doc = self.to_dict()
        doc.pop("name", None)
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @property
    def design_id(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]

    def summary(self) -> str:
        c = self.compute
        mem = " + ".join(self.hierarchy.labels())
        s = self.strategy
        p = self.precision
        return (f"{c.pe_rows}x{c.pe_cols}/V{c.vlen} | {mem} | {s.storage_priority.value}/"
                f"{s.dataflow.value}/{s.bw_priority.value} | W{p.weight_bits}A{p.activation_bits}KV{p.kv_bits}")

    @classmethod
    def from_dict(cls, doc: Mapping, catalog=None) -> "DesignPoint":
        catalog = catalog if catalog is not None else load_catalog()
        try:
            c = doc["compute"]
            compute = ComputeSpec(int(c["pe_rows"]), int(c["pe_cols"]), int(c["vlen"]),
                                  float(c.get("clock_hz", c.get("clock", 1e9))))
            tiers = []
            for t in doc["hierarchy"]:
                if t["tech"] not in catalog:
                    raise ContractViolation(f"technology {t['tech']!r} not in catalog")
                tiers.append((t["tech"], int(t["units"])))
            hierarchy = HierarchySpec.from_pairs(catalog, tiers)
            pr = doc.get("precision") or {}
            precision = PrecisionConfig(int(pr.get("w", 8)), int(pr.get("a", 8)), int(pr.get("kv", 8)))
            st = doc.get("strategy") or {}
            strategy = SoftwareStrategy(st.get("dataflow", "WS"), st.get("storage_priority", "Equal"),
                                        st.get("bw_priority", "Equal"))
            cp = ComputePowerModel.from_dict(doc.get("compute_power"))
            if "clock_hz" in (doc.get("compute") or {}) and "compute_power" not in doc:
                cp = ComputePowerModel.from_dict({"clock": compute.clock})
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractViolation(f"invalid design document: {exc!r}") from exc
        return cls(compute, hierarchy, precision, strategy, cp, str(doc.get("name", "")))

    @classmethod
    def load(cls, path, catalog=None) -> "DesignPoint":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")), catalog)


def is_capacity_tier(tier) -> bool:
    return tier.tech.kind is MemoryKind.OFF_CHIP and tier.tech.name in ("HBF", "LPDDR5X", "LPDDR6")


__all__ = [
    "ComputeSpec",
    "DesignPoint",
    "LARGE_PE_DIMS",
    "PE_COUNT_LIMIT",
    "PE_DIMS",
    "TABLE_PE_DIMS",
    "VLENS",
    "is_capacity_tier",
]
