"""Frontier tables: top configurations by tokens per joule under a TDP cap."""

from __future__ import annotations

from dataclasses import dataclass

from ..design import is_capacity_tier
from ..errors import ContractViolation
from .pareto import ParetoArchive
from .space import DesignSpace

FRONTIER_COLUMNS = (
    "rank", "design_id", "compute", "vlen", "tiers", "storage_priority", "dataflow", "bw_priority",
    "precision", "avg_power_w", "tdp_w", "batch", "throughput_tps", "tokens_per_joule",
)
POINT_COLUMNS = ("design_id", "throughput_tps", "power_w", "tokens_per_j", "feasible")


@dataclass(frozen=True)
class FrontierRow:
    design_id: str
    compute: str
    vlen: int
    tiers: str
    storage_priority: str
    dataflow: str
    bw_priority: str
    precision: str
    avg_power_w: float
    tdp_w: float
    batch: int
    throughput_tps: float
    tokens_per_joule: float
    genes: tuple = ()

    def values(self, rank: int) -> list:
        return [rank, self.design_id, self.compute, self.vlen, self.tiers, self.storage_priority,
                self.dataflow, self.bw_priority, self.precision, self.avg_power_w, self.tdp_w,
                self.batch, self.throughput_tps, self.tokens_per_joule]


def row_for(d, rec, genes=()) -> FrontierRow:
    """Row for design ``d``; ``rec`` carries the evaluated metrics."""
    c, s, p = d.compute, d.strategy, d.precision
    return FrontierRow(
        design_id=rec.design_id,
        compute=f"{c.pe_rows}x{c.pe_cols}",
        vlen=c.vlen,
        tiers=" + ".join(d.hierarchy.labels()),
        storage_priority=s.storage_priority.value,
        dataflow=s.dataflow.value,
        bw_priority=s.bw_priority.value,
        precision=f"W{p.weight_bits}A{p.activation_bits}KV{p.kv_bits}",
        avg_power_w=rec.power_w,
        tdp_w=rec.tdp_w,
        batch=rec.batch,
        throughput_tps=rec.throughput_tps,
        tokens_per_joule=rec.tokens_per_joule,
        genes=tuple(genes),
    )


def top_rows(rows: list[FrontierRow], k: int, tdp_budget: float) -> list[FrontierRow]:
    """Filter by TDP, sort by tokens/J (ties: lower power, then id), keep ``k``."""
    rows = [r for r in rows if r.tdp_w <= tdp_budget]
    rows.sort(key=lambda r: (-r.tokens_per_joule, r.avg_power_w, r.design_id))
    return rows[:k]


def pareto_report(archive: ParetoArchive, k: int = 5, tdp_budget: float = 700.0,
                  space: DesignSpace | None = None) -> list[FrontierRow]:
    """Top-``k`` archive members by tokens/J with ``tdp <= tdp_budget``.

    Archive keys are gene vectors of ``space``; payloads are evaluation records.
    """
    if len(archive) == 0:
        raise ContractViolation("archive is empty")
    space = space or DesignSpace()
    return top_rows([row_for(space.to_design(e.key), e.payload, e.key) for e in archive], k, tdp_budget)


@dataclass(frozen=True)
class StructureCheck:
    """Does the tokens/J-best design have the expected memory shape for its stage?"""

    stage: str
    design_id: str
    expectation: str
    satisfied: bool

    def to_dict(self) -> dict:
        return {"stage": self.stage, "design_id": self.design_id, "expectation": self.expectation,
                "satisfied": self.satisfied}

    def message(self) -> str:
        verdict = "ok" if self.satisfied else "DEVIATION"
        return f"structure check ({self.stage}): {self.expectation}: {verdict} [{self.design_id}]"


def structure_check(stage: str, design, design_id: str) -> StructureCheck:
    """Prefill winners should carry 3D-SRAM; decode winners a capacity tier."""
    tiers = design.hierarchy.tiers
    if stage.lower().startswith("prefill"):
        want = "at least one 3D-SRAM layer"
        ok = any(t.tech.name == "SRAM3D" for t in tiers)
    else:
        want = "at least one capacity tier (HBF or LPDDR)"
        ok = any(is_capacity_tier(t) for t in tiers)
    return StructureCheck(stage, design_id, want, ok)


__all__ = ["FRONTIER_COLUMNS", "POINT_COLUMNS", "FrontierRow", "StructureCheck", "pareto_report", "row_for",
           "structure_check", "top_rows"]
