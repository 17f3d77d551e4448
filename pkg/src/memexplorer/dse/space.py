"""Categorical design space, encoding and feasibility filtering.

A configuration is a vector of 14 gene indices. Memory genes fold the
technology type and stack count into one index (0 = absent), so every
gene vector maps to exactly one design.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..catalog import OFFCHIP_UNITS, ShorelineBudget, load_catalog, validate_hierarchy
from ..design import PE_DIMS, VLENS, ComputeSpec, DesignPoint
from ..errors import (
    CapacityExceededError,
    ContractViolation,
    EncodingError,
    InfeasibleBandwidthError,
    InfeasibleDecodeError,
)
from ..hierarchy import HierarchySpec, TierInstance, effective_bandwidths
from ..power import DEFAULT_COMPUTE_POWER, ComputePowerModel, compute_power, design_tdp
from ..workload import (
    BwPriority,
    Dataflow,
    PrecisionConfig,
    SoftwareStrategy,
    Stage,
    StoragePriority,
    Workload,
)

GENES = (
    "pe_array", "vlen", "sram3d", "sram2d", "hbm", "hbf", "gddr", "lpddr",
    "act_bits", "kv_bits", "weight_bits", "storage", "dataflow", "bw",
)
# Off-chip families in tier order: (gene, technology types).
OFFCHIP_FAMILIES = (
    ("hbm", ("HBM3E", "HBM4")),
    ("gddr", ("GDDR6", "GDDR7")),
    ("hbf", ("HBF",)),
    ("lpddr", ("LPDDR5X", "LPDDR6")),
)


def _mem_options(types: Sequence[str], stacks: Sequence[int]) -> tuple:
    return (None,) + tuple((t, s) for t in types for s in stacks)


@dataclass(frozen=True)
class DesignSpace:
    """Per-gene domains; overrides come from ``space.json``."""

    pe_dims: tuple = PE_DIMS
    vlens: tuple = VLENS
    sram3d_layers: tuple = (0, 1, 2, 3, 4)
    sram2d: tuple = (False, True)
    hbm_types: tuple = ("HBM3E", "HBM4")
    hbf_types: tuple = ("HBF",)
    gddr_types: tuple = ("GDDR6", "GDDR7")
    lpddr_types: tuple = ("LPDDR5X", "LPDDR6")
    stacks: tuple = OFFCHIP_UNITS
    act_bits: tuple = (8, 16)
    kv_bits: tuple = (4, 8)
    weight_bits: tuple = (4, 8)
    storage: tuple = tuple(StoragePriority)
    dataflow: tuple = tuple(Dataflow)
    bw: tuple = tuple(BwPriority)
    clock: float = 1e9
    compute_power: ComputePowerModel = DEFAULT_COMPUTE_POWER

    @classmethod
    def from_dict(cls, doc: Mapping) -> "DesignSpace":
        kw = {}
        for key, value in doc.items():
            if key == "pe_dims":
                kw[key] = tuple(tuple(int(v) for v in pair) for pair in value)
            elif key in ("storage",):
                kw[key] = tuple(StoragePriority(v) for v in value)
            elif key == "dataflow":
                kw[key] = tuple(Dataflow(v) for v in value)
            elif key == "bw":
                kw[key] = tuple(BwPriority(v) for v in value)
            elif key == "compute_power":
                kw[key] = ComputePowerModel.from_dict(value)
            elif key == "clock":
                kw[key] = float(value)
            elif key in cls.__dataclass_fields__:
                kw[key] = tuple(value)
            else:
                raise ContractViolation(f"unknown design-space field {key!r}")
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "DesignSpace":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @cached_property
    def domains(self) -> tuple[tuple, ...]:
        return (
            self.pe_dims,
            self.vlens,
            self.sram3d_layers,
            self.sram2d,
            _mem_options(self.hbm_types, self.stacks),
            _mem_options(self.hbf_types, self.stacks),
            _mem_options(self.gddr_types, self.stacks),
            _mem_options(self.lpddr_types, self.stacks),
            self.act_bits,
            self.kv_bits,
            self.weight_bits,
            self.storage,
            self.dataflow,
            self.bw,
        )

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([len(d) for d in self.domains], dtype=np.int64)

    @property
    def cardinality(self) -> int:
        return int(np.prod(self.sizes.astype(object)))

    # -- encoding --------------------------------------------------------

    @cached_property
    def _layout(self):
        """(gene, kind, offset, width) for every gene; kinds: onehot, ordinal, mem."""
        out = []
        off = 0
        for g, name in enumerate(GENES):
            dom = self.domains[g]
            if name in ("pe_array", "storage", "dataflow", "bw"):
                out.append((g, "onehot", off, len(dom)))
                off += len(dom)
            elif name in ("hbm", "hbf", "gddr", "lpddr"):
                n_types = len(getattr(self, f"{name}_types"))
                out.append((g, "mem", off, n_types + 2))
                off += n_types + 2
            else:
                out.append((g, "ordinal", off, 1))
                off += 1
        return tuple(out), off

    @property
    def dim(self) -> int:
        return self._layout[1]

    def encode_genes(self, genes: Sequence[int]) -> np.ndarray:
        genes = self.check_genes(genes)
        v = np.zeros(self.dim)
        for g, kind, off, width in self._layout[0]:
            idx = int(genes[g])
            k = len(self.domains[g])
            if kind == "onehot":
                v[off + idx] = 1.0
            elif kind == "ordinal":
                v[off] = idx / (k - 1) if k > 1 else 0.0
            else:
                opt = self.domains[g][idx]
                types = getattr(self, f"{GENES[g]}_types")
                if opt is None:
                    v[off] = 1.0
                else:
                    v[off + 1 + types.index(opt[0])] = 1.0
                    n = len(self.stacks)
                    v[off + width - 1] = self.stacks.index(opt[1]) / (n - 1) if n > 1 else 1.0
        return v

    @cached_property
    def _encoding_table(self) -> list[np.ndarray]:
        """Per gene, the encoded slice of every option (rows indexed by gene value)."""
        out = []
        for g, _kind, off, width in self._layout[0]:
            rows = []
            for idx in range(len(self.domains[g])):
                genes = np.zeros(len(GENES), dtype=np.int64)
                genes[g] = idx
                rows.append(self.encode_genes(genes)[off:off + width])
            out.append(np.array(rows))
        return out

    def encode_many(self, genes: np.ndarray) -> np.ndarray:
        genes = np.asarray(genes, dtype=np.int64).reshape(-1, len(GENES))
        if np.any(genes < 0) or np.any(genes >= self.sizes):
            raise EncodingError("gene matrix outside the space")
        return np.hstack([tab[genes[:, g]] for g, tab in enumerate(self._encoding_table)])

    def decode_vector(self, v: Sequence[float]) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise EncodingError(f"expected a vector of length {self.dim}")
        genes = np.zeros(len(GENES), dtype=np.int64)
        for g, kind, off, width in self._layout[0]:
            k = len(self.domains[g])
            if kind == "onehot":
                genes[g] = int(np.argmax(v[off:off + width]))
            elif kind == "ordinal":
                genes[g] = int(round(v[off] * (k - 1))) if k > 1 else 0
            else:
                types = getattr(self, f"{GENES[g]}_types")
                t = int(np.argmax(v[off:off + 1 + len(types)]))
                if t == 0:
                    genes[g] = 0
                else:
                    n = len(self.stacks)
                    s = int(round(v[off + width - 1] * (n - 1))) if n > 1 else 0
                    genes[g] = 1 + (t - 1) * n + s
        return genes

    def check_genes(self, genes: Sequence[int]) -> np.ndarray:
        genes = np.asarray(genes, dtype=np.int64)
        if genes.shape != (len(GENES),) or np.any(genes < 0) or np.any(genes >= self.sizes):
            raise EncodingError(f"gene vector {genes.tolist()} outside the space")
        return genes

    # -- conversions -----------------------------------------------------

    def tiers(self, genes: Sequence[int], catalog) -> list[tuple[str, int]]:
        d = self.domains
        pairs = []
        layers = d[2][genes[2]]
        if layers:
            pairs.append(("SRAM3D", layers))
        if d[3][genes[3]]:
            pairs.append(("SRAM2D", 1))
        gene_of = {name: i for i, name in enumerate(GENES)}
        for fam, _ in OFFCHIP_FAMILIES:
            opt = d[gene_of[fam]][genes[gene_of[fam]]]
            if opt is not None:
                pairs.append(opt)
        return pairs

    def to_design(self, genes: Sequence[int], catalog=None) -> DesignPoint:
        genes = self.check_genes(genes)
        catalog = catalog if catalog is not None else _default_catalog()
        d = self.domains
        pairs = self.tiers(genes, catalog)
        if not pairs:
            raise EncodingError("configuration has no memory tier")
        rows, cols = d[0][genes[0]]
        compute = ComputeSpec(rows, cols, d[1][genes[1]], self.clock)
        precision = PrecisionConfig(d[10][genes[10]], d[8][genes[8]], d[9][genes[9]])
        strategy = SoftwareStrategy(d[12][genes[12]], d[11][genes[11]], d[13][genes[13]])
        return DesignPoint(compute, HierarchySpec.from_pairs(catalog, pairs), precision, strategy,
                           self.compute_power)

    def from_design(self, design: DesignPoint) -> np.ndarray:
        """Inverse of :meth:`to_design`; raises for off-space designs."""
        d = self.domains
        genes = np.zeros(len(GENES), dtype=np.int64)

        def index(g, value):
            try:
                return d[g].index(value)
            except ValueError:
                raise EncodingError(f"{GENES[g]} value {value!r} outside the space") from None

        c = design.compute
        genes[0] = index(0, (c.pe_rows, c.pe_cols))
        genes[1] = index(1, c.vlen)
        found = {t.tech.name: t.units for t in design.hierarchy.tiers}
        if len(found) != len(design.hierarchy.tiers):
            raise EncodingError("a technology appears twice in the hierarchy")
        genes[2] = index(2, found.pop("SRAM3D", 0))
        genes[3] = index(3, found.pop("SRAM2D", None) is not None)
        for fam, types in OFFCHIP_FAMILIES:
            g = GENES.index(fam)
            present = [(t, found.pop(t)) for t in types if t in found]
            if len(present) > 1:
                raise EncodingError(f"two {fam} technologies in one design")
            genes[g] = index(g, present[0] if present else None)
        if found:
            raise EncodingError(f"technologies {sorted(found)} outside the space")
        p = design.precision
        genes[8] = index(8, p.activation_bits)
        genes[9] = index(9, p.kv_bits)
        genes[10] = index(10, p.weight_bits)
        s = design.strategy
        genes[11] = index(11, s.storage_priority)
        genes[12] = index(12, s.dataflow)
        genes[13] = index(13, s.bw_priority)
        return genes

    def sample_genes(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.column_stack([rng.integers(0, k, size=n) for k in self.sizes])

    def snap(self, u: np.ndarray) -> np.ndarray:
        """Map points of the unit cube to gene indices (cell containing ``u``)."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, np.nextafter(1.0, 0.0))
        return np.floor(u * self.sizes).astype(np.int64)


_CATALOG = None


def _default_catalog():
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = load_catalog()
    return _CATALOG


def genes_key(genes: Sequence[int]) -> tuple:
    return tuple(int(g) for g in genes)


@dataclass
class FeasibilityFilter:
    """Cached feasibility test: shoreline, bandwidth, TDP and capacity."""

    space: DesignSpace
    workload: Workload
    stage: Stage
    tdp_budget: float
    catalog: dict = field(default_factory=_default_catalog)
    budget: ShorelineBudget = ShorelineBudget()

    def __post_init__(self):
        self.stage = Stage(self.stage)
        self._mem = {}
        self._fit = {}
        self._full = {}

    def _memory_ok(self, genes) -> tuple[bool, float]:
        key = tuple(int(g) for g in genes[2:8])
        hit = self._mem.get(key)
        if hit is not None:
            return hit
        pairs = self.space.tiers(genes, self.catalog)
        ok, mem_tdp = False, math.inf
        if pairs:
            spec = HierarchySpec.from_pairs(self.catalog, pairs)
            if validate_hierarchy(spec, self.catalog, self.budget).feasible:
                try:
                    effective_bandwidths(spec)
                    ok = True
                except InfeasibleBandwidthError:
                    ok = False
            if ok:
                mem_tdp = sum(
                    t.tech.p_bg * t.aggregate_capacity / 1e9 + t.tech.e_read * t.aggregate_peak_bandwidth * 8
                    for t in spec.tiers
                )
        self._mem[key] = (ok, mem_tdp)
        return ok, mem_tdp

    def _capacity_ok(self, genes) -> bool:
        key = tuple(int(g) for g in genes[2:11]) + (int(genes[12]), int(genes[11]))
        hit = self._fit.get(key)
        if hit is not None:
            return hit
        from ..evaluator import decode_batch
        from ..workload import expand_workload_flavor, stage_placement

        design = self.space.to_design(genes, self.catalog)
        ok = True
        try:
            if self.stage is Stage.DECODE:
                decode_batch(design, self.workload)
            else:
                for ps in expand_workload_flavor(self.workload.model, self.workload.trace, Stage.PREFILL):
                    stage_placement(self.workload.model, design.precision, design.strategy,
                                    design.hierarchy, 1, ps)
        except (CapacityExceededError, InfeasibleDecodeError):
            ok = False
        self._fit[key] = ok
        return ok

    def tdp(self, genes) -> float:
        ok, mem = self._memory_ok(genes)
        rows, cols = self.space.domains[0][genes[0]]
        comp = compute_power(ComputeSpec(rows, cols, self.space.domains[1][genes[1]], self.space.clock),
                             1.0, 1.0, self.space.compute_power)
        return comp + mem

    def __call__(self, genes) -> bool:
        genes = self.space.check_genes(genes)
        key = genes_key(genes)
        hit = self._full.get(key)
        if hit is not None:
            return hit
        ok, _ = self._memory_ok(genes)
        ok = ok and self.tdp(genes) <= self.tdp_budget and self._capacity_ok(genes)
        self._full[key] = ok
        return ok

    def _tables(self):
        if getattr(self, "_mem_table", None) is None:
            sizes = self.space.sizes
            mem_shape = tuple(int(k) for k in sizes[2:8])
            ok = np.zeros(mem_shape, dtype=bool)
            tdp = np.full(mem_shape, np.inf)
            probe = np.zeros(len(GENES), dtype=np.int64)
            for idx in np.ndindex(*mem_shape):
                probe[2:8] = idx
                ok[idx], tdp[idx] = self._memory_ok(probe)
            comp = np.zeros((int(sizes[0]), int(sizes[1])))
            for a in range(int(sizes[0])):
                rows, cols = self.space.domains[0][a]
                for b in range(int(sizes[1])):
                    spec = ComputeSpec(rows, cols, self.space.domains[1][b], self.space.clock)
                    comp[a, b] = compute_power(spec, 1.0, 1.0, self.space.compute_power)
            self._mem_table, self._mem_tdp, self._comp_tdp = ok, tdp, comp
        return self._mem_table, self._mem_tdp, self._comp_tdp

    def _capacity_tables(self):
        """Closed-form capacity check inputs (see :meth:`mask`)."""
        if getattr(self, "_cap", None) is None:
            from ..workload import (
                _STATIONARY_CLASS,
                _stationary_staging,
                expand_workload_flavor,
                kv_bytes_per_token,
                stage_class_sizes,
                weight_bytes,
            )

            sizes = self.space.sizes
            mem_shape = tuple(int(k) for k in sizes[2:8])
            on_cap = np.zeros(mem_shape)
            tot_cap = np.zeros(mem_shape)
            probe = np.zeros(len(GENES), dtype=np.int64)
            for idx in np.ndindex(*mem_shape):
                probe[2:8] = idx
                pairs = self.space.tiers(probe, self.catalog)
                if pairs:
                    spec = HierarchySpec.from_pairs(self.catalog, pairs)
                    caps = spec.capacities
                    tot_cap[idx] = sum(caps)
                    on_cap[idx] = sum(c for c, t in zip(caps, spec.tiers) if t.tech.on_chip)
            model, trace = self.workload.model, self.workload.trace
            stage = Stage.DECODE if self.stage is Stage.DECODE else Stage.PREFILL
            passes = expand_workload_flavor(model, trace, stage)
            d = self.space.domains
            shape = (int(sizes[8]), int(sizes[9]), int(sizes[10]), int(sizes[12]))
            # per pass: total bytes, stationary bytes, staging bytes
            need = np.zeros(shape + (len(passes), 3))
            floor_need = np.zeros(shape)
            for a, k, w, f in np.ndindex(*shape):
                prec = PrecisionConfig(d[10][w], d[8][a], d[9][k])
                cls = _STATIONARY_CLASS[d[12][f]]
                for j, ps in enumerate(passes):
                    cs = stage_class_sizes(model, prec, 1, ps)
                    need[a, k, w, f, j] = (sum(cs.values()), cs[cls],
                                           _stationary_staging(model, prec, cls, cs))
                if stage is Stage.DECODE:
                    floor_need[a, k, w, f] = (weight_bytes(model, prec)
                                              + kv_bytes_per_token(model, prec) * trace.total_tokens)
            self._cap = (on_cap, tot_cap, need, floor_need)
        return self._cap

    def _capacity_margin(self, genes: np.ndarray) -> np.ndarray:
        """Relative slack of the tightest capacity condition (>= 0 means fits)."""
        on_cap, tot_cap, need, floor_need = self._capacity_tables()
        mem_idx = tuple(genes[:, 2 + k] for k in range(6))
        on, tot = on_cap[mem_idx], tot_cap[mem_idx]
        prec_idx = (genes[:, 8], genes[:, 9], genes[:, 10], genes[:, 12])
        margin = np.full(len(genes), np.inf)
        safe = np.maximum(tot, 1.0)
        for j in range(need.shape[-2]):
            total, stat, staging = (need[prec_idx + (j, c)] for c in range(3))
            reserve = np.where(stat <= on, 0.0, np.minimum(on, staging))
            margin = np.minimum(margin, (tot - total - reserve) / safe)
        if self.stage is Stage.DECODE:
            margin = np.minimum(margin, (tot - floor_need[prec_idx]) / safe)
        return margin

    def mask(self, genes: np.ndarray) -> np.ndarray:
        """Vectorised feasibility for many gene vectors.

        Capacity uses a closed form: everything fits unless the footprint
        plus any unused on-chip staging reservation exceeds the hierarchy.
        Rows within 1e-6 of the boundary take the exact path.
        """
        genes = np.asarray(genes, dtype=np.int64).reshape(-1, len(GENES))
        ok_t, mem_t, comp_t = self._tables()
        mem_idx = tuple(genes[:, 2 + k] for k in range(6))
        ok = ok_t[mem_idx] & (mem_t[mem_idx] + comp_t[genes[:, 0], genes[:, 1]] <= self.tdp_budget)
        margin = self._capacity_margin(genes)
        close = ok & (np.abs(margin) < 1e-6)
        ok &= margin >= 0
        for i in np.flatnonzero(close):
            ok[i] = self._capacity_ok(genes[i])
        return ok

    def reasons(self, genes) -> list[str]:
        """Human-readable list of violated constraints (empty when feasible)."""
        genes = self.space.check_genes(genes)
        out = []
        pairs = self.space.tiers(genes, self.catalog)
        if not pairs:
            return ["no memory tier"]
        spec = HierarchySpec.from_pairs(self.catalog, pairs)
        out.extend(validate_hierarchy(spec, self.catalog, self.budget).reasons)
        try:
            effective_bandwidths(spec)
        except InfeasibleBandwidthError as exc:
            out.append(str(exc))
            return out
        if self.tdp(genes) > self.tdp_budget:
            out.append(f"TDP {self.tdp(genes):.1f} W exceeds {self.tdp_budget:.1f} W")
        if not out and not self._capacity_ok(genes):
            out.append("footprint does not fit the hierarchy")
        return out


def design_tdp_of(space: DesignSpace, genes) -> float:
    return design_tdp(space.to_design(genes))


__all__ = [
    "DesignSpace",
    "FeasibilityFilter",
    "GENES",
    "OFFCHIP_FAMILIES",
    "design_tdp_of",
    "genes_key",
]
