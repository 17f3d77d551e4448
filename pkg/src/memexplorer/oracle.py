"""Chunked discrete-event simulator for the hierarchical transfer model.

Every boundary is a single FIFO server that opens after the tier's fixed
latency and drains at its effective bandwidth. A chunk stored at tier ``j``
queues at boundary ``j`` from t = 0 and can enter boundary ``j - 1`` only
after it has fully crossed boundary ``j`` (chunk-level double buffering).
The simulation is independent of the closed-form recursion in
:mod:`memexplorer.hierarchy` and is used to check it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .catalog import allowed_units, load_catalog
from .errors import ContractViolation, InfeasibleBandwidthError
from .hierarchy import HierarchySpec, TierInstance, TransferRequest, effective_bandwidths, total_transfer_time

MIB = 1 << 20


@dataclass(frozen=True)
class OracleConfig:
    hierarchy: HierarchySpec
    placement: TransferRequest
    chunk_bytes: float = MIB

    def __post_init__(self):
        if not self.chunk_bytes > 0:
            raise ContractViolation(f"chunk_bytes must be > 0, got {self.chunk_bytes}")
        if len(self.placement.placement) != len(self.hierarchy):
            raise ContractViolation("placement length does not match the hierarchy")


def _chunks(nbytes: float, chunk: float) -> np.ndarray:
    if nbytes <= 0:
        return np.empty(0)
    full = int(nbytes // chunk)
    rest = nbytes - full * chunk
    sizes = np.full(full, float(chunk))
    if rest > 1e-9 * chunk or full == 0:
        sizes = np.append(sizes, rest)
    return sizes


def simulate_transfer(cfg: OracleConfig) -> float:
    """Completion time (s) of the last chunk at the compute unit."""
    spec = cfg.hierarchy
    beff = effective_bandwidths(spec)
    x = cfg.placement.total_bytes
    lat = spec.latencies
    n = len(spec)

    arrivals = np.empty(0)
    sizes = np.empty(0)
    for i in range(n - 1, -1, -1):
        local = _chunks(cfg.placement.placement[i] * x, cfg.chunk_bytes)
        arr = np.concatenate([np.zeros(len(local)), arrivals])
        siz = np.concatenate([local, sizes])
        order = np.argsort(arr, kind="stable")
        arr = np.ascontiguousarray(arr[order])
        siz = np.ascontiguousarray(siz[order])
        arrivals = kernels.serve_boundary(arr, siz, float(lat[i]), float(beff[i]))
        sizes = siz
    last = float(arrivals.max()) if len(arrivals) else 0.0
    return max(last, max(lat))


@dataclass
class OracleCase:
    index: int
    tiers: list[str]
    placement: list[float]
    total_bytes: float
    analytic: float
    oracle: float
    rel_err: float


@dataclass
class OracleReport:
    cases: list[OracleCase]
    tolerance: float
    max_rel_err: float
    mean_rel_err: float
    failures: list[OracleCase] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        def row(c):
            return {
                "index": c.index,
                "tiers": c.tiers,
                "placement": c.placement,
                "total_bytes": c.total_bytes,
                "analytic_s": c.analytic,
                "oracle_s": c.oracle,
                "rel_err": c.rel_err,
            }

        return {
            "n_cases": len(self.cases),
            "tolerance": self.tolerance,
            "max_rel_err": self.max_rel_err,
            "mean_rel_err": self.mean_rel_err,
            "failures": [row(c) for c in self.failures],
            "cases": [row(c) for c in self.cases],
        }


def random_hierarchy(rng: np.random.Generator, catalog, max_levels: int = 4) -> HierarchySpec:
    """Draw a hierarchy with positive effective bandwidth everywhere."""
    onchip = [t for t in catalog.values() if t.on_chip]
    offchip = [t for t in catalog.values() if not t.on_chip]
    while True:
        levels = int(rng.integers(1, max_levels + 1))
        n_on = int(rng.integers(0, min(2, levels) + 1)) if onchip else 0
        techs = [onchip[int(rng.integers(len(onchip)))] for _ in range(n_on)]
        techs += [offchip[int(rng.integers(len(offchip)))] for _ in range(levels - n_on)]
        tiers = []
        for tech in techs:
            units = allowed_units(tech)
            tiers.append(TierInstance(tech, int(units[int(rng.integers(len(units)))])))
        spec = HierarchySpec(tuple(tiers))
        try:
            effective_bandwidths(spec)
        except InfeasibleBandwidthError:
            continue
        return spec


def validate_against_analytic(n_cases: int = 50, seed: int = 7, tolerance: float = 0.02,
                              chunk_bytes: float = MIB, catalog=None, max_levels: int = 4,
                              x_range: tuple[float, float] = (1e6, 1e10)) -> OracleReport:
    """Compare oracle and closed form on seeded random instances."""
    if n_cases < 1:
        raise ContractViolation("n_cases must be >= 1")
    catalog = catalog if catalog is not None else load_catalog()
    rng = np.random.default_rng(seed)
    cases = []
    for k in range(n_cases):
        spec = random_hierarchy(rng, catalog, max_levels)
        alpha = rng.dirichlet(np.ones(len(spec)))
        alpha[-1] = max(0.0, 1.0 - float(alpha[:-1].sum()))
        x = float(rng.uniform(*x_range))
        req = TransferRequest(x, tuple(alpha))
        analytic = total_transfer_time(req, spec)
        sim = simulate_transfer(OracleConfig(spec, req, chunk_bytes))
        err = abs(sim - analytic) / analytic
        cases.append(OracleCase(k, spec.labels(), [float(a) for a in alpha], x, analytic, sim, err))
    errs = [c.rel_err for c in cases]
    failures = [c for c in cases if c.rel_err > tolerance]
    return OracleReport(cases, tolerance, max(errs), float(np.mean(errs)), failures)


def oracle_lower_bound(cfg: OracleConfig) -> float:
    """Boundary-1 service bound minus one chunk's service time."""
    beff = effective_bandwidths(cfg.hierarchy)
    x = cfg.placement.total_bytes
    return cfg.hierarchy.latencies[0] + x / beff[0] - min(cfg.chunk_bytes, x) / beff[0]


__all__ = [
    "MIB",
    "OracleConfig",
    "OracleCase",
    "OracleReport",
    "simulate_transfer",
    "validate_against_analytic",
    "random_hierarchy",
    "oracle_lower_bound",
]
