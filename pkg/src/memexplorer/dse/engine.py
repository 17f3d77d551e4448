"""Design-space exploration loop: Sobol start, then EHVI, NSGA-II or random.

All three methods share the same Sobol prefix for a given seed. Every
evaluation (duplicates included) consumes one step of the budget, and the
hypervolume of the archive is recorded after each step.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import qmc

from ..errors import ContractViolation, SearchSpaceError, SpaceExhausted
from ..evaluator import eval_decode, eval_prefill
from ..workload import Stage, Workload
from . import nsga2
from .gp import fit_surrogate
from .pareto import ParetoArchive, ehvi
from .space import DesignSpace, FeasibilityFilter, genes_key

N_INIT = 20
POOL_SIZE = 2048
SOBOL_BLOCK = 64
GP_RESTARTS = 5


class Method(str, Enum):
    EHVI = "ehvi"
    NSGA2 = "nsga2"
    RANDOM = "random"


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named component of one seeded run."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


@dataclass(frozen=True)
class EvalRecord:
    genes: tuple
    design_id: str
    throughput_tps: float
    power_w: float
    tdp_w: float
    batch: int
    tokens_per_joule: float
    latency_s: float

    @property
    def objectives(self) -> tuple[float, float]:
        return (-self.throughput_tps, self.power_w)


@dataclass
class Evaluation:
    step: int
    record: EvalRecord
    hv: float
    wall_time: float


@dataclass
class DseHistory:
    method: str
    seed: int
    stage: str
    n_init: int
    n_total: int
    reference: tuple[float, float]
    evaluations: list[Evaluation] = field(default_factory=list)

    @property
    def hv(self) -> list[float]:
        return [e.hv for e in self.evaluations]

    @property
    def final_hv(self) -> float:
        return self.evaluations[-1].hv if self.evaluations else 0.0


class Objective:
    """Evaluates gene vectors on one workload/stage with memoisation."""

    def __init__(self, space: DesignSpace, workload: Workload, stage: Stage):
        self.space = space
        self.workload = workload
        self.stage = Stage(stage)
        self.cache: dict[tuple, EvalRecord] = {}

    def __call__(self, genes) -> EvalRecord:
        key = genes_key(genes)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        design = self.space.to_design(genes)
        if self.stage is Stage.DECODE:
            res = eval_decode(design, self.workload)
        else:
            res = eval_prefill(design, self.workload)
        rec = EvalRecord(key, design.design_id, res.tps, res.avg_power, res.tdp, res.batch,
                         res.tokens_per_joule, res.latency_s)
        self.cache[key] = rec
        return rec


def sobol_init(space: DesignSpace, n: int, seed: int, feasible) -> list[np.ndarray]:
    """First ``n`` distinct feasible lattice points of a scrambled Sobol sequence."""
    if n < 1:
        raise ContractViolation("n must be >= 1")
    sampler = qmc.Sobol(d=len(space.sizes), scramble=True, seed=substream(seed, "sobol"))
    out, seen = [], set()
    drawn = 0
    while len(out) < n:
        if drawn >= 1000 * n:
            raise SearchSpaceError(f"found only {len(out)} feasible points in {drawn} Sobol draws")
        block = space.snap(sampler.random(SOBOL_BLOCK))
        drawn += SOBOL_BLOCK
        for g in block:
            key = genes_key(g)
            if key in seen:
                continue
            seen.add(key)
            if feasible(g):
                out.append(np.asarray(g))
                if len(out) == n:
                    break
    return out


def sample_pool(space: DesignSpace, rng: np.random.Generator, size: int, feasible, exclude: set,
                max_blocks: int = 64) -> list[np.ndarray]:
    """Uniform sample of distinct feasible configurations not in ``exclude``."""
    pool, seen = [], set()
    vectorised = hasattr(feasible, "mask")
    for _ in range(max_blocks):
        block = space.sample_genes(rng, 4096)
        ok = feasible.mask(block) if vectorised else [feasible(g) for g in block]
        for g, good in zip(block, ok):
            if not good:
                continue
            key = genes_key(g)
            if key in seen or key in exclude:
                continue
            seen.add(key)
            pool.append(g)
            if len(pool) == size:
                return pool
    return pool


def propose_next(surrogate, space: DesignSpace, archive: ParetoArchive, pool: list[np.ndarray]) -> np.ndarray:
    """Pool member with the largest EHVI; ties go to the lowest encoding."""
    if not pool:
        raise SpaceExhausted("no unevaluated feasible configuration left")
    enc = space.encode_many(np.array(pool))
    mu, sd = surrogate.predict(enc)
    scores = ehvi(mu, sd, archive)
    best = scores.max()
    ties = np.flatnonzero(scores == best)
    if len(ties) > 1:
        # lexicographic order on the encoded vectors
        order = sorted(ties, key=lambda i: tuple(enc[i]))
        return pool[order[0]]
    return pool[int(ties[0])]


def run_dse(space: DesignSpace, workload: Workload, stage, method, budget: int = 100, seed: int = 0,
            tdp_budget: float = 700.0, n_init: int = N_INIT, pool_size: int = POOL_SIZE,
            objective: Objective | None = None, feasible: FeasibilityFilter | None = None,
            gp_restarts: int = GP_RESTARTS):
    """Run one search; returns ``(DseHistory, ParetoArchive)``."""
    method = Method(method)
    stage = Stage(stage)
    if budget < n_init:
        raise ContractViolation("budget must be at least the initial design size")
    feasible = feasible or FeasibilityFilter(space, workload, stage, tdp_budget)
    objective = objective or Objective(space, workload, stage)
    reference = (0.0, float(tdp_budget))
    archive = ParetoArchive(reference)
    hist = DseHistory(method.value, int(seed), stage.value, n_init, budget, reference)
    evaluated: set = set()
    xs: list[np.ndarray] = []
    ys: list[tuple[float, float]] = []
    t0 = time.perf_counter()

    def evaluate(genes):
        rec = objective(genes)
        key = genes_key(genes)
        evaluated.add(key)
        xs.append(space.encode_genes(genes))
        ys.append(rec.objectives)
        archive.insert(key, rec.objectives, rec)
        hist.evaluations.append(Evaluation(len(hist.evaluations), rec, archive.hypervolume(),
                                           time.perf_counter() - t0))
        return rec

    init = sobol_init(space, n_init, seed, feasible)
    for g in init:
        evaluate(g)

    remaining = budget - n_init
    if method is Method.EHVI:
        gp_rng = substream(seed, "gp-restarts")
        pool_rng = substream(seed, "pool")
        while remaining > 0:
            surrogate = fit_surrogate(np.array(xs), np.array(ys), gp_rng, gp_restarts)
            pool = sample_pool(space, pool_rng, pool_size, feasible, evaluated)
            evaluate(propose_next(surrogate, space, archive, pool))
            remaining -= 1
    elif method is Method.RANDOM:
        rng = substream(seed, "random")
        while remaining > 0:
            pool = sample_pool(space, rng, 1, feasible, evaluated)
            if not pool:
                raise SpaceExhausted("no unevaluated feasible configuration left")
            evaluate(pool[0])
            remaining -= 1
    else:
        rng = substream(seed, "nsga2")
        pop = [np.asarray(g) for g in init]
        pop_obj = [objective(g).objectives for g in pop]
        pop_size = len(pop)
        while remaining > 0:
            rank, crowd = nsga2.rank_and_crowding(np.array(pop_obj))
            children = []
            n_child = min(pop_size, remaining)
            while len(children) < n_child:
                a = pop[nsga2.tournament(rng, rank, crowd)]
                b = pop[nsga2.tournament(rng, rank, crowd)]
                c1, c2 = nsga2.uniform_crossover(rng, a, b, 0.9)
                for c in (c1, c2):
                    c = nsga2.mutate(rng, c, space.sizes)
                    tries = 0
                    while not feasible(c) and tries < 100:
                        # regenerate from fresh parents until feasible
                        p = pop[nsga2.tournament(rng, rank, crowd)]
                        q = pop[nsga2.tournament(rng, rank, crowd)]
                        c = nsga2.mutate(rng, nsga2.uniform_crossover(rng, p, q, 0.9)[0], space.sizes)
                        tries += 1
                    if not feasible(c):
                        c = sample_pool(space, rng, 1, feasible, set())[0]
                    if len(children) < n_child:
                        children.append(c)
            child_obj = [evaluate(c).objectives for c in children]
            remaining -= len(children)
            merged = pop + children
            merged_obj = pop_obj + child_obj
            keep = nsga2.select_survivors(np.array(merged_obj), pop_size)
            pop = [merged[i] for i in keep]
            pop_obj = [merged_obj[i] for i in keep]
    return hist, archive


__all__ = [
    "EvalRecord",
    "Evaluation",
    "DseHistory",
    "Method",
    "N_INIT",
    "Objective",
    "POOL_SIZE",
    "propose_next",
    "run_dse",
    "sample_pool",
    "sobol_init",
    "substream",
]
