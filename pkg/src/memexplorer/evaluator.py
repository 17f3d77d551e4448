"""Stage-level latency, throughput and energy of a design on a workload.

Every layer block overlaps compute with data movement (double buffering),
so its latency is ``max(compute_s, transfer_s)``. Compute time is the larger
of the PE-array time and the vector-unit time; transfer time is the larger
of the matrix and vector streams, each summing its requests under its share
of every boundary's effective bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .design import DesignPoint
from .errors import CapacityExceededError, ContractViolation, InfeasibleDecodeError
from .hierarchy import effective_bandwidths, total_transfer_time
from .power import Activity, PowerReport, system_power
from .workload import (
    Pass,
    PrecisionConfig,
    Stage,
    Workload,
    block_requests,
    decode_max_batch,
    expand_workload_flavor,
    kv_bytes_per_token,
    layer_ops,
    stage_placement,
)

DEFAULT_LINK_BANDWIDTH = 900e9


class Bound(str, Enum):
    COMPUTE = "Compute"
    MEMORY = "Memory"


@dataclass(frozen=True)
class LayerRecord:
    """One block kind; times are per instance, ``count`` instances in the stage."""

    kind: str
    compute_s: float
    transfer_s: float
    count: float
    matrix_s: float = 0.0
    vector_s: float = 0.0

    @property
    def bound(self) -> Bound:
        return Bound.COMPUTE if self.compute_s >= self.transfer_s else Bound.MEMORY

    @property
    def latency(self) -> float:
        return max(self.compute_s, self.transfer_s) * self.count

    @property
    def utilization(self) -> float:
        lat = max(self.compute_s, self.transfer_s)
        return self.matrix_s / lat if lat > 0 else 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "compute_s": self.compute_s, "transfer_s": self.transfer_s,
                "count": self.count, "bound": self.bound.value, "latency_s": self.latency}


@dataclass(frozen=True)
class StageResult:
    stage: str
    latency_s: float
    tokens: float
    tps: float
    batch: int
    power: PowerReport
    energy_per_token: float
    per_layer: tuple[LayerRecord, ...]
    energy_j: float = 0.0
    step_latency_s: float | None = None
    kv_len: float | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def tokens_per_joule(self) -> float:
        return 1.0 / self.energy_per_token if self.energy_per_token > 0 else float("inf")

    @property
    def avg_power(self) -> float:
        return self.power.avg_power

    @property
    def tdp(self) -> float:
        return self.power.tdp

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "latency_s": self.latency_s,
            "tokens": self.tokens,
            "tps": self.tps,
            "batch": self.batch,
            "energy_j": self.energy_j,
            "energy_per_token_j": self.energy_per_token,
            "tokens_per_joule": self.tokens_per_joule,
            "step_latency_s": self.step_latency_s,
            "kv_len": self.kv_len,
            "power": self.power.to_dict(),
            "per_layer": [r.to_dict() for r in self.per_layer],
            "notes": list(self.notes),
        }


def _precision(design: DesignPoint, workload: Workload) -> PrecisionConfig:
    return design.precision


def _run(design: DesignPoint, workload: Workload, passes: list[Pass], batch: int, stage: str,
         tokens: float, steps: float = 1.0, kinds=("attention", "ffn"), step_latency=False) -> StageResult:
    model = workload.model
    if model.num_layers == 0:
        raise ContractViolation("empty model: no layers to evaluate")
    prec = _precision(design, workload)
    spec = design.hierarchy
    beff = effective_bandwidths(spec)
    m_share, v_share = design.strategy.bw_split
    clock = design.compute.clock
    peak = design.compute.peak_flops
    vec_rate = design.compute.vlen * clock

    n = len(spec)
    rd = [0.0] * n
    wr = [0.0] * n
    mat_busy = 0.0
    vec_busy = 0.0
    records = []
    for ps in passes:
        pl = stage_placement(model, prec, design.strategy, spec, batch, ps)
        blocks = layer_ops(model, prec, design.strategy, design.compute, batch, ps, pl.pinned_share)
        count = model.num_layers * ps.repeats * steps
        for kind in kinds:
            ops = blocks[kind]
            matrix_s = sum(o.matrix_flops for o in ops) / peak
            vector_s = sum(o.vector_ops for o in ops) / vec_rate
            req = block_requests(ops, pl)
            t_mat = sum(total_transfer_time(r, spec, m_share, beff) for r in req.matrix)
            t_vec = sum(total_transfer_time(r, spec, v_share, beff) for r in req.vector)
            records.append(LayerRecord(kind, max(matrix_s, vector_s), max(t_mat, t_vec), count,
                                       matrix_s, vector_s))
            mat_busy += matrix_s * count
            vec_busy += vector_s * count
            for o in ops:
                for cls, b in o.reads.items():
                    for i, a in enumerate(pl.alpha(cls)):
                        rd[i] += a * b * count
                for cls, b in o.writes.items():
                    for i, a in enumerate(pl.alpha(cls)):
                        wr[i] += a * b * count
    latency = sum(r.latency for r in records)
    if latency <= 0:
        raise ContractViolation("empty model: zero stage latency")
    activity = Activity(tuple(b / latency for b in rd), tuple(b / latency for b in wr),
                        mat_busy / latency, vec_busy / latency)
    report = system_power(design, activity)
    energy = report.avg_power * latency
    tps = tokens / latency if tokens else 0.0
    ept = energy / tokens if tokens else float("inf")
    kv_len = passes[0].kv_len if passes else None
    return StageResult(stage, latency, tokens, tps, batch, report, ept, tuple(records), energy,
                       latency / steps if step_latency else None, kv_len)


def eval_prefill(design: DesignPoint, workload: Workload, batch: int = 1) -> StageResult:
    """Time to first token for ``batch`` prompts processed together."""
    trace = workload.trace
    passes = expand_workload_flavor(workload.model, trace, Stage.PREFILL)
    n_tok = trace.total_tokens if workload.model.diffusion_steps else trace.prompt_tokens
    return _run(design, workload, passes, batch, "Prefill", float(batch * n_tok))


def _fitting_batch(design: DesignPoint, workload: Workload, ps: Pass, start: int) -> int:
    b = start
    while b >= 1:
        try:
            stage_placement(workload.model, design.precision, design.strategy, design.hierarchy, b, ps)
            return b
        except CapacityExceededError:
            b -= 1 if b < 8 else max(1, b // 16)
    return 0


def decode_batch(design: DesignPoint, workload: Workload, batch: int | None = None) -> int:
    model, trace = workload.model, workload.trace
    ps = expand_workload_flavor(model, trace, Stage.DECODE)[0]
    if batch is None:
        start = decode_max_batch(model, design.precision, trace, design.hierarchy)
        batch = _fitting_batch(design, workload, ps, start)
    if batch < 1:
        raise InfeasibleDecodeError("no sequence fits beside the weights (decode batch is 0)")
    return batch


def eval_decode(design: DesignPoint, workload: Workload, batch: int | None = None,
                kv_len: float | None = None, gen_tokens: float | None = None) -> StageResult:
    """Steady decode at the largest batch that fits.

    One representative step is evaluated at ``kv_len`` (default: prompt plus
    half the generation) and scaled to the whole generation.
    """
    model, trace = workload.model, workload.trace
    gen = trace.generated_tokens if gen_tokens is None else gen_tokens
    if gen <= 0:
        raise ContractViolation("decode needs at least one generated token")
    b = decode_batch(design, workload, batch)
    if model.diffusion_steps:
        passes = expand_workload_flavor(model, trace, Stage.DECODE)
        return _run(design, workload, passes, b, "Decode", float(b * gen))
    mid = trace.prompt_tokens + trace.generated_tokens / 2.0 if kv_len is None else kv_len
    ps = Pass(1, mid, 1, trace.total_tokens)
    return _run(design, workload, [ps], b, "Decode", float(b * gen), steps=float(gen), step_latency=True)


@dataclass(frozen=True)
class CombinedResult:
    ttft_s: float
    decode_tps: float
    energy_per_token: float
    transfer_s: float
    transfer_energy_j: float
    tokens: float
    batch: int

    @property
    def tokens_per_joule(self) -> float:
        return 1.0 / self.energy_per_token if self.energy_per_token > 0 else float("inf")

    def to_dict(self) -> dict:
        return {
            "stage": "Combined",
            "ttft_s": self.ttft_s,
            "decode_tps": self.decode_tps,
            "energy_per_token_j": self.energy_per_token,
            "tokens_per_joule": self.tokens_per_joule,
            "kv_transfer_s": self.transfer_s,
            "kv_transfer_energy_j": self.transfer_energy_j,
            "tokens": self.tokens,
            "batch": self.batch,
        }


def eval_pd_combined(prefill_res: StageResult, decode_res: StageResult | None, kv_bytes: float,
                     link_bandwidth: float = DEFAULT_LINK_BANDWIDTH, prefill_design: DesignPoint | None = None,
                     decode_design: DesignPoint | None = None) -> CombinedResult:
    """Prefill on one device, KV handed over a link, decode on another.

    Energy per token covers ``batch`` prefills, their KV hand-offs and one
    batched decode, over every prompt and generated token. The hand-off
    costs a read on the prefill device's deepest tier and a write on the
    decode device's deepest tier.
    """
    if decode_res is None or decode_res.tokens <= 0:
        return CombinedResult(prefill_res.latency_s, 0.0, prefill_res.energy_per_token, 0.0, 0.0,
                              prefill_res.tokens, prefill_res.batch)
    xfer_s = kv_bytes / link_bandwidth if link_bandwidth != float("inf") else 0.0
    e_bit = 0.0
    if prefill_design is not None:
        e_bit += prefill_design.hierarchy.tiers[-1].tech.e_read
    if decode_design is not None:
        e_bit += decode_design.hierarchy.tiers[-1].tech.e_write
    e_xfer = kv_bytes * 8.0 * e_bit
    b = decode_res.batch
    energy = b * prefill_res.energy_j + b * e_xfer + decode_res.energy_j
    tokens = b * prefill_res.tokens + decode_res.tokens
    return CombinedResult(prefill_res.latency_s + xfer_s, decode_res.tps, energy / tokens, xfer_s, e_xfer,
                          tokens, b)


def kv_handoff_bytes(workload: Workload, precision: PrecisionConfig) -> float:
    return kv_bytes_per_token(workload.model, precision) * workload.trace.prompt_tokens


def stage_breakdown(design: DesignPoint, workload: Workload) -> list[tuple[str, StageResult]]:
    """Prefill split by block kind and decode split into early/late halves."""
    trace = workload.trace
    passes = expand_workload_flavor(workload.model, trace, Stage.PREFILL)
    tok = float(trace.prompt_tokens)
    out = [
        ("Prefill-Attention", _run(design, workload, passes, 1, "Prefill-Attention", tok, kinds=("attention",))),
        ("Prefill-FFN", _run(design, workload, passes, 1, "Prefill-FFN", tok, kinds=("ffn",))),
    ]
    gen = trace.generated_tokens
    if gen > 0 and not workload.model.diffusion_steps:
        b = decode_batch(design, workload)
        p = trace.prompt_tokens
        early = eval_decode(design, workload, b, p + gen / 4.0, gen / 2.0)
        late = eval_decode(design, workload, b, p + 3.0 * gen / 4.0, gen / 2.0)
        out.append(("Decode-Early", early))
        out.append(("Decode-Late", late))
    return out


__all__ = [
    "Bound",
    "CombinedResult",
    "DEFAULT_LINK_BANDWIDTH",
    "LayerRecord",
    "StageResult",
    "decode_batch",
    "eval_decode",
    "eval_pd_combined",
    "eval_prefill",
    "kv_handoff_bytes",
    "stage_breakdown",
]
