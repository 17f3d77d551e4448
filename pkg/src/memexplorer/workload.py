"""LLM workload description, tensor footprints, operator traffic and placement.

A layer is split into an ``attention`` and an ``ffn`` block. Each block is a
list of :class:`Op` records carrying matrix FLOPs, vector element-ops and
per-class read/write bytes. Reuse of streamed GEMM operands follows the
dataflow and the PE-array shape (see :func:`gemm_traffic`).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .errors import CapacityExceededError, ContractViolation, DomainError
from .hierarchy import HierarchySpec, TransferRequest

ALLOWED_BITS = (4, 8, 16)

# Storage classes. ``hidden`` holds the per-layer hidden states kept for the whole pass.
WEIGHT, KV, ACT, HIDDEN = "weight", "kv", "act", "hidden"
CLASSES = (WEIGHT, KV, ACT, HIDDEN)
# Matrix stream: operands fed from memory straight into the PE array.
MATRIX_CLASSES = (WEIGHT, KV)


class Stage(str, Enum):
    PREFILL = "Prefill"
    DECODE = "Decode"
    COMBINED = "Combined"


class Dataflow(str, Enum):
    WS = "WS"
    IS = "IS"
    OS = "OS"


class StoragePriority(str, Enum):
    ACTIVATION = "Activation"
    KVCACHE = "KVCache"
    WEIGHT = "Weight"
    EQUAL = "Equal"


class BwPriority(str, Enum):
    MATRIX = "Matrix"
    VECTOR = "Vector"
    EQUAL = "Equal"


BW_SPLIT = {
    BwPriority.MATRIX: (0.75, 0.25),
    BwPriority.VECTOR: (0.25, 0.75),
    BwPriority.EQUAL: (0.5, 0.5),
}

_PRIORITY_CLASS = {
    StoragePriority.ACTIVATION: ACT,
    StoragePriority.KVCACHE: KV,
    StoragePriority.WEIGHT: WEIGHT,
    StoragePriority.EQUAL: None,
}

_STATIONARY_CLASS = {Dataflow.WS: WEIGHT, Dataflow.IS: ACT, Dataflow.OS: ACT}


@dataclass(frozen=True)
class MoESpec:
    total_params: float
    active_params_per_token: float
    num_experts: int
    experts_per_token: int

    def __post_init__(self):
        if self.active_params_per_token > self.total_params:
            raise ContractViolation("MoE active parameters exceed total parameters")
        if self.experts_per_token > self.num_experts:
            raise ContractViolation("experts_per_token exceeds num_experts")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    num_layers: int
    hidden_dim: int
    num_heads: int
    num_kv_heads: int
    head_dim: int
    ffn_dim: int
    vocab_size: int
    moe: MoESpec | None = None
    diffusion_steps: int | None = None

    def __post_init__(self):
        for f in ("num_layers", "hidden_dim", "num_heads", "num_kv_heads", "head_dim", "ffn_dim", "vocab_size"):
            if getattr(self, f) < 0:
                raise ContractViolation(f"{f} must be >= 0")
        if self.num_kv_heads and self.num_heads % self.num_kv_heads:
            raise ContractViolation("num_heads must be a multiple of num_kv_heads")
        if self.diffusion_steps is not None and self.diffusion_steps < 1:
            raise ContractViolation("diffusion_steps must be positive")
        if isinstance(self.moe, Mapping):
            object.__setattr__(self, "moe", MoESpec(**self.moe))

    @property
    def q_dim(self) -> int:
        return self.num_heads * self.head_dim

    @property
    def kv_dim(self) -> int:
        return self.num_kv_heads * self.head_dim

    @property
    def attn_params_per_layer(self) -> float:
        h = self.hidden_dim
        return float(h * self.q_dim + 2 * h * self.kv_dim + self.q_dim * h)

    @property
    def embedding_params(self) -> float:
        # separate input embedding and LM head
        return 2.0 * self.vocab_size * self.hidden_dim

    @property
    def dense_ffn_params_per_layer(self) -> float:
        return 3.0 * self.hidden_dim * self.ffn_dim

    @property
    def param_count(self) -> float:
        if self.moe is not None:
            return float(self.moe.total_params)
        return self.num_layers * (self.attn_params_per_layer + self.dense_ffn_params_per_layer) + self.embedding_params

    def ffn_params_per_layer(self, active: bool) -> float:
        if self.moe is None or self.num_layers == 0:
            return self.dense_ffn_params_per_layer
        p = self.moe.active_params_per_token if active else self.moe.total_params
        rest = self.num_layers * self.attn_params_per_layer + self.embedding_params
        return max(0.0, (p - rest) / self.num_layers)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.moe is None:
            d.pop("moe")
        if self.diffusion_steps is None:
            d.pop("diffusion_steps")
        return d


@dataclass(frozen=True)
class WorkloadTrace:
    prompt_tokens: int
    generated_tokens: int
    stage: Stage = Stage.PREFILL

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        if self.prompt_tokens < 0 or self.generated_tokens < 0:
            raise ContractViolation("token counts must be >= 0")
        if self.stage is Stage.PREFILL and self.prompt_tokens < 1:
            raise ContractViolation("prefill needs at least one prompt token")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.generated_tokens


@dataclass(frozen=True)
class PrecisionConfig:
    weight_bits: int = 8
    activation_bits: int = 8
    kv_bits: int = 8

    def __post_init__(self):
        for f in ("weight_bits", "activation_bits", "kv_bits"):
            if getattr(self, f) not in ALLOWED_BITS:
                raise DomainError(f"{f} must be one of {ALLOWED_BITS}, got {getattr(self, f)}")

    def scaled(self, k: float) -> "PrecisionConfig":
        return PrecisionConfig(int(self.weight_bits * k), int(self.activation_bits * k), int(self.kv_bits * k))

    @property
    def w(self) -> float:
        return self.weight_bits / 8.0

    @property
    def a(self) -> float:
        return self.activation_bits / 8.0

    @property
    def kv(self) -> float:
        return self.kv_bits / 8.0


@dataclass(frozen=True)
class SoftwareStrategy:
    dataflow: Dataflow = Dataflow.WS
    storage_priority: StoragePriority = StoragePriority.EQUAL
    bw_priority: BwPriority = BwPriority.EQUAL

    def __post_init__(self):
        object.__setattr__(self, "dataflow", Dataflow(self.dataflow))
        object.__setattr__(self, "storage_priority", StoragePriority(self.storage_priority))
        object.__setattr__(self, "bw_priority", BwPriority(self.bw_priority))

    @property
    def bw_split(self) -> tuple[float, float]:
        return BW_SPLIT[self.bw_priority]

    def to_dict(self) -> dict:
        return {
            "dataflow": self.dataflow.value,
            "storage_priority": self.storage_priority.value,
            "bw_priority": self.bw_priority.value,
        }


@dataclass(frozen=True)
class Workload:
    model: ModelSpec
    trace: WorkloadTrace
    precision: PrecisionConfig = PrecisionConfig()

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Workload":
        try:
            model = ModelSpec(**doc["model"])
            trace = WorkloadTrace(**doc["trace"])
            prec = doc.get("precision") or {}
            precision = PrecisionConfig(
                prec.get("w", prec.get("weight_bits", 8)),
                prec.get("a", prec.get("activation_bits", 8)),
                prec.get("kv", prec.get("kv_bits", 8)),
            )
        except (KeyError, TypeError) as exc:
            raise ContractViolation(f"invalid workload document: {exc}") from exc
        return cls(model, trace, precision)

    @classmethod
    def load(cls, path) -> "Workload":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "trace": {
                "prompt_tokens": self.trace.prompt_tokens,
                "generated_tokens": self.trace.generated_tokens,
                "stage": self.trace.stage.value,
            },
            "precision": {"w": self.precision.weight_bits, "a": self.precision.activation_bits,
                          "kv": self.precision.kv_bits},
        }

    def with_stage(self, stage) -> "Workload":
        return replace(self, trace=replace(self.trace, stage=Stage(stage)))


# ---------------------------------------------------------------------------
# Footprints


@dataclass(frozen=True)
class Footprint:
    weights_bytes: float
    kv_bytes_per_seq: float
    act_bytes_peak: float
    total_bytes: float
    batch: int


def kv_bytes_per_token(model: ModelSpec, precision: PrecisionConfig) -> float:
    return 2.0 * model.num_layers * model.kv_dim * precision.kv


def weight_bytes(model: ModelSpec, precision: PrecisionConfig) -> float:
    return model.param_count * precision.w


def layer_working_set(model: ModelSpec, tokens: float) -> float:
    """Elements of the largest single-layer intermediate for ``tokens`` rows."""
    qkv = model.q_dim + 2 * model.kv_dim
    ffn_cols = 2 * model.ffn_dim
    if model.moe is not None and model.num_layers:
        ffn_cols = 2 * model.ffn_params_per_layer(active=True) / (3 * max(model.hidden_dim, 1))
    return tokens * max(qkv, ffn_cols, model.hidden_dim)


def tensor_footprints(model: ModelSpec, precision: PrecisionConfig, trace: WorkloadTrace,
                      batch: int = 1) -> Footprint:
    """Weights, per-sequence KV and retained activations in bytes.

    Activations count the hidden state of every token at every layer,
    which is what a long-context pass keeps alive for the residual and
    KV projections.
    """
    tokens = trace.total_tokens
    w = weight_bytes(model, precision)
    kv = kv_bytes_per_token(model, precision) * tokens
    act = model.num_layers * tokens * model.hidden_dim * precision.a * batch
    return Footprint(w, kv, act, w + kv * batch + act, batch)


def decode_max_batch(model: ModelSpec, precision: PrecisionConfig, trace: WorkloadTrace,
                     hierarchy: HierarchySpec) -> int:
    """Largest batch whose KV caches fit beside the weights (all tiers count)."""
    cap = hierarchy.total_capacity
    w = weight_bytes(model, precision)
    if w > cap:
        raise CapacityExceededError(w, cap)
    per_seq = kv_bytes_per_token(model, precision) * trace.total_tokens
    if per_seq <= 0:
        raise ContractViolation("empty KV cache: batch is unbounded")
    return max(0, int(math.floor((cap - w) / per_seq)))


@dataclass(frozen=True)
class Pass:
    """One forward pass over ``q_len`` new tokens per sequence attending to ``kv_len``."""

    q_len: int
    kv_len: float
    repeats: int = 1
    kv_capacity_len: float | None = None

    @property
    def kv_resident_len(self) -> float:
        return self.kv_len if self.kv_capacity_len is None else self.kv_capacity_len


def expand_workload_flavor(model: ModelSpec, trace: WorkloadTrace, stage: Stage | None = None) -> list[Pass]:
    stage = Stage(stage or trace.stage)
    if model.diffusion_steps:
        n = trace.total_tokens
        return [Pass(n, n, model.diffusion_steps)]
    if stage is Stage.PREFILL:
        return [Pass(trace.prompt_tokens, trace.prompt_tokens, 1)]
    if stage is Stage.DECODE:
        return [Pass(1, trace.prompt_tokens + trace.generated_tokens / 2.0, 1, trace.total_tokens)]
    raise DomainError("combined stage has no single pass list")


# ---------------------------------------------------------------------------
# Operators


@dataclass
class Op:
    name: str
    matrix_flops: float = 0.0
    vector_ops: float = 0.0
    reads: dict = field(default_factory=dict)
    writes: dict = field(default_factory=dict)

    def add_read(self, cls: str, nbytes: float):
        if nbytes > 0:
            self.reads[cls] = self.reads.get(cls, 0.0) + nbytes

    def add_write(self, cls: str, nbytes: float):
        if nbytes > 0:
            self.writes[cls] = self.writes.get(cls, 0.0) + nbytes


def gemm_traffic(m: float, k: float, n: float, dataflow: Dataflow, rows: int, cols: int,
                 a_bytes: float, w_bytes: float, weight_total: float | None = None,
                 share: float = 0.0):
    """Bytes read for X (activations) and W, and bytes written for Y.

    X is ``m x k``, W is ``k x n``. Partial sums stay in the array's
    accumulators, so Y is written once. The pinned operand is read once;
    the streamed ones are re-read once per tile pass over the pinned one.
    With an on-chip share for the pinned operand a pass covers
    ``ceil(pinned bytes / share)`` of it; without one (or if the array is
    the tighter bound) a pass is one PE-array tile.
    """
    x = m * k * a_bytes
    w = k * n * w_bytes if weight_total is None else weight_total
    y = m * n * a_bytes

    def passes(array_passes: int, pinned: float) -> int:
        if share > 0 and pinned > 0:
            return min(array_passes, math.ceil(pinned / share))
        return array_passes

    if dataflow is Dataflow.WS:
        return x * passes(math.ceil(n / cols), w), w, y
    if dataflow is Dataflow.OS:
        return x * passes(math.ceil(n / cols), y), w * passes(math.ceil(m / rows), y), y
    return x, w * passes(math.ceil(m / cols), x), y


def _gemm(name, m, k, n, strategy, compute, p, weight_total=None, flops_n=None, share=0.0):
    op = Op(name)
    op.matrix_flops = 2.0 * m * k * (n if flops_n is None else flops_n)
    xr, wr, yw = gemm_traffic(m, k, n, strategy.dataflow, compute.pe_rows, compute.pe_cols, p.a, p.w,
                              weight_total, share)
    op.add_read(ACT, xr)
    op.add_read(WEIGHT, wr)
    op.add_write(ACT, yw)
    return op


def layer_ops(model: ModelSpec, precision: PrecisionConfig, strategy: SoftwareStrategy, compute,
              batch: int, ps: Pass, share: float = 0.0) -> dict[str, list[Op]]:
    """Operators of one decoder layer, split into attention and FFN blocks.

    ``share`` is the on-chip space holding the pinned GEMM operand
    (:attr:`Placement.pinned_share`); 0 means PE-array tiling only.
    """
    h = model.hidden_dim
    p = precision
    m = batch * ps.q_len
    group = model.num_heads // max(model.num_kv_heads, 1)

    attn = []
    norm = Op("attn_norm", vector_ops=2.0 * m * h)
    norm.add_read(HIDDEN, m * h * p.a)
    norm.add_write(ACT, m * h * p.a)
    attn.append(norm)
    attn.append(_gemm("qkv_proj", m, h, model.q_dim + 2 * model.kv_dim, strategy, compute, p, share=share))
    rope = Op("rope", vector_ops=m * (model.q_dim + model.kv_dim))
    attn.append(rope)

    core = Op("attention_core")
    core.matrix_flops = 4.0 * batch * ps.q_len * ps.kv_len * model.num_heads * model.head_dim
    core.vector_ops = batch * ps.q_len * ps.kv_len * model.num_heads
    kv_resident = batch * ps.kv_len * 2 * model.kv_dim * p.kv
    sweeps = math.ceil(ps.q_len * group / compute.pe_rows)
    core.add_read(KV, kv_resident * sweeps)
    core.add_write(KV, batch * ps.q_len * 2 * model.kv_dim * p.kv)
    core.add_read(ACT, m * model.q_dim * p.a)
    core.add_write(ACT, m * model.q_dim * p.a)
    attn.append(core)
    attn.append(_gemm("o_proj", m, model.q_dim, h, strategy, compute, p, share=share))
    resid = Op("attn_residual", vector_ops=m * h)
    resid.add_read(HIDDEN, m * h * p.a)
    resid.add_write(HIDDEN, m * h * p.a)
    attn.append(resid)

    ffn = []
    norm2 = Op("ffn_norm", vector_ops=2.0 * m * h)
    norm2.add_read(HIDDEN, m * h * p.a)
    norm2.add_write(ACT, m * h * p.a)
    ffn.append(norm2)
    active = model.ffn_params_per_layer(active=True)
    total = model.ffn_params_per_layer(active=False)
    # width of one gated-MLP branch as seen by a single token
    inter = active / (3.0 * h) if h else 0.0
    if model.moe is None:
        up_w = down_w = None
    else:
        streamed = min(total, m * active) * p.w
        up_w, down_w = streamed * 2.0 / 3.0, streamed / 3.0
    ffn.append(_gemm("gate_up_proj", m, h, 2 * inter, strategy, compute, p, up_w, share=share))
    act_fn = Op("silu_mul", vector_ops=2.0 * m * inter)
    ffn.append(act_fn)
    ffn.append(_gemm("down_proj", m, inter, h, strategy, compute, p, down_w, share=share))
    resid2 = Op("ffn_residual", vector_ops=m * h)
    resid2.add_read(HIDDEN, m * h * p.a)
    resid2.add_write(HIDDEN, m * h * p.a)
    ffn.append(resid2)
    return {"attention": attn, "ffn": ffn}


# ---------------------------------------------------------------------------
# Placement


@dataclass(frozen=True)
class Placement:
    """Resident bytes of each storage class per tier, and the derived fractions."""

    sizes: dict
    bytes_per_tier: dict
    pinned: str | None
    staging_bytes: float
    pinned_share: float = 0.0

    def alpha(self, cls: str) -> tuple[float, ...]:
        row = self.bytes_per_tier[cls]
        total = sum(row)
        if total <= 0:
            # nothing resident; route through the first tier
            return (1.0,) + (0.0,) * (len(row) - 1)
        fr = [b / total for b in row]
        fr[-1] = max(0.0, 1.0 - sum(fr[:-1]))
        return tuple(fr)

    def request(self, cls: str, nbytes: float) -> TransferRequest:
        return TransferRequest(nbytes, self.alpha(cls))


def stage_class_sizes(model: ModelSpec, precision: PrecisionConfig, batch: int, ps: Pass) -> dict:
    """Bytes of each storage class that must be resident during a pass."""
    m = batch * ps.q_len
    return {
        WEIGHT: weight_bytes(model, precision),
        KV: batch * kv_bytes_per_token(model, precision) * ps.kv_resident_len,
        ACT: layer_working_set(model, m) * precision.a,
        HIDDEN: model.num_layers * m * model.hidden_dim * precision.a,
    }


def _stationary_staging(model: ModelSpec, precision: PrecisionConfig, cls: str, sizes: dict) -> float:
    if cls == WEIGHT:
        return sizes[WEIGHT] / max(model.num_layers, 1)
    return sizes[ACT]


def place(sizes: Mapping[str, float], hierarchy: HierarchySpec, strategy: SoftwareStrategy,
          staging: float | None = None) -> Placement:
    """Assign storage classes to tiers.

    The dataflow's stationary class is pinned on-chip when it fits whole;
    otherwise one layer's worth of it is reserved on-chip as a staging
    buffer. The storage-priority class then claims the remaining on-chip
    space, the other classes share what is left in proportion to size, and
    the retained hidden states come last. Off-chip tiers are filled
    greedily in tier order.
    """
    caps = hierarchy.capacities
    n = len(caps)
    onchip_idx = [i for i, t in enumerate(hierarchy.tiers) if t.tech.on_chip]
    offchip_idx = [i for i, t in enumerate(hierarchy.tiers) if not t.tech.on_chip]
    total = sum(sizes.values())
    if total > sum(caps) * (1 + 1e-12):
        raise CapacityExceededError(total, sum(caps))

    on_cap = sum(caps[i] for i in onchip_idx)
    stationary = _STATIONARY_CLASS[strategy.dataflow]
    prio = _PRIORITY_CLASS[strategy.storage_priority]
    quota = {c: 0.0 for c in sizes}
    pinned = None
    reserve = 0.0
    if sizes.get(stationary, 0.0) <= on_cap:
        quota[stationary] = sizes.get(stationary, 0.0)
        pinned = stationary
    else:
        reserve = min(on_cap, staging or 0.0)
    free = on_cap - reserve - quota[stationary]

    order = []
    if pinned:
        order.append(pinned)
    if prio is not None and prio != pinned and prio in sizes:
        take = min(free, sizes[prio])
        quota[prio] = take
        free -= take
        order.append(prio)
    rest = [c for c in (WEIGHT, KV, ACT) if c in sizes and c not in order]
    want = sum(sizes[c] for c in rest)
    if want > 0 and free > 0:
        share = min(1.0, free / want)
        for c in rest:
            quota[c] = sizes[c] * share
        free -= sum(quota[c] for c in rest)
    order.extend(rest)
    if HIDDEN in sizes and HIDDEN not in order:
        take = min(max(free, 0.0), sizes[HIDDEN])
        quota[HIDDEN] = take
        order.append(HIDDEN)
    order.extend(c for c in sizes if c not in order)

    left = list(caps)
    rows = {c: [0.0] * n for c in sizes}
    reserve_left = reserve
    # on-chip quotas fill on-chip tiers innermost first
    for c in order:
        need = quota[c]
        for i in onchip_idx:
            if need <= 0:
                break
            take = min(need, left[i])
            rows[c][i] += take
            left[i] -= take
            need -= take
    # residual bytes go off-chip; the staging reservation stays untouched
    for c in order:
        need = sizes[c] - sum(rows[c])
        for i in offchip_idx:
            if need <= 1e-9 * max(sizes[c], 1.0):
                break
            take = min(need, left[i])
            rows[c][i] += take
            left[i] -= take
            need -= take
        if need > 1e-6 * max(sizes[c], 1.0):
            # off-chip is full; fall back to any on-chip space still free
            spare = sum(left[i] for i in onchip_idx) - reserve_left
            for i in onchip_idx:
                take = max(0.0, min(need, left[i], spare))
                rows[c][i] += take
                left[i] -= take
                spare -= take
                need -= take
        if need > 1e-6 * max(sizes[c], 1.0):
            raise CapacityExceededError(total + reserve, sum(caps))
    # on-chip room for the stationary operand: its resident bytes plus staging
    share = sum(rows[stationary][i] for i in onchip_idx) if stationary in rows else 0.0
    return Placement(dict(sizes), rows, pinned, reserve, share + reserve)


def stage_placement(model: ModelSpec, precision: PrecisionConfig, strategy: SoftwareStrategy,
                    hierarchy: HierarchySpec, batch: int, ps: Pass) -> Placement:
    sizes = stage_class_sizes(model, precision, batch, ps)
    stationary = _STATIONARY_CLASS[strategy.dataflow]
    return place(sizes, hierarchy, strategy, _stationary_staging(model, precision, stationary, sizes))


@dataclass(frozen=True)
class StreamRequests:
    matrix: tuple[TransferRequest, ...]
    vector: tuple[TransferRequest, ...]


def block_requests(ops: Sequence[Op], placement: Placement) -> StreamRequests:
    """Group a block's reads and writes into matrix/vector stream requests."""
    tot: dict[str, float] = {}
    for op in ops:
        for d in (op.reads, op.writes):
            for c, b in d.items():
                tot[c] = tot.get(c, 0.0) + b
    mat, vec = [], []
    for c in CLASSES:
        b = tot.get(c, 0.0)
        if b <= 0:
            continue
        (mat if c in MATRIX_CLASSES else vec).append(placement.request(c, b))
    return StreamRequests(tuple(mat), tuple(vec))


def stage_traffic(model: ModelSpec, precision: PrecisionConfig, trace: WorkloadTrace,
                  strategy: SoftwareStrategy, hierarchy: HierarchySpec, batch: int, compute) -> dict:
    """Per-layer transfer requests by block and stream for the trace's stage."""
    out = {}
    for k, ps in enumerate(expand_workload_flavor(model, trace)):
        pl = stage_placement(model, precision, strategy, hierarchy, batch, ps)
        blocks = layer_ops(model, precision, strategy, compute, batch, ps, pl.pinned_share)
        out[k] = {name: block_requests(ops, pl) for name, ops in blocks.items()}
    return out


__all__ = [
    "ACT", "HIDDEN", "KV", "WEIGHT", "CLASSES", "MATRIX_CLASSES",
    "BwPriority", "Dataflow", "Stage", "StoragePriority",
    "Footprint", "ModelSpec", "MoESpec", "Op", "Pass", "Placement", "PrecisionConfig",
    "SoftwareStrategy", "StreamRequests", "Workload", "WorkloadTrace",
    "block_requests", "decode_max_batch", "expand_workload_flavor", "gemm_traffic",
    "kv_bytes_per_token", "layer_ops", "layer_working_set", "place", "stage_class_sizes",
    "stage_placement", "stage_traffic", "tensor_footprints", "weight_bytes",
]
