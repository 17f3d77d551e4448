import dataclasses

import pytest

from memexplorer.errors import ContractViolation, InfeasibleBandwidthError, InfeasibleDecodeError
from memexplorer.evaluator import (
    Bound, eval_decode, eval_pd_combined, eval_prefill, kv_handoff_bytes, stage_breakdown,
)
from memexplorer.workload import ModelSpec, WorkloadTrace


@pytest.fixture(scope="module")
def p1_prefill(designs, osworld):
    return eval_prefill(designs["p1"], osworld)


@pytest.fixture(scope="module")
def p1_decode(designs, osworld):
    return eval_decode(designs["p1"], osworld)


def test_prefill_basic(p1_prefill, osworld):
    r = p1_prefill
    assert r.latency_s > 0
    assert r.tokens == osworld.trace.prompt_tokens
    assert r.tps == pytest.approx(r.tokens / r.latency_s)
    assert r.latency_s == pytest.approx(sum(l.latency for l in r.per_layer))
    assert r.energy_j == pytest.approx(r.avg_power * r.latency_s)
    assert r.avg_power <= r.tdp


def test_layer_bound_labels(p1_prefill):
    for rec in p1_prefill.per_layer:
        assert rec.bound in (Bound.COMPUTE, Bound.MEMORY)
        assert rec.latency == pytest.approx(max(rec.compute_s, rec.transfer_s) * rec.count)


def test_base_design_is_bandwidth_infeasible(designs, osworld):
    # an SRAM tier as fast as the HBM behind it leaves no headroom at boundary 1
    with pytest.raises(InfeasibleBandwidthError):
        eval_prefill(designs["base"], osworld)


def test_empty_model(designs, osworld):
    empty = dataclasses.replace(osworld, model=ModelSpec("empty", 0, 64, 4, 4, 16, 64, 10))
    with pytest.raises(ContractViolation, match="empty model"):
        eval_prefill(designs["p1"], empty)


def test_decode_basic(p1_decode, osworld):
    r = p1_decode
    assert r.batch >= 1
    assert r.tokens == r.batch * osworld.trace.generated_tokens
    assert r.step_latency_s == pytest.approx(r.latency_s / osworld.trace.generated_tokens)
    assert r.avg_power <= r.tdp


def test_decode_batch_zero_is_infeasible(designs, osworld):
    with pytest.raises(InfeasibleDecodeError):
        eval_decode(designs["p1"], osworld, batch=0)


def test_decode_batch_one_succeeds(designs, osworld):
    assert eval_decode(designs["p1"], osworld, batch=1).batch == 1


def test_decode_tps_grows_with_batch(designs, osworld):
    tps = [eval_decode(designs["p1"], osworld, batch=b).tps for b in (1, 2, 4)]
    assert tps == sorted(tps)


def test_combined_infinite_link(p1_prefill, p1_decode):
    c = eval_pd_combined(p1_prefill, p1_decode, 1e9, float("inf"))
    assert c.ttft_s == p1_prefill.latency_s
    assert c.transfer_s == 0


def test_combined_link_delay(p1_prefill, p1_decode):
    c = eval_pd_combined(p1_prefill, p1_decode, 14.7e9, 900e9)
    assert c.transfer_s == pytest.approx(16.33e-3, rel=1e-3)
    assert c.ttft_s == pytest.approx(p1_prefill.latency_s + 14.7e9 / 900e9)


def test_combined_without_generation(p1_prefill):
    c = eval_pd_combined(p1_prefill, None, 1e9)
    assert c.ttft_s == p1_prefill.latency_s
    assert c.energy_per_token == p1_prefill.energy_per_token


def test_kv_handoff_bytes(osworld, designs):
    assert kv_handoff_bytes(osworld, designs["p1"].precision) == pytest.approx(
        osworld.trace.prompt_tokens * 2 * 80 * 8 * 128 * designs["p1"].precision.kv)


def test_breakdown_slices(designs, osworld):
    names = [n for n, _ in stage_breakdown(designs["p1"], osworld)]
    assert names == ["Prefill-Attention", "Prefill-FFN", "Decode-Early", "Decode-Late"]


def test_breakdown_without_generation(designs, osworld):
    wl = dataclasses.replace(osworld, trace=WorkloadTrace(osworld.trace.prompt_tokens, 0))
    assert [n for n, _ in stage_breakdown(designs["p1"], wl)] == ["Prefill-Attention", "Prefill-FFN"]


def test_prefill_is_deterministic(designs, osworld, p1_prefill):
    again = eval_prefill(designs["p1"], osworld)
    assert again.to_dict() == p1_prefill.to_dict()
