import math

import pytest
from hypothesis import given, strategies as st

from memexplorer.catalog import MemoryKind, MemoryTechnology
from memexplorer.errors import ContractViolation, InfeasibleBandwidthError
from memexplorer.hierarchy import (
    HierarchySpec, TierInstance, TransferRequest, boundary_time, effective_bandwidths,
    effective_bandwidths_from_peaks, total_transfer_time, transfer_time,
)

GiB = 1 << 30
TB = 1e12


def tier(bw, lat, onchip=False, cap=1e12):
    kind = MemoryKind.ON_CHIP if onchip else MemoryKind.OFF_CHIP
    t = MemoryTechnology(f"T{bw:g}", kind, lat, cap, bw, None if onchip else 10.0, 0.1, 1e-12, 1e-12)
    return TierInstance(t, 1)


def two_tier():
    # peaks 4 TB/s and 1 TB/s give effective [3, 1] TB/s
    return HierarchySpec((tier(4 * TB, 1e-9, onchip=True), tier(1 * TB, 100e-9)))


def test_single_boundary():
    assert effective_bandwidths_from_peaks([4 * TB]) == [4 * TB]


def test_two_boundaries():
    assert effective_bandwidths(two_tier()) == pytest.approx([3 * TB, 1 * TB])


def test_equal_peaks_infeasible():
    with pytest.raises(InfeasibleBandwidthError) as e:
        effective_bandwidths_from_peaks([TB, TB])
    assert e.value.boundary == 1


def test_boundary_time_examples():
    spec = HierarchySpec((tier(TB, 100e-9),))
    assert boundary_time(0, 0.7, 1, spec) == pytest.approx(100e-9)
    assert boundary_time(GiB, 0.0, 1, spec) == pytest.approx(100e-9)
    assert boundary_time(GiB, 1.0, 1, spec) == pytest.approx(100e-9 + GiB / TB)
    assert boundary_time(GiB, 1.0, 1, spec) == pytest.approx(1.0738e-3, rel=1e-4)


def test_case1_hidden_deeper_latency():
    t = total_transfer_time(TransferRequest(GiB, (1.0, 0.0)), two_tier())
    assert t == pytest.approx(1e-9 + GiB / (3 * TB))
    assert t == pytest.approx(0.358e-3, rel=1e-3)


def test_case2_deeper_dominates():
    t = total_transfer_time(TransferRequest(GiB, (0.0, 1.0)), two_tier())
    assert t == pytest.approx(100e-9 + GiB / TB)
    assert t == pytest.approx(1.0738e-3, rel=1e-4)


def test_zero_bytes_pays_latency():
    assert total_transfer_time(TransferRequest(0, (0.5, 0.5)), two_tier()) == pytest.approx(100e-9)


def test_placement_validation():
    with pytest.raises(ContractViolation):
        TransferRequest(1.0, (0.5, 0.4))
    with pytest.raises(ContractViolation):
        TransferRequest(-1.0, (1.0,))
    with pytest.raises(ContractViolation):
        total_transfer_time(TransferRequest(1.0, (1.0,)), two_tier())


def test_units_must_be_positive():
    with pytest.raises(ContractViolation):
        TierInstance(tier(TB, 1e-9).tech, 0)


def test_case_boundary_continuity():
    # choose x so the deeper time equals the boundary-1 time exactly
    lat, beff, x = [1e-9, 100e-9], [3 * TB, 1 * TB], float(GiB)
    a1 = 1 - (lat[0] + x / beff[0] - lat[1]) * beff[1] / x
    t = transfer_time(x, [a1, 1.0], lat, beff)
    assert t == pytest.approx(lat[0] + x / beff[0], rel=1e-12)


@given(st.floats(1e3, 1e11), st.floats(0, 1), st.floats(0, 1))
def test_time_bounded_below_by_first_boundary(x, a, b):
    spec = HierarchySpec((tier(8 * TB, 5e-9, onchip=True), tier(2 * TB, 1e-7), tier(TB, 1e-6)))
    a1 = a
    a2 = (1 - a1) * b
    req = TransferRequest(x, (a1, a2, 1 - a1 - a2))
    beff = effective_bandwidths(spec)
    t = total_transfer_time(req, spec)
    assert t >= spec.latencies[0] + x / beff[0] - 1e-15
    assert math.isfinite(t)


@given(st.floats(1e3, 1e11), st.floats(1e3, 1e11))
def test_time_monotone_in_bytes(x1, x2):
    lo, hi = sorted((x1, x2))
    spec = two_tier()
    req = lambda x: TransferRequest(x, (0.3, 0.7))
    assert total_transfer_time(req(lo), spec) <= total_transfer_time(req(hi), spec) * (1 + 1e-12)


def test_share_scales_bandwidth():
    spec = HierarchySpec((tier(TB, 1e-18),))
    req = TransferRequest(1e9, (1.0,))
    assert total_transfer_time(req, spec, share=0.5) == pytest.approx(2 * total_transfer_time(req, spec))
