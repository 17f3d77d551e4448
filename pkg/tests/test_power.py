import dataclasses

import pytest
from hypothesis import given, strategies as st

from memexplorer.design import ComputeSpec
from memexplorer.errors import ContractViolation
from memexplorer.hierarchy import HierarchySpec
from memexplorer.power import (
    Activity, ComputePowerModel, MemoryPowerCoefficients, check_tdp, compute_power, design_tdp,
    memory_tier_power, system_power,
)

GB = 1e9


def test_zero_everything():
    assert memory_tier_power(0, 0, 0, MemoryPowerCoefficients(0.075, 3e-12, 3.6e-12)) == 0.0


def test_hbm3e_stack_at_peak(catalog):
    t = catalog["HBM3E"]
    p = memory_tier_power(24 * GB, 1e12, 0, MemoryPowerCoefficients.of(t))
    assert p == pytest.approx(25.8, rel=1e-9)


def test_lpddr5x_idle(catalog):
    p = memory_tier_power(16 * GB, 0, 0, MemoryPowerCoefficients.of(catalog["LPDDR5X"]))
    assert p == pytest.approx(0.1224, rel=1e-9)


def test_bandwidth_above_peak_is_violation(catalog):
    c = MemoryPowerCoefficients.of(catalog["HBM3E"])
    with pytest.raises(ContractViolation):
        memory_tier_power(24 * GB, 0.8e12, 0.3e12, c, peak_bandwidth=1e12)


def test_negative_coefficient_rejected():
    with pytest.raises(ContractViolation):
        MemoryPowerCoefficients(-1.0, 0, 0)


@given(st.floats(0, 1e12), st.floats(0, 1e12), st.floats(0, 1e12), st.floats(0, 1e12))
def test_eq7_is_additive(cap, a, b, w):
    c = MemoryPowerCoefficients(0.075, 3e-12, 3.6e-12)
    whole = memory_tier_power(cap, a + b, w, c)
    parts = memory_tier_power(cap, a, 0, c) + memory_tier_power(0, b, 0, c) + memory_tier_power(0, 0, w, c)
    assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)


@given(st.floats(0, 1e13))
def test_capacity_scaling(cap):
    c = MemoryPowerCoefficients(0.3, 6e-12, 1e-11)
    assert memory_tier_power(2 * cap, 0, 0, c) == pytest.approx(2 * memory_tier_power(cap, 0, 0, c))


def test_compute_power_definition():
    m = ComputePowerModel(10.0, 100.0, 20.0)
    ref = ComputeSpec(2048, 128, 2048)
    assert compute_power(ref, 0, 0, m) == 10.0
    assert compute_power(ref, 1, 1, m) == pytest.approx(130.0)
    big = ComputeSpec(2048, 256, 2048)
    assert compute_power(big, 1, 0, m) - m.p_static == pytest.approx(2 * (compute_power(ref, 1, 0, m) - m.p_static))


def test_compute_utilization_range():
    with pytest.raises(ContractViolation):
        compute_power(ComputeSpec(2048, 128, 2048), 1.5, 0)


def test_calibrated_static_fraction():
    m = ComputePowerModel.calibrated()
    assert m.p_static == pytest.approx(0.15 * (m.p_static + m.p_mac_peak + m.p_vec_peak))


def test_base_tdp_anchor(designs):
    assert design_tdp(designs["base"]) == pytest.approx(300.1, abs=1e-9)


def test_idle_design_is_static_plus_background(designs):
    d = designs["base"]
    rep = system_power(d, Activity.idle(len(d.hierarchy)))
    bg = sum(t.tech.p_bg * t.aggregate_capacity / GB for t in d.hierarchy.tiers)
    assert rep.avg_power == pytest.approx(d.compute_power.p_static + bg)


def test_report_components_sum(designs):
    d = designs["base"]
    act = Activity((2e12, 0.5e12), (0.1e12, 0.2e12), 0.6, 0.3)
    rep = system_power(d, act)
    total = rep.compute + sum(t.background + t.read + t.write for t in rep.per_tier)
    assert rep.avg_power == pytest.approx(total, rel=1e-9)
    assert rep.avg_power <= rep.tdp


def test_idle_lpddr_tier_adds_exact_background(designs, catalog):
    d = designs["base"]
    more = dataclasses.replace(d, hierarchy=HierarchySpec.from_pairs(
        catalog, [(t.tech.name, t.units) for t in d.hierarchy.tiers] + [("LPDDR5X", 8)]))
    a = system_power(d, Activity.idle(2)).avg_power
    b = system_power(more, Activity.idle(3)).avg_power
    assert b - a == pytest.approx(8 * 0.1224, rel=1e-9)


def test_activity_length_checked(designs):
    with pytest.raises(ContractViolation):
        system_power(designs["base"], Activity.idle(1))


def test_check_tdp():
    assert check_tdp(697.1, 700)
    assert not check_tdp(718.96, 700)
    assert check_tdp(700.0, 700)


def test_compute_power_roundtrip():
    m = ComputePowerModel.calibrated()
    assert ComputePowerModel.from_dict(m.to_dict()) == m
    assert ComputePowerModel.from_dict({"p_static": 5.0}).p_static == 5.0
