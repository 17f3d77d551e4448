import json
import math

import pytest
from hypothesis import given, strategies as st

from memexplorer.catalog import (
    MemoryKind, MemoryTechnology, ShorelineBudget, load_catalog, max_stacks, parse_catalog,
    validate_hierarchy,
)
from memexplorer.errors import CatalogParseError, CatalogValidationError, DomainError
from memexplorer.hierarchy import HierarchySpec

GB = 1e9


def test_default_catalog_has_nine_entries(catalog):
    assert len(catalog) == 9
    assert {"SRAM2D", "SRAM3D", "HBM3E", "HBM4", "LPDDR5X", "LPDDR6", "GDDR6", "GDDR7", "HBF"} == set(catalog)


def test_hbm3e_record(catalog):
    t = catalog["HBM3E"]
    assert t.capacity_per_unit == pytest.approx(24 * GB)
    assert t.bandwidth_per_unit == pytest.approx(1000 * GB)
    assert t.shoreline_per_unit == pytest.approx(11.0)
    assert t.e_read == pytest.approx(3e-12)
    assert t.kind is MemoryKind.OFF_CHIP


def test_hbf_record(catalog):
    t = catalog["HBF"]
    assert t.capacity_per_unit == pytest.approx(384 * GB)
    assert t.bandwidth_per_unit == pytest.approx(1000 * GB)
    assert t.p_bg == pytest.approx(0.3)
    assert t.latency == pytest.approx(1e-6)


def test_record_roundtrip(catalog):
    for t in catalog.values():
        back = MemoryTechnology.from_record(t.to_record())
        assert back.name == t.name and back.kind is t.kind
        for f in ("latency", "capacity_per_unit", "bandwidth_per_unit", "p_bg", "e_read", "e_write"):
            assert getattr(back, f) == pytest.approx(getattr(t, f), rel=1e-12)


def _record(**over):
    rec = load_catalog()["HBM3E"].to_record()
    rec.update(over)
    return rec


def test_zero_capacity_rejected():
    with pytest.raises(CatalogValidationError, match="capacity_per_unit"):
        parse_catalog([_record(capacity_per_unit=0)])


def test_missing_field_named():
    rec = _record()
    del rec["e_write"]
    with pytest.raises(CatalogParseError, match="e_write"):
        parse_catalog([rec])


def test_non_numeric_field_named():
    with pytest.raises(CatalogParseError, match="latency"):
        parse_catalog([_record(latency="fast")])


def test_onchip_with_shoreline_rejected():
    rec = load_catalog()["SRAM2D"].to_record()
    rec["shoreline_per_unit"] = 3.0
    with pytest.raises(CatalogValidationError, match="shoreline"):
        parse_catalog([rec])


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("[{ nope")
    with pytest.raises(CatalogParseError):
        load_catalog(p)


def test_load_from_file(tmp_path, catalog):
    p = tmp_path / "cat.json"
    p.write_text(json.dumps([catalog["HBM4"].to_record()]))
    assert list(load_catalog(p)) == ["HBM4"]


def test_max_stacks_examples(catalog):
    b = ShorelineBudget(66.0, 1.0)
    assert max_stacks(catalog["HBM3E"], b) == 5
    assert max_stacks(catalog["LPDDR5X"], b) == 12
    wide = MemoryTechnology("Wide", MemoryKind.OFF_CHIP, 1e-7, GB, GB, 70.0, 0.1, 1e-12, 1e-12)
    assert max_stacks(wide, b) == 0


def test_max_stacks_onchip_is_domain_error(catalog):
    with pytest.raises(DomainError):
        max_stacks(catalog["SRAM3D"])


def test_every_offchip_fits_once(catalog):
    for t in catalog.values():
        if not t.on_chip:
            assert max_stacks(t) >= 1


def test_budget_bounds():
    with pytest.raises(DomainError):
        ShorelineBudget(67.0)
    with pytest.raises(DomainError):
        ShorelineBudget(0.0)


@given(st.floats(0.5, 40.0), st.floats(0.5, 40.0), st.floats(1.0, 66.0))
def test_max_stacks_monotone(s1, s2, l_mem):
    lo, hi = sorted((s1, s2))
    mk = lambda s: MemoryTechnology("T", MemoryKind.OFF_CHIP, 1e-7, GB, GB, s, 0.1, 1e-12, 1e-12)
    b = ShorelineBudget(l_mem, 1.0)
    assert max_stacks(mk(hi), b) <= max_stacks(mk(lo), b)
    assert max_stacks(mk(lo), ShorelineBudget(l_mem / 2, 1.0)) <= max_stacks(mk(lo), b)


def test_p1_hierarchy_feasible(catalog):
    spec = HierarchySpec.from_pairs(catalog, [("SRAM3D", 3), ("HBM4", 2), ("HBF", 1)])
    rep = validate_hierarchy(spec, catalog)
    assert rep.feasible
    assert rep.shoreline_used == pytest.approx(41.25)


def test_eight_hbm3e_infeasible(catalog):
    rep = validate_hierarchy(HierarchySpec.from_pairs(catalog, [("HBM3E", 8)]), catalog)
    assert not rep.feasible
    assert rep.shoreline_used == pytest.approx(96.0)
    assert any("shoreline" in r for r in rep.reasons)


def test_onchip_only_feasible(catalog):
    rep = validate_hierarchy(HierarchySpec.from_pairs(catalog, [("SRAM2D", 1)]), catalog)
    assert rep.feasible and rep.shoreline_used == 0


def test_ordering_enforced(catalog):
    spec = HierarchySpec.from_pairs(catalog, [("HBM3E", 1), ("SRAM2D", 1)])
    assert not validate_hierarchy(spec, catalog).feasible


def test_unit_domain_enforced_unless_unconstrained(catalog):
    spec = HierarchySpec.from_pairs(catalog, [("HBM3E", 3)])
    assert not validate_hierarchy(spec, catalog).feasible
    assert validate_hierarchy(spec, catalog, constrained=False).feasible


def test_removing_offchip_tier_keeps_feasible(catalog):
    pairs = [("SRAM3D", 2), ("HBM4", 2), ("LPDDR5X", 2), ("HBF", 1)]
    assert validate_hierarchy(HierarchySpec.from_pairs(catalog, pairs), catalog).feasible
    for drop in range(1, len(pairs)):
        rest = pairs[:drop] + pairs[drop + 1:]
        assert validate_hierarchy(HierarchySpec.from_pairs(catalog, rest), catalog).feasible


def test_shoreline_sum_is_exact(catalog):
    spec = HierarchySpec.from_pairs(catalog, [("HBM4", 2), ("LPDDR6", 4)])
    rep = validate_hierarchy(spec, catalog)
    assert math.isclose(rep.shoreline_used, 2 * 16 + 4 * 5.5)
