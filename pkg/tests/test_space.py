import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memexplorer.dse.space import GENES, DesignSpace, FeasibilityFilter
from memexplorer.errors import ContractViolation, EncodingError
from memexplorer.workload import Stage

SPACE = DesignSpace()


def test_gene_count_matches_domains():
    assert len(SPACE.domains) == len(GENES) == len(SPACE.sizes)
    assert SPACE.cardinality == int(np.prod(SPACE.sizes.astype(object)))


def test_minimum_genes_encode_to_zero_on_ordinals():
    v = SPACE.encode_genes(np.zeros(len(GENES), dtype=int))
    assert np.all((v == 0) | (v == 1))  # one-hot blocks carry a single 1
    assert np.all(v >= 0) and np.all(v <= 1)


def test_sram3d_layer_two_is_half():
    genes = np.zeros(len(GENES), dtype=int)
    genes[GENES.index("sram3d")] = 2
    base = SPACE.encode_genes(np.zeros(len(GENES), dtype=int))
    v = SPACE.encode_genes(genes)
    changed = np.flatnonzero(v != base)
    assert len(changed) == 1
    assert v[changed[0]] == pytest.approx(0.5)


def test_out_of_domain_gene():
    genes = np.zeros(len(GENES), dtype=int)
    genes[0] = SPACE.sizes[0]
    with pytest.raises(EncodingError):
        SPACE.encode_genes(genes)
    with pytest.raises(EncodingError):
        SPACE.encode_many(genes[None, :])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_encode_decode_roundtrip(seed):
    g = SPACE.sample_genes(np.random.default_rng(seed), 1)[0]
    assert SPACE.decode_vector(SPACE.encode_genes(g)).tolist() == g.tolist()


def test_encode_many_matches_single():
    g = SPACE.sample_genes(np.random.default_rng(0), 50)
    np.testing.assert_array_equal(SPACE.encode_many(g), np.array([SPACE.encode_genes(x) for x in g]))


def test_design_roundtrip():
    rng = np.random.default_rng(1)
    done = 0
    for g in SPACE.sample_genes(rng, 200):
        try:
            d = SPACE.to_design(g)
        except EncodingError:
            continue
        assert SPACE.from_design(d).tolist() == g.tolist()
        done += 1
    assert done > 100


def test_from_dict_rejects_unknown_field():
    with pytest.raises(ContractViolation):
        DesignSpace.from_dict({"bogus": [1]})


def test_from_dict_narrows_domain():
    s = DesignSpace.from_dict({"vlens": [256, 512], "dataflow": ["WS"]})
    assert s.vlens == (256, 512)
    assert len(s.dataflow) == 1


@pytest.mark.parametrize("stage", [Stage.PREFILL, Stage.DECODE])
def test_mask_matches_scalar_filter(osworld, stage):
    filt = FeasibilityFilter(SPACE, osworld, stage, 700.0)
    g = SPACE.sample_genes(np.random.default_rng(5), 1500)
    fast = filt.mask(g)
    slow = np.array([filt(x) for x in g])
    np.testing.assert_array_equal(fast, slow)
    assert 0 < fast.sum() < len(g)


def test_reasons_explain_rejection(osworld):
    filt = FeasibilityFilter(SPACE, osworld, Stage.PREFILL, 700.0)
    for g in SPACE.sample_genes(np.random.default_rng(6), 200):
        if not filt(g):
            assert filt.reasons(g)
            break
    else:
        pytest.fail("no infeasible sample found")
