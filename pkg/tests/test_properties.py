"""Randomized invariants, 1000 generated cases each."""

from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from geneaperc.branching import GrowthBudget, OffspringLaw, sample_bgw_tree
from geneaperc.coloring import ColorDistribution, MutationParams, compositions, dac_color, mdm_offspring_pmf, mim_offspring_pmf, restricted_dac_color
from geneaperc.genealogy import ancestors, build_tree, format_label, parse_label, parse_text, subtree
from geneaperc.percolation import EdgeConfig, clusters, root_cluster_tree, sample_noise, threshold_noise

CASES = settings(max_examples=1000, deadline=None)

nested = st.recursive(st.just([]), lambda kids: st.lists(kids, max_size=4), max_leaves=40)


def to_pairs(node, label=()):
    yield label, len(node)
    for i, child in enumerate(node, 1):
        yield from to_pairs(child, label + (i,))


def make_tree(node):
    return build_tree(list(to_pairs(node)))


@st.composite
def trees_with_bits(draw):
    t = make_tree(draw(nested))
    bits = draw(st.lists(st.booleans(), min_size=t.n_edges, max_size=t.n_edges))
    return t, np.array(bits, dtype=bool)


@CASES
@given(nested)
def test_ulam_harris_validity(node):
    t = make_tree(node)
    labels = t.labels()
    assert len(set(labels)) == len(t)
    assert labels == sorted(labels)  # pre-order is lexicographic order
    for v, lab in enumerate(labels):
        if lab:
            mother = t.index(lab[:-1])
            assert t.parent[v] == mother
            assert 1 <= lab[-1] <= t.child_count[mother]
            assert ancestors(t, lab)[-1] == lab[:-1]
        assert parse_label(format_label(lab)) == lab
    assert int(t.child_count.sum()) == t.n_edges


@CASES
@given(nested)
def test_tree_roundtrips(node):
    t = make_tree(node)
    assert parse_text(t.to_text()) == t
    assert build_tree(t.export()[::-1]) == t
    u = t.labels()[len(t) // 2]
    s = subtree(t, u)
    assert len(s) == t.subtree_size[t.index(u)]


@CASES
@given(st.integers(0, 2**32 - 1), st.sampled_from([{0: 0.3, 1: 0.2, 3: 0.5}, {1: 0.5, 2: 0.5}, {0: 0.5, 4: 0.5}]))
def test_sampled_trees_are_valid(seed, pmf):
    g = sample_bgw_tree(OffspringLaw.finite(pmf), GrowthBudget(5, 400), seed=seed)
    t = g.tree
    assert build_tree(t.export()) == t
    assert (t.parent[1:] < np.arange(1, len(t))).all()
    assert set(np.unique(t.child_count[t.depth < t.height])) <= set(pmf) | {0}


@CASES
@given(st.fractions(0, 1, max_denominator=50), st.integers(2, 4), st.integers(0, 6), st.data())
def test_mutation_pmfs_normalized(r, d, n, data):
    params = MutationParams(r, d)
    i = data.draw(st.integers(1, d))
    for pmf in (mdm_offspring_pmf, mim_offspring_pmf):
        shell = [pmf(params, i, v) for v in compositions(n, d)]
        assert all(x >= 0 for x in shell)
        assert sum(shell) == 1


@CASES
@given(st.lists(st.integers(1, 1000), min_size=1, max_size=8))
def test_offspring_law_cdf(weights):
    total = sum(weights)
    law = OffspringLaw.finite({k: Fraction(w, total) for k, w in enumerate(weights)})
    cdf = law.cdf_table()
    assert cdf[-1] == 1.0 and (np.diff(cdf) >= 0).all()
    assert sum(law.exact_pmf().values()) == 1
    assert abs(float(law.mean) - sum(k * w for k, w in enumerate(weights)) / total) < 1e-12


@CASES
@given(trees_with_bits())
def test_partition_well_formed(tb):
    t, bits = tb
    part = clusters(t, EdgeConfig(bits))
    lab = part.label
    assert (lab <= np.arange(len(t))).all()
    assert np.array_equal(lab[lab], lab)
    assert int(part.sizes.sum()) == len(t)
    child = np.arange(1, len(t))
    assert np.array_equal(lab[child] == lab[t.parent[child]], bits)
    assert part.n_clusters == len(t) - int(bits.sum())
    assert len(root_cluster_tree(t, EdgeConfig(bits))) == part.root_size


@CASES
@given(trees_with_bits(), st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_coupling_monotone(tb, seed, p1, p2):
    t, _ = tb
    lo, hi = sorted((p1, p2))
    noise = sample_noise(t, seed)
    a, b = threshold_noise(noise, lo), threshold_noise(noise, hi)
    assert not (a.bits & ~b.bits).any()
    assert clusters(t, a).root_size <= clusters(t, b).root_size


@CASES
@given(trees_with_bits(), st.integers(0, 2**32 - 1), st.floats(0, 1), st.integers(2, 4))
def test_colourings_respect_clusters(tb, seed, p, d):
    t, _ = tb
    cfg, col = dac_color(t, p, ColorDistribution.uniform(d), seed=seed)
    lab = clusters(t, cfg).label
    assert np.array_equal(col.values, col.values[lab])
    cfg, col = restricted_dac_color(t, p, d, seed=seed)
    part = clusters(t, cfg)
    assert np.array_equal(col.values, col.values[part.label])
    heads = part.ids[1:]
    assert (col.values[heads] != col.values[t.parent[heads]]).all()
    assert ((col.values >= 1) & (col.values <= d)).all()
