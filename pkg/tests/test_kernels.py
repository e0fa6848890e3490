import json
import os
import subprocess
import sys

import numpy as np
import pytest

from geneaperc import kernels
from geneaperc._accel import USE_NUMBA, jit_disabled
from geneaperc.branching import OffspringLaw, example_law
from geneaperc.genealogy import complete_tree


def rng(seed):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("seed", range(5))
def test_draw_counts(seed):
    cdf = example_law().cdf_table()
    u = rng(seed).random(10_000)
    a = kernels.draw_counts_loop(u, cdf)
    assert np.array_equal(a, kernels.draw_counts_np(u, cdf))
    edge = np.array([0.0, cdf[0], cdf[1], np.nextafter(1.0, 0)])
    assert np.array_equal(kernels.draw_counts_loop(edge, cdf), kernels.draw_counts_np(edge, cdf))


@pytest.mark.parametrize("law", [example_law(), OffspringLaw.binomial(2, 0.6), OffspringLaw.poisson(1.3)])
@pytest.mark.parametrize("budget", [(8, 10**6), (30, 500)])
def test_grow_bfs(law, budget):
    cdf = law.cdf_table()
    for seed in range(5):
        a = kernels.grow_bfs_loop(rng(seed), cdf, *budget)
        b = kernels.grow_bfs_np(rng(seed), cdf, *budget)
        assert a[2] == b[2]
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_bfs_to_preorder():
    for seed in range(5):
        _, counts, _ = kernels.grow_bfs_np(rng(seed), example_law().cdf_table(), 6, 10**6)
        assert np.array_equal(kernels.bfs_to_preorder_loop(counts), kernels.bfs_to_preorder_np(counts))


def test_cluster_labels_orders_agree():
    t = complete_tree(3, 5)
    order = np.arange(1, len(t), dtype=np.int64)
    for seed in range(5):
        mask = np.concatenate(([False], rng(seed).random(t.n_edges) < 0.5))
        a = kernels.cluster_labels_loop(t.parent, mask, order)
        b = kernels.cluster_labels_np(t.parent, mask, t.levels)
        c = kernels.cluster_labels_loop(t.parent, mask, rng(seed + 99).permutation(order))
        assert np.array_equal(a, b) and np.array_equal(a, c)


@pytest.mark.parametrize("avoid", [True, False])
def test_propagate_types(avoid):
    t = complete_tree(2, 8)
    for seed in range(5):
        g = rng(seed)
        keep = g.random(len(t)) < 0.4
        draw = g.random(len(t))
        a = kernels.propagate_types_loop(t.parent, keep, draw, 3, 1, avoid)
        b = kernels.propagate_types_np(t.parent, keep, draw, 3, 1, avoid, t.levels)
        assert np.array_equal(a, b)


@pytest.mark.parametrize("a_root", [0.0, 1 / 3])
def test_bottleneck_profile(a_root):
    cdf = example_law().cdf_table()
    for seed in range(5):
        a = kernels.bottleneck_profile_loop(rng(seed), cdf, a_root, 20, 64, 100_000)
        b = kernels.bottleneck_profile_py(rng(seed), cdf, a_root, 20, 64, 100_000)
        assert np.array_equal(a[0], b[0]) and a[1:] == b[1:]
        prof = a[0]
        assert prof[0] == 0 and (np.diff(prof) >= 0).all()


@pytest.mark.parametrize("color", [-1, 0])
def test_component_size(color):
    cdf = np.array([0.5, 1.0])
    for seed in range(10):
        a = kernels.component_size_loop(rng(seed), 2, 12, 0.45, cdf, color, 10**6)
        b = kernels.component_size_np(rng(seed), 2, 12, 0.45, cdf, color, 10**6)
        assert a == b
    size, truncated = kernels.component_size(rng(0), 2, 30, 1.0, max_size=100)
    assert truncated and size == 63


def test_dispatch_matches_flag():
    assert USE_NUMBA == (not jit_disabled())


SCRIPT = r"""
import json
import numpy as np
import geneaperc
from geneaperc import mc, kernels
from geneaperc.branching import GrowthBudget, sample_bgw_tree
from geneaperc.coloring import MutationParams, mdm_sample, restricted_dac_color
from geneaperc.percolation import clusters, percolate
t = sample_bgw_tree(geneaperc.example_law(), GrowthBudget(7), seed=3).tree
cfg = percolate(t, 0.5, seed=4)
plan = mc.ExperimentPlan(model="dac", grid=(0.1, 0.3), replicates=200, depth=12, seed=5, d=3)
recs = mc.estimate_survival(plan)
print(json.dumps({
    "jit": kernels.USE_NUMBA,
    "tree": t.digest(),
    "labels": clusters(t, cfg).label.tolist(),
    "rdac": restricted_dac_color(t, 0.3, 3, seed=6)[1].values.tolist(),
    "mdm": mdm_sample(GrowthBudget(6), MutationParams(0.4, 3, geneaperc.example_law()), seed=7).types.tolist(),
    "csv": mc.records_csv(recs),
}))
"""


def run_script(disable: str) -> dict:
    env = {**os.environ, "GENEAPERC_DISABLE_JIT": disable}
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_fallback_gives_identical_results():
    jit = run_script("0")
    plain = run_script("1")
    assert jit.pop("jit") is True and plain.pop("jit") is False
    assert jit == plain
