import json
from fractions import Fraction

import numpy as np
import pytest

from geneaperc import mc
from geneaperc.coloring import ColorDistribution
from geneaperc.genealogy import complete_tree, star
from geneaperc.mc import (
    CSV_COLUMNS,
    ExperimentPlan,
    ModelSpec,
    ObservableMismatchError,
    PlanError,
    bracket_from_profiles,
    estimate_from_profiles,
    estimate_survival,
    load_plan,
    locate_critical,
    run_plan,
    simulate,
    test_correspondence as compare_models,
    two_sample_chi2,
)

SMALL = dict(replicates=400, depth=20, seed=1)


def test_plan_validation():
    with pytest.raises(PlanError):
        ExperimentPlan(model="ising")
    with pytest.raises(PlanError):
        ExperimentPlan(grid=(0.5, 0.2))
    with pytest.raises(PlanError):
        ExperimentPlan(grid=(1.5,))
    with pytest.raises(PlanError):
        ExperimentPlan(model="dac")
    with pytest.raises(PlanError):
        ExperimentPlan.from_dict({"bogus": 1})


def test_plan_from_dict_and_files(tmp_path):
    plan = ExperimentPlan.from_dict({"model": "dac", "a_root": "1/3", "grid": ["1/4", 0.5], "replicates": "10"})
    assert plan.a_root == pytest.approx(1 / 3) and plan.grid == (0.25, 0.5) and plan.replicates == 10
    (tmp_path / "p.toml").write_text('[plan]\nmodel = "percolation"\ngrid = [0.4, 0.6]\nreplicates = 50\n')
    assert load_plan(tmp_path / "p.toml").grid == (0.4, 0.6)
    (tmp_path / "p.json").write_text(json.dumps({"model": "mim", "d": 2, "grid": [0.1]}))
    assert load_plan(tmp_path / "p.json", {"seed": 9}).seed == 9
    assert plan.plan_hash() == ExperimentPlan.from_dict(plan.to_dict()).plan_hash()


def test_plan_helpers():
    plan = ExperimentPlan(model="mim", d=4, depth=50)
    assert plan.parameter == "r" and plan.retention(0.3) == pytest.approx(0.7)
    assert plan.join_probability == 0.25
    assert plan.depths() == (10, 30, 50)
    assert ExperimentPlan(model="mdm").join_probability == 0.0


def test_trivial_estimates():
    recs = estimate_survival(ExperimentPlan(grid=(0.0, 1.0), **SMALL))
    assert recs[0].estimate == 0.0 and recs[0].survivors == 0
    assert recs[1].estimate == 1.0
    assert recs[1].discarded == 0


def test_supercritical_probe_positive():
    rec = estimate_survival(ExperimentPlan(grid=(0.6,), replicates=10_000, depth=50, seed=0))[0]
    assert rec.estimate > 0 and rec.ci_low > 0


def test_conditioning_discards_dead_trees():
    law = {"type": "finite", "pmf": {"0": "1/4", "2": "3/4"}}
    cond = estimate_survival(ExperimentPlan(law=law, grid=(0.9,), **SMALL))[0]
    raw = estimate_survival(ExperimentPlan(law=law, grid=(0.9,), condition=False, **SMALL))[0]
    assert cond.discarded > 0 and raw.discarded == 0
    assert cond.replicates + cond.discarded == raw.replicates
    assert cond.survivors == raw.survivors


def test_coupled_sweep_is_monotone():
    grid = tuple(np.round(np.linspace(0, 1, 41), 6))
    for model, extra in (("percolation", {}), ("dac", {"d": 3}), ("mim", {"d": 2})):
        recs = estimate_survival(ExperimentPlan(model=model, grid=grid, **SMALL, **extra))
        surv = [r.survivors for r in recs]
        if model == "mim":
            surv = surv[::-1]
        assert all(a <= b for a, b in zip(surv, surv[1:]))


def test_workers_do_not_change_results():
    plan = ExperimentPlan(grid=(0.5, 0.7), replicates=900, depth=15, chunk_size=100, seed=3)
    one = simulate(plan, 1)
    many = simulate(plan, 4)
    assert np.array_equal(one.reach, many.reach) and np.array_equal(one.kth, many.kth)


def test_streams_are_independent():
    plan = ExperimentPlan(grid=(0.5,), **SMALL)
    a, b = simulate(plan, stream=0), simulate(plan, stream=1)
    assert not np.array_equal(a.reach, b.reach)


def test_record_row_format():
    rec = estimate_survival(ExperimentPlan(grid=(0.55,), **SMALL))[0]
    row = rec.row()
    assert len(row) == len(CSV_COLUMNS)
    assert float(row[5]) == rec.estimate
    assert rec.half_width == pytest.approx((rec.ci_high - rec.ci_low) / 2)


def test_curvature_phases():
    plan = ExperimentPlan(grid=(), replicates=4000, depth=50, seed=2)
    prof = simulate(plan)
    used = prof.subset(prof.tree_survived)
    assert mc.curvature_verdict(used, 0.3, 0.99).phase == "subcritical"
    assert mc.curvature_verdict(used, 0.8, 0.99).phase == "supercritical"
    assert mc.curvature_verdict(used, 1.0, 0.99).phase == "supercritical"


def test_bracket_percolation():
    plan = ExperimentPlan(replicates=5000, depth=50, seed=4)
    br = locate_critical(plan, tol=0.05)
    assert br.status == "ok" and br.width <= 0.05 and br.contains(0.5)
    assert br.survival_low is not None and br.survival_high is not None


def test_bracket_mutation_parameter_space():
    plan = ExperimentPlan(model="infinite-alleles", replicates=5000, depth=50, seed=4)
    br = locate_critical(plan, tol=0.05)
    assert br.ok and br.contains(0.5)
    assert br.low == pytest.approx(1 - br.retention_high)


def test_bracket_always_supercritical():
    plan = ExperimentPlan(model="dac", a_root=0.6, replicates=2000, depth=30, seed=1)
    br = locate_critical(plan, tol=0.05)
    assert br.status == "always_supercritical" and br.low == 0.0


def test_bracket_failure_strict():
    plan = ExperimentPlan(replicates=30, depth=10, seed=0)
    br = locate_critical(plan, tol=0.01)
    assert br.status == "bracket_failure"
    with pytest.raises(mc.BracketError) as err:
        locate_critical(plan, tol=0.01, strict=True)
    assert err.value.result.status == "bracket_failure"


def test_repeats_union():
    plan = ExperimentPlan(replicates=2000, depth=40, seed=5)
    br = locate_critical(plan, tol=0.1, repeats=3)
    assert len(br.repeats) == 3
    assert br.low == min(lo for lo, _ in br.repeats) and br.high == max(hi for _, hi in br.repeats)


def test_correspondence_exact_examples():
    t = complete_tree(2, 3)
    rep = compare_models(ModelSpec("percolation", {"p": Fraction(1, 2)}), ModelSpec("infinite-alleles", {"r": Fraction(1, 2)}), t)
    assert rep.passed and rep.method == "exact" and rep.statistic == 0
    same = ModelSpec("dac", {"p": 0.3, "colors": (0.5, 0.5), "root_color": 1})
    assert compare_models(same, same, complete_tree(2, 2)).passed
    diff = compare_models(ModelSpec("percolation", {"p": 0.3}), ModelSpec("percolation", {"p": 0.4}), t)
    assert not diff.passed


def test_dac_vs_mim_star():
    dac = ModelSpec("dac", {"p": Fraction(3, 4), "colors": ColorDistribution.uniform(3, exact=True), "root_color": 2}, "root_type_counts")
    mim = ModelSpec("mim", {"r": Fraction(1, 4), "d": 3, "root_type": 2}, "root_type_counts")
    assert compare_models(dac, mim, star(4)).passed


def test_correspondence_sampling():
    a = ModelSpec("percolation", {"p": 0.6})
    b = ModelSpec("dac", {"p": 0.2, "colors": (0.5, 0.5), "root_color": 1})
    rep = compare_models(a, b, (2, 12), replicates=5000, seed=3)
    assert rep.method == "chi-square" and rep.passed
    bad = compare_models(ModelSpec("percolation", {"p": 0.5}), a, (2, 12), replicates=5000, seed=3)
    assert not bad.passed
    with pytest.raises(ObservableMismatchError):
        compare_models(a, ModelSpec("percolation", {"p": 0.6}, "root_cluster_size"), (2, 3))


def test_two_sample_chi2_identical():
    x = np.arange(1000) % 7
    rep = two_sample_chi2(x, x.copy(), 0.999)
    assert rep.passed and rep.statistic == 0
    assert two_sample_chi2(np.ones(50, int), np.ones(50, int), 0.999).passed


def test_run_plan_archive(tmp_path):
    plan = ExperimentPlan(grid=(0.4, 0.6), replicates=300, depth=12, seed=8, chunk_size=100)
    a = run_plan(plan, tmp_path / "a")
    b = run_plan(plan, tmp_path / "b", workers=8)
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["planHash"] == plan.plan_hash() and man["masterSeed"] == 8 and man["complete"]
    assert len(list((tmp_path / "a" / "chunks").glob("chunk-*.npz"))) == 3
    again = run_plan(plan, tmp_path / "a")
    assert again.csv_path.read_bytes() == a.csv_path.read_bytes()


def test_run_plan_resume(tmp_path):
    plan = ExperimentPlan(grid=(0.5,), replicates=300, depth=12, seed=8, chunk_size=100)
    full = run_plan(plan, tmp_path / "x").csv_path.read_bytes()
    chunk = sorted((tmp_path / "x" / "chunks").glob("*.npz"))[1]
    chunk.unlink()
    assert run_plan(plan, tmp_path / "x").csv_path.read_bytes() == full


def test_run_plan_new_plan_clears_chunks(tmp_path):
    run_plan(ExperimentPlan(grid=(0.5,), replicates=200, depth=12, seed=1, chunk_size=100), tmp_path)
    b = ExperimentPlan(grid=(0.5,), replicates=200, depth=12, seed=2, chunk_size=100)
    fresh = run_plan(b, tmp_path / "fresh").csv_path.read_bytes()
    assert run_plan(b, tmp_path).csv_path.read_bytes() == fresh


def test_empty_grid(tmp_path):
    arc = run_plan(ExperimentPlan(grid=()), tmp_path)
    assert arc.records == ()
    assert arc.csv_path.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_estimates_from_saved_profiles(tmp_path):
    plan = ExperimentPlan(grid=(0.5,), **SMALL)
    prof = simulate(plan)
    prof.save(tmp_path / "p.npz")
    back = mc.Profiles.load(tmp_path / "p.npz", plan.depths())
    assert estimate_from_profiles(plan, back) == estimate_from_profiles(plan, prof)
    assert bracket_from_profiles(plan, back, 0.2).to_dict() == bracket_from_profiles(plan, prof, 0.2).to_dict()
