"""Named verification suites: exact identities and Monte Carlo brackets.

Each suite takes a flat parameter mapping (defaults below) and returns a list
of :class:`Check` records. ``run_suites`` is what ``geneaperc verify`` calls.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from . import coloring, mc, oracle
from .branching import OffspringLaw, extinction_probability
from .genealogy import complete_tree


class UnknownSuiteError(KeyError):
    pass


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _frac(x) -> Fraction:
    return Fraction(x) if isinstance(x, str) else oracle.exact(x)


def _fracs(xs) -> list[Fraction]:
    return [_frac(x) for x in xs]


def suite_correspondences(cfg: Mapping) -> list[Check]:
    out = []
    t = complete_tree(2, int(cfg.get("depth", 3)))
    for r in _fracs(cfg.get("r_values", ["1/5", "1/2", "4/5"])):
        a = oracle.exact_root_cluster_law(t, 1 - r)
        b = oracle.exact_coloring_law(t, "infiniteAlleles", {"r": r}, observable="root_component_size")
        tv = oracle.tv_distance(a, b)
        out.append(Check("correspondences", f"percolation~infinite-alleles r={r}", tv == 0, {"tv": str(tv)}))
    max_n = int(cfg.get("max_children", 6))
    base = OffspringLaw.uniform(range(max_n + 1))
    mu = base.exact_pmf()
    for model, dac_model, pmf in (("mim", "dac", coloring.mim_offspring_pmf), ("mdm", "restrictedDac", coloring.mdm_offspring_pmf)):
        for d in cfg.get("d_values", [2, 3, 4]):
            d = int(d)
            for r in _fracs(cfg.get("r_mut_values", ["1/4", "1/2"])):
                params = coloring.MutationParams(r, d, base)
                oracle_params = {"p": 1 - r, "d": d}
                if dac_model == "dac":
                    oracle_params = {"p": 1 - r, "colors": coloring.ColorDistribution.uniform(d, exact=True)}
                worst, shell_err = 0, 0
                for n in range(max_n + 1):
                    for i in range(1, d + 1):
                        star = oracle.star_type_law(dac_model, oracle_params, n, i)
                        shell = 0
                        for v in coloring.compositions(n, d):
                            lhs = pmf(params, i, v)
                            worst = max(worst, abs(lhs - mu.get(n, 0) * star[v]))
                            shell += lhs
                        shell_err = max(shell_err, abs(shell - mu.get(n, 0)))
                ok = worst <= Fraction(1, 10**12) and shell_err <= Fraction(1, 10**12)
                out.append(
                    Check("correspondences", f"{dac_model}~{model} d={d} r={r}", bool(ok), {"maxPmfError": float(worst), "maxShellError": float(shell_err)})
                )
    return out


def suite_cluster_shape(cfg: Mapping) -> list[Check]:
    out = []
    arity, depth = int(cfg.get("arity", 2)), int(cfg.get("depth", 2))
    for p in _fracs(cfg.get("p_values", ["3/10", "1/2", "7/10"])):
        a = oracle.exact_percolation_shape_law(arity, depth, p)
        b = oracle.exact_bgw_truncated_law(OffspringLaw.binomial(arity, p), oracle.TruncationSpec(depth))
        tv = oracle.tv_distance(a, b)
        out.append(Check("cluster-shape", f"cluster shape ~ Binomial({arity},{p}) depth {depth}", tv == 0, {"tv": str(tv), "shapes": len(a)}))
    return out


def _pairs(cfg) -> list[tuple[Fraction, Fraction]]:
    return [(_frac(p), _frac(a)) for p, a in cfg.get("pairs", [["2/5", "1/3"], ["1/5", "1/2"]])]


def suite_dac_bernoulli(cfg: Mapping) -> list[Check]:
    out = []
    for p, a in _pairs(cfg):
        dac = mc.ModelSpec("dac", {"p": p, "colors": (a, 1 - a), "root_color": 1})
        bern = mc.ModelSpec("percolation", {"p": coloring.effective_retention(p, a)})
        for depth in range(1, int(cfg.get("exact_depth", 3)) + 1):
            rep = mc.test_correspondence(dac, bern, complete_tree(2, depth))
            out.append(Check("dac-bernoulli", f"exact p={p} a={a} depth {depth}", rep.passed, rep.to_dict()))
        reps = int(cfg.get("replicates", 20000))
        if reps > 0:
            rep = mc.test_correspondence(
                dac, bern, (2, int(cfg.get("mc_depth", 30))), reps, float(cfg.get("level", 0.999)), int(cfg.get("seed", 0))
            )
            out.append(Check("dac-bernoulli", f"chi-square p={p} a={a} depth {cfg.get('mc_depth', 30)}", rep.passed, rep.to_dict()))
    return out


def _plan(cfg: Mapping, **kw) -> mc.ExperimentPlan:
    base = {
        "law": cfg.get("law", {"type": "example"}),
        "replicates": int(cfg.get("replicates", 20000)),
        "depth": int(cfg.get("depth", 50)),
        "seed": int(cfg.get("seed", 0)),
        "confidence": float(cfg.get("confidence", 0.99)),
    }
    base.update(kw)
    return mc.ExperimentPlan.from_dict(base)


def suite_bond_threshold(cfg: Mapping, workers: int = 1) -> list[Check]:
    plan = _plan(cfg, model="percolation", grid=[float(x) for x in cfg.get("probe", [0.4, 0.6])])
    m = float(plan.offspring_law.mean)
    target = 1.0 / m
    prof = mc.simulate(plan, workers)
    recs = mc.estimate_from_profiles(plan, prof)
    br = mc.bracket_from_profiles(plan, prof, float(cfg.get("tol", 0.05)))
    out = [Check("bond-threshold", f"bracket contains 1/m={target:.6g}", br.status == "ok" and br.contains(target), br.to_dict())]
    for r in recs:
        if r.param < target:
            out.append(Check("bond-threshold", f"survival at p={r.param} upper < 0.02", r.ci_high < 0.02, {"estimate": r.estimate, "ciHigh": r.ci_high}))
        elif r.param > target:
            out.append(Check("bond-threshold", f"survival at p={r.param} lower > 0.05", r.ci_low > 0.05, {"estimate": r.estimate, "ciLow": r.ci_low}))
    return out


def suite_dac_threshold(cfg: Mapping, workers: int = 1) -> list[Check]:
    kw = {"model": "dac"}
    if "a_root" in cfg:
        kw["a_root"] = cfg["a_root"]
    else:
        kw["d"] = int(cfg.get("d", 3))
    plan = _plan(cfg, grid=[float(cfg.get("probe", 0.05))], **kw)
    m = float(plan.offspring_law.mean)
    a = plan.join_probability
    target, clamped = coloring.dac_critical_bgw(m, a)
    prof = mc.simulate(plan, workers)
    br = mc.bracket_from_profiles(plan, prof, float(cfg.get("tol", 0.05)))
    detail = {"m": m, "a_root": a, "formula": target, "clamped": clamped, **br.to_dict()}
    if clamped:
        rec = mc.estimate_from_profiles(plan, prof)[0]
        detail["probe"] = {"p": rec.param, "estimate": rec.estimate, "ciLow": rec.ci_low}
        return [
            Check("dac-threshold", "always supercritical reported", br.status == "always_supercritical", detail),
            Check("dac-threshold", f"survival positive at p={rec.param}", rec.ci_low > 0, detail["probe"]),
        ]
    return [Check("dac-threshold", f"bracket contains {target:.6g}", br.status == "ok" and br.contains(target), detail)]


def suite_extinction(cfg: Mapping) -> list[Check]:
    cases = [
        (OffspringLaw.binomial(2, 0.75), 1 / 9, 1e-10),
        (OffspringLaw.poisson(0.5), 1.0, 0.0),
        (OffspringLaw.from_config({"type": "example"}), 0.0, 0.0),
    ]
    out = []
    for law, want, tol in cases:
        q = extinction_probability(law)
        out.append(Check("extinction", f"{law!r}", abs(q - want) <= tol, {"q": q, "expected": want}))
    return out


SUITES: dict[str, Callable] = {
    "correspondences": suite_correspondences,
    "cluster-shape": suite_cluster_shape,
    "dac-bernoulli": suite_dac_bernoulli,
    "bond-threshold": suite_bond_threshold,
    "dac-threshold": suite_dac_threshold,
    "extinction": suite_extinction,
}
MC_SUITES = {"bond-threshold", "dac-threshold"}


def run_suites(names, cfg: Mapping | None = None, workers: int = 1) -> list[Check]:
    cfg = cfg or {}
    names = list(names)
    if not names:
        raise UnknownSuiteError("no suite named")
    if "all" in names:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise UnknownSuiteError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)} or 'all'")
    out = []
    for n in names:
        sub = {**cfg, **cfg.get(n, {})} if isinstance(cfg.get(n), dict) else dict(cfg)
        fn = SUITES[n]
        out.extend(fn(sub, workers) if n in MC_SUITES else fn(sub))
    return out
