"""Monte Carlo experiments: survival estimates, critical brackets, two-model tests.

Every replicate ``k`` draws from its own stream derived from the master seed,
and replicates are grouped into chunks fixed by the plan. Workers only decide
which chunk runs where, so results never depend on the worker count.

A replicate grows a Galton-Watson tree lazily and records, for a few depths
``n``, the smallest edge retention at which the root component reaches
generation ``n``. The survival indicator at any retention is then a threshold
test on that number, which couples the whole sweep: estimates are
non-decreasing in retention for every realization.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.stats import chi2, chi2_contingency, norm

from . import kernels, oracle
from .branching import OffspringLaw
from .coloring import ColorDistribution
from .genealogy import Tree
from .percolation import clopper_pearson
from .rng import replicate_generator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

VERSION = "0.1.0"

# model -> name of the swept parameter
MODELS = {
    "percolation": "p",
    "dac": "p",
    "restricted-dac": "p",
    "infinite-alleles": "r",
    "mim": "r",
    "mdm": "r",
}

CSV_COLUMNS = (
    "param",
    "retention",
    "replicates",
    "discarded",
    "survivors",
    "estimate",
    "ciLow",
    "ciHigh",
    "halfWidth",
    "sizeCapEstimate",
    "sizeCapCiLow",
    "sizeCapCiHigh",
    "capped",
    "depth",
)


class PlanError(ValueError):
    pass


class BracketError(RuntimeError):
    def __init__(self, message: str, result: "CriticalBracket"):
        super().__init__(message)
        self.result = result


class ObservableMismatchError(ValueError):
    pass


def _num(x):
    if isinstance(x, str) and "/" in x:
        return float(Fraction(x))
    return float(x)


@dataclass(frozen=True)
class ExperimentPlan:
    """What to simulate and where to look.

    ``grid`` holds values of the model's parameter (``p`` or ``r``). For DaC
    ``a_root`` is the weight of the root's colour (``1/d`` for uniform
    colours); for MIM the mutant hits the root's type with probability ``1/d``.
    """

    model: str = "percolation"
    law: Mapping = field(default_factory=lambda: {"type": "example"})
    grid: tuple[float, ...] = ()
    replicates: int = 1000
    depth: int = 50
    seed: int = 0
    confidence: float = 0.99
    a_root: float | None = None
    d: int | None = None
    condition: bool = True
    size_cap: int = 256
    max_pops: int = 2_000_000
    chunk_size: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(x) for x in self.grid))
        object.__setattr__(self, "law", dict(self.law))
        if self.model not in MODELS:
            raise PlanError(f"unknown model {self.model!r}; expected one of {sorted(MODELS)}")
        if self.replicates < 1:
            raise PlanError("replicates must be >= 1")
        if list(self.grid) != sorted(self.grid):
            raise PlanError("grid must be sorted ascending")
        if any(not 0 <= x <= 1 for x in self.grid):
            raise PlanError("grid values must lie in [0, 1]")
        if not 0 < self.confidence < 1:
            raise PlanError("confidence must lie in (0, 1)")
        if self.depth < 3:
            raise PlanError("depth must be >= 3")
        if self.chunk_size < 1 or self.size_cap < 1:
            raise PlanError("chunk_size and size_cap must be >= 1")
        if self.model in ("dac", "mim") and self.a_root is None and self.d is None:
            raise PlanError(f"{self.model} needs a_root or d")
        if self.a_root is not None and not 0 <= self.a_root <= 1:
            raise PlanError("a_root must lie in [0, 1]")

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "ExperimentPlan":
        known = set(cls.__dataclass_fields__)
        extra = set(cfg) - known
        if extra:
            raise PlanError(f"unknown plan keys: {sorted(extra)}")
        cfg = dict(cfg)
        if "grid" in cfg:
            cfg["grid"] = tuple(_num(x) for x in cfg["grid"])
        if cfg.get("a_root") is not None:
            cfg["a_root"] = _num(cfg["a_root"])
        for k in ("replicates", "depth", "seed", "size_cap", "max_pops", "chunk_size"):
            if k in cfg:
                cfg[k] = int(cfg[k])
        if cfg.get("d") is not None:
            cfg["d"] = int(cfg["d"])
        return cls(**cfg)

    def to_dict(self) -> dict:
        return asdict(self)

    def plan_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def parameter(self) -> str:
        return MODELS[self.model]

    @property
    def offspring_law(self) -> OffspringLaw:
        return OffspringLaw.from_config(self.law)

    @property
    def join_probability(self) -> float:
        """Chance that a closed edge's child still lands in the root's class."""
        if self.model in ("percolation", "restricted-dac", "infinite-alleles", "mdm"):
            return 0.0
        if self.a_root is not None:
            return float(self.a_root)
        return 1.0 / self.d

    def retention(self, x: float) -> float:
        """Edge retention for a parameter value (``1 - r`` for mutation models)."""
        return x if self.parameter == "p" else 1.0 - x

    def depths(self) -> tuple[int, int, int]:
        """Three equally spaced depths ending at ``depth``, used by the curvature rule."""
        h = max(1, round(2 * self.depth / 5))
        return self.depth - 2 * h, self.depth - h, self.depth


def load_plan(path: str | Path, overrides: Mapping | None = None) -> ExperimentPlan:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    cfg = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    cfg = dict(cfg.get("plan", cfg))
    cfg.update(overrides or {})
    return ExperimentPlan.from_dict(cfg)


# --------------------------------------------------------------------------
# replicates


@dataclass(frozen=True)
class Profiles:
    """Per replicate: bottleneck retention to each of three depths, size-cap bottleneck, cap flag."""

    depths: tuple[int, int, int]
    reach: np.ndarray  # shape (R, 3)
    kth: np.ndarray
    capped: np.ndarray

    @property
    def n(self) -> int:
        return int(self.kth.size)

    @property
    def tree_survived(self) -> np.ndarray:
        return np.isfinite(self.reach[:, 2])

    def subset(self, mask) -> "Profiles":
        return Profiles(self.depths, self.reach[mask], self.kth[mask], self.capped[mask])

    def save(self, path: Path) -> None:
        _atomic_write_bytes(path, _npz_bytes(reach=self.reach, kth=self.kth, capped=self.capped))

    @classmethod
    def load(cls, path: Path, depths) -> "Profiles":
        with np.load(path) as z:
            return cls(tuple(depths), z["reach"], z["kth"], z["capped"])

    @classmethod
    def concat(cls, parts: Sequence["Profiles"], depths) -> "Profiles":
        if not parts:
            return cls(tuple(depths), np.empty((0, 3)), np.empty(0), np.empty(0, dtype=bool))
        return cls(
            tuple(depths),
            np.concatenate([p.reach for p in parts]),
            np.concatenate([p.kth for p in parts]),
            np.concatenate([p.capped for p in parts]),
        )


def _npz_bytes(**arrays) -> bytes:
    import io

    buf = io.BytesIO()
    np.savez(buf, **arrays)
    return buf.getvalue()


def simulate_chunk(plan: ExperimentPlan, chunk: int, stream: int = 0) -> Profiles:
    """Replicates ``[chunk * chunk_size, ...)`` of the plan."""
    lo = chunk * plan.chunk_size
    hi = min(lo + plan.chunk_size, plan.replicates)
    cdf = plan.offspring_law.cdf_table()
    depths = plan.depths()
    reach = np.empty((hi - lo, 3))
    kth = np.empty(hi - lo)
    capped = np.zeros(hi - lo, dtype=bool)
    a = plan.join_probability
    for i, k in enumerate(range(lo, hi)):
        rng = replicate_generator(plan.seed, k, stream)
        prof, kt, _, cap = kernels.bottleneck_profile(rng, cdf, a, plan.depth, plan.size_cap, plan.max_pops)
        reach[i] = prof[list(depths)]
        kth[i] = kt
        capped[i] = cap
    return Profiles(depths, reach, kth, capped)


def n_chunks(plan: ExperimentPlan) -> int:
    return -(-plan.replicates // plan.chunk_size)


def simulate(plan: ExperimentPlan, workers: int = 1, stream: int = 0, archive: Path | None = None) -> Profiles:
    """All replicates of the plan; chunks found in ``archive`` are reused, new ones saved there."""
    todo = list(range(n_chunks(plan)))
    parts: dict[int, Profiles] = {}
    if archive is not None:
        archive.mkdir(parents=True, exist_ok=True)
        for c in todo:
            f = archive / f"chunk-{stream:03d}-{c:05d}.npz"
            if f.exists():
                parts[c] = Profiles.load(f, plan.depths())
    missing = [c for c in todo if c not in parts]

    def run(c):
        return c, simulate_chunk(plan, c, stream)

    if workers > 1 and len(missing) > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = ex.map(run, missing)
            for c, prof in results:
                parts[c] = prof
                if archive is not None:
                    prof.save(archive / f"chunk-{stream:03d}-{c:05d}.npz")
    else:
        for c in missing:
            parts[c] = run(c)[1]
            if archive is not None:
                parts[c].save(archive / f"chunk-{stream:03d}-{c:05d}.npz")
    return Profiles.concat([parts[c] for c in todo], plan.depths())


# --------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class EstimateRecord:
    param: float
    retention: float
    replicates: int
    discarded: int
    survivors: int
    estimate: float
    ci_low: float
    ci_high: float
    size_cap_estimate: float
    size_cap_ci_low: float
    size_cap_ci_high: float
    capped: int
    depth: int

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2

    @property
    def excessive_truncation(self) -> bool:
        return self.capped > 0.01 * max(self.replicates, 1)

    def row(self) -> list[str]:
        vals = [
            self.param,
            self.retention,
            self.replicates,
            self.discarded,
            self.survivors,
            self.estimate,
            self.ci_low,
            self.ci_high,
            self.half_width,
            self.size_cap_estimate,
            self.size_cap_ci_low,
            self.size_cap_ci_high,
            self.capped,
            self.depth,
        ]
        return [format(v, ".17g") if isinstance(v, float) else str(v) for v in vals]


def _usable(plan: ExperimentPlan, prof: Profiles) -> tuple[Profiles, int]:
    if not plan.condition:
        return prof, 0
    ok = prof.tree_survived
    return prof.subset(ok), int((~ok).sum())


def estimate_from_profiles(plan: ExperimentPlan, prof: Profiles) -> list[EstimateRecord]:
    used, discarded = _usable(plan, prof)
    n = used.n
    out = []
    for x in plan.grid:
        ret = plan.retention(x)
        k = int((used.reach[:, 2] <= ret).sum())
        ks = int((used.kth <= ret).sum())
        lo, hi = clopper_pearson(k, n, plan.confidence)
        slo, shi = clopper_pearson(ks, n, plan.confidence)
        out.append(
            EstimateRecord(
                param=x,
                retention=ret,
                replicates=n,
                discarded=discarded,
                survivors=k,
                estimate=k / n if n else 0.0,
                ci_low=lo,
                ci_high=hi,
                size_cap_estimate=ks / n if n else 0.0,
                size_cap_ci_low=slo,
                size_cap_ci_high=shi,
                capped=int(used.capped.sum()),
                depth=plan.depth,
            )
        )
    return out


def estimate_survival(plan: ExperimentPlan, workers: int = 1) -> list[EstimateRecord]:
    """Per grid point, the fraction of replicates whose root class reaches generation ``depth``."""
    return estimate_from_profiles(plan, simulate(plan, workers))


# --------------------------------------------------------------------------
# critical point


@dataclass(frozen=True)
class Verdict:
    retention: float
    survival: tuple[float, float, float]
    curvature: float
    ci: tuple[float, float]
    phase: str  # "subcritical" | "supercritical" | "indeterminate"


MIN_DEEP_SURVIVORS = 30


def _inv(x: float) -> float:
    return math.inf if x == 0 else 1.0 / x


def curvature_verdict(prof: Profiles, retention: float, confidence: float) -> Verdict:
    """Classify one retention by the curvature of ``n -> 1 / P(reach n)``.

    Survival to depth ``n`` decays geometrically below criticality, like
    ``1/n`` at it and tends to a positive limit above, so the second
    difference of its reciprocal over equally spaced depths is positive,
    about zero and negative respectively.

    With at least ``MIN_DEEP_SURVIVORS`` replicates reaching the last depth
    the interval is a delta-method one (the three events are nested, which
    fixes their covariance). With fewer, the normal approximation is useless
    and the interval is built from Clopper-Pearson bounds on each depth,
    Bonferroni-corrected. An interval ending at or below zero (which includes
    the no-loss case ``[0, 0]``) means supercritical.
    """
    ind = prof.reach <= retention
    n = ind.shape[0]
    counts = ind.sum(axis=0)
    z = counts / n if n else np.zeros(3)
    surv = tuple(float(x) for x in z)
    if n == 0 or counts[2] == 0:
        return Verdict(retention, surv, math.inf, (math.inf, math.inf), "subcritical")
    curv = 1 / z[2] - 2 / z[1] + 1 / z[0]
    if counts[2] >= MIN_DEEP_SURVIVORS:
        grad = np.array([-1 / z[0] ** 2, 2 / z[1] ** 2, -1 / z[2] ** 2])
        deeper = np.maximum.outer(np.arange(3), np.arange(3))
        cov = z[deeper] - np.outer(z, z)  # reaching the deeper level implies the shallower
        sd = math.sqrt(max(float(grad @ cov @ grad), 0.0) / n)
        w = float(norm.ppf(1 - (1 - confidence) / 2)) * sd
        lo, hi = curv - w, curv + w
    else:
        each = 1 - (1 - confidence) / 3
        b = [clopper_pearson(int(k), n, each) for k in counts]
        lo = _inv(b[2][1]) - 2 * _inv(b[1][0]) + _inv(b[0][1])
        hi = _inv(b[2][0]) - 2 * _inv(b[1][1]) + _inv(b[0][0])
    phase = "subcritical" if lo > 0 else "supercritical" if hi <= 0 else "indeterminate"
    return Verdict(retention, surv, float(curv), (float(lo), float(hi)), phase)


@dataclass(frozen=True)
class CriticalBracket:
    """Bracket in the plan's own parameter (``p`` or ``r``)."""

    low: float
    high: float
    status: str  # "ok" | "always_supercritical" | "bracket_failure"
    retention_low: float
    retention_high: float
    survival_low: EstimateRecord | None
    survival_high: EstimateRecord | None
    verdicts: tuple[Verdict, ...]
    replicates: int
    discarded: int
    repeats: tuple[tuple[float, float], ...] = ()

    @property
    def width(self) -> float:
        return self.high - self.low

    def contains(self, x: float) -> bool:
        return self.low <= x <= self.high

    @property
    def ok(self) -> bool:
        return self.status in ("ok", "always_supercritical")

    def to_dict(self) -> dict:
        return {
            "low": self.low,
            "high": self.high,
            "status": self.status,
            "retentionLow": self.retention_low,
            "retentionHigh": self.retention_high,
            "survivalLow": None if self.survival_low is None else asdict(self.survival_low),
            "survivalHigh": None if self.survival_high is None else asdict(self.survival_high),
            "replicates": self.replicates,
            "discarded": self.discarded,
            "repeats": [list(r) for r in self.repeats],
            "verdicts": [asdict(v) for v in self.verdicts],
        }


def bracket_from_profiles(plan: ExperimentPlan, prof: Profiles, tol: float) -> CriticalBracket:
    """Scan retentions on a grid of step ``tol / 8`` and read the bracket off the verdicts.

    ``pLow`` is the largest subcritical point with no supercritical point
    below it, ``pHigh`` the smallest supercritical point with no subcritical
    point above it. A scan rather than a bisection: with few deep survivors
    the verdict can be indeterminate on islands well inside the subcritical
    range, which would trap a bisection.
    """
    used, discarded = _usable(plan, prof)
    steps = math.ceil(8 / tol)
    grid = [i / steps for i in range(steps + 1)]
    verdicts = [curvature_verdict(used, x, plan.confidence) for x in grid]
    phases = [v.phase for v in verdicts]
    sub = [i for i, ph in enumerate(phases) if ph == "subcritical"]
    sup = [i for i, ph in enumerate(phases) if ph == "supercritical"]
    if phases[0] != "subcritical":
        status = "always_supercritical"
        i_low, i_high = 0, sup[0] if sup else steps
    else:
        i_low = max(i for i in sub if not sup or i < sup[0])
        above = [i for i in sup if i > sub[-1]]
        i_high = above[0] if above else steps
        status = "ok" if above and grid[i_high] - grid[i_low] <= tol else "bracket_failure"
    r_low, r_high = grid[i_low], grid[i_high]
    recs = {}
    for r in sorted({r_low, r_high}):
        x = r if plan.parameter == "p" else 1.0 - r
        recs[r] = estimate_from_profiles(replace(plan, grid=(x,)), prof)[0]
    if plan.parameter == "p":
        low, high = r_low, r_high
    else:
        low, high = 1.0 - r_high, 1.0 - r_low
    return CriticalBracket(
        low=low,
        high=high,
        status=status,
        retention_low=r_low,
        retention_high=r_high,
        survival_low=recs[r_low],
        survival_high=recs[r_high],
        verdicts=tuple(verdicts),
        replicates=used.n,
        discarded=discarded,
    )


def locate_critical(plan: ExperimentPlan, tol: float = 0.05, workers: int = 1, repeats: int = 1, strict: bool = False) -> CriticalBracket:
    """Bracket the critical parameter on one coupled set of replicates.

    ``pLow`` is the largest point found subcritical and ``pHigh`` the smallest
    found supercritical, each to within ``tol / 8``. With ``repeats > 1`` the
    experiment is redone on independent streams and the reported bracket is
    the union of all of them. ``strict`` raises :class:`BracketError` when
    the bracket fails.
    """
    if tol <= 0:
        raise PlanError("tol must be positive")
    results = [bracket_from_profiles(plan, simulate(plan, workers, stream=s), tol) for s in range(repeats)]
    res = results[0]
    if repeats > 1:
        low = min(r.low for r in results)
        high = max(r.high for r in results)
        statuses = {r.status for r in results}
        status = "bracket_failure" if "bracket_failure" in statuses else res.status
        res = CriticalBracket(
            low, high, status, res.retention_low, res.retention_high, res.survival_low, res.survival_high,
            res.verdicts, res.replicates, res.discarded, tuple((r.low, r.high) for r in results),
        )
    if strict and not res.ok:
        raise BracketError(f"no bracket of width <= {tol}; try a larger depth or more replicates", res)
    return res


# --------------------------------------------------------------------------
# two-model comparison


@dataclass(frozen=True)
class ModelSpec:
    """A model producing the root class size on a given tree.

    ``model`` is one of percolation, dac, restricted-dac, infinite-alleles,
    mim, mdm. ``params`` holds ``p`` / ``r`` and ``colors`` (DaC weights),
    ``root_color`` or ``d`` as relevant.
    """

    model: str
    params: Mapping = field(default_factory=dict)
    observable: str = "root_component_size"

    def oracle_law(self, t: Tree) -> oracle.ExactLaw:
        m, prm = self.model, dict(self.params)
        if m == "percolation":
            return oracle.exact_root_cluster_law(t, prm["p"])
        name = {"dac": "dac", "restricted-dac": "restrictedDac", "infinite-alleles": "infiniteAlleles", "mim": "mim", "mdm": "mdm"}[m]
        if "colors" in prm and not isinstance(prm["colors"], ColorDistribution):
            prm["colors"] = ColorDistribution(tuple(oracle.exact(c) for c in prm["colors"]))
        return oracle.exact_coloring_law(t, name, prm, observable=self.observable)

    def lazy_args(self) -> tuple[float, np.ndarray | None, int]:
        """``(retention, colour cdf, root colour index)`` for the generation-by-generation sampler."""
        m, prm = self.model, self.params
        if m == "percolation":
            return float(prm["p"]), None, -1
        if m in ("infinite-alleles", "mdm"):
            return 1.0 - float(prm["r"]), None, -1
        if m == "restricted-dac":
            return float(prm["p"]), None, -1
        if m == "mim":
            d = int(prm["d"])
            return 1.0 - float(prm["r"]), ColorDistribution.uniform(d).cdf(), int(prm.get("root_type", 1)) - 1
        if m == "dac":
            colors = prm["colors"]
            colors = colors if isinstance(colors, ColorDistribution) else ColorDistribution(tuple(float(c) for c in colors))
            return float(prm["p"]), colors.cdf(), int(prm.get("root_color", 1)) - 1
        raise ObservableMismatchError(f"unknown model {m!r}")


@dataclass(frozen=True)
class CorrespondenceReport:
    method: str  # "exact" | "chi-square"
    statistic: float
    threshold: float
    p_value: float | None
    passed: bool
    replicates: int
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def sample_component_sizes(spec: ModelSpec, arity: int, depth: int, replicates: int, seed: int, stream: int = 0) -> np.ndarray:
    p, cdf, root = spec.lazy_args()
    out = np.empty(replicates, dtype=np.int64)
    for k in range(replicates):
        out[k], _ = kernels.component_size(replicate_generator(seed, k, stream), arity, depth, p, cdf, root)
    return out


def _pooled_bins(a: np.ndarray, b: np.ndarray, min_count: int = 20) -> np.ndarray:
    """Bin edges over the pooled sample, each bin holding at least ``min_count`` pooled values."""
    vals, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    edges = [vals[0]]
    acc = 0
    for v, c in zip(vals, counts):
        if acc >= min_count:
            edges.append(v)
            acc = 0
        acc += c
    if acc < min_count and len(edges) > 1:
        edges.pop()
    edges.append(vals[-1] + 1)
    return np.asarray(edges)


def two_sample_chi2(a: np.ndarray, b: np.ndarray, level: float) -> CorrespondenceReport:
    edges = _pooled_bins(a, b)
    table = np.vstack([np.histogram(a, edges)[0], np.histogram(b, edges)[0]])
    if table.shape[1] < 2:
        return CorrespondenceReport("chi-square", 0.0, 0.0, 1.0, True, int(a.size), {"bins": 1})
    stat, pval, dof, _ = chi2_contingency(table, correction=False)
    thr = float(chi2.ppf(level, dof))
    return CorrespondenceReport("chi-square", float(stat), thr, float(pval), bool(stat <= thr), int(a.size), {"bins": int(table.shape[1]), "dof": int(dof)})


def test_correspondence(
    model_a: ModelSpec,
    model_b: ModelSpec,
    instance: Tree | tuple[int, int],
    replicates: int = 100_000,
    level: float = 0.999,
    seed: int = 0,
) -> CorrespondenceReport:
    """Compare two models' root-class size laws on one instance.

    A :class:`Tree` is compared exactly through the oracle (pass iff TV is
    zero). An ``(arity, depth)`` pair is sampled generation by generation
    and compared with a two-sample chi-square test at ``level``.
    """
    if model_a.observable != model_b.observable:
        raise ObservableMismatchError(f"{model_a.observable!r} vs {model_b.observable!r}")
    if isinstance(instance, Tree):
        la, lb = model_a.oracle_law(instance), model_b.oracle_law(instance)
        tv = oracle.tv_distance(la, lb)
        exact = isinstance(tv, (Fraction, int))
        passed = tv == 0 if exact else tv <= 1e-12
        return CorrespondenceReport("exact", float(tv), 0.0 if exact else 1e-12, None, bool(passed), 0, {"outcomes": len(la)})
    if model_a.observable != "root_component_size":
        raise ObservableMismatchError("sampling only supports root_component_size")
    arity, depth = instance
    a = sample_component_sizes(model_a, arity, depth, replicates, seed, 0)
    b = sample_component_sizes(model_b, arity, depth, replicates, seed, 1)
    return two_sample_chi2(a, b, level)


test_correspondence.__test__ = False  # not a pytest test despite the name


# --------------------------------------------------------------------------
# archives


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def records_csv(records: Sequence[EstimateRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines += [",".join(r.row()) for r in records]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Archive:
    directory: Path
    records: tuple[EstimateRecord, ...]
    manifest: dict

    @property
    def csv_path(self) -> Path:
        return self.directory / "estimates.csv"


def run_plan(plan: ExperimentPlan, out: str | Path, workers: int = 1) -> Archive:
    """Run a plan into ``out``: ``estimates.csv``, ``manifest.json`` and per-chunk replicate files.

    Chunk files already present for the same plan are reused, so an
    interrupted run resumes where it stopped.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    h = plan.plan_hash()
    chunks = out / "chunks"
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text(encoding="utf-8"))
        if old.get("planHash") != h and chunks.exists():
            for f in chunks.glob("chunk-*.npz"):
                f.unlink()
    manifest = {"planHash": h, "masterSeed": plan.seed, "version": VERSION, "plan": plan.to_dict(), "complete": False}
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if plan.grid:
        records = estimate_from_profiles(plan, simulate(plan, workers, archive=chunks))
    else:
        records = []
    atomic_write_text(out / "estimates.csv", records_csv(records))
    manifest["complete"] = True
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return Archive(out, tuple(records), manifest)
