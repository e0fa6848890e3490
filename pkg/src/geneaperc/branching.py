"""Offspring laws, Galton-Watson samplers, extinction and criticality."""

from __future__ import annotations

import enum
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import kernels
from .genealogy import Tree
from .rng import RandomSeed, as_generator

Number = Union[float, Fraction]

PMF_TOL = 1e-12
CLASSIFY_TOL = 1e-9
# parametric laws with unbounded support are tabulated up to this tail mass
TAIL_MASS = 1e-17


class LawError(ValueError):
    pass


class BudgetError(ValueError):
    pass


class NoConvergenceError(RuntimeError):
    pass


class ReducibleMatrixWarning(UserWarning):
    """Perron-Frobenius trichotomy only covers positive (irreducible) mean matrices."""


class OffspringLaw:
    """Law of the number of children of one individual.

    ``kind`` is ``"finite"`` (explicit pmf), ``"binomial"`` (n, p),
    ``"poisson"`` (lam) or ``"geometric"`` (p, counting failures before the
    first success, so ``mu(k) = p (1-p)^k``). Parameters may be
    :class:`fractions.Fraction` for exact computations.
    """

    def __init__(self, kind: str, **params):
        self.kind = kind
        self.params = params
        if kind == "finite":
            pmf = {int(k): v for k, v in params["pmf"].items() if v != 0}
            if not pmf:
                raise LawError("empty pmf")
            if any(k < 0 for k in pmf) or any(v < 0 or v > 1 for v in pmf.values()):
                raise LawError("pmf must live on non-negative integers with values in [0, 1]")
            if abs(float(sum(pmf.values())) - 1.0) > PMF_TOL:
                raise LawError(f"pmf sums to {float(sum(pmf.values()))!r}, not 1")
            self.params = {"pmf": dict(sorted(pmf.items()))}
        elif kind == "binomial":
            if int(params["n"]) < 0 or not 0 <= params["p"] <= 1:
                raise LawError("binomial needs n >= 0 and p in [0, 1]")
        elif kind == "poisson":
            if params["lam"] < 0:
                raise LawError("poisson needs lam >= 0")
        elif kind == "geometric":
            if not 0 < params["p"] <= 1:
                raise LawError("geometric needs p in (0, 1]")
        else:
            raise LawError(f"unknown law kind {kind!r}")

    # constructors

    @classmethod
    def finite(cls, pmf: Mapping[int, Number]) -> "OffspringLaw":
        return cls("finite", pmf=dict(pmf))

    @classmethod
    def uniform(cls, values: Sequence[int]) -> "OffspringLaw":
        w = Fraction(1, len(values))
        return cls.finite({int(k): w for k in values})

    @classmethod
    def point_mass(cls, k: int) -> "OffspringLaw":
        return cls.finite({k: Fraction(1)})

    @classmethod
    def binomial(cls, n: int, p: Number) -> "OffspringLaw":
        return cls("binomial", n=int(n), p=p)

    @classmethod
    def poisson(cls, lam: float) -> "OffspringLaw":
        return cls("poisson", lam=lam)

    @classmethod
    def geometric(cls, p: float) -> "OffspringLaw":
        return cls("geometric", p=p)

    @classmethod
    def from_config(cls, cfg: Mapping) -> "OffspringLaw":
        """``{"type": "finite", "pmf": {"1": 0.5, ...}}``, ``{"type": "binomial", "n": 2, "p": 0.75}``, ..."""
        kind = cfg.get("type", "finite")
        if kind == "example":
            return example_law()
        if kind == "finite":
            return cls.finite({int(k): _num(v) for k, v in cfg["pmf"].items()})
        if kind == "uniform":
            return cls.uniform(cfg["values"])
        if kind == "point":
            return cls.point_mass(int(cfg["k"]))
        if kind == "binomial":
            return cls.binomial(int(cfg["n"]), _num(cfg["p"]))
        if kind == "poisson":
            return cls.poisson(float(cfg["lam"]))
        if kind == "geometric":
            return cls.geometric(float(cfg["p"]))
        raise LawError(f"unknown law type {kind!r}")

    def to_config(self) -> dict:
        if self.kind == "finite":
            return {"type": "finite", "pmf": {str(k): _plain(v) for k, v in self.params["pmf"].items()}}
        return {"type": self.kind, **{k: _plain(v) for k, v in self.params.items()}}

    def __repr__(self) -> str:
        return f"OffspringLaw({self.to_config()})"

    # distribution functions

    def pmf(self, k: int) -> Number:
        if k < 0:
            return 0
        if self.kind == "finite":
            return self.params["pmf"].get(int(k), 0)
        if self.kind == "binomial":
            n, p = self.params["n"], self.params["p"]
            return math.comb(n, k) * p**k * (1 - p) ** (n - k) if k <= n else 0
        if self.kind == "poisson":
            lam = self.params["lam"]
            return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1)) if lam > 0 else float(k == 0)
        p = self.params["p"]
        return p * (1 - p) ** k

    @property
    def max_support(self) -> int | None:
        if self.kind == "finite":
            return max(self.params["pmf"])
        if self.kind == "binomial":
            return self.params["n"]
        return None

    @property
    def mean(self) -> Number:
        if self.kind == "finite":
            return sum(k * v for k, v in self.params["pmf"].items())
        if self.kind == "binomial":
            return self.params["n"] * self.params["p"]
        if self.kind == "poisson":
            return self.params["lam"]
        p = self.params["p"]
        return (1 - p) / p

    @property
    def variance(self) -> Number:
        if self.kind == "finite":
            m = self.mean
            return sum((k - m) ** 2 * v for k, v in self.params["pmf"].items())
        if self.kind == "binomial":
            return self.params["n"] * self.params["p"] * (1 - self.params["p"])
        if self.kind == "poisson":
            return self.params["lam"]
        p = self.params["p"]
        return (1 - p) / p**2

    def pgf(self, s):
        """Generating function ``f(s) = sum_k mu(k) s^k``; vectorizes over ``s``."""
        if self.kind == "finite":
            s_arr = np.asarray(s, dtype=float)
            out = np.zeros_like(s_arr)
            for k, v in self.params["pmf"].items():
                out = out + float(v) * s_arr**k
            return out if out.ndim else float(out)
        if self.kind == "binomial":
            p = float(self.params["p"])
            return (1 - p + p * np.asarray(s, dtype=float)) ** self.params["n"]
        if self.kind == "poisson":
            return np.exp(self.params["lam"] * (np.asarray(s, dtype=float) - 1))
        p = float(self.params["p"])
        return p / (1 - (1 - p) * np.asarray(s, dtype=float))

    def support_table(self) -> np.ndarray:
        """Probabilities ``mu(0..K)`` as floats; unbounded laws are cut at tail mass ``TAIL_MASS``."""
        K = self.max_support
        if K is not None:
            return np.array([float(self.pmf(k)) for k in range(K + 1)])
        probs, acc, k = [], 0.0, 0
        while 1.0 - acc > TAIL_MASS and k < 100_000:
            v = float(self.pmf(k))
            probs.append(v)
            acc += v
            k += 1
            if k > 10 and v < TAIL_MASS * 1e-3 and 1.0 - acc <= TAIL_MASS * 10:
                break
        return np.array(probs)

    def cdf_table(self) -> np.ndarray:
        """Cumulative table for inverse-CDF sampling; last entry forced to 1."""
        c = np.cumsum(self.support_table())
        c[-1] = 1.0
        return c

    def exact_pmf(self) -> dict[int, Fraction]:
        """pmf with :class:`Fraction` values (finite or binomial with rational parameters)."""
        K = self.max_support
        if K is None:
            raise LawError(f"{self.kind} law has unbounded support")
        out = {}
        for k in range(K + 1):
            v = self.pmf(k)
            v = v if isinstance(v, (Fraction, int)) else Fraction(v)
            if v:
                out[k] = Fraction(v)
        return out

    def is_nondegenerate(self) -> bool:
        """``mu(0) + mu(1) < 1`` and no atom of mass one."""
        p0, p1 = float(self.pmf(0)), float(self.pmf(1))
        if p0 + p1 >= 1 - PMF_TOL:
            return False
        K = self.max_support
        if K is not None:
            return all(float(self.pmf(k)) < 1 - PMF_TOL for k in range(K + 1))
        return True


def example_law() -> OffspringLaw:
    """``mu(k) = 1/3`` on ``{1, 2, 3}``; mean 2, never extinct."""
    return OffspringLaw.uniform([1, 2, 3])


def _num(v):
    if isinstance(v, str) and "/" in v:
        return Fraction(v)
    return v


def _plain(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    return v


# --------------------------------------------------------------------------
# multi-type laws


class TypedOffspringLaw:
    """Per mother type ``i``, a joint law of the offspring count vector.

    ``supports[i]`` maps count vectors (length ``d`` tuples) to
    probabilities. Types are numbered ``1..d`` in the public API and ``0..d-1``
    in the arrays.
    """

    def __init__(self, supports: Sequence[Mapping[Sequence[int], Number]]):
        self.d = len(supports)
        if self.d < 1:
            raise LawError("need at least one type")
        self.supports: list[dict[tuple[int, ...], Number]] = []
        for i, sup in enumerate(supports):
            clean = {}
            for v, prob in sup.items():
                v = tuple(int(x) for x in v)
                if len(v) != self.d or any(x < 0 for x in v):
                    raise LawError(f"type {i + 1}: bad count vector {v}")
                if prob < 0:
                    raise LawError(f"type {i + 1}: negative probability")
                if prob:
                    clean[v] = clean.get(v, 0) + prob
            total = float(sum(clean.values()))
            if abs(total - 1.0) > PMF_TOL:
                raise LawError(f"type {i + 1}: probabilities sum to {total!r}")
            self.supports.append(dict(sorted(clean.items())))

    @classmethod
    def from_config(cls, cfg: Mapping) -> "TypedOffspringLaw":
        """``{"type": "typed", "supports": [[{"v": [1, 0], "p": 0.5}, ...], ...]}``."""
        kind = cfg.get("type", "typed")
        if kind in ("mdm", "mim"):
            from .coloring import MutationParams, typed_law

            base = OffspringLaw.from_config(cfg["base"])
            return typed_law(MutationParams(r=float(cfg["r"]), d=int(cfg["d"]), base=base), kind)
        sups = []
        for per_type in cfg["supports"]:
            sups.append({tuple(e["v"]): _num(e["p"]) for e in per_type})
        return cls(sups)

    def mean_matrix(self) -> np.ndarray:
        M = np.zeros((self.d, self.d))
        for i, sup in enumerate(self.supports):
            for v, prob in sup.items():
                M[i] += float(prob) * np.asarray(v, dtype=float)
        return M

    def marginal(self, i: int) -> OffspringLaw:
        """Law of the total number of children of a type-``i`` mother."""
        pmf: dict[int, Number] = {}
        for v, prob in self.supports[i - 1].items():
            pmf[sum(v)] = pmf.get(sum(v), 0) + prob
        return OffspringLaw.finite(pmf)

    def _tables(self):
        vecs, cdfs = [], []
        for sup in self.supports:
            vecs.append(np.array(list(sup.keys()), dtype=np.int64).reshape(-1, self.d))
            c = np.cumsum([float(p) for p in sup.values()])
            c[-1] = 1.0
            cdfs.append(c)
        return vecs, cdfs


# --------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class GrowthBudget:
    """Stop growth after ``max_generation`` generations or ``max_vertices`` vertices."""

    max_generation: int = 50
    max_vertices: int = 1_000_000

    def __post_init__(self):
        if int(self.max_generation) < 0 or int(self.max_vertices) < 1:
            raise BudgetError("need max_generation >= 0 and max_vertices >= 1")


class Growth(NamedTuple):
    tree: Tree
    truncated: bool
    stopped_by: str  # "extinction", "generation" or "vertices"


class TypedGrowth(NamedTuple):
    tree: Tree
    types: np.ndarray  # 1-based type per vertex
    truncated: bool
    stopped_by: str


_REASONS = ("extinction", "generation", "vertices")


def _check_budget(budget) -> GrowthBudget:
    if budget is None:
        return GrowthBudget()
    if not isinstance(budget, GrowthBudget):
        raise BudgetError(f"expected GrowthBudget, got {type(budget).__name__}")
    return budget


def sample_bgw_tree(law: OffspringLaw, budget: GrowthBudget | None = None, seed: RandomSeed = None) -> Growth:
    """Grow a Galton-Watson tree generation by generation.

    The vertex bound is applied at generation boundaries: if the next
    generation would overflow ``max_vertices``, growth stops before it and the
    current last generation is left childless.
    """
    budget = _check_budget(budget)
    rng = as_generator(seed)
    parent, counts, reason = kernels.grow_bfs(rng, law.cdf_table(), budget.max_generation, budget.max_vertices)
    tree = Tree.from_bfs(parent, counts)
    return Growth(tree, reason != 0, _REASONS[reason])


def sample_multitype_tree(
    law: TypedOffspringLaw,
    root_type: int,
    budget: GrowthBudget | None = None,
    seed: RandomSeed = None,
) -> TypedGrowth:
    """Grow a multi-type tree; a mother's children are placed type 1 first, then type 2, ..."""
    budget = _check_budget(budget)
    if not 1 <= root_type <= law.d:
        raise LawError(f"root type {root_type} outside 1..{law.d}")
    rng = as_generator(seed)
    vecs, cdfs = law._tables()
    type_levels = [np.array([root_type - 1], dtype=np.int64)]
    count_levels = []
    n = 1
    reason = 0
    generation = 0
    while True:
        types = type_levels[-1]
        if types.size == 0:
            reason = 0
            break
        if generation >= budget.max_generation:
            reason = 1
            break
        u = rng.random(types.size)
        block = np.zeros((types.size, law.d), dtype=np.int64)
        for i in range(law.d):
            sel = types == i
            if sel.any():
                idx = kernels.draw_counts(u[sel], cdfs[i])
                block[sel] = vecs[i][idx]
        total = int(block.sum())
        if n + total > budget.max_vertices:
            reason = 2
            break
        count_levels.append(block.sum(axis=1))
        child_types = np.repeat(np.tile(np.arange(law.d), types.size), block.ravel())
        type_levels.append(child_types)
        n += total
        generation += 1
    counts = np.zeros(n, dtype=np.int64)
    if count_levels:
        done = np.concatenate(count_levels)
        counts[: done.size] = done
    types_bfs = np.concatenate(type_levels)
    parent = np.full(n, -1, dtype=np.int64)
    parent[1:] = np.repeat(np.arange(n, dtype=np.int64), counts)
    order = kernels.bfs_to_preorder(counts)
    tree = Tree.from_bfs(parent, counts)
    return TypedGrowth(tree, types_bfs[order] + 1, reason != 0, _REASONS[reason])


def generation_sizes_many(law: OffspringLaw, generations: int, replicates: int, seed: RandomSeed = None, roots: int = 1):
    """Population sizes ``X_0..X_generations`` for many independent processes.

    Uses the fact that a generation's total offspring is a sum of i.i.d.
    draws; returns an integer array of shape ``(replicates, generations + 1)``.
    """
    rng = as_generator(seed)
    cdf = law.cdf_table()
    X = np.zeros((replicates, generations + 1), dtype=np.int64)
    X[:, 0] = roots
    for g in range(generations):
        sizes = X[:, g]
        total = int(sizes.sum())
        k = kernels.draw_counts(rng.random(total), cdf)
        owner = np.repeat(np.arange(replicates), sizes)
        X[:, g + 1] = np.bincount(owner, weights=k, minlength=replicates).astype(np.int64)
    return X


# --------------------------------------------------------------------------
# extinction and criticality


def extinction_probability(law: OffspringLaw, tol: float = 1e-12, max_iter: int = 1_000_000) -> float:
    """Smallest fixed point of the generating function on ``[0, 1]``.

    Iterates ``s <- f(s)`` from ``s = 0``, which increases monotonically to
    the smallest root. Laws with mean at most one die out almost surely and
    return exactly ``1.0``; a law putting all mass on one child never dies.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if float(law.pmf(1)) >= 1 - PMF_TOL:
        return 0.0
    m = float(law.mean)
    if m <= 1.0:
        return 1.0
    s = 0.0
    for _ in range(int(max_iter)):
        nxt = float(law.pgf(s))
        if abs(nxt - s) < tol:
            return nxt
        s = nxt
    raise NoConvergenceError(f"no convergence after {max_iter} iterations (last iterate {s!r})")


def is_irreducible(M: np.ndarray) -> bool:
    M = np.asarray(M, dtype=float)
    if M.shape[0] == 1:
        return True
    ncomp, _ = connected_components(M > 0, directed=True, connection="strong")
    return ncomp == 1


def perron_root(M, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Spectral radius of a non-negative matrix by power iteration.

    Convergence is declared when the Collatz-Wielandt bounds
    ``min (Mx)_i/x_i <= rho <= max (Mx)_i/x_i`` are within ``tol``. If that
    fails (periodic matrices oscillate), the iteration restarts on ``M + I``,
    whose spectral radius is ``rho + 1``. Reducible input triggers a
    :class:`ReducibleMatrixWarning`.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("square matrix required")
    if (M < 0).any():
        raise ValueError("matrix must be entrywise non-negative")
    if not is_irreducible(M):
        warnings.warn("mean matrix is reducible; the extinction trichotomy is not claimed", ReducibleMatrixWarning, stacklevel=2)
    if not M.any():
        return 0.0
    for shift in (0.0, 1.0):
        A = M + shift * np.eye(M.shape[0])
        x = np.ones(M.shape[0])
        for _ in range(int(max_iter)):
            y = A @ x
            pos = x > 0
            ratios = y[pos] / x[pos]
            lo, hi = ratios.min(), ratios.max()
            if hi - lo <= tol * max(1.0, hi):
                return float(0.5 * (lo + hi) - shift)
            nrm = np.abs(y).max()
            if nrm == 0:
                return 0.0
            x = y / nrm
    raise NoConvergenceError("power iteration did not converge")


class Criticality(str, enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


def classify(law_or_matrix, tol: float = CLASSIFY_TOL) -> Criticality:
    """Sub/critical/supercritical by the mean (one type) or Perron root (several)."""
    if isinstance(law_or_matrix, OffspringLaw):
        x = float(law_or_matrix.mean)
    elif isinstance(law_or_matrix, TypedOffspringLaw):
        x = perron_root(law_or_matrix.mean_matrix())
    elif np.ndim(law_or_matrix) == 0:
        x = float(law_or_matrix)
    else:
        x = perron_root(law_or_matrix)
    if abs(x - 1.0) <= tol:
        return Criticality.CRITICAL
    return Criticality.SUBCRITICAL if x < 1.0 else Criticality.SUPERCRITICAL
