"""Divide-and-colour percolation and neutral mutation models on trees.

Colours and finite-allele types are numbered ``1..d``. Under the infinite
alleles model every vertex carries an allele id instead, ``0`` for the root's
allele and fresh ids handed out in lexicographic order of the mutants.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .branching import GrowthBudget, OffspringLaw, TypedGrowth, TypedOffspringLaw, sample_bgw_tree
from .genealogy import Tree
from .percolation import EdgeConfig, clusters, root_cluster_tree, sample_noise, threshold_noise
from .rng import RandomSeed, as_generator

PROB_TOL = 1e-12


@dataclass(frozen=True)
class ColorDistribution:
    a: tuple

    def __post_init__(self):
        a = tuple(self.a)
        if len(a) < 1 or any(x < 0 for x in a) or abs(float(sum(a)) - 1.0) > PROB_TOL:
            raise ValueError("colour weights must be non-negative and sum to 1")
        object.__setattr__(self, "a", a)

    @classmethod
    def uniform(cls, d: int, exact: bool = False) -> "ColorDistribution":
        w = Fraction(1, d) if exact else 1.0 / d
        return cls((w,) * d)

    @property
    def d(self) -> int:
        return len(self.a)

    def cdf(self) -> np.ndarray:
        c = np.cumsum([float(x) for x in self.a])
        c[-1] = 1.0
        return c

    def weight(self, color: int):
        return self.a[color - 1]


@dataclass(frozen=True, eq=False)
class Coloring:
    """Colour (1..d) or allele id per vertex, in the tree's vertex order."""

    values: np.ndarray
    kind: str = "color"
    d: int | None = None
    meta: dict = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Coloring):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.values, other.values)

    def __len__(self) -> int:
        return int(self.values.size)

    def classes(self) -> dict[int, int]:
        vals, counts = np.unique(self.values, return_counts=True)
        return dict(zip(vals.tolist(), counts.tolist()))

    def to_records(self, t: Tree) -> list[dict]:
        from .genealogy import format_label

        key = "color" if self.kind == "color" else "allele"
        return [{"vertex": format_label(t.label(v)), key: int(self.values[v])} for v in range(len(self))]

    def to_json(self, t: Tree) -> str:
        return json.dumps(self.to_records(t), indent=1, ensure_ascii=False)

    def partition_csv(self) -> str:
        """``alleleId,blockSize`` rows, one per allele/colour class."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alleleId", "blockSize"])
        for k, n in sorted(self.classes().items()):
            w.writerow([k, n])
        return buf.getvalue()

    def to_dot(self, t: Tree) -> str:
        palette = ["red", "blue", "green", "orange", "purple", "cyan", "brown", "magenta", "gold", "gray"]
        return t.to_dot([palette[int(c) % len(palette)] for c in self.values])


@dataclass(frozen=True)
class MutationParams:
    """Mutation probability ``r``, allele count ``d`` and the law of the total offspring."""

    r: float
    d: int = 2
    base: OffspringLaw | None = None

    def __post_init__(self):
        if not 0 <= self.r <= 1:
            raise ValueError("r must lie in [0, 1]")
        if self.d < 2:
            raise ValueError("finite-allele models need d >= 2")


# --------------------------------------------------------------------------
# colourings of a given tree


def dac_color(
    t: Tree, p: float, colors: ColorDistribution, seed: RandomSeed = None, root_color: int | None = None
) -> tuple[EdgeConfig, Coloring]:
    """Percolate at ``p``, then paint each cluster with an independent colour from ``colors``.

    With ``root_color`` the root cluster's colour is fixed instead of drawn
    (the other clusters' draws are unchanged).
    """
    rng = as_generator(seed)
    config = threshold_noise(sample_noise(t, rng), p)
    part = clusters(t, config)
    cluster_colors = kernels.draw_counts(rng.random(part.n_clusters), colors.cdf()) + 1
    if root_color is not None:
        if not 1 <= root_color <= colors.d:
            raise ValueError(f"root colour {root_color} outside 1..{colors.d}")
        cluster_colors[0] = root_color
    by_vertex = cluster_colors[np.searchsorted(part.ids, part.label)]
    return config, Coloring(by_vertex, "color", colors.d, {"root_color": int(by_vertex[0])})


def restricted_dac_color(
    t: Tree, p: float, d: int, root_color: int | None = None, seed: RandomSeed = None
) -> tuple[EdgeConfig, Coloring]:
    """DaC where a cluster never takes the colour of its mother cluster.

    The root cluster gets ``root_color`` (uniform on ``1..d`` if omitted).
    Other clusters are painted in lexicographic order of their rootmost
    vertices, each uniformly among the ``d - 1`` colours that differ from the
    colour of that vertex's mother.
    """
    if d < 2:
        raise ValueError("restricted DaC needs d >= 2")
    rng = as_generator(seed)
    config = threshold_noise(sample_noise(t, rng), p)
    drawn = root_color is None
    if drawn:
        root_color = int(rng.integers(1, d + 1))
    elif not 1 <= root_color <= d:
        raise ValueError(f"root colour {root_color} outside 1..{d}")
    draw = rng.random(len(t))
    types = kernels.propagate_types(t.parent, config.open_mask, draw, d, root_color - 1, True, t.levels)
    meta = {"root_color": root_color, "root_color_drawn": drawn}
    return config, Coloring(types + 1, "color", d, meta)


def infinite_alleles_color(t: Tree, r: float, seed: RandomSeed = None) -> tuple[EdgeConfig, Coloring]:
    """Each child mutates with probability ``r`` to a brand-new allele.

    The returned edge configuration marks clones as open edges; with the same
    seed it coincides bit for bit with ``percolate(t, 1 - r, seed)``.
    """
    if not 0 <= r <= 1:
        raise ValueError("r must lie in [0, 1]")
    rng = as_generator(seed)
    config = threshold_noise(sample_noise(t, rng), 1 - r)
    mutant = ~config.open_mask
    mutant[0] = False
    fresh = np.cumsum(mutant)  # k-th mutant in pre-order founds allele k
    part = clusters(t, config)
    return config, Coloring(fresh[part.label], "allele")


def same_type_root_component(t: Tree, col: Coloring) -> Tree:
    """Vertices of the root's type whose whole ancestral line has that type."""
    vals = col.values
    same = vals[1:] == vals[t.parent[1:]]
    return root_cluster_tree(t, EdgeConfig(same))


def effective_retention(p, a_root):
    """``1 - (1-p)(1-a)``: a child joins its mother's colour class through an open edge or by luck."""
    if not (0 <= p <= 1 and 0 <= a_root <= 1):
        raise ValueError("p and a_root must lie in [0, 1]")
    return 1 - (1 - p) * (1 - a_root)


def dac_critical_bgw(m: float, a_root: float) -> tuple[float, bool]:
    """Critical retention for the root colour class on a Galton-Watson tree.

    Returns ``((1 - m a) / (m (1 - a)), False)``, or ``(0.0, True)`` when
    ``m a >= 1`` and colouring alone already percolates.
    """
    if m <= 1:
        raise ValueError("needs a supercritical tree (m > 1)")
    if not 0 <= a_root < 1:
        raise ValueError("a_root must lie in [0, 1)")
    if m * a_root >= 1:
        return 0.0, True
    return (1 - m * a_root) / (m * (1 - a_root)), False


# --------------------------------------------------------------------------
# finite-allele offspring laws


def _check_vector(params: MutationParams, i: int, v: Sequence[int]) -> tuple[int, ...]:
    v = tuple(int(x) for x in v)
    if len(v) != params.d or any(x < 0 for x in v):
        raise ValueError(f"count vector must have {params.d} non-negative entries, got {v}")
    if not 1 <= i <= params.d:
        raise ValueError(f"mother type {i} outside 1..{params.d}")
    return v


def _multinomial(n: int, parts: Sequence[int]) -> int:
    out, left = 1, n
    for k in parts:
        out *= math.comb(left, k)
        left -= k
    return out


def _inv(d: int, exact: bool):
    return Fraction(1, d) if exact else 1.0 / d


def _mu(params: MutationParams, n: int):
    return 1 if params.base is None else params.base.pmf(n)


def mdm_offspring_pmf(params: MutationParams, i: int, v: Sequence[int]):
    """Mother-dependent model: clone w.p. ``1-r``, else uniform over the ``d-1`` other types.

    ``mu(|v|) * multinomial(|v|; v) * (1-r)^{v_i} * prod_{j != i} (r/(d-1))^{v_j}``.
    Without a base law the result is the law conditional on ``|v|``.
    """
    v = _check_vector(params, i, v)
    n = sum(v)
    r = params.r
    q = r * _inv(params.d - 1, isinstance(r, Fraction))
    return _mu(params, n) * _multinomial(n, v) * (1 - r) ** v[i - 1] * q ** (n - v[i - 1])


def mim_offspring_pmf(params: MutationParams, i: int, v: Sequence[int]):
    """Mother-independent model: clone w.p. ``1-r``, else uniform over all ``d`` types.

    Sums over the number ``k`` of clones, ``k = 0..v_i``; the ``k = 0`` term
    (every type-``i`` child a mutant) is required for normalisation.
    """
    v = _check_vector(params, i, v)
    n = sum(v)
    r = params.r
    inv_d = _inv(params.d, isinstance(r, Fraction))
    total = 0
    for k in range(v[i - 1] + 1):
        rest = list(v)
        rest[i - 1] -= k
        total += math.comb(n, k) * (1 - r) ** k * r ** (n - k) * _multinomial(n - k, rest) * inv_d ** (n - k)
    return _mu(params, n) * total


def compositions(n: int, d: int) -> Iterator[tuple[int, ...]]:
    """All ``d``-tuples of non-negative integers summing to ``n``."""
    if d == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in compositions(n - first, d - 1):
            yield (first, *rest)


def typed_law(params: MutationParams, model: str) -> TypedOffspringLaw:
    """Multi-type offspring law of the MDM (``"mdm"``) or MIM (``"mim"``) model."""
    if params.base is None or params.base.max_support is None:
        raise ValueError("typed laws need a finite-support base law")
    pmf = {"mdm": mdm_offspring_pmf, "mim": mim_offspring_pmf}[model]
    sups = []
    for i in range(1, params.d + 1):
        sup = {}
        for n in range(params.base.max_support + 1):
            if params.base.pmf(n) == 0:
                continue
            for v in compositions(n, params.d):
                w = pmf(params, i, v)
                if w:
                    sup[v] = w
        sups.append(sup)
    return TypedOffspringLaw(sups)


# --------------------------------------------------------------------------
# samplers with per-child mutation


def _mutation_sample(budget, params: MutationParams, root_type: int, seed, avoid_mother: bool) -> TypedGrowth:
    if params.base is None:
        raise ValueError("sampling needs a base offspring law")
    if not 1 <= root_type <= params.d:
        raise ValueError(f"root type {root_type} outside 1..{params.d}")
    rng = as_generator(seed)
    tree, truncated, stopped_by = sample_bgw_tree(params.base, budget, rng)
    clone = 1.0 - rng.random(len(tree)) <= 1 - params.r
    draw = rng.random(len(tree))
    types = kernels.propagate_types(tree.parent, clone, draw, params.d, root_type - 1, avoid_mother, tree.levels)
    return TypedGrowth(tree, types + 1, truncated, stopped_by)


def mdm_sample(budget: GrowthBudget | None, params: MutationParams, root_type: int = 1, seed: RandomSeed = None) -> TypedGrowth:
    """Galton-Watson genealogy where a mutant child never keeps its mother's type."""
    return _mutation_sample(budget, params, root_type, seed, True)


def mim_sample(budget: GrowthBudget | None, params: MutationParams, root_type: int = 1, seed: RandomSeed = None) -> TypedGrowth:
    """Galton-Watson genealogy where a mutant child picks any of the ``d`` types."""
    return _mutation_sample(budget, params, root_type, seed, False)


def offspring_type_counts(t: Tree, types: np.ndarray, d: int) -> np.ndarray:
    """Per vertex, the number of children of each type (shape ``(n, d)``)."""
    out = np.zeros((len(t), d), dtype=np.int64)
    np.add.at(out, (t.parent[1:], np.asarray(types)[1:] - 1), 1)
    return out
