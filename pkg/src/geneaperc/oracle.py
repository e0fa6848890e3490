"""Exact laws on small instances by exhaustive enumeration.

Probabilities are :class:`fractions.Fraction`; float inputs snap to the
nearest simple fraction (``0.3`` becomes ``3/10``). Vectorized enumerators count outcomes with integers and only then
attach rational weights, so results are exact and independent of chunking.

On a tree each closed edge starts exactly one new cluster, so an outcome of
(edge configuration, cluster colouring) is the same as a choice per edge of
"open" or "closed, new cluster gets colour j", plus the root cluster's colour.
The mutation models enumerate the same way with "clone" / "mutant of type j".
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .branching import OffspringLaw
from .coloring import ColorDistribution
from .genealogy import Tree, complete_tree

DEFAULT_CAP = 10**8
ROOT_CLUSTER_MAX_EDGES = 25


class TooLargeError(ValueError):
    pass


class EncodingMismatchError(ValueError):
    pass


MAX_DENOMINATOR = 10**9


def exact(x) -> Fraction:
    """Rational value of ``x``.

    Floats are taken to stand for simple fractions and snap to the closest
    one with denominator at most ``MAX_DENOMINATOR``, so ``1/3`` and
    ``1 - 0.6 * (2/3)`` come out as ``1/3`` and ``3/5``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x)).limit_denominator(MAX_DENOMINATOR)


def encode(outcome) -> str:
    if isinstance(outcome, (tuple, list)):
        return ",".join(encode(o) for o in outcome)
    return str(outcome)


class ExactLaw:
    """Finite law: outcome -> probability."""

    def __init__(self, probs: Mapping):
        self.probs = {k: v for k, v in probs.items() if v != 0}

    def __getitem__(self, outcome):
        return self.probs.get(outcome, Fraction(0))

    def __len__(self) -> int:
        return len(self.probs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactLaw):
            return NotImplemented
        return self.probs == other.probs

    def __repr__(self) -> str:
        items = ", ".join(f"{k!r}: {v}" for k, v in sorted(self.probs.items()))
        return f"ExactLaw({{{items}}})"

    def items(self):
        return sorted(self.probs.items())

    def total(self):
        return sum(self.probs.values())

    def marginal(self, fn: Callable) -> "ExactLaw":
        out: dict = {}
        for k, v in self.probs.items():
            key = fn(k)
            out[key] = out.get(key, 0) + v
        return ExactLaw(out)

    def condition(self, pred: Callable) -> "ExactLaw":
        kept = {k: v for k, v in self.probs.items() if pred(k)}
        z = sum(kept.values())
        if z == 0:
            raise ValueError("conditioning on a null event")
        return ExactLaw({k: v / z for k, v in kept.items()})

    def mean(self):
        return sum(k * v for k, v in self.probs.items())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["outcomeEncoding", "probabilityNumerator", "probabilityDenominator"])
        for k, v in self.items():
            v = exact(v)
            w.writerow([encode(k), v.numerator, v.denominator])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({encode(k): _decimal(v) for k, v in self.items()}, indent=1)


def _decimal(v, digits: int = 30) -> str:
    v = exact(v)
    sign = "-" if v < 0 else ""
    v = abs(v)
    whole, rem = divmod(v.numerator, v.denominator)
    frac = []
    for _ in range(digits):
        rem *= 10
        q, rem = divmod(rem, v.denominator)
        frac.append(str(q))
    return f"{sign}{whole}." + ("".join(frac).rstrip("0") or "0")


def tv_distance(lhs, rhs):
    """Total variation ``(1/2) sum |p - q|``; histograms are normalised first."""
    a, b = _as_probs(lhs), _as_probs(rhs)
    kinds = {type(k) for k in a} | {type(k) for k in b}
    if len(kinds) > 1 and not kinds <= {int, np.int64}:
        raise EncodingMismatchError(f"outcome encodings differ: {sorted(k.__name__ for k in kinds)}")
    return sum(abs(a.get(k, 0) - b.get(k, 0)) for k in set(a) | set(b)) / 2


def _as_probs(x) -> dict:
    if isinstance(x, ExactLaw):
        return x.probs
    d = dict(x)
    total = sum(d.values())
    if all(isinstance(v, (int, np.integer)) for v in d.values()):
        return {k: Fraction(int(v), int(total)) for k, v in d.items()}
    return {k: v / total for k, v in d.items()}


# --------------------------------------------------------------------------
# Bernoulli percolation


def _root_cluster_counts(parent: np.ndarray, lo: int, hi: int) -> np.ndarray:
    n = parent.size
    E = n - 1
    masks = np.arange(lo, hi, dtype=np.int64)
    inside = np.empty((n, masks.size), dtype=bool)
    inside[0] = True
    n_open = np.zeros(masks.size, dtype=np.int64)
    for v in range(1, n):
        bit = ((masks >> (v - 1)) & 1).astype(bool)
        n_open += bit
        inside[v] = inside[parent[v]] & bit
    size = inside.sum(axis=0)
    table = np.zeros((n + 1, E + 1), dtype=np.int64)
    np.add.at(table, (size, n_open), 1)
    return table


def exact_root_cluster_law(t: Tree, p, workers: int = 1, chunk: int = 1 << 18) -> ExactLaw:
    """Law of the root cluster size, summing the product measure over all ``2^|E|`` configurations."""
    E = t.n_edges
    if E > ROOT_CLUSTER_MAX_EDGES:
        raise TooLargeError(f"{E} edges > {ROOT_CLUSTER_MAX_EDGES}")
    total = 1 << E
    bounds = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    parent = np.asarray(t.parent)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as ex:
            tables = list(ex.map(lambda b: _root_cluster_counts(parent, *b), bounds))
    else:
        tables = [_root_cluster_counts(parent, *b) for b in bounds]
    table = sum(tables[1:], tables[0])
    p = exact(p)
    weights = [p**k * (1 - p) ** (E - k) for k in range(E + 1)]
    law = {}
    for size, k in zip(*np.nonzero(table)):
        law[int(size)] = law.get(int(size), 0) + int(table[size, k]) * weights[k]
    return ExactLaw(law)


def _root_cluster_code(parent: np.ndarray, bits: tuple) -> tuple[int, ...]:
    """Pre-order child counts of the root cluster for one configuration."""
    n = parent.size
    inside = [True] + [False] * (n - 1)
    counts = [0] * n
    for v in range(1, n):
        if bits[v - 1] and inside[parent[v]]:
            inside[v] = True
            counts[parent[v]] += 1
    return tuple(counts[v] for v in range(n) if inside[v])


def exact_root_cluster_shape_law(t: Tree, p, cap: int = 1 << 20) -> ExactLaw:
    """Law of the root cluster as a plane tree (pre-order child-count code)."""
    E = t.n_edges
    if 1 << E > cap:
        raise TooLargeError(f"2^{E} configurations exceed the cap {cap}")
    p = exact(p)
    weights = [p**k * (1 - p) ** (E - k) for k in range(E + 1)]
    parent = np.asarray(t.parent)
    law: dict = {}
    for bits in itertools.product((0, 1), repeat=E):
        code = _root_cluster_code(parent, bits)
        law[code] = law.get(code, 0) + weights[sum(bits)]
    return ExactLaw(law)


def exact_percolation_shape_law(arity: int, depth: int, p) -> ExactLaw:
    """Root-cluster shape law on the ``arity``-ary tree cut at ``depth``."""
    return exact_root_cluster_shape_law(complete_tree(arity, depth), p)


# --------------------------------------------------------------------------
# Galton-Watson shapes


@dataclass(frozen=True)
class TruncationSpec:
    max_depth: int
    max_children: int | None = None
    cap: int = DEFAULT_CAP


def exact_bgw_truncated_law(law: OffspringLaw, spec: TruncationSpec) -> ExactLaw:
    """Law of the tree cut at generation ``max_depth``, as pre-order child-count codes.

    Vertices in the last generation are recorded with zero children.
    """
    pmf = law.exact_pmf()
    if spec.max_children is not None and max(pmf) > spec.max_children:
        raise TooLargeError(f"support reaches {max(pmf)} > max_children={spec.max_children}")
    n_shapes = 1
    for _ in range(spec.max_depth):
        n_shapes = sum(n_shapes**k for k in pmf)
        if n_shapes > spec.cap:
            raise TooLargeError(f"more than {spec.cap} truncated shapes")
    level: dict[tuple, Fraction] = {(0,): Fraction(1)}
    for _ in range(spec.max_depth):
        nxt: dict[tuple, Fraction] = {}
        for k, mk in pmf.items():
            for combo in itertools.product(level.items(), repeat=k):
                code = (k,) + tuple(itertools.chain.from_iterable(c for c, _ in combo))
                w = mk
                for _, q in combo:
                    w *= q
                nxt[code] = nxt.get(code, 0) + w
        level = nxt
    return ExactLaw(level)


def code_size(code: tuple) -> int:
    return len(code)


def code_generation_sizes(code: tuple) -> list[int]:
    t = Tree.from_child_counts(code)
    return t.generation_sizes().tolist()


# --------------------------------------------------------------------------
# colourings and mutation models

MODELS = ("dac", "restrictedDac", "mim", "mdm", "infiniteAlleles")


def _edge_options(model: str, params: Mapping):
    """Per-edge options ``(kind, value, weight)`` and root options ``(colour, weight)``.

    ``kind`` is ``"keep"`` (open edge / clone), ``"abs"`` (new colour
    ``value``), ``"rel"`` (new colour ``mother + 1 + value`` mod ``d``) or
    ``"new"`` (fresh allele).
    """
    if model == "dac":
        p = exact(params["p"])
        a = params.get("colors")
        a = a if isinstance(a, ColorDistribution) else ColorDistribution(tuple(a))
        a = tuple(exact(x) for x in a.a)
        opts = [("keep", None, p)] + [("abs", j, (1 - p) * a[j]) for j in range(len(a))]
        rc = params.get("root_color")
        roots = [(j, a[j]) for j in range(len(a))] if rc is None else [(rc - 1, Fraction(1))]
        return opts, roots, len(a)
    if model == "restrictedDac":
        p, d = exact(params["p"]), int(params["d"])
        opts = [("keep", None, p)] + [("rel", j, (1 - p) / (d - 1)) for j in range(d - 1)]
        rc = params.get("root_color")
        roots = [(j, Fraction(1, d)) for j in range(d)] if rc is None else [(rc - 1, Fraction(1))]
        return opts, roots, d
    if model in ("mim", "mdm"):
        r, d = exact(params["r"]), int(params["d"])
        if model == "mim":
            opts = [("keep", None, 1 - r)] + [("abs", j, r / d) for j in range(d)]
        else:
            opts = [("keep", None, 1 - r)] + [("rel", j, r / (d - 1)) for j in range(d - 1)]
        rt = params.get("root_type")
        roots = [(j, Fraction(1, d)) for j in range(d)] if rt is None else [(rt - 1, Fraction(1))]
        return opts, roots, d
    if model == "infiniteAlleles":
        r = exact(params["r"])
        return [("keep", None, 1 - r), ("new", None, r)], [(0, Fraction(1))], None
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def enumerate_colorings(t: Tree, model: str, params: Mapping, cap: int = DEFAULT_CAP):
    """Yield ``(open_bits, colouring, probability)`` over every outcome.

    Colours are 1-based; for ``infiniteAlleles`` the colouring holds allele
    ids, fresh ids numbered in pre-order.
    """
    opts, roots, d = _edge_options(model, params)
    E = t.n_edges
    if len(roots) * len(opts) ** E > cap:
        raise TooLargeError(f"{len(roots)} x {len(opts)}^{E} outcomes exceed the cap {cap}")
    parent = [int(x) for x in t.parent]
    n = len(parent)
    for root_c, root_w in roots:
        for choice in itertools.product(range(len(opts)), repeat=E):
            w = root_w
            col = [0] * n
            col[0] = root_c
            bits = [0] * E
            fresh = 0
            for v in range(1, n):
                kind, val, ow = opts[choice[v - 1]]
                w *= ow
                m = col[parent[v]]
                if kind == "keep":
                    col[v] = m
                    bits[v - 1] = 1
                elif kind == "abs":
                    col[v] = val
                elif kind == "rel":
                    col[v] = (m + 1 + val) % d
                else:
                    fresh += 1
                    col[v] = fresh
            if w:
                shift = 0 if model == "infiniteAlleles" else 1
                yield tuple(bits), tuple(c + shift for c in col), w


def root_component_size(t: Tree, coloring: tuple) -> int:
    """Size of the root's same-colour component with an unbroken ancestral line."""
    ok = [True] + [False] * (len(coloring) - 1)
    for v in range(1, len(coloring)):
        ok[v] = ok[int(t.parent[v])] and coloring[v] == coloring[0]
    return sum(ok)


def exact_coloring_law(t: Tree, model: str, params: Mapping, observable: str = "coloring", cap: int = DEFAULT_CAP) -> ExactLaw:
    """Exact law of an observable of the coloured tree.

    ``observable`` is ``"coloring"``, ``"joint"`` (edge bits, colouring),
    ``"root_component_size"``, ``"root_cluster_size"`` (open edges only) or
    ``"root_type_counts"`` (children of the root per colour, needs a finite
    number of colours).
    """
    if observable == "root_component_size":
        return _component_size_law(t, model, params, cap)
    out: dict = {}
    d = None if model == "infiniteAlleles" else _edge_options(model, params)[2]
    root_kids = [int(v) for v in t.children(0)]
    for bits, col, w in enumerate_colorings(t, model, params, cap):
        if observable == "coloring":
            key = col
        elif observable == "joint":
            key = (bits, col)
        elif observable == "root_component_size":
            key = root_component_size(t, col)
        elif observable == "root_cluster_size":
            key = root_component_size(t, _open_component(t, bits))
        elif observable == "root_type_counts":
            counts = [0] * d
            for v in root_kids:
                counts[col[v] - 1] += 1
            key = (col[0], tuple(counts))
        else:
            raise ValueError(f"unknown observable {observable!r}")
        out[key] = out.get(key, 0) + w
    return ExactLaw(out)


def _open_component(t: Tree, bits: tuple) -> tuple:
    # colouring that is constant exactly along open edges from the root
    col = [0] * (len(bits) + 1)
    for v in range(1, len(col)):
        col[v] = col[int(t.parent[v])] if bits[v - 1] else v
    return tuple(col)


def _component_size_law(t: Tree, model: str, params: Mapping, cap: int, chunk: int = 1 << 18) -> ExactLaw:
    """Law of the root's same-colour component size, vectorized over outcomes.

    Outcomes are numbered in base ``S`` (one digit per edge, ``S`` options per
    edge) and counted with integers by (size, number of edges per option); a
    child joins iff its edge is open/clone or it starts a new cluster in the
    root's colour. Relative and fresh colours never match a mother that
    already carries the root colour.
    """
    opts, roots, _ = _edge_options(model, params)
    E = t.n_edges
    S = len(opts)
    if len(roots) * S**E > cap:
        raise TooLargeError(f"{len(roots)} x {S}^{E} outcomes exceed the cap {cap}")
    parent = np.asarray(t.parent)
    n = parent.size
    base = E + 1
    law: dict = {}
    total = S**E
    for root_c, root_w in roots:
        joins = [j for j, (kind, val, _) in enumerate(opts) if kind == "keep" or (kind == "abs" and val == root_c)]
        hist = np.zeros((n + 1) * base**S, dtype=np.int64)
        for lo in range(0, total, chunk):
            code = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
            inside = np.empty((n, code.size), dtype=bool)
            inside[0] = True
            per_option = np.zeros((S, code.size), dtype=np.int64)
            for v in range(1, n):
                digit = code % S
                code //= S
                per_option[digit, np.arange(digit.size)] += 1
                inside[v] = inside[parent[v]] & np.isin(digit, joins)
            key = inside.sum(axis=0)
            for j in range(S):
                key = key * base + per_option[j]
            hist += np.bincount(key, minlength=hist.size)
        for key in np.flatnonzero(hist):
            c = int(hist[key])
            rest, per = int(key), []
            for _ in range(S):
                rest, k = divmod(rest, base)
                per.append(k)
            w = root_w * c
            for j, k in enumerate(reversed(per)):
                w *= opts[j][2] ** k
            law[rest] = law.get(rest, 0) + w
    return ExactLaw(law)


def star_type_law(model: str, params: Mapping, n_children: int, mother: int) -> ExactLaw:
    """Law of the children's type-count vector on a star whose root has colour ``mother``."""
    from .genealogy import star

    key = "root_type" if model in ("mim", "mdm") else "root_color"
    law = exact_coloring_law(star(n_children), model, {**params, key: mother}, observable="root_type_counts")
    return law.marginal(lambda k: k[1])


# --------------------------------------------------------------------------
# survival probabilities


def exact_survival_probability(law: OffspringLaw, p, depth: int, a_root=0, conditioned: bool = True):
    """``P(root component reaches generation depth)`` on a Galton-Watson tree.

    The component's offspring count is a binomial thinning of the tree's at
    retention ``1 - (1-p)(1-a_root)``. With ``conditioned`` the probability is
    divided by that of the tree itself reaching ``depth``. Rational ``p`` and
    ``a_root`` give a Fraction, floats give a float.
    """
    if law.max_support is None:
        raise ValueError("exact survival needs a finite-support law")
    rational = all(isinstance(x, (Fraction, int)) for x in (p, a_root))
    pmf = law.exact_pmf()
    if rational:
        keep = 1 - (1 - Fraction(p)) * (1 - Fraction(a_root))
        one, zero = Fraction(1), Fraction(0)
    else:
        pmf = {k: float(w) for k, w in pmf.items()}
        keep = 1 - (1 - float(p)) * (1 - float(a_root))
        one, zero = 1.0, 0.0

    def reach(ret):
        s = zero
        for _ in range(depth):
            s = sum(w * (1 - ret + ret * s) ** k for k, w in pmf.items())
        return 1 - s

    comp = reach(keep)
    if not conditioned:
        return comp
    tree = reach(one)
    return comp / tree if tree else zero
