"""Ulam-Harris labelled rooted trees stored as flat arrays.

Vertices are indexed ``0..n-1`` in lexicographic order of their labels, which
on a tree is depth-first pre-order with children visited in index order. The
root is vertex ``0``; every other vertex ``v`` has ``parent[v] < v``. The edge
joining ``v`` to its parent is identified with ``v`` itself, so edge arrays
have length ``n`` with slot ``0`` unused, or length ``n - 1`` when exported.

Labels are tuples of positive integers, ``()`` being the root. They are not
stored; :meth:`Tree.label` rebuilds one by walking parent links.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterable, Iterator, Sequence
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels

Label = tuple[int, ...]

ROOT: Label = ()
ROOT_TEXT = "∅"


class TreeError(ValueError):
    """Invalid tree description."""


class MissingRootError(TreeError):
    pass


class AncestorGapError(TreeError):
    pass


class ChildGapError(TreeError):
    pass


class VertexNotFoundError(KeyError):
    pass


def format_label(label: Sequence[int]) -> str:
    """``()`` -> ``"∅"``, ``(1, 1, 2)`` -> ``"112"``, ``(1, 12)`` -> ``"1.12"``, ``(12,)`` -> ``"12."``."""
    if not label:
        return ROOT_TEXT
    if all(i <= 9 for i in label):
        return "".join(str(i) for i in label)
    text = ".".join(str(i) for i in label)
    return text + "." if len(label) == 1 else text


def parse_label(text: str | Sequence[int]) -> Label:
    """Inverse of :func:`format_label`; also accepts tuples and ``""``/``"-"`` for the root."""
    if not isinstance(text, str):
        label = tuple(int(i) for i in text)
    else:
        text = text.strip()
        if text in ("", "-", ROOT_TEXT, "root"):
            return ROOT
        parts = [x for x in text.split(".") if x] if "." in text else list(text)
        try:
            label = tuple(int(p) for p in parts)
        except ValueError as exc:
            raise TreeError(f"bad label {text!r}") from exc
    if any(i < 1 for i in label):
        raise TreeError(f"label components must be >= 1: {label}")
    return label


class Tree:
    """Immutable finite genealogical tree.

    Build one with :func:`build_tree`, :meth:`Tree.from_child_counts` or a
    sampler in :mod:`geneaperc.branching`; the constructor itself trusts its
    arrays.
    """

    __slots__ = ("parent", "child_count", "depth", "rank", "__dict__")

    def __init__(self, parent, child_count, depth, rank):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.child_count = np.asarray(child_count, dtype=np.int64)
        self.depth = np.asarray(depth, dtype=np.int64)
        self.rank = np.asarray(rank, dtype=np.int64)
        for a in (self.parent, self.child_count, self.depth, self.rank):
            a.setflags(write=False)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_child_counts(cls, counts: Sequence[int]) -> "Tree":
        """Tree from its pre-order child-count sequence (a plane-tree code)."""
        counts = np.asarray(counts, dtype=np.int64)
        n = counts.size
        if n == 0:
            raise MissingRootError("empty tree")
        if (counts < 0).any() or counts.sum() != n - 1:
            raise TreeError("child counts do not describe a single finite tree")
        parent = np.empty(n, dtype=np.int64)
        depth = np.empty(n, dtype=np.int64)
        rank = np.empty(n, dtype=np.int64)
        parent[0], depth[0], rank[0] = -1, 0, 0
        stack: list[list[int]] = [[0, int(counts[0]), 0]]  # vertex, remaining, next rank
        for v in range(1, n):
            while stack and stack[-1][1] == 0:
                stack.pop()
            if not stack:
                raise TreeError("child counts close the tree too early")
            top = stack[-1]
            top[1] -= 1
            top[2] += 1
            parent[v] = top[0]
            depth[v] = depth[top[0]] + 1
            rank[v] = top[2]
            stack.append([v, int(counts[v]), 0])
        if any(s[1] for s in stack):
            raise TreeError("child counts leave vertices without children")
        return cls(parent, counts, depth, rank)

    @classmethod
    def from_bfs(cls, parent_bfs: np.ndarray, counts_bfs: np.ndarray) -> "Tree":
        """Reindex a breadth-first arena (children contiguous) into pre-order."""
        n = counts_bfs.size
        order = kernels.bfs_to_preorder(counts_bfs)
        inv = np.empty(n, dtype=np.int64)
        inv[order] = np.arange(n, dtype=np.int64)
        first = np.concatenate(([1], 1 + np.cumsum(counts_bfs)[:-1]))
        rank_bfs = np.zeros(n, dtype=np.int64)
        rank_bfs[1:] = np.arange(1, n) - first[parent_bfs[1:]] + 1
        sizes = [1]
        while sum(sizes) < n:
            lo = sum(sizes[:-1])
            sizes.append(int(counts_bfs[lo : lo + sizes[-1]].sum()))
        depth_bfs = np.repeat(np.arange(len(sizes)), sizes)
        parent = np.full(n, -1, dtype=np.int64)
        parent[1:] = inv[parent_bfs[order[1:]]]
        return cls(parent, counts_bfs[order], depth_bfs[order], rank_bfs[order])

    # -- basic queries -----------------------------------------------------

    def __len__(self) -> int:
        return int(self.parent.size)

    @property
    def n_edges(self) -> int:
        return len(self) - 1

    @property
    def height(self) -> int:
        return int(self.depth.max())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return np.array_equal(self.child_count, other.child_count)

    def __hash__(self) -> int:
        return hash(self.child_count.tobytes())

    def __repr__(self) -> str:
        return f"Tree(n={len(self)}, height={self.height})"

    def digest(self) -> str:
        """SHA-256 of the pre-order child counts; identifies the tree."""
        return hashlib.sha256(self.child_count.astype("<i8").tobytes()).hexdigest()

    @cached_property
    def child_ptr(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.child_count))).astype(np.int64)

    @cached_property
    def child_index(self) -> np.ndarray:
        return (np.argsort(self.parent[1:], kind="stable") + 1).astype(np.int64)

    def children(self, v: int) -> np.ndarray:
        return self.child_index[self.child_ptr[v] : self.child_ptr[v + 1]]

    @cached_property
    def levels(self) -> list[np.ndarray]:
        """Vertex indices grouped by generation, each group in pre-order."""
        order = np.argsort(self.depth, kind="stable")
        counts = np.bincount(self.depth)
        return np.split(order, np.cumsum(counts)[:-1])

    @cached_property
    def subtree_size(self) -> np.ndarray:
        size = np.ones(len(self), dtype=np.int64)
        for lv in reversed(self.levels[1:]):
            np.add.at(size, self.parent[lv], size[lv])
        return size

    def generation_sizes(self) -> np.ndarray:
        return np.bincount(self.depth)

    def label(self, v: int) -> Label:
        out = []
        while v > 0:
            out.append(int(self.rank[v]))
            v = int(self.parent[v])
        return tuple(reversed(out))

    def labels(self) -> list[Label]:
        return [self.label(v) for v in range(len(self))]

    def index(self, label: Label | str) -> int:
        """Vertex index of ``label``; raises :class:`VertexNotFoundError`."""
        lab = parse_label(label)
        v = 0
        for i in lab:
            if i > self.child_count[v]:
                raise VertexNotFoundError(format_label(lab))
            v = int(self.children(v)[i - 1])
        return v

    def __contains__(self, label) -> bool:
        try:
            self.index(label)
        except (VertexNotFoundError, TreeError):
            return False
        return True

    def __iter__(self) -> Iterator[Label]:
        return iter(self.labels())

    def export(self) -> list[tuple[Label, int]]:
        return [(self.label(v), int(self.child_count[v])) for v in range(len(self))]

    # -- text formats --------------------------------------------------------

    def to_text(self) -> str:
        return "".join(f"{format_label(lab)}\t{k}\n" for lab, k in self.export())

    def to_dot(self, colors: Sequence | None = None, name: str = "tree") -> str:
        """Graphviz source; ``colors`` adds a ``color`` attribute per vertex."""
        lines = [f"digraph {name} {{"]
        for v in range(len(self)):
            attrs = f'label="{format_label(self.label(v))}"'
            if colors is not None:
                attrs += f', color="{colors[v]}"'
            lines.append(f"  n{v} [{attrs}];")
        for v in range(1, len(self)):
            lines.append(f"  n{self.parent[v]} -> n{v};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_tree(pairs: Iterable[tuple[Label | str, int]]) -> Tree:
    """Validate an Ulam-Harris description and return the tree.

    ``pairs`` lists ``(label, childCount)``; every listed vertex needs its
    count, and listing may be in any order.
    """
    counts: dict[Label, int] = {}
    for lab, k in pairs:
        lab = parse_label(lab)
        if int(k) < 0:
            raise TreeError(f"negative child count at {format_label(lab)}")
        counts[lab] = int(k)
    if ROOT not in counts:
        raise MissingRootError("the root ∅ is not listed")
    for lab in counts:
        if lab and lab[:-1] not in counts:
            raise AncestorGapError(f"{format_label(lab)} listed but its mother {format_label(lab[:-1])} is not")
        if lab and lab[-1] > counts[lab[:-1]]:
            raise ChildGapError(
                f"{format_label(lab)} exceeds the child count {counts[lab[:-1]]} of {format_label(lab[:-1])}"
            )
    for lab, k in counts.items():
        for i in range(1, k + 1):
            if lab + (i,) not in counts:
                raise ChildGapError(f"{format_label(lab + (i,))} missing although {format_label(lab)} has {k} children")
    preorder = sorted(counts)
    return Tree.from_child_counts([counts[lab] for lab in preorder])


def parse_text(text: str) -> Tree:
    """Read the ``label<TAB>childCount`` line format."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            lab, k = line.rsplit("\t", 1) if "\t" in line else line.split()
        except ValueError as exc:
            raise TreeError(f"line {lineno}: expected 'label<TAB>childCount'") from exc
        pairs.append((lab, int(k)))
    return build_tree(pairs)


def read_tree(path: str | Path) -> Tree:
    return parse_text(Path(path).read_text(encoding="utf-8"))


def subtree(t: Tree, u: Label | str) -> Tree:
    """The tree ``t_u = {v : uv in t}``, relabelled with ``u`` as root."""
    v = t.index(u)
    stop = v + int(t.subtree_size[v])
    parent = t.parent[v:stop] - v
    parent[0] = -1
    rank = t.rank[v:stop].copy()
    rank[0] = 0
    return Tree(parent, t.child_count[v:stop], t.depth[v:stop] - t.depth[v], rank)


def ancestors(t: Tree, u: Label | str) -> list[Label]:
    """Strict ancestors of ``u``, root first."""
    lab = t.label(t.index(u))
    return [lab[:i] for i in range(len(lab))]


def descendants_count(t: Tree, u: Label | str) -> int:
    return int(t.subtree_size[t.index(u)])


# -- stock trees -------------------------------------------------------------


def complete_tree(arity: int, depth: int) -> Tree:
    """The ``arity``-ary tree truncated at generation ``depth``."""
    counts = []

    def walk(level: int) -> None:
        if level == depth:
            counts.append(0)
            return
        counts.append(arity)
        for _ in range(arity):
            walk(level + 1)

    walk(0)
    return Tree.from_child_counts(counts)


def path_tree(length: int) -> Tree:
    return Tree.from_child_counts([1] * length + [0])


def star(n_children: int) -> Tree:
    return Tree.from_child_counts([n_children] + [0] * n_children)


EXAMPLE_COUNTS = {(): 2, (1,): 2, (2,): 1, (1, 1): 3, (1, 2): 1, (2, 1): 2}


def example_tree() -> Tree:
    """The 12-vertex example genealogy with labels up to ``212``."""
    pairs = dict(EXAMPLE_COUNTS)
    for lab, k in EXAMPLE_COUNTS.items():
        for i in range(1, k + 1):
            pairs.setdefault(lab + (i,), 0)
    return build_tree(pairs.items())


def tree_from_preorder_parent(parent: np.ndarray, depth: np.ndarray) -> Tree:
    """Tree from a pre-order parent array (``parent[0] == -1``, ``parent[v] < v``)."""
    parent = np.asarray(parent, dtype=np.int64)
    n = parent.size
    counts = np.bincount(parent[1:], minlength=n).astype(np.int64)
    rank = np.zeros(n, dtype=np.int64)
    if n > 1:
        kids = np.argsort(parent[1:], kind="stable") + 1
        ptr = np.concatenate(([0], np.cumsum(counts)))
        rank[kids] = np.arange(n - 1) - ptr[parent[kids]] + 1
    return Tree(parent, counts, depth, rank)
