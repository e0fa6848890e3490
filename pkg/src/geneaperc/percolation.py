"""Bernoulli bond percolation on trees."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.stats import beta

from . import kernels
from .genealogy import Tree, tree_from_preorder_parent
from .rng import RandomSeed, as_generator


class IndexMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EdgeConfig:
    """Open/closed state per edge, edges in pre-order of their child vertex.

    ``bits[j]`` is the edge above vertex ``j + 1``.
    """

    bits: np.ndarray
    p: float | None = None
    tree_digest: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))
        if self.p is not None and not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EdgeConfig):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    @property
    def open_mask(self) -> np.ndarray:
        """Per-vertex mask of length ``n`` (slot 0, the root, is False)."""
        return np.concatenate(([False], self.bits))

    @property
    def n_open(self) -> int:
        return int(self.bits.sum())

    def check(self, t: Tree) -> None:
        if self.bits.size != t.n_edges:
            raise IndexMismatchError(f"{self.bits.size} edge bits for a tree with {t.n_edges} edges")
        if self.tree_digest is not None and self.tree_digest != t.digest():
            raise IndexMismatchError("edge configuration belongs to a different tree")

    def to_text(self) -> str:
        lines = ["# geneaperc edge configuration v1"]
        if self.tree_digest:
            lines.append(f"tree_sha256={self.tree_digest}")
        if self.p is not None:
            lines.append(f"p={self.p!r}")
        lines.append("".join("1" if b else "0" for b in self.bits))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EdgeConfig":
        meta, bits = {}, ""
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                k, v = line.split("=", 1)
                meta[k] = v
            else:
                bits += line
        if set(bits) - {"0", "1"}:
            raise ValueError("edge bitstring must contain only 0 and 1")
        p = float(meta["p"]) if "p" in meta else None
        return cls(np.array([c == "1" for c in bits], dtype=bool), p, meta.get("tree_sha256"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EdgeConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True, eq=False)
class UniformEdgeNoise:
    """One uniform on ``(0, 1]`` per edge; thresholding at ``p`` couples all ``p``."""

    values: np.ndarray
    tree_digest: str | None = None

    def threshold(self, p: float) -> EdgeConfig:
        return threshold_noise(self, p)


def sample_noise(t: Tree, seed: RandomSeed = None) -> UniformEdgeNoise:
    rng = as_generator(seed)
    return UniformEdgeNoise(1.0 - rng.random(t.n_edges), t.digest())


def threshold_noise(noise: UniformEdgeNoise, p: float) -> EdgeConfig:
    """Edge ``e`` is open iff ``U_e <= p``; open sets are nested in ``p``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return EdgeConfig(noise.values <= p, p, noise.tree_digest)


def percolate(t: Tree, p: float, seed: RandomSeed = None) -> EdgeConfig:
    """Keep each edge independently with probability ``p``."""
    return threshold_noise(sample_noise(t, seed), p)


@dataclass(frozen=True, eq=False)
class ClusterPartition:
    """Clusters of open edges; ``label[v]`` is the rootmost vertex of ``v``'s cluster."""

    label: np.ndarray
    ids: np.ndarray = field(init=False)
    sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        ids, sizes = np.unique(self.label, return_counts=True)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "sizes", sizes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClusterPartition):
            return NotImplemented
        return np.array_equal(self.label, other.label)

    @property
    def n_vertices(self) -> int:
        return int(self.label.size)

    @property
    def n_clusters(self) -> int:
        return int(self.ids.size)

    @property
    def root_id(self) -> int:
        return 0

    @property
    def root_size(self) -> int:
        return int(self.sizes[0])

    @cached_property
    def size_by_id(self) -> dict[int, int]:
        return dict(zip(self.ids.tolist(), self.sizes.tolist()))

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.label == cluster_id)

    def ranked(self) -> list[tuple[int, int]]:
        """``(id, size)`` by decreasing size; ties go to the smaller id."""
        order = np.lexsort((self.ids, -self.sizes))
        return [(int(self.ids[i]), int(self.sizes[i])) for i in order]


def clusters(t: Tree, config: EdgeConfig) -> ClusterPartition:
    config.check(t)
    return ClusterPartition(kernels.cluster_labels(t.parent, config.open_mask, t.levels))


def partition_from_sizes(sizes) -> ClusterPartition:
    """Partition of ``sum(sizes)`` labelled vertices into consecutive blocks."""
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    return ClusterPartition(np.repeat(starts, sizes).astype(np.int64))


def root_cluster_tree(t: Tree, config: EdgeConfig) -> Tree:
    """The open cluster of the root as a tree, children renumbered in order."""
    part = clusters(t, config)
    keep = np.flatnonzero(part.label == 0)
    newidx = np.full(len(t), -1, dtype=np.int64)
    newidx[keep] = np.arange(keep.size)
    parent = np.full(keep.size, -1, dtype=np.int64)
    parent[1:] = newidx[t.parent[keep[1:]]]
    return tree_from_preorder_parent(parent, t.depth[keep])


def root_cluster_depth(t: Tree, config: EdgeConfig) -> int:
    part = clusters(t, config)
    return int(t.depth[part.label == 0].max())


def critical_dary(d: int) -> float:
    """Critical retention of the ``d``-ary tree: ``1/d``."""
    if int(d) != d or d < 2:
        raise ValueError("the d-ary tree needs an integer d >= 2")
    return 1.0 / d


def critical_bgw(m: float) -> float:
    """Critical retention of a supercritical Galton-Watson tree, given survival: ``1/m``."""
    if m <= 1:
        raise ValueError("the tree is finite almost surely when m <= 1; no percolation threshold")
    return 1.0 / m


def is_giant(partition: ClusterPartition, r: float, cluster_id: int | None = None) -> bool:
    """Whether a cluster (the largest by default) holds at least ``r |V|`` vertices."""
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    size = partition.ranked()[0][1] if cluster_id is None else partition.size_by_id[cluster_id]
    return size >= r * partition.n_vertices


def largest_clusters(partition: ClusterPartition, n: int | None = None) -> list[int]:
    sizes = [s for _, s in partition.ranked()]
    return sizes if n is None else sizes[:n]


def cluster_record(t: Tree, config: EdgeConfig, seed=None, r: float = 0.5) -> dict:
    """JSON-ready summary ``{p, seed, rootClusterSize, largest, giantFlag}``."""
    part = clusters(t, config)
    return {
        "p": config.p,
        "seed": seed,
        "rootClusterSize": part.root_size,
        "largest": largest_clusters(part, 1)[0],
        "giantFlag": is_giant(part, r),
    }


def cluster_records_json(records) -> str:
    return json.dumps(list(records), indent=2)


@dataclass(frozen=True)
class SupercriticalCheck:
    epsilon: float
    p: float
    threshold_size: float
    probability: float
    ci_low: float
    replicates: int
    large_enough: bool

    @property
    def supercritical(self) -> bool:
        return self.large_enough and self.probability >= self.epsilon


def epsilon_supercritical(
    t: Tree,
    p: float,
    epsilon: float,
    threshold_size: float | None = None,
    replicates: int = 1000,
    seed: RandomSeed = None,
    confidence: float = 0.99,
) -> SupercriticalCheck:
    """Monte Carlo check of ``P_{(1-eps)p}(|K_1| >= threshold) >= eps``.

    The size threshold defaults to ``eps |V|``; the graph must also satisfy
    ``|V| >= 2 eps^-3``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = len(t)
    thr = epsilon * n if threshold_size is None else threshold_size
    rng = as_generator(seed)
    hits = 0
    q = (1 - epsilon) * p
    for _ in range(replicates):
        part = clusters(t, percolate(t, q, rng))
        hits += part.sizes.max() >= thr
    lo, _ = clopper_pearson(hits, replicates, confidence)
    return SupercriticalCheck(epsilon, p, thr, hits / replicates, lo, replicates, n >= 2 * epsilon**-3)


def clopper_pearson(k: int, n: int, confidence: float = 0.99) -> tuple[float, float]:
    """Exact two-sided binomial interval for ``k`` successes out of ``n``."""
    if n == 0:
        return 0.0, 1.0
    alpha = 1 - confidence
    lo = 0.0 if k == 0 else float(beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi
