"""Hot inner loops.

Every kernel has two implementations that consume random numbers in the same
order and return identical arrays:

* ``*_loop``: a scalar loop, compiled with numba unless JIT is disabled;
* ``*_np``: a vectorized numpy version that works level by level.

The public names at the bottom pick the loop version when numba is active and
the numpy version otherwise. ``bottleneck_profile`` is inherently sequential
(a priority-queue search) and has no vectorized form; with JIT disabled it runs
as plain Python.
"""

from __future__ import annotations

import heapq

import numpy as np

from ._accel import USE_NUMBA, njit

INF = np.inf


# --------------------------------------------------------------------------
# offspring draws


@njit
def draw_counts_loop(u, cdf):
    out = np.empty(u.shape[0], dtype=np.int64)
    last = cdf.shape[0] - 1
    for j in range(u.shape[0]):
        lo = 0
        hi = last
        x = u[j]
        # smallest k with x < cdf[k]
        while lo < hi:
            mid = (lo + hi) // 2
            if x < cdf[mid]:
                hi = mid
            else:
                lo = mid + 1
        out[j] = lo
    return out


def draw_counts_np(u, cdf):
    k = np.searchsorted(cdf, u, side="right")
    return np.minimum(k, cdf.shape[0] - 1).astype(np.int64)


# --------------------------------------------------------------------------
# BGW growth in breadth-first order


@njit
def grow_bfs_loop(rng, cdf, max_generation, max_vertices):
    cap = 16
    parent = np.empty(cap, dtype=np.int64)
    counts = np.zeros(cap, dtype=np.int64)
    parent[0] = -1
    n = 1
    gen_start = 0
    gen_end = 1
    generation = 0
    reason = 0  # 0 extinct, 1 generation bound, 2 vertex bound
    while True:
        if gen_end == gen_start:
            reason = 0
            break
        if generation >= max_generation:
            reason = 1
            break
        width = gen_end - gen_start
        u = rng.random(width)
        k = draw_counts_loop(u, cdf)
        total = 0
        for j in range(width):
            total += k[j]
        if n + total > max_vertices:
            reason = 2
            break
        if n + total > cap:
            while cap < n + total:
                cap *= 2
            p2 = np.empty(cap, dtype=np.int64)
            c2 = np.zeros(cap, dtype=np.int64)
            p2[:n] = parent[:n]
            c2[:n] = counts[:n]
            parent = p2
            counts = c2
        pos = n
        for j in range(width):
            v = gen_start + j
            counts[v] = k[j]
            for _ in range(k[j]):
                parent[pos] = v
                pos += 1
        gen_start = gen_end
        gen_end = pos
        n = pos
        generation += 1
    return parent[:n].copy(), counts[:n].copy(), reason


def grow_bfs_np(rng, cdf, max_generation, max_vertices):
    parents = [np.array([-1], dtype=np.int64)]
    counts = []
    frontier = np.array([0], dtype=np.int64)
    n = 1
    generation = 0
    reason = 0
    while True:
        if frontier.size == 0:
            reason = 0
            break
        if generation >= max_generation:
            reason = 1
            break
        k = draw_counts_np(rng.random(frontier.size), cdf)
        total = int(k.sum())
        if n + total > max_vertices:
            reason = 2
            break
        counts.append(k)
        children = np.repeat(frontier, k)
        parents.append(children)
        frontier = np.arange(n, n + total, dtype=np.int64)
        n += total
        generation += 1
    parent = np.concatenate(parents)
    child_count = np.zeros(n, dtype=np.int64)
    if counts:
        done = np.concatenate(counts)
        child_count[: done.size] = done
    return parent, child_count, reason


# --------------------------------------------------------------------------
# breadth-first -> lexicographic (depth-first pre-) order


@njit
def bfs_to_preorder_loop(child_count):
    n = child_count.shape[0]
    first = np.empty(n, dtype=np.int64)
    acc = 1
    for v in range(n):
        first[v] = acc
        acc += child_count[v]
    order = np.empty(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    stack[0] = 0
    top = 1
    i = 0
    while top > 0:
        top -= 1
        v = stack[top]
        order[i] = v
        i += 1
        for c in range(child_count[v] - 1, -1, -1):
            stack[top] = first[v] + c
            top += 1
    return order


def bfs_to_preorder_np(child_count):
    """Vectorized pre-order: subtree sizes bottom-up, then offsets top-down."""
    n = child_count.shape[0]
    first = np.concatenate(([1], 1 + np.cumsum(child_count)[:-1])).astype(np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    parent[1:] = np.repeat(np.arange(n, dtype=np.int64), child_count)
    # generation boundaries in BFS order
    bounds = [0, 1]
    while bounds[-1] < n:
        lo, hi = bounds[-2], bounds[-1]
        bounds.append(hi + int(child_count[lo:hi].sum()))
    size = np.ones(n, dtype=np.int64)
    for g in range(len(bounds) - 2, 0, -1):
        lo, hi = bounds[g], bounds[g + 1]
        np.add.at(size, parent[lo:hi], size[lo:hi])
    pos = np.zeros(n, dtype=np.int64)
    for g in range(1, len(bounds) - 1):
        lo, hi = bounds[g], bounds[g + 1]
        s = size[lo:hi]
        csum = np.cumsum(s) - s  # exclusive cumsum over the whole level
        par = parent[lo:hi]
        # subtract the running total at each sibling group's first member
        start = csum[first[par] - lo]
        pos[lo:hi] = pos[par] + 1 + csum - start
    order = np.empty(n, dtype=np.int64)
    order[pos] = np.arange(n, dtype=np.int64)
    return order


# --------------------------------------------------------------------------
# clusters of open edges


@njit
def _find(root, v):
    while root[v] != v:
        root[v] = root[root[v]]
        v = root[v]
    return v


@njit
def cluster_labels_loop(parent, open_mask, edge_order):
    """Union-find over open parent edges, processed in ``edge_order``.

    Unions link the larger root under the smaller, so each label is the
    cluster's minimal index, i.e. its rootmost vertex in pre-order.
    """
    n = parent.shape[0]
    root = np.arange(n, dtype=np.int64)
    for e in range(edge_order.shape[0]):
        v = edge_order[e]
        if not open_mask[v]:
            continue
        a = _find(root, v)
        b = _find(root, parent[v])
        if a < b:
            root[b] = a
        elif b < a:
            root[a] = b
    out = np.empty(n, dtype=np.int64)
    for v in range(n):
        out[v] = _find(root, v)
    return out


def cluster_labels_np(parent, open_mask, levels):
    """Level-by-level label propagation; ``levels`` lists vertices per depth."""
    label = np.arange(parent.shape[0], dtype=np.int64)
    for lv in levels[1:]:
        op = lv[open_mask[lv]]
        label[op] = label[parent[op]]
    return label


# --------------------------------------------------------------------------
# types inherited along edges (restricted DaC / MDM / MIM)


@njit
def propagate_types_loop(parent, keep, draw, d, root_type, avoid_mother):
    """Pre-order scan: keep the mother's type or take a fresh one from ``draw``.

    With ``avoid_mother`` the fresh type is uniform on the d-1 other types,
    otherwise uniform on all d types. Types are 0-based here.
    """
    n = parent.shape[0]
    out = np.empty(n, dtype=np.int64)
    out[0] = root_type
    for v in range(1, n):
        m = out[parent[v]]
        if keep[v]:
            out[v] = m
        elif avoid_mother:
            out[v] = (m + 1 + np.int64(draw[v] * (d - 1))) % d
        else:
            out[v] = np.int64(draw[v] * d)
    return out


def propagate_types_np(parent, keep, draw, d, root_type, avoid_mother, levels):
    out = np.empty(parent.shape[0], dtype=np.int64)
    out[0] = root_type
    for lv in levels[1:]:
        m = out[parent[lv]]
        if avoid_mother:
            fresh = (m + 1 + (draw[lv] * (d - 1)).astype(np.int64)) % d
        else:
            fresh = (draw[lv] * d).astype(np.int64)
        out[lv] = np.where(keep[lv], m, fresh)
    return out


# --------------------------------------------------------------------------
# lazy best-first search on a random tree


def _bottleneck_profile(rng, cdf, a_root, max_depth, size_cap, max_pops):
    """Minimax edge weight needed to reach each depth, on a lazily grown tree.

    Each vertex draws its offspring count when first expanded; each edge draws
    a uniform ``U`` on ``(0, 1]`` and, when ``a_root > 0``, a second uniform ``C``. The edge
    weight is ``0`` if ``C < a_root`` (the child's fresh cluster happens to get
    the root's colour) and ``U`` otherwise. The root component at retention
    ``p`` reaches depth ``n`` iff ``p >= prof[n]``.

    Returns ``(prof, kth, pops, capped)``: ``prof[n]`` is the bottleneck to
    depth ``n`` (``inf`` when the tree dies first), ``kth`` the bottleneck at
    which the component holds ``size_cap`` vertices within depth ``max_depth``
    (``inf`` if never), ``pops`` the number of expanded vertices and ``capped``
    whether ``max_pops`` stopped the search early.
    """
    prof = np.full(max_depth + 1, np.inf)
    prof[0] = 0.0
    kth = np.inf
    # ties go to the deeper vertex so equal-bottleneck subtrees are dived, not swept
    heap = [(0.0, 0, 0, 0)]
    seq = 1
    pops = 0
    capped = False
    last = cdf.shape[0] - 1
    b = 0.0
    while len(heap) > 0:
        b, _, _, depth = heapq.heappop(heap)
        pops += 1
        if pops == size_cap:
            kth = b
        if prof[depth] == np.inf:
            prof[depth] = b
        if prof[max_depth] < np.inf and pops >= size_cap:
            break
        if pops >= max_pops:
            capped = True
            break
        if depth == max_depth:
            continue
        x = rng.random()
        k = 0
        hi = last
        while k < hi:
            mid = (k + hi) // 2
            if x < cdf[mid]:
                hi = mid
            else:
                k = mid + 1
        for _ in range(k):
            w = 1.0 - rng.random()
            if a_root > 0.0:
                if rng.random() < a_root:
                    w = 0.0
            nb = b if b > w else w
            heapq.heappush(heap, (nb, -(depth + 1), seq, depth + 1))
            seq += 1
    if capped:
        # everything not yet resolved is reachable from the current level
        for n in range(max_depth + 1):
            if prof[n] == np.inf:
                prof[n] = b
        if kth == np.inf:
            kth = b
    return prof, kth, pops, capped


bottleneck_profile_py = _bottleneck_profile
bottleneck_profile_loop = njit(_bottleneck_profile)


# --------------------------------------------------------------------------
# root component of a complete tree, grown one generation at a time


@njit
def component_size_loop(rng, arity, max_depth, p, color_cdf, root_color, max_size):
    """Size of the root's component on the ``arity``-ary tree cut at ``max_depth``.

    Each child edge draws ``U`` on ``(0, 1]`` and is open iff ``U <= p``.
    With ``root_color >= 0`` a closed edge starts a new cluster whose colour
    is drawn from ``color_cdf``; the child still joins if that colour is the
    root's. Returns ``(size, truncated)``; growth stops once ``size`` would
    pass ``max_size``.
    """
    size = 1
    width = 1
    for _ in range(max_depth):
        if width == 0:
            break
        k = width * arity
        if size + k > max_size:
            return size, True
        u = rng.random(k)
        nxt = 0
        closed = 0
        for j in range(k):
            if 1.0 - u[j] <= p:
                nxt += 1
            else:
                closed += 1
        if root_color >= 0 and closed > 0:
            c = draw_counts_loop(rng.random(closed), color_cdf)
            for j in range(closed):
                if c[j] == root_color:
                    nxt += 1
        size += nxt
        width = nxt
    return size, False


def component_size_np(rng, arity, max_depth, p, color_cdf, root_color, max_size):
    size = 1
    width = 1
    for _ in range(max_depth):
        if width == 0:
            break
        k = width * arity
        if size + k > max_size:
            return size, True
        is_open = 1.0 - rng.random(k) <= p
        nxt = int(is_open.sum())
        closed = k - nxt
        if root_color >= 0 and closed > 0:
            nxt += int((draw_counts_np(rng.random(closed), color_cdf) == root_color).sum())
        size += nxt
        width = nxt
    return size, False


# --------------------------------------------------------------------------
# dispatch


def draw_counts(u, cdf):
    return draw_counts_loop(u, cdf) if USE_NUMBA else draw_counts_np(u, cdf)


def grow_bfs(rng, cdf, max_generation, max_vertices):
    fn = grow_bfs_loop if USE_NUMBA else grow_bfs_np
    return fn(rng, cdf, int(max_generation), int(max_vertices))


def bfs_to_preorder(child_count):
    fn = bfs_to_preorder_loop if USE_NUMBA else bfs_to_preorder_np
    return fn(np.ascontiguousarray(child_count, dtype=np.int64))


def cluster_labels(parent, open_mask, levels):
    if USE_NUMBA:
        order = np.arange(1, parent.shape[0], dtype=np.int64)
        return cluster_labels_loop(parent, open_mask, order)
    return cluster_labels_np(parent, open_mask, levels)


def propagate_types(parent, keep, draw, d, root_type, avoid_mother, levels):
    if USE_NUMBA:
        return propagate_types_loop(parent, keep, draw, int(d), int(root_type), bool(avoid_mother))
    return propagate_types_np(parent, keep, draw, int(d), int(root_type), bool(avoid_mother), levels)


def bottleneck_profile(rng, cdf, a_root, max_depth, size_cap, max_pops):
    fn = bottleneck_profile_loop if USE_NUMBA else bottleneck_profile_py
    return fn(rng, cdf, float(a_root), int(max_depth), int(size_cap), int(max_pops))


def component_size(rng, arity, max_depth, p, color_cdf=None, root_color=-1, max_size=10**7):
    cdf = np.ones(1) if color_cdf is None else np.ascontiguousarray(color_cdf, dtype=np.float64)
    fn = component_size_loop if USE_NUMBA else component_size_np
    return fn(rng, int(arity), int(max_depth), float(p), cdf, int(root_color), int(max_size))
