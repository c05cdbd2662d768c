"""Pure-Python versions of the kernels in ``_core.pyx``.

Signatures and results are identical; :mod:`lacelab.kernels` picks one at
import time.  The enumeration kernels represent vertex sets as Python int
bit masks, so they need ``vertex_count <= 64`` just like the compiled ones.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def nz_sweep(n_vertices, eu, ev, order):
    """Insert edges ``order[0], order[1], ...`` into a union-find forest.

    Returns ``(s2, cmax)`` of length ``len(order) + 1``: the sum of squared
    cluster sizes and the largest cluster size after each insertion.
    """
    B = len(order)
    parent = list(range(n_vertices))
    size = [1] * n_vertices
    s2 = np.empty(B + 1, np.int64)
    cmax = np.empty(B + 1, np.int64)
    cur_s2 = n_vertices
    cur_max = 1 if n_vertices else 0
    s2[0] = cur_s2
    cmax[0] = cur_max
    eu = eu.tolist()
    ev = ev.tolist()
    for t, e in enumerate(order.tolist()):
        a = eu[e]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = ev[e]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            sa, sb = size[a], size[b]
            if sa < sb:
                a, b, sa, sb = b, a, sb, sa
            parent[b] = a
            cur_s2 += 2 * sa * sb
            size[a] = sa + sb
            if sa + sb > cur_max:
                cur_max = sa + sb
        s2[t + 1] = cur_s2
        cmax[t + 1] = cur_max
    return s2, cmax


def bfs_cluster(indptr, nbr, eid, occ, root, blocked_edge=-1, blocked_vertices=None):
    """Vertices reachable from ``root`` along occupied edges, in BFS order.

    ``blocked_edge`` is treated as vacant.  Edges with an endpoint in
    ``blocked_vertices`` (a 0/1 array) are treated as vacant too.
    """
    if blocked_vertices is not None and blocked_vertices[root]:
        return np.array([root], np.int64)
    seen = {root}
    order = [root]
    queue = deque(order)
    while queue:
        v = queue.popleft()
        for s in range(indptr[v], indptr[v + 1]):
            e = eid[s]
            if not occ[e] or e == blocked_edge:
                continue
            w = int(nbr[s])
            if w in seen:
                continue
            if blocked_vertices is not None and blocked_vertices[w]:
                continue
            seen.add(w)
            order.append(w)
            queue.append(w)
    return np.array(order, np.int64)


# -- bit-mask enumeration ---------------------------------------------------


def _closure(src, adj, allowed):
    reach = 1 << src
    frontier = reach
    while frontier:
        low = frontier & -frontier
        frontier ^= low
        new = adj[low.bit_length() - 1] & allowed & ~reach
        reach |= new
        frontier |= new
    return reach


def _adjacency(V, eu, ev, mask):
    adj = [0] * V
    m = mask
    while m:
        low = m & -m
        m ^= low
        e = low.bit_length() - 1
        a, b = eu[e], ev[e]
        adj[a] |= 1 << b
        adj[b] |= 1 << a
    return adj


def _bridges(V, eu, ev, mask, adj, src, K):
    """Bridges of the occupied cluster ``K`` of ``src``.

    Yields ``(e, tail, far)``: edge index, the endpoint on the ``src`` side,
    and the vertex mask cut off from ``src`` when ``e`` is removed.
    """
    full = (1 << V) - 1
    m = mask
    while m:
        low = m & -m
        m ^= low
        e = low.bit_length() - 1
        a, b = eu[e], ev[e]
        if not (K >> a) & 1:
            continue
        adj[a] &= ~(1 << b)
        adj[b] &= ~(1 << a)
        R = _closure(src, adj, full)
        adj[a] |= 1 << b
        adj[b] |= 1 << a
        if (R >> a) & 1 and (R >> b) & 1:
            continue
        tail = a if (R >> a) & 1 else b
        yield e, tail, K & ~R


def enum_cluster_stats(V, eu, ev, root):
    """Aggregate connectivity counts over all ``2**B`` configurations.

    Returns ``(conn, dbl, cmax_sum)`` indexed by occupied-edge count k:
    ``conn[x, k]`` / ``dbl[x, k]`` count configurations where root is
    connected / doubly connected to x; ``cmax_sum[k]`` sums the largest
    cluster size.
    """
    B = len(eu)
    eu = [int(x) for x in eu]
    ev = [int(x) for x in ev]
    full = (1 << V) - 1
    conn = np.zeros((V, B + 1), np.int64)
    dbl = np.zeros((V, B + 1), np.int64)
    cmax_sum = np.zeros(B + 1, np.int64)
    for mask in range(1 << B):
        k = mask.bit_count()
        adj = _adjacency(V, eu, ev, mask)
        K = _closure(root, adj, full)
        far = 0
        for _, _, f in _bridges(V, eu, ev, mask, adj, root, K):
            far |= f
        D = K & ~far
        x = K
        while x:
            low = x & -x
            x ^= low
            conn[low.bit_length() - 1, k] += 1
        x = D
        while x:
            low = x & -x
            x ^= low
            dbl[low.bit_length() - 1, k] += 1
        rest = full
        best = 0
        while rest:
            low = rest & -rest
            c = _closure(low.bit_length() - 1, adj, full)
            best = max(best, c.bit_count())
            rest &= ~c
        cmax_sum[k] += best
    return conn, dbl, cmax_sum


def _level0_records(V, eu, ev, root):
    B = len(eu)
    full = (1 << V) - 1
    incident = [[] for _ in range(V)]
    for e in range(B):
        incident[eu[e]].append((ev[e], e))
        incident[ev[e]].append((eu[e], e))
    for mask in range(1 << B):
        k = mask.bit_count()
        adj = _adjacency(V, eu, ev, mask)
        K = _closure(root, adj, full)
        cut = {}
        far = 0
        for e, _, f in _bridges(V, eu, ev, mask, adj, root, K):
            cut[e] = f
            far |= f
        D = K & ~far
        x = D
        while x:
            low = x & -x
            x ^= low
            u0 = low.bit_length() - 1
            for v0, e in incident[u0]:
                A = K & ~cut[e] if e in cut else K
                yield v0, A, k


def pi1_level0(V, eu, ev, root):
    """Level-0 records ``(v0, A, k)`` for the two-level enumeration.

    One record per configuration and directed bond (u0, v0) with u0 doubly
    connected to ``root``; ``A`` is the cluster of root with {u0, v0}
    vacant, as a bit mask, and ``k`` the occupied-edge count.
    """
    eu = [int(x) for x in eu]
    ev = [int(x) for x in ev]
    recs = list(_level0_records(V, eu, ev, root))
    if not recs:
        return np.zeros(0, np.int64), np.zeros(0, np.uint64), np.zeros(0, np.int64)
    v0, A, k = zip(*recs)
    return np.array(v0, np.int64), np.array(A, np.uint64), np.array(k, np.int64)


def pi1_level1(V, eu, ev, v0, masks):
    """For each vertex mask A, count pairs (configuration, x) with E'(v0, x; A).

    Returns an int64 array of shape ``(len(masks), B + 1)`` indexed by the
    occupied-edge count.
    """
    B = len(eu)
    eu = [int(x) for x in eu]
    ev = [int(x) for x in ev]
    full = (1 << V) - 1
    masks = [int(a) for a in masks]
    out = np.zeros((len(masks), B + 1), np.int64)
    vbit = 1 << v0
    for mask in range(1 << B):
        k = mask.bit_count()
        adj = _adjacency(V, eu, ev, mask)
        K = _closure(v0, adj, full)
        # tails of pivotal bonds on the path v0 -> x, per x
        tails = [0] * V
        for _, tail, f in _bridges(V, eu, ev, mask, adj, v0, K):
            tb = 1 << tail
            x = f
            while x:
                low = x & -x
                x ^= low
                tails[low.bit_length() - 1] |= tb
        for i, A in enumerate(masks):
            if A & vbit:
                through = K
            else:
                through = K & ~_closure(v0, adj, full & ~A)
            count = 0
            x = through
            while x:
                low = x & -x
                x ^= low
                if not tails[low.bit_length() - 1] & through:
                    count += 1
            out[i, k] += count
    return out
