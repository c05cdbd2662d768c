# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Same signatures and results as ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t, uint8_t

cnp.import_array()


cdef extern from *:
    int popcount64 "__builtin_popcountll"(unsigned long long) nogil
    int ctz64 "__builtin_ctzll"(unsigned long long) nogil


cdef inline int64_t _find(int64_t* parent, int64_t x) noexcept nogil:
    cdef int64_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def nz_sweep(int64_t n_vertices, const int64_t[::1] eu, const int64_t[::1] ev,
             const int64_t[::1] order):
    cdef Py_ssize_t B = order.shape[0], t
    cdef cnp.ndarray[int64_t, ndim=1] parent_a = np.arange(n_vertices, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] size_a = np.ones(n_vertices, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] s2_a = np.empty(B + 1, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] cmax_a = np.empty(B + 1, dtype=np.int64)
    cdef int64_t* parent = <int64_t*> parent_a.data
    cdef int64_t* size = <int64_t*> size_a.data
    cdef int64_t* s2 = <int64_t*> s2_a.data
    cdef int64_t* cmax = <int64_t*> cmax_a.data
    cdef int64_t a, b, e, cur_s2 = n_vertices, cur_max = 1 if n_vertices > 0 else 0
    s2[0] = cur_s2
    cmax[0] = cur_max
    with nogil:
        for t in range(B):
            e = order[t]
            a = _find(parent, eu[e])
            b = _find(parent, ev[e])
            if a != b:
                if size[a] < size[b]:
                    a, b = b, a
                parent[b] = a
                cur_s2 += 2 * size[a] * size[b]
                size[a] += size[b]
                if size[a] > cur_max:
                    cur_max = size[a]
            s2[t + 1] = cur_s2
            cmax[t + 1] = cur_max
    return s2_a, cmax_a


def bfs_cluster(const int64_t[::1] indptr, const int64_t[::1] nbr, const int64_t[::1] eid,
                const uint8_t[::1] occ, int64_t root, int64_t blocked_edge=-1,
                blocked_vertices=None):
    cdef Py_ssize_t V = indptr.shape[0] - 1
    cdef const uint8_t[::1] blk
    cdef bint use_blk = blocked_vertices is not None
    if use_blk:
        blk = blocked_vertices
        if blk[root]:
            return np.array([root], dtype=np.int64)
    cdef cnp.ndarray[uint8_t, ndim=1] seen_a = np.zeros(V, dtype=np.uint8)
    cdef cnp.ndarray[int64_t, ndim=1] queue_a = np.empty(V, dtype=np.int64)
    cdef uint8_t* seen = <uint8_t*> seen_a.data
    cdef int64_t* queue = <int64_t*> queue_a.data
    cdef Py_ssize_t head = 0, tail = 1, s
    cdef int64_t v, w, e
    queue[0] = root
    seen[root] = 1
    while head < tail:
        v = queue[head]
        head += 1
        for s in range(indptr[v], indptr[v + 1]):
            e = eid[s]
            if not occ[e] or e == blocked_edge:
                continue
            w = nbr[s]
            if seen[w]:
                continue
            if use_blk and blk[w]:
                continue
            seen[w] = 1
            queue[tail] = w
            tail += 1
    return queue_a[:tail].copy()


# -- bit-mask enumeration ---------------------------------------------------

cdef inline uint64_t _closure(int src, uint64_t* adj, uint64_t allowed) noexcept nogil:
    cdef uint64_t reach = (<uint64_t> 1) << src
    cdef uint64_t frontier = reach, low, new
    cdef int v
    while frontier:
        v = ctz64(frontier)
        frontier &= frontier - 1
        new = adj[v] & allowed & ~reach
        reach |= new
        frontier |= new
    return reach


cdef inline void _adjacency(int V, int B, const int64_t* eu, const int64_t* ev,
                            uint64_t mask, uint64_t* adj) noexcept nogil:
    cdef int i, e
    for i in range(V):
        adj[i] = 0
    while mask:
        e = ctz64(mask)
        mask &= mask - 1
        adj[eu[e]] |= (<uint64_t> 1) << ev[e]
        adj[ev[e]] |= (<uint64_t> 1) << eu[e]


cdef inline int _bridges(int V, int B, const int64_t* eu, const int64_t* ev,
                         uint64_t mask, uint64_t* adj, int src, uint64_t K,
                         int* bedge, int* btail, uint64_t* bfar) noexcept nogil:
    """Fill bridge arrays for the cluster K of src; return the bridge count."""
    cdef uint64_t full = (<uint64_t> -1) if V == 64 else (((<uint64_t> 1) << V) - 1)
    cdef uint64_t m = mask, R
    cdef int e, a, b, nb = 0
    while m:
        e = ctz64(m)
        m &= m - 1
        a = eu[e]
        b = ev[e]
        if not ((K >> a) & 1):
            continue
        adj[a] &= ~((<uint64_t> 1) << b)
        adj[b] &= ~((<uint64_t> 1) << a)
        R = _closure(src, adj, full)
        adj[a] |= (<uint64_t> 1) << b
        adj[b] |= (<uint64_t> 1) << a
        if ((R >> a) & 1) and ((R >> b) & 1):
            continue
        bedge[nb] = e
        btail[nb] = a if ((R >> a) & 1) else b
        bfar[nb] = K & ~R
        nb += 1
    return nb


def _check_sizes(int V, int B):
    if V > 64:
        raise ValueError("bit-mask enumeration needs at most 64 vertices")
    if B > 30:
        raise ValueError("bit-mask enumeration needs at most 30 edges")


def enum_cluster_stats(int V, const int64_t[::1] eu, const int64_t[::1] ev, int root):
    cdef int B = eu.shape[0]
    _check_sizes(V, B)
    cdef cnp.ndarray[int64_t, ndim=2] conn = np.zeros((V, B + 1), dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=2] dbl = np.zeros((V, B + 1), dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] cmax_sum = np.zeros(B + 1, dtype=np.int64)
    cdef int64_t[:, ::1] conn_v = conn
    cdef int64_t[:, ::1] dbl_v = dbl
    cdef int64_t[::1] cmax_v = cmax_sum
    cdef uint64_t adj[64]
    cdef int bedge[64]
    cdef int btail[64]
    cdef uint64_t bfar[64]
    cdef uint64_t full = (<uint64_t> -1) if V == 64 else (((<uint64_t> 1) << V) - 1)
    cdef uint64_t mask, K, far, D, x, rest, c
    cdef uint64_t nconf = (<uint64_t> 1) << B
    cdef int k, nb, i, best, sz
    with nogil:
        for mask in range(nconf):
            k = popcount64(mask)
            _adjacency(V, B, &eu[0] if B else NULL, &ev[0] if B else NULL, mask, adj)
            K = _closure(root, adj, full)
            nb = _bridges(V, B, &eu[0] if B else NULL, &ev[0] if B else NULL,
                          mask, adj, root, K, bedge, btail, bfar)
            far = 0
            for i in range(nb):
                far |= bfar[i]
            D = K & ~far
            x = K
            while x:
                conn_v[ctz64(x), k] += 1
                x &= x - 1
            x = D
            while x:
                dbl_v[ctz64(x), k] += 1
                x &= x - 1
            rest = full
            best = 0
            while rest:
                c = _closure(ctz64(rest), adj, full)
                sz = popcount64(c)
                if sz > best:
                    best = sz
                rest &= ~c
            cmax_v[k] += best
    return conn, dbl, cmax_sum


cdef Py_ssize_t _level0_pass(int V, int B, const int64_t* eu, const int64_t* ev, int root,
                             const int64_t* inc_ptr, const int64_t* inc_nbr,
                             const int64_t* inc_eid, int64_t* out_v0, uint64_t* out_a,
                             int64_t* out_k, bint fill) noexcept nogil:
    cdef uint64_t adj[64]
    cdef int bedge[64]
    cdef int btail[64]
    cdef uint64_t bfar[64]
    cdef uint64_t full = (<uint64_t> -1) if V == 64 else (((<uint64_t> 1) << V) - 1)
    cdef uint64_t nconf = (<uint64_t> 1) << B
    cdef uint64_t mask, K, far, D, A
    cdef int k, nb, i, u0, e
    cdef Py_ssize_t count = 0, s
    for mask in range(nconf):
        k = popcount64(mask)
        _adjacency(V, B, eu, ev, mask, adj)
        K = _closure(root, adj, full)
        nb = _bridges(V, B, eu, ev, mask, adj, root, K, bedge, btail, bfar)
        far = 0
        for i in range(nb):
            far |= bfar[i]
        D = K & ~far
        while D:
            u0 = ctz64(D)
            D &= D - 1
            for s in range(inc_ptr[u0], inc_ptr[u0 + 1]):
                e = inc_eid[s]
                A = K
                for i in range(nb):
                    if bedge[i] == e:
                        A = K & ~bfar[i]
                        break
                if fill:
                    out_v0[count] = inc_nbr[s]
                    out_a[count] = A
                    out_k[count] = k
                count += 1
    return count


def pi1_level0(int V, const int64_t[::1] eu, const int64_t[::1] ev, int root):
    cdef int B = eu.shape[0]
    _check_sizes(V, B)
    # incidence lists in the same order as the fallback: edge index order
    inc = [[] for _ in range(V)]
    for e in range(B):
        inc[eu[e]].append((ev[e], e))
        inc[ev[e]].append((eu[e], e))
    ptr = np.zeros(V + 1, dtype=np.int64)
    for i in range(V):
        ptr[i + 1] = ptr[i] + len(inc[i])
    flat = [pair for lst in inc for pair in lst]
    inc_nbr = np.array([p[0] for p in flat] or [0], dtype=np.int64)
    inc_eid = np.array([p[1] for p in flat] or [0], dtype=np.int64)
    cdef const int64_t[::1] ptr_v = ptr
    cdef const int64_t[::1] nbr_v = inc_nbr
    cdef const int64_t[::1] eid_v = inc_eid
    cdef const int64_t* eup = &eu[0] if B else NULL
    cdef const int64_t* evp = &ev[0] if B else NULL
    cdef Py_ssize_t count
    with nogil:
        count = _level0_pass(V, B, eup, evp, root, &ptr_v[0], &nbr_v[0], &eid_v[0],
                             NULL, NULL, NULL, False)
    out_v0 = np.empty(max(count, 1), dtype=np.int64)
    out_a = np.empty(max(count, 1), dtype=np.uint64)
    out_k = np.empty(max(count, 1), dtype=np.int64)
    cdef int64_t[::1] ov = out_v0
    cdef uint64_t[::1] oa = out_a
    cdef int64_t[::1] ok = out_k
    with nogil:
        _level0_pass(V, B, eup, evp, root, &ptr_v[0], &nbr_v[0], &eid_v[0],
                     &ov[0], &oa[0], &ok[0], True)
    return out_v0[:count], out_a[:count], out_k[:count]


def pi1_level1(int V, const int64_t[::1] eu, const int64_t[::1] ev, int v0,
               const uint64_t[::1] masks):
    cdef int B = eu.shape[0]
    _check_sizes(V, B)
    cdef Py_ssize_t M = masks.shape[0], i
    out = np.zeros((M, B + 1), dtype=np.int64)
    cdef int64_t[:, ::1] out_v = out
    cdef uint64_t adj[64]
    cdef uint64_t tails[64]
    cdef int bedge[64]
    cdef int btail[64]
    cdef uint64_t bfar[64]
    cdef uint64_t full = (<uint64_t> -1) if V == 64 else (((<uint64_t> 1) << V) - 1)
    cdef uint64_t nconf = (<uint64_t> 1) << B
    cdef uint64_t vbit = (<uint64_t> 1) << v0
    cdef uint64_t mask, K, A, through, x, tb
    cdef const int64_t* eup = &eu[0] if B else NULL
    cdef const int64_t* evp = &ev[0] if B else NULL
    cdef int k, nb, j, count
    if M == 0:
        return out
    with nogil:
        for mask in range(nconf):
            k = popcount64(mask)
            _adjacency(V, B, eup, evp, mask, adj)
            K = _closure(v0, adj, full)
            for j in range(V):
                tails[j] = 0
            nb = _bridges(V, B, eup, evp, mask, adj, v0, K, bedge, btail, bfar)
            for j in range(nb):
                tb = (<uint64_t> 1) << btail[j]
                x = bfar[j]
                while x:
                    tails[ctz64(x)] |= tb
                    x &= x - 1
            for i in range(M):
                A = masks[i]
                if A & vbit:
                    through = K
                else:
                    through = K & ~_closure(v0, adj, full & ~A)
                count = 0
                x = through
                while x:
                    if not (tails[ctz64(x)] & through):
                        count += 1
                    x &= x - 1
                out_v[i, k] += count
    return out
