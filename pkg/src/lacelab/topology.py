"""Finite transitive graphs: the hypercube Q_n and the n-dimensional torus.

Vertices are integers.  On Q_n the index is the bit vector read with
coordinate ``i`` in bit ``i``; on the torus it is the base-L digit vector
with coordinate ``i`` as digit ``i``.

Edges are listed once each, in lexicographic order of (lower vertex, axis)
for Q_n and (vertex, axis) for the torus, where the torus edge at
(v, i) joins v to v + e_i.  The order is fixed so that Newman-Ziff
permutations and enumeration bit masks are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

HYPERCUBE = "hypercube"
TORUS = "torus"

# index tables are int64; keep V * degree well inside that range
_MAX_TABLE_ENTRIES = 2**40


@dataclass(frozen=True)
class Adjacency:
    """CSR adjacency: neighbours of v are ``nbr[indptr[v]:indptr[v+1]]``.

    ``eid`` holds the canonical edge index of each (v, neighbour) slot.
    """

    indptr: np.ndarray
    nbr: np.ndarray
    eid: np.ndarray


def _csr_from_edges(vertex_count: int, edges: np.ndarray) -> Adjacency:
    B = len(edges)
    if B == 0:
        return Adjacency(
            np.zeros(vertex_count + 1, np.int64),
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
        )
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    ids = np.concatenate([np.arange(B), np.arange(B)])
    order = np.lexsort((ids, src))
    counts = np.bincount(src, minlength=vertex_count)
    indptr = np.zeros(vertex_count + 1, np.int64)
    np.cumsum(counts, out=indptr[1:])
    return Adjacency(
        indptr,
        np.ascontiguousarray(dst[order], dtype=np.int64),
        np.ascontiguousarray(ids[order], dtype=np.int64),
    )


@dataclass(frozen=True)
class GraphSpec:
    """A hypercube or torus, with degree and canonical edge ordering.

    Use :func:`build_graph` to construct one; it validates the parameters.
    Heavy index tables are built lazily and cached.
    """

    family: str
    n: int
    L: int | None = None

    @property
    def vertex_count(self) -> int:
        if self.family == HYPERCUBE:
            return 2**self.n
        return self.L**self.n

    @property
    def degree(self) -> int:
        return self.n if self.family == HYPERCUBE else 2 * self.n

    @property
    def edge_count(self) -> int:
        if self.family == HYPERCUBE:
            return self.n * 2 ** (self.n - 1)
        return self.n * self.L**self.n

    @property
    def root(self) -> int:
        return 0

    @property
    def label(self) -> str:
        if self.family == HYPERCUBE:
            return f"Q{self.n}"
        return f"T{self.n}L{self.L}"

    def to_dict(self) -> dict:
        d = {"family": self.family, "n": self.n}
        if self.family == TORUS:
            d["L"] = self.L
        return d

    # coordinates -----------------------------------------------------------

    def coords(self, v: int) -> tuple[int, ...]:
        self._check(v)
        if self.family == HYPERCUBE:
            return tuple((v >> i) & 1 for i in range(self.n))
        out = []
        for _ in range(self.n):
            v, r = divmod(v, self.L)
            out.append(r)
        return tuple(out)

    def index(self, coords) -> int:
        if len(coords) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(coords)}")
        if self.family == HYPERCUBE:
            if any(c not in (0, 1) for c in coords):
                raise ValueError(f"hypercube coordinates must be 0/1: {coords}")
            return sum(int(c) << i for i, c in enumerate(coords))
        v = 0
        for i in reversed(range(self.n)):
            v = v * self.L + int(coords[i]) % self.L
        return v

    def neighbors(self, v: int) -> list[int]:
        """Neighbours of ``v`` in axis order (``+e_i`` before ``-e_i`` on the torus)."""
        self._check(v)
        if self.family == HYPERCUBE:
            return [v ^ (1 << i) for i in range(self.n)]
        out = []
        stride = 1
        for _ in range(self.n):
            digit = (v // stride) % self.L
            up = v + stride if digit < self.L - 1 else v - (self.L - 1) * stride
            down = v - stride if digit > 0 else v + (self.L - 1) * stride
            out.extend((up, down))
            stride *= self.L
        return out

    def translate(self, x: int, v: int) -> int:
        """Return x - v in the group structure (XOR on Q_n)."""
        if self.family == HYPERCUBE:
            return x ^ v
        cx, cv = self.coords(x), self.coords(v)
        return self.index([(a - b) % self.L for a, b in zip(cx, cv)])

    def _check(self, v: int) -> None:
        if not 0 <= v < self.vertex_count:
            raise IndexError(f"vertex {v} out of range for {self.label}")

    # tables ---------------------------------------------------------------

    @cached_property
    def edges(self) -> np.ndarray:
        """(B, 2) int64 array of endpoints in canonical order."""
        V = self.vertex_count
        verts = np.arange(V, dtype=np.int64)
        if self.family == HYPERCUBE:
            cols = []
            for i in range(self.n):
                lo = verts[(verts >> i) & 1 == 0]
                cols.append(np.stack([lo, lo | (1 << i), np.full_like(lo, i)], axis=1))
            e = np.concatenate(cols)
            e = e[np.lexsort((e[:, 2], e[:, 0]))]
            return np.ascontiguousarray(e[:, :2])
        out = np.empty((V, self.n, 2), np.int64)
        stride = 1
        for i in range(self.n):
            digit = (verts // stride) % self.L
            up = np.where(digit < self.L - 1, verts + stride, verts - (self.L - 1) * stride)
            out[:, i, 0] = verts
            out[:, i, 1] = up
            stride *= self.L
        return out.reshape(-1, 2)

    @cached_property
    def adjacency(self) -> Adjacency:
        """CSR adjacency with neighbour slots in :meth:`neighbors` order."""
        V, deg = self.vertex_count, self.degree
        verts = np.arange(V, dtype=np.int64)
        nbr = np.empty((V, deg), np.int64)
        eid = np.empty((V, deg), np.int64)
        if self.family == HYPERCUBE:
            # edge (lo, axis) position: edges sorted by lo then axis
            lows = self.edges[:, 0]
            axes = np.log2(self.edges[:, 1] - self.edges[:, 0]).round().astype(np.int64)
            lookup = np.full((V, self.n), -1, np.int64)
            lookup[lows, axes] = np.arange(self.edge_count)
            for i in range(self.n):
                other = verts ^ (1 << i)
                nbr[:, i] = other
                eid[:, i] = lookup[np.minimum(verts, other), i]
        else:
            stride = 1
            for i in range(self.n):
                digit = (verts // stride) % self.L
                up = np.where(digit < self.L - 1, verts + stride, verts - (self.L - 1) * stride)
                down = np.where(digit > 0, verts - stride, verts + (self.L - 1) * stride)
                nbr[:, 2 * i] = up
                nbr[:, 2 * i + 1] = down
                eid[:, 2 * i] = verts * self.n + i
                eid[:, 2 * i + 1] = down * self.n + i
                stride *= self.L
        indptr = np.arange(0, V * deg + 1, deg, dtype=np.int64)
        return Adjacency(indptr, nbr.ravel(), eid.ravel())


def build_graph(family: str, n: int, L: int | None = None) -> GraphSpec:
    """Construct and validate a hypercube (``"hypercube"``/``"qn"``) or torus."""
    family = {"qn": HYPERCUBE, "q": HYPERCUBE, "zn": TORUS}.get(family, family)
    if family not in (HYPERCUBE, TORUS):
        raise ValueError(f"unknown graph family {family!r}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    n = int(n)
    if family == TORUS:
        if L is None or L < 3:
            raise ValueError(f"torus side length must be >= 3, got {L!r}")
        g = GraphSpec(TORUS, n, int(L))
    else:
        g = GraphSpec(HYPERCUBE, n, None)
    if g.vertex_count * max(g.degree, 1) > _MAX_TABLE_ENTRIES:
        raise OverflowError(f"{g.label} is too large to index ({g.vertex_count} vertices)")
    return g



@dataclass(frozen=True, eq=False)
class ExplicitGraph:
    """A small graph given by an explicit edge list (boxes, paths, stars).

    Shares the interface of :class:`GraphSpec` used by the percolation and
    enumeration code: ``vertex_count``, ``edge_count``, ``edges``,
    ``adjacency``, ``neighbors`` and ``root``.
    """

    vertex_count: int
    edge_list: tuple[tuple[int, int], ...]
    root: int = 0
    label: str = "graph"

    def __post_init__(self):
        seen = set()
        for u, v in self.edge_list:
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count) or u == v:
                raise ValueError(f"bad edge {(u, v)} for {self.vertex_count} vertices")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        if not 0 <= self.root < self.vertex_count:
            raise ValueError("root out of range")

    @property
    def edge_count(self) -> int:
        return len(self.edge_list)

    @property
    def degree(self) -> int:
        counts = np.diff(self.adjacency.indptr)
        return int(counts.max()) if len(counts) else 0

    @cached_property
    def edges(self) -> np.ndarray:
        return np.array(self.edge_list, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def adjacency(self) -> Adjacency:
        return _csr_from_edges(self.vertex_count, self.edges)

    def neighbors(self, v: int) -> list[int]:
        a = self.adjacency
        return [int(w) for w in a.nbr[a.indptr[v]:a.indptr[v + 1]]]

    def to_dict(self) -> dict:
        return {"family": "explicit", "label": self.label, "vertex_count": self.vertex_count,
                "edges": [list(e) for e in self.edge_list], "root": self.root}


def path_graph(k: int) -> ExplicitGraph:
    """Path 0-1-...-(k-1)."""
    return ExplicitGraph(k, tuple((i, i + 1) for i in range(k - 1)), 0, f"path{k}")


def star_graph(leaves: int) -> ExplicitGraph:
    """Star K_{1,leaves} with the centre as vertex 0."""
    return ExplicitGraph(leaves + 1, tuple((0, i) for i in range(1, leaves + 1)), 0, f"star{leaves}")


def as_explicit(g) -> ExplicitGraph:
    if isinstance(g, ExplicitGraph):
        return g
    return ExplicitGraph(g.vertex_count, tuple(map(tuple, g.edges.tolist())), g.root, g.label)
