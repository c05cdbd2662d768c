"""Lace-expansion events and Monte Carlo estimators of Pi^(0) and Pi^(1).

Directed bonds are ``(u, v)`` tuples.  Vertex sets ``A`` may be any
iterable of vertex indices.

Conventions
-----------
* ``x <=> x`` always holds.
* ``v ->A x`` (connected through A) presupposes ``v <-> x``; for ``v == x``
  it holds iff ``x`` is in ``A``.
* Pivotal bonds are the occupied bridges of the cluster of ``v`` that lie
  on the path to ``x``, oriented with the first endpoint on the ``v`` side.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .percolation import BondConfiguration, cluster_of, edge_lookup, sample_configuration
from .runner import map_blocks, replica_rng

log = logging.getLogger(__name__)


class LaceDomainError(ValueError):
    """Raised when 1 + Pi <= 0, where the recursion is undefined."""


# -- local occupied graph ------------------------------------------------------


def _occupied_adjacency(cfg: BondConfiguration, verts: np.ndarray) -> dict:
    """Occupied incident edges ``u -> [(w, e), ...]`` for each ``u`` in ``verts``."""
    a = cfg.graph.adjacency
    starts = a.indptr[verts]
    counts = a.indptr[verts + 1] - starts
    if counts.sum() == 0:
        return {int(u): [] for u in verts}
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    slots = np.arange(counts.sum()) + offsets
    src = np.repeat(verts, counts)
    keep = cfg.occupied[a.eid[slots]]
    adj = {int(u): [] for u in verts}
    for u, w, e in zip(src[keep].tolist(), a.nbr[slots][keep].tolist(), a.eid[slots][keep].tolist()):
        adj[u].append((w, e))
    return adj


class BridgeTree:
    """Two-edge-connected structure of the occupied cluster of ``source``.

    Vertices of one component are pairwise doubly connected; components are
    joined by bridges, which form a tree rooted at the component of
    ``source``.  The pivotal bonds for ``source <-> x`` are the bridges on the
    tree path to ``x``.
    """

    def __init__(self, cfg: BondConfiguration, source: int):
        self.source = int(source)
        verts = cluster_of(cfg, source)
        self.vertices = verts
        adj = _occupied_adjacency(cfg, verts)
        self.bridges = self._find_bridges(adj, self.source)
        bridge_ids = {e for e, _, _ in self.bridges}

        comp = {}
        ncomp = 0
        for s in verts.tolist():
            if s in comp:
                continue
            comp[s] = ncomp
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w, e in adj[u]:
                    if e not in bridge_ids and w not in comp:
                        comp[w] = ncomp
                        queue.append(w)
            ncomp += 1
        self.comp = comp

        # orient bridges away from the source component
        by_comp = [[] for _ in range(ncomp)]
        for e, a, b in self.bridges:
            by_comp[comp[a]].append((a, b))
            by_comp[comp[b]].append((b, a))
        root = comp[self.source]
        self.parent = [-1] * ncomp
        self.parent_bridge: list[tuple[int, int] | None] = [None] * ncomp
        self.order = [root]
        seen = {root}
        queue = deque([root])
        while queue:
            c = queue.popleft()
            for a, b in by_comp[c]:
                cb = comp[b]
                if cb in seen:
                    continue
                seen.add(cb)
                self.parent[cb] = c
                self.parent_bridge[cb] = (a, b)
                self.order.append(cb)
                queue.append(cb)

    @staticmethod
    def _find_bridges(adj: dict, source: int) -> list[tuple[int, int, int]]:
        """Iterative Tarjan low-link; returns ``(edge, u, w)`` per bridge."""
        disc = {source: 0}
        low = {source: 0}
        bridges = []
        counter = 1
        stack = [(source, -1, iter(adj[source]))]
        while stack:
            u, pe, it = stack[-1]
            advanced = False
            for w, e in it:
                if e == pe:
                    continue
                if w in disc:
                    if disc[w] < low[u]:
                        low[u] = disc[w]
                    continue
                disc[w] = low[w] = counter
                counter += 1
                stack.append((w, e, iter(adj[w])))
                advanced = True
                break
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                if low[u] < low[parent]:
                    low[parent] = low[u]
                if low[u] > disc[parent]:
                    bridges.append((pe, parent, u))
        return bridges

    def contains(self, x: int) -> bool:
        return x in self.comp

    def doubly_connected_set(self) -> list[int]:
        """Vertices doubly connected to the source (including itself)."""
        root = self.comp[self.source]
        return [v for v, c in self.comp.items() if c == root]

    def pivotal(self, x: int) -> list[tuple[int, int]]:
        if x not in self.comp:
            return []
        path = []
        c = self.comp[x]
        while self.parent[c] != -1:
            path.append(self.parent_bridge[c])
            c = self.parent[c]
        path.reverse()
        return path

    def count_e_prime(self, through: set) -> int:
        """Number of x with ``source ->A x`` and no pivotal tail in ``through``.

        ``through`` is the set of vertices y with ``source ->A y``.
        """
        if not through:
            return 0
        blocked = [False] * len(self.parent)
        for c in self.order[1:]:
            tail = self.parent_bridge[c][0]
            blocked[c] = blocked[self.parent[c]] or tail in through
        return sum(1 for x in through if not blocked[self.comp[x]])


# -- event predicates ------------------------------------------------------------


def _mask(graph, A) -> np.ndarray:
    m = np.zeros(graph.vertex_count, np.uint8)
    idx = list(A)
    if idx:
        m[np.asarray(idx, dtype=np.int64)] = 1
    return m


def _edge_index(graph, u: int, v: int) -> int:
    # cached next to the graph's other lazily built tables
    lookup = graph.__dict__.get("_edge_lookup")
    if lookup is None:
        lookup = graph.__dict__["_edge_lookup"] = edge_lookup(graph)
    try:
        return lookup[(min(u, v), max(u, v))]
    except KeyError:
        raise ValueError(f"({u}, {v}) is not a bond of the graph") from None


def doubly_connected(cfg: BondConfiguration, x: int, y: int) -> bool:
    """``x == y`` or two bond-disjoint occupied paths join x and y (max-flow >= 2)."""
    if x == y:
        return True
    verts = cluster_of(cfg, x)
    if y not in set(verts.tolist()):
        return False
    adj = _occupied_adjacency(cfg, verts)
    ends = {}
    for u, lst in adj.items():
        for w, e in lst:
            ends[e] = (min(u, w), max(u, w))
    flow = dict.fromkeys(ends, 0)  # +1: unit sent from lower to higher endpoint

    def residual(u, w, e):
        lo, _ = ends[e]
        return 1 - flow[e] if u == lo else 1 + flow[e]

    for _ in range(2):
        prev = {x: None}
        queue = deque([x])
        while queue and y not in prev:
            u = queue.popleft()
            for w, e in adj[u]:
                if w not in prev and residual(u, w, e) > 0:
                    prev[w] = (u, e)
                    queue.append(w)
        if y not in prev:
            return False
        w = y
        while prev[w] is not None:
            u, e = prev[w]
            flow[e] += 1 if u == ends[e][0] else -1
            w = u
    return True


def connected_through(cfg: BondConfiguration, v: int, x: int, A) -> bool:
    """Every occupied path from v to x uses a bond with an endpoint in A."""
    A = set(int(a) for a in A)
    if v == x:
        return x in A
    a = cfg.graph.adjacency
    cluster = kernels.bfs_cluster(a.indptr, a.nbr, a.eid, cfg.occ, int(v))
    if x not in set(cluster.tolist()):
        return False
    avoiding = kernels.bfs_cluster(a.indptr, a.nbr, a.eid, cfg.occ, int(v), -1, _mask(cfg.graph, A))
    return x not in set(avoiding.tolist())


def restricted_cluster(cfg: BondConfiguration, bond: tuple[int, int], x: int) -> set[int]:
    """Cluster of ``x`` once ``bond`` is made vacant."""
    e = _edge_index(cfg.graph, *bond)
    return set(cluster_of(cfg, x, vacant_edge=e).tolist())


def occupied_pivotal_bonds(cfg: BondConfiguration, v: int, x: int) -> list[tuple[int, int]]:
    """Occupied pivotal bonds for ``v <-> x``, ordered from the v side."""
    if v == x:
        return []
    return BridgeTree(cfg, v).pivotal(x)


def event_E_prime(cfg: BondConfiguration, v: int, x: int, A) -> bool:
    """``v ->A x`` and no occupied pivotal (u', v') for v <-> x with ``v ->A u'``."""
    A = set(int(a) for a in A)
    if not connected_through(cfg, v, x, A):
        return False
    return not any(connected_through(cfg, v, u, A) for u, _ in occupied_pivotal_bonds(cfg, v, x))


def through_set(cfg: BondConfiguration, tree: BridgeTree, A_mask: np.ndarray) -> set[int]:
    """All y with ``tree.source ->A y``, given A as a 0/1 vertex array."""
    v = tree.source
    cluster = set(tree.vertices.tolist())
    if A_mask[v]:
        return cluster
    a = cfg.graph.adjacency
    avoiding = kernels.bfs_cluster(a.indptr, a.nbr, a.eid, cfg.occ, v, -1, A_mask)
    return cluster.difference(avoiding.tolist())


# -- estimators ---------------------------------------------------------------------


@dataclass
class PiEstimate:
    """Monte Carlo estimate of Pi^(N) at one p."""

    order: int
    p: float
    value: float
    stderr: float
    replicas: int
    graph: object
    seed: int | None = None
    diagonal: float | None = None
    diagonal_stderr: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "graph": self.graph.to_dict(),
            "N": self.order,
            "p": self.p,
            "value": self.value,
            "stderr": self.stderr,
            "replicas": self.replicas,
            "seed": self.seed,
        }
        if self.diagonal is not None:
            d["diagonal_u0_eq_0"] = self.diagonal
            d["diagonal_stderr"] = self.diagonal_stderr
        if self.notes:
            d["notes"] = list(self.notes)
        return d


def _pi0_count(cfg: BondConfiguration, root: int) -> int:
    return len(BridgeTree(cfg, root).doubly_connected_set()) - 1


def _pi1_sum(g, p, w0: BondConfiguration, w1: BondConfiguration, root: int) -> tuple[float, float]:
    """Level-1 count summed over (u0, v0), and its u0 == root part (no p factor)."""
    tree0 = BridgeTree(w0, root)
    K0 = tree0.vertices
    a = g.adjacency
    trees1 = {}
    total = diag = 0
    bridge_ids = {e for e, _, _ in tree0.bridges}
    for u0 in tree0.doubly_connected_set():
        for s in range(a.indptr[u0], a.indptr[u0 + 1]):
            v0, e = int(a.nbr[s]), int(a.eid[s])
            if w0.occupied[e] and e in bridge_ids:
                A = cluster_of(w0, root, vacant_edge=e)
            else:
                A = K0
            A_mask = np.zeros(g.vertex_count, np.uint8)
            A_mask[A] = 1
            tree1 = trees1.get(v0)
            if tree1 is None:
                tree1 = trees1[v0] = BridgeTree(w1, v0)
            count = tree1.count_e_prime(through_set(w1, tree1, A_mask))
            total += count
            if u0 == root:
                diag += count
    return total, diag


def _pi_block(g, p, seed, orders, block):
    root = g.root
    rows = []
    for r in block:
        w0 = sample_configuration(g, p, replica_rng(seed, r, 0))
        pi0 = _pi0_count(w0, root) if 0 in orders else 0.0
        pi1 = diag = 0.0
        if 1 in orders:
            w1 = sample_configuration(g, p, replica_rng(seed, r, 1))
            total, d = _pi1_sum(g, p, w0, w1, root)
            pi1, diag = p * total, p * d
        rows.append((pi0, pi1, diag))
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def _mean_err(x: np.ndarray) -> tuple[float, float]:
    R = len(x)
    if R < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(R))


def _pi_samples(g, p, replicas, seed, workers, orders) -> np.ndarray:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if g.vertex_count > 2**20:
        raise ValueError("graph too large for the all-x scan")
    return np.concatenate(map_blocks(_pi_block, (g, p, seed, tuple(orders)), replicas, workers))


def estimate_pi0(g, p: float, replicas: int, seed: int = 0, workers: int | None = None) -> PiEstimate:
    """Replica mean of the number of x != 0 doubly connected to the origin."""
    rows = _pi_samples(g, p, replicas, seed, workers, (0,))
    value, err = _mean_err(rows[:, 0])
    return PiEstimate(0, float(p), value, err, replicas, g, seed)


_TRUNCATION_NOTE = "alternating series truncated after N=1; neglected tail is O(degree^-2)"


def estimate_pi1(g, p: float, replicas: int, seed: int = 0, workers: int | None = None) -> PiEstimate:
    """Two-level estimator of Pi^(1).

    Each replica draws a level-0 configuration and a single level-1
    configuration shared by every directed bond (u0, v0).
    """
    rows = _pi_samples(g, p, replicas, seed, workers, (1,))
    value, err = _mean_err(rows[:, 1])
    dval, derr = _mean_err(rows[:, 2])
    return PiEstimate(1, float(p), value, err, replicas, g, seed, dval, derr)


@dataclass(frozen=True)
class PiTotal:
    """Pi^(0) - Pi^(1) from paired replicas, with both parts."""

    p: float
    value: float
    stderr: float
    pi0: PiEstimate
    pi1: PiEstimate


def estimate_pi_total(g, p: float, replicas: int, seed: int = 0,
                      workers: int | None = None) -> PiTotal:
    """``Pi^(0) - Pi^(1)``; the error uses the per-replica difference."""
    rows = _pi_samples(g, p, replicas, seed, workers, (0, 1))
    v0, e0 = _mean_err(rows[:, 0])
    v1, e1 = _mean_err(rows[:, 1])
    dv, de = _mean_err(rows[:, 2])
    tot, etot = _mean_err(rows[:, 0] - rows[:, 1])
    p = float(p)
    pi0 = PiEstimate(0, p, v0, e0, replicas, g, seed)
    pi1 = PiEstimate(1, p, v1, e1, replicas, g, seed, dv, de)
    return PiTotal(p, tot, etot, pi0, pi1)


# -- critical-point recursion ----------------------------------------------------------


INFINITE = "infinite"
FINITE_TARGET = "finite-target"


@dataclass
class FixedPointResult:
    p_star: float
    iterations: int
    residual: float
    converged: bool
    trace: list = field(default_factory=list)  # (iteration, p, pi_hat, chi, residual)


def _value(x) -> float:
    return float(getattr(x, "value", x))


def _err(x) -> float:
    return float(getattr(x, "stderr", 0.0))


def recursion_rhs(degree: int, pi: float, chi: float | None) -> float:
    """``[1/(1+Pi) - 1/chi] / degree`` (the chi term dropped when ``chi`` is None)."""
    if pi <= -1.0:
        raise LaceDomainError(f"1 + Pi must be positive, got Pi = {pi}")
    rhs = 1.0 / (1.0 + pi)
    if chi is not None:
        rhs -= 1.0 / chi
    return rhs / degree


def solve_fixed_point(g, pi_total, chi=None, mode: str = INFINITE, gamma: float = 0.5,
                      tol: float = 1e-10, max_iter: int = 500, p0: float | None = None,
                      p_max: float = 1.0) -> FixedPointResult:
    """Damped iteration ``p <- (1-gamma) p + gamma [1/(1+Pi_p) - 1/chi(p)] / degree``.

    ``pi_total`` and ``chi`` are callables of p returning a number or an
    object with ``.value``.  In ``"infinite"`` mode the chi term is dropped.
    An iterate outside ``[0, p_max]`` raises :class:`LaceDomainError`.
    Non-convergence is reported through ``converged=False`` and a warning.
    """
    if mode not in (INFINITE, FINITE_TARGET):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == FINITE_TARGET and chi is None:
        raise ValueError("finite-target mode needs a chi function")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    omega = g.degree
    p = 1.0 / omega if p0 is None else float(p0)
    trace = []
    converged = False
    it = 0
    residual = math.inf
    for it in range(1, max_iter + 1):
        pi = _value(pi_total(p))
        c = _value(chi(p)) if mode == FINITE_TARGET else None
        target = recursion_rhs(omega, pi, c)
        residual = abs(omega * p - omega * target)
        trace.append((it, p, pi, c if c is not None else math.inf, residual))
        new = (1.0 - gamma) * p + gamma * target
        if not 0.0 <= new <= p_max:
            raise LaceDomainError(f"iterate {new:.6g} left [0, {p_max:.6g}] at step {it}")
        step = abs(new - p)
        p = new
        if step < tol:
            converged = True
            break
    pi = _value(pi_total(p))
    c = _value(chi(p)) if mode == FINITE_TARGET else None
    residual = abs(omega * p - omega * recursion_rhs(omega, pi, c))
    if not converged:
        log.warning("fixed-point iteration did not converge in %d steps (last step residual %.3g)",
                    max_iter, residual)
    return FixedPointResult(p, it, residual, converged, trace)


def identity_defect(degree: int, p: float, pi, chi) -> tuple[float, float]:
    """Defect ``degree p - 1/(1+Pi) + 1/chi`` and its propagated standard error.

    ``pi`` and ``chi`` are numbers or objects with ``value``/``stderr`` (or
    ``chi``/``chi_err``).
    """
    pv, pe = _value(pi), _err(pi)
    if hasattr(chi, "chi"):
        cv, ce = float(chi.chi), float(chi.chi_err)
    else:
        cv, ce = _value(chi), _err(chi)
    if pv <= -1.0:
        raise LaceDomainError(f"1 + Pi must be positive, got Pi = {pv}")
    defect = degree * p - 1.0 / (1.0 + pv) + 1.0 / cv
    sigma = math.hypot(pe / (1.0 + pv) ** 2, ce / cv**2)
    return defect, sigma
