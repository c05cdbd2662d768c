"""Newman-Ziff sweeps, canonical (fixed-p) expectations and single
configuration sampling.

One sweep inserts the edges of a uniformly random permutation into a
union-find forest and records, after every insertion, the sum of squared
cluster sizes ``S2`` and the largest cluster size ``Cmax``.  Averaging over
replicas gives the microcanonical means at each occupied-bond count ``b``;
convolving with the Binomial(B, p) law gives expectations at fixed ``p``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from . import kernels
from .io import fmt_float
from .runner import map_blocks, replica_rng


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _check_p(p) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return p


# -- sweeps ---------------------------------------------------------------


@dataclass(frozen=True)
class Trace:
    """Single-replica microcanonical trace, indexed by occupied-bond count."""

    s2: np.ndarray
    cmax: np.ndarray


def run_sweep(g, seed) -> Trace:
    """One Newman-Ziff sweep over ``g`` with a random edge order drawn from ``seed``."""
    rng = _rng(seed)
    order = rng.permutation(g.edge_count).astype(np.int64)
    edges = g.edges
    s2, cmax = kernels.nz_sweep(
        g.vertex_count, np.ascontiguousarray(edges[:, 0]), np.ascontiguousarray(edges[:, 1]), order
    )
    return Trace(s2, cmax)


@dataclass
class MicrocanonicalStats:
    """Per-bond-count mean and spread of ``S2`` and ``Cmax`` across replicas.

    ``m2_*`` are sums of squared deviations from the mean (Welford form), so
    partial results merge exactly with :meth:`merge`.
    """

    graph: object
    replicas: int
    mean_s2: np.ndarray
    m2_s2: np.ndarray
    mean_cmax: np.ndarray
    m2_cmax: np.ndarray
    seed: int | None = None

    @property
    def var_s2(self) -> np.ndarray:
        return self._var(self.m2_s2)

    @property
    def var_cmax(self) -> np.ndarray:
        return self._var(self.m2_cmax)

    def _var(self, m2):
        if self.replicas < 2:
            return np.zeros_like(m2)
        return np.maximum(m2, 0.0) / (self.replicas - 1)

    @property
    def mean_chi(self) -> np.ndarray:
        return self.mean_s2 / self.graph.vertex_count

    @classmethod
    def from_traces(cls, graph, traces, seed=None) -> "MicrocanonicalStats":
        B = graph.edge_count
        mean_s2, m2_s2 = np.zeros(B + 1), np.zeros(B + 1)
        mean_c, m2_c = np.zeros(B + 1), np.zeros(B + 1)
        count = 0
        for tr in traces:
            count += 1
            for x, mean, m2 in ((tr.s2, mean_s2, m2_s2), (tr.cmax, mean_c, m2_c)):
                x = x.astype(np.float64)
                d = x - mean
                mean += d / count
                m2 += d * (x - mean)
        return cls(graph, count, mean_s2, m2_s2, mean_c, m2_c, seed)

    def merge(self, other: "MicrocanonicalStats") -> "MicrocanonicalStats":
        """Pool two sets of replicas (Chan's parallel update)."""
        if other.graph != self.graph:
            raise ValueError("cannot merge statistics from different graphs")
        na, nb = self.replicas, other.replicas
        if na == 0:
            return other
        if nb == 0:
            return self
        n = na + nb
        out = []
        for ma, qa, mb, qb in (
            (self.mean_s2, self.m2_s2, other.mean_s2, other.m2_s2),
            (self.mean_cmax, self.m2_cmax, other.mean_cmax, other.m2_cmax),
        ):
            d = mb - ma
            out.append(ma + d * (nb / n))
            out.append(qa + qb + d * d * (na * nb / n))
        return MicrocanonicalStats(self.graph, n, *out, seed=self.seed)

    # persistence ----------------------------------------------------------

    def to_csv(self, path) -> None:
        """Write ``b, mean_S2, var_S2, mean_Cmax, var_Cmax`` plus a JSON sidecar."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["b", "mean_S2", "var_S2", "mean_Cmax", "var_Cmax"])
            vs, vc = self.var_s2, self.var_cmax
            for b in range(len(self.mean_s2)):
                w.writerow([b, _f(self.mean_s2[b]), _f(vs[b]), _f(self.mean_cmax[b]), _f(vc[b])])
        sidecar = {
            "graph": self.graph.to_dict(),
            "replicas": self.replicas,
            "seed": self.seed,
            "seed_scheme": "Philox(SeedSequence(seed, spawn_key=(replica,)))",
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path, graph=None) -> "MicrocanonicalStats":
        from .topology import build_graph

        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        if graph is None:
            gd = meta["graph"]
            graph = build_graph(gd["family"], gd["n"], gd.get("L"))
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        R = meta["replicas"]
        scale = max(R - 1, 0)
        return cls(graph, R, data[:, 1], data[:, 2] * scale, data[:, 3], data[:, 4] * scale,
                   meta.get("seed"))


def _f(x) -> str:
    return fmt_float(x)


def _sweep_block(graph, seed, block):
    return MicrocanonicalStats.from_traces(
        graph, (run_sweep(graph, replica_rng(seed, r)) for r in block), seed
    )


def simulate(g, replicas: int, seed: int = 0, workers: int | None = None) -> MicrocanonicalStats:
    """Run ``replicas`` independent sweeps and pool them deterministically."""
    if replicas < 1:
        raise ValueError("need at least one replica")
    parts = map_blocks(_sweep_block, (g, seed), replicas, workers)
    out = parts[0]
    for part in parts[1:]:
        out = out.merge(part)
    out.seed = seed
    return out


# -- canonical expectations ----------------------------------------------------


def binomial_weights(B: int, p: float) -> np.ndarray:
    """Binomial(B, p) masses from log-gamma, renormalised to sum to one."""
    p = _check_p(p)
    w = np.zeros(B + 1)
    if p == 0.0:
        w[0] = 1.0
        return w
    if p == 1.0:
        w[B] = 1.0
        return w
    b = np.arange(B + 1)
    logw = (gammaln(B + 1) - gammaln(b + 1) - gammaln(B - b + 1)
            + b * np.log(p) + (B - b) * np.log1p(-p))
    w = np.exp(logw - logw.max())
    return w / w.sum()


@dataclass(frozen=True)
class CanonicalValue:
    p: float
    chi: float
    chi_err: float
    cmax: float
    cmax_err: float


def canonical_expectation(stats: MicrocanonicalStats, p: float) -> CanonicalValue:
    """chi(p) and E|C_max|(p) with standard errors.

    The error bound uses sd(sum_b w_b X_b) <= sum_b w_b sd(X_b), which holds
    whatever the correlation between bond counts within a trace.
    """
    w = binomial_weights(stats.graph.edge_count, p)
    V = stats.graph.vertex_count
    R = max(stats.replicas, 1)
    chi = float(w @ stats.mean_s2) / V
    cmax = float(w @ stats.mean_cmax)
    chi_err = float(w @ np.sqrt(stats.var_s2)) / V / np.sqrt(R)
    cmax_err = float(w @ np.sqrt(stats.var_cmax)) / np.sqrt(R)
    return CanonicalValue(float(p), chi, chi_err, cmax, cmax_err)


# -- single configurations -----------------------------------------------


@dataclass(frozen=True, eq=False)
class BondConfiguration:
    """Occupied edges (boolean array in canonical edge order) on ``graph``."""

    graph: object
    occupied: np.ndarray
    p: float | None = None
    seed: object = None

    @property
    def occ(self) -> np.ndarray:
        return self.occupied.view(np.uint8)

    def with_vacant(self, edge: int) -> "BondConfiguration":
        occ = self.occupied.copy()
        occ[edge] = False
        return BondConfiguration(self.graph, occ, self.p, self.seed)

    @classmethod
    def from_edges(cls, graph, occupied_edges) -> "BondConfiguration":
        occ = np.zeros(graph.edge_count, bool)
        lookup = edge_lookup(graph)
        for u, v in occupied_edges:
            occ[lookup[(min(u, v), max(u, v))]] = True
        return cls(graph, occ)

    @classmethod
    def from_mask(cls, graph, mask: int) -> "BondConfiguration":
        B = graph.edge_count
        occ = np.array([(mask >> e) & 1 for e in range(B)], dtype=bool)
        return cls(graph, occ)


def edge_lookup(graph) -> dict:
    """Map ``(min(u, v), max(u, v))`` to the canonical edge index."""
    return {(min(u, v), max(u, v)): e for e, (u, v) in enumerate(graph.edges.tolist())}


def sample_configuration(g, p: float, seed) -> BondConfiguration:
    """Occupy each edge independently with probability ``p``."""
    p = _check_p(p)
    rng = _rng(seed)
    occ = rng.random(g.edge_count) < p
    return BondConfiguration(g, occ, p, seed)


def cluster_of(cfg: BondConfiguration, v: int, vacant_edge: int = -1) -> np.ndarray:
    """Sorted vertices joined to ``v`` by occupied edges (``vacant_edge`` forced off)."""
    a = cfg.graph.adjacency
    if not 0 <= v < cfg.graph.vertex_count:
        raise IndexError(f"vertex {v} out of range")
    return np.sort(kernels.bfs_cluster(a.indptr, a.nbr, a.eid, cfg.occ, int(v), int(vacant_edge)))


def connected(cfg: BondConfiguration, x: int, y: int) -> bool:
    return x == y or bool(np.isin(y, cluster_of(cfg, x)))


# -- two-point function ----------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


def _two_point_block(g, p, seed, block):
    V = g.vertex_count
    total = np.zeros(V)
    for r in block:
        cfg = sample_configuration(g, p, replica_rng(seed, r))
        total[cluster_of(cfg, g.root)] += 1.0
    return len(block), total


def estimate_two_point(g, p: float, replicas: int, seed: int = 0,
                       workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Empirical P(0 <-> x) for every vertex x, with binomial standard errors."""
    p = _check_p(p)
    if g.vertex_count > 2**20:
        raise ValueError("graph too large to tabulate the two-point function")
    parts = map_blocks(_two_point_block, (g, p, seed), replicas, workers)
    hits = np.zeros(g.vertex_count)
    for _, h in parts:
        hits += h
    tau = hits / replicas
    # indicator variables: sample variance is tau(1 - tau) * R / (R - 1)
    var = tau * (1 - tau) * (replicas / max(replicas - 1, 1))
    return tau, np.sqrt(var / replicas)
