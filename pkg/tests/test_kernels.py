"""Compiled and pure-Python kernels must agree exactly."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lacelab import _fallback, kernels
from lacelab.topology import build_graph, path_graph, star_graph

try:
    from lacelab import _core
except ImportError:  # pragma: no cover - exercised only without a compiler
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled extension not built")


def _uv(g):
    e = g.edges
    return np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1])


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")


@given(st.integers(0, 2**32 - 1), st.sampled_from([("qn", 4), ("torus", 2, 4), ("qn", 1)]))
@settings(max_examples=40, deadline=None)
def test_sweep_invariants(seed, spec):
    g = build_graph(*spec)
    order = np.random.default_rng(seed).permutation(g.edge_count).astype(np.int64)
    s2, cmax = kernels.nz_sweep(g.vertex_count, *_uv(g), order)
    V = g.vertex_count
    assert s2[0] == V and s2[-1] == V * V
    assert cmax[0] == 1 and cmax[-1] == V
    assert (np.diff(s2) >= 0).all() and (np.diff(cmax) >= 0).all()
    assert (cmax**2 <= s2).all()


@needs_core
@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_sweep_parity(seed):
    g = build_graph("torus", 2, 5)
    order = np.random.default_rng(seed).permutation(g.edge_count).astype(np.int64)
    a = _core.nz_sweep(g.vertex_count, *_uv(g), order)
    b = _fallback.nz_sweep(g.vertex_count, *_uv(g), order)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


@needs_core
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.integers(-1, 15))
@settings(max_examples=40, deadline=None)
def test_bfs_parity(seed, p, blocked_edge):
    g = build_graph("qn", 4)
    rng = np.random.default_rng(seed)
    occ = (rng.random(g.edge_count) < p).astype(np.uint8)
    mask = (rng.random(g.vertex_count) < 0.2).astype(np.uint8)
    mask[0] = 0
    a = g.adjacency
    for bv in (None, mask):
        x = _core.bfs_cluster(a.indptr, a.nbr, a.eid, occ, 0, blocked_edge, bv)
        y = _fallback.bfs_cluster(a.indptr, a.nbr, a.eid, occ, 0, blocked_edge, bv)
        assert np.array_equal(x, y)


@needs_core
@pytest.mark.parametrize("g", [build_graph("qn", 1), build_graph("qn", 2), build_graph("qn", 3),
                               path_graph(4), star_graph(3)])
def test_enumeration_parity(g):
    V = g.vertex_count
    uv = _uv(g)
    for x, y in zip(_core.enum_cluster_stats(V, *uv, 0), _fallback.enum_cluster_stats(V, *uv, 0)):
        assert np.array_equal(x, y)
    a = _core.pi1_level0(V, *uv, 0)
    b = _fallback.pi1_level0(V, *uv, 0)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    masks = np.unique(a[1])
    for v0 in range(V):
        assert np.array_equal(_core.pi1_level1(V, *uv, v0, masks),
                              _fallback.pi1_level1(V, *uv, v0, masks))


@needs_core
def test_size_limits():
    g = build_graph("torus", 2, 6)  # 72 edges
    with pytest.raises(ValueError):
        _core.enum_cluster_stats(g.vertex_count, *_uv(g), 0)
