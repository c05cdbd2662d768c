from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lacelab import lace
from lacelab.enumeration import exact_pi0, exact_pi1_two_level
from lacelab.percolation import BondConfiguration, CanonicalValue, cluster_of, connected
from lacelab.topology import build_graph, path_graph, star_graph

GRAPHS = [build_graph("qn", 3), build_graph("torus", 2, 3), build_graph("qn", 4),
          path_graph(5), star_graph(4), build_graph("torus", 2, 4)]


def _config(g, data):
    bits = data.draw(st.lists(st.booleans(), min_size=g.edge_count, max_size=g.edge_count))
    return BondConfiguration(g, np.array(bits, bool))


def _simple_paths(cfg, x, y):
    """All self-avoiding occupied paths x -> y as lists of (u, w) bonds."""
    g = cfg.graph
    a = g.adjacency
    out = []

    def rec(u, seen, bonds):
        if u == y:
            out.append(list(bonds))
            return
        for s in range(a.indptr[u], a.indptr[u + 1]):
            w = int(a.nbr[s])
            if cfg.occupied[a.eid[s]] and w not in seen:
                seen.add(w)
                bonds.append((u, w))
                rec(w, seen, bonds)
                bonds.pop()
                seen.discard(w)

    rec(x, {x}, [])
    return out


def _through_brute(cfg, v, x, A):
    if v == x:
        return x in A
    paths = _simple_paths(cfg, v, x)
    return bool(paths) and all(any(u in A or w in A for u, w in p) for p in paths)


def _pivotal_brute(cfg, v, x):
    if v == x or not connected(cfg, v, x):
        return set()
    out = set()
    for e in np.flatnonzero(cfg.occupied):
        off = cfg.with_vacant(e)
        if not connected(off, v, x):
            a, b = cfg.graph.edges[e].tolist()
            out.add((a, b) if connected(off, v, a) else (b, a))
    return out


# -- examples --------------------------------------------------------------------------


def test_doubly_connected_examples(q2):
    empty = BondConfiguration(q2, np.zeros(4, bool))
    full = BondConfiguration(q2, np.ones(4, bool))
    assert lace.doubly_connected(empty, 1, 1)
    assert not lace.doubly_connected(empty, 0, 3)
    assert lace.doubly_connected(full, 0, 3)


def test_connected_through_examples():
    p3 = path_graph(3)
    full = BondConfiguration(p3, np.ones(2, bool))
    assert not lace.connected_through(full, 0, 2, set())
    assert lace.connected_through(full, 0, 2, {0, 1, 2})
    assert lace.connected_through(full, 0, 2, {1})
    # coincident endpoints: true iff the vertex is in A
    assert lace.connected_through(full, 1, 1, {1})
    assert not lace.connected_through(full, 1, 1, {0})


def test_restricted_cluster_examples(q1):
    p3 = path_graph(3)
    full = BondConfiguration(p3, np.ones(2, bool))
    assert lace.restricted_cluster(full, (1, 2), 0) == {0, 1}
    one = BondConfiguration(q1, np.ones(1, bool))
    assert lace.restricted_cluster(one, (0, 1), 0) == {0}
    half = BondConfiguration(p3, np.array([True, False]))
    assert lace.restricted_cluster(half, (1, 2), 0) == set(cluster_of(half, 0).tolist())
    with pytest.raises(ValueError):
        lace.restricted_cluster(full, (0, 2), 0)


def test_pivotal_examples(q2):
    p3 = path_graph(3)
    full = BondConfiguration(p3, np.ones(2, bool))
    assert lace.occupied_pivotal_bonds(full, 0, 2) == [(0, 1), (1, 2)]
    assert lace.occupied_pivotal_bonds(full, 2, 0) == [(2, 1), (1, 0)]
    assert lace.occupied_pivotal_bonds(BondConfiguration(q2, np.ones(4, bool)), 0, 3) == []
    assert lace.occupied_pivotal_bonds(full, 1, 1) == []


def test_e_prime_examples(q2):
    p3 = path_graph(3)
    full = BondConfiguration(p3, np.ones(2, bool))
    assert not lace.event_E_prime(full, 0, 2, {0, 1, 2})
    empty = BondConfiguration(p3, np.zeros(2, bool))
    assert not lace.event_E_prime(empty, 0, 2, {0, 1, 2})
    assert lace.event_E_prime(BondConfiguration(q2, np.ones(4, bool)), 0, 3, {0, 1, 2, 3})


# -- properties against brute force ---------------------------------------------------------


@given(st.sampled_from(GRAPHS[:5]), st.data())
@settings(max_examples=120, deadline=None)
def test_pivotal_bonds_are_exactly_the_separating_bridges(g, data):
    cfg = _config(g, data)
    v = data.draw(st.integers(0, g.vertex_count - 1))
    tree = lace.BridgeTree(cfg, v)
    for x in range(g.vertex_count):
        piv = tree.pivotal(x) if x != v else []
        assert set(piv) == _pivotal_brute(cfg, v, x)
        # v-side first: consecutive bonds chain away from v
        if piv:
            assert connected(cfg.with_vacant(_eid(g, piv[0])), v, piv[0][0])


def _eid(g, bond):
    return lace._edge_index(g, *bond)


@given(st.sampled_from(GRAPHS[:5]), st.data())
@settings(max_examples=120, deadline=None)
def test_doubly_connected_matches_bridge_criterion(g, data):
    cfg = _config(g, data)
    x = data.draw(st.integers(0, g.vertex_count - 1))
    y = data.draw(st.integers(0, g.vertex_count - 1))
    dc = lace.doubly_connected(cfg, x, y)
    assert dc == lace.doubly_connected(cfg, y, x)
    if dc:
        assert connected(cfg, x, y)
    expected = x == y or (connected(cfg, x, y) and not _pivotal_brute(cfg, x, y))
    assert dc == expected
    in_set = y in lace.BridgeTree(cfg, x).doubly_connected_set()
    assert in_set == expected


@given(st.sampled_from([GRAPHS[0], GRAPHS[3], GRAPHS[4]]), st.data())
@settings(max_examples=120, deadline=None)
def test_connected_through_matches_path_enumeration(g, data):
    cfg = _config(g, data)
    v = data.draw(st.integers(0, g.vertex_count - 1))
    x = data.draw(st.integers(0, g.vertex_count - 1))
    A = set(data.draw(st.lists(st.integers(0, g.vertex_count - 1), max_size=4)))
    extra = set(data.draw(st.lists(st.integers(0, g.vertex_count - 1), max_size=3)))
    got = lace.connected_through(cfg, v, x, A)
    assert got == _through_brute(cfg, v, x, A)
    if got:
        assert connected(cfg, v, x)
        # monotone in A
        assert lace.connected_through(cfg, v, x, A | extra)


@given(st.sampled_from(GRAPHS), st.data())
@settings(max_examples=120, deadline=None)
def test_fast_e_prime_count_matches_predicate(g, data):
    cfg = _config(g, data)
    v = data.draw(st.integers(0, g.vertex_count - 1))
    A = set(data.draw(st.lists(st.integers(0, g.vertex_count - 1), max_size=5)))
    tree = lace.BridgeTree(cfg, v)
    mask = np.zeros(g.vertex_count, np.uint8)
    mask[list(A)] = 1
    th = lace.through_set(cfg, tree, mask)
    assert th == {x for x in range(g.vertex_count) if lace.connected_through(cfg, v, x, A)}
    brute = sum(lace.event_E_prime(cfg, v, x, A) for x in range(g.vertex_count))
    assert tree.count_e_prime(th) == brute


# -- estimators -------------------------------------------------------------------------------


def test_pi_p0(q3):
    assert lace.estimate_pi0(q3, 0.0, 100).value == 0.0
    assert lace.estimate_pi1(q3, 0.0, 100).value == 0.0


def test_pi0_q2(q2):
    p = 0.6
    est = lace.estimate_pi0(q2, p, 4000, seed=2)
    assert est.value >= 0 and est.stderr >= 0
    assert abs(est.value - 3 * p**4) <= 3 * est.stderr


def test_pi1_q1_against_two_level_oracle(q1):
    poly = exact_pi1_two_level(q1)
    assert poly.coeffs == [0, 0, 1]  # p^2
    est = lace.estimate_pi1(q1, 0.4, 4000, seed=3)
    assert abs(est.value - 0.16) <= 3 * est.stderr


def test_pi1_q3_against_two_level_oracle(q3):
    exact = float(exact_pi1_two_level(q3).evaluate(Fraction(1, 5)))
    est = lace.estimate_pi1(q3, 0.2, 4000, seed=4)
    assert abs(est.value - exact) <= 3 * est.stderr
    assert est.diagonal is not None and est.diagonal <= est.value


@pytest.mark.slow
@pytest.mark.parametrize("g", [build_graph("qn", 2), build_graph("qn", 3), star_graph(3),
                               path_graph(4), build_graph("torus", 2, 3)],
                         ids=lambda g: g.label)
@pytest.mark.parametrize("p", [0.1, 0.3, 0.5])
def test_pi0_within_4_sigma_of_enumeration(g, p):
    exact = float(exact_pi0(g).evaluate(Fraction(p)))
    est = lace.estimate_pi0(g, p, 10_000, seed=17)
    if est.stderr == 0:
        assert est.value == exact
    else:
        assert abs(est.value - exact) <= 4 * est.stderr


def test_pi_total_pairs_the_estimates(q3):
    tot = lace.estimate_pi_total(q3, 0.3, 500, seed=1)
    assert tot.value == pytest.approx(tot.pi0.value - tot.pi1.value)
    assert tot.pi0.value == lace.estimate_pi0(q3, 0.3, 500, seed=1).value
    assert tot.pi1.value == lace.estimate_pi1(q3, 0.3, 500, seed=1).value


def test_pi_estimate_json(q2):
    d = lace.estimate_pi1(q2, 0.3, 10, seed=1).to_dict()
    assert {"graph", "N", "p", "value", "stderr", "replicas", "seed"} <= set(d)


# -- fixed point ------------------------------------------------------------------------------


def test_fixed_point_trivial_infinite():
    g = build_graph("qn", 7)
    res = lace.solve_fixed_point(g, lambda p: 0.0)
    assert res.converged and res.p_star == 1 / 7


def test_fixed_point_trivial_finite_target():
    g = build_graph("qn", 7)
    res = lace.solve_fixed_point(g, lambda p: 0.0, lambda p: 4.0, mode=lace.FINITE_TARGET,
                                 tol=1e-14)
    assert res.converged
    assert res.p_star == pytest.approx((1 - 1 / 4) / 7, abs=1e-13)
    assert res.residual <= 1e-12


def test_fixed_point_contraction():
    g = build_graph("qn", 10)
    res = lace.solve_fixed_point(g, lambda p: -p, tol=1e-13)
    # 10 p (1 - p) = 1
    assert res.converged
    assert res.p_star == pytest.approx((1 - np.sqrt(1 - 0.4)) / 2, rel=1e-10)
    assert [row[0] for row in res.trace] == list(range(1, len(res.trace) + 1))


def test_fixed_point_domain_error():
    g = build_graph("qn", 5)
    with pytest.raises(lace.LaceDomainError):
        lace.solve_fixed_point(g, lambda p: -1.0)


def test_fixed_point_reports_non_convergence(caplog):
    g = build_graph("qn", 4)
    flip = iter(range(10_000))

    def noisy(p):
        return 0.1 * (-1) ** next(flip)

    res = lace.solve_fixed_point(g, noisy, gamma=1.0, max_iter=20)
    assert not res.converged and res.iterations == 20
    assert "did not converge" in caplog.text


def test_identity_defect_propagation():
    d, s = lace.identity_defect(10, 0.1, lace.PiEstimate(0, 0.1, 0.0, 0.01, 1, None), 4.0)
    assert d == pytest.approx(0.25)
    assert s == pytest.approx(0.01)


def test_identity_defect_accepts_canonical_values():
    cv = CanonicalValue(0.25, 2.0, 0.1, 1.0, 0.0)
    d, s = lace.identity_defect(4, 0.25, 0.0, cv)
    assert d == pytest.approx(0.5)
    assert s == pytest.approx(0.1 / 4)


def test_fixed_point_domain_bound():
    g = build_graph("qn", 5)
    with pytest.raises(lace.LaceDomainError, match="left"):
        lace.solve_fixed_point(g, lambda p: -0.5, p_max=0.3)
