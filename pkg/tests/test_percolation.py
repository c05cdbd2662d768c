import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lacelab.enumeration import exact_chi, exact_two_point
from lacelab.percolation import (
    BondConfiguration, MicrocanonicalStats, binomial_weights, canonical_expectation,
    cluster_of, estimate_two_point, run_sweep, sample_configuration, simulate,
)
from lacelab.runner import blocks, replica_rng, replica_seed
from lacelab.topology import build_graph


def test_q1_trace_is_forced(q1):
    tr = run_sweep(q1, 0)
    assert tr.s2.tolist() == [2, 4] and tr.cmax.tolist() == [1, 2]


def test_q2_full_occupation(q2):
    tr = run_sweep(q2, 5)
    assert tr.s2[4] == 16 and tr.cmax[4] == 4 and tr.s2[0] == 4


def test_canonical_endpoints():
    g = build_graph("qn", 4)
    stats = simulate(g, 20, seed=1)
    assert canonical_expectation(stats, 0.0).chi == 1.0
    assert canonical_expectation(stats, 1.0).chi == 16.0
    with pytest.raises(ValueError):
        canonical_expectation(stats, 1.5)


def test_chi_q2_matches_polynomial(q2):
    stats = simulate(q2, 4000, seed=3)
    cv = canonical_expectation(stats, 0.3)
    exact = float(exact_chi(q2).evaluate(Fraction(3, 10)))
    assert exact == pytest.approx(1 + 0.6 + 2 * 0.09 + 2 * 0.027 - 3 * 0.0081)
    assert abs(cv.chi - exact) <= 3 * cv.chi_err


@given(st.integers(1, 5000), st.floats(0, 1))
@settings(max_examples=200, deadline=None)
def test_binomial_weights_normalised(B, p):
    w = binomial_weights(B, p)
    assert abs(w.sum() - 1) <= 1e-12
    assert (w >= 0).all()


def test_binomial_weights_large_B():
    w = binomial_weights(200_000, 0.3)
    assert abs(w.sum() - 1) <= 1e-12
    assert abs(w @ np.arange(200_001) - 60_000) < 1e-6


def test_merge_then_convolve_equals_average():
    g = build_graph("qn", 3)
    a = simulate(g, 37, seed=1)
    b = simulate(g, 50, seed=2)
    m = a.merge(b)
    for p in (0.1, 0.4, 0.8):
        lhs = canonical_expectation(m, p).chi
        rhs = (37 * canonical_expectation(a, p).chi + 50 * canonical_expectation(b, p).chi) / 87
        assert abs(lhs - rhs) < 1e-10


def test_merge_matches_single_pass():
    g = build_graph("torus", 2, 3)
    traces = [run_sweep(g, replica_rng(9, r)) for r in range(30)]
    whole = MicrocanonicalStats.from_traces(g, traces)
    parts = MicrocanonicalStats.from_traces(g, traces[:11]).merge(
        MicrocanonicalStats.from_traces(g, traces[11:]))
    assert np.allclose(whole.var_s2, parts.var_s2, atol=1e-9)
    assert np.allclose(whole.mean_cmax, parts.mean_cmax, atol=1e-12)


def test_chi_monotone_in_p():
    stats = simulate(build_graph("qn", 6), 50, seed=4)
    chis = [canonical_expectation(stats, p).chi for p in np.linspace(0, 1, 101)]
    assert all(b >= a - 1e-9 for a, b in zip(chis, chis[1:]))


def test_csv_round_trip(tmp_path):
    g = build_graph("qn", 3)
    stats = simulate(g, 10, seed=8)
    stats.to_csv(tmp_path / "m.csv")
    back = MicrocanonicalStats.from_csv(tmp_path / "m.csv")
    assert back.graph == g and back.replicas == 10
    assert np.array_equal(back.mean_s2, stats.mean_s2)
    assert np.allclose(back.var_s2, stats.var_s2, rtol=1e-15)
    assert (tmp_path / "m.json").exists()


def test_worker_count_does_not_change_results():
    g = build_graph("qn", 4)
    a = simulate(g, 150, seed=6, workers=1)
    b = simulate(g, 150, seed=6, workers=2)
    assert np.array_equal(a.mean_s2, b.mean_s2) and np.array_equal(a.m2_cmax, b.m2_cmax)


def test_seed_scheme():
    s = replica_seed(5, 3)
    assert s.entropy == 5 and s.spawn_key == (3,)
    assert [len(b) for b in blocks(130, 64)] == [64, 64, 2]


def test_sample_configuration_extremes():
    g = build_graph("qn", 5)
    assert not sample_configuration(g, 0.0, 1).occupied.any()
    assert sample_configuration(g, 1.0, 1).occupied.all()


def test_sample_configuration_fraction():
    g = build_graph("qn", 10)
    B, p = g.edge_count, 0.1
    k = sample_configuration(g, p, 123).occupied.sum()
    assert abs(k - B * p) <= 5 * math.sqrt(B * p * (1 - p))


def test_sample_configuration_reproducible():
    g = build_graph("qn", 6)
    assert np.array_equal(sample_configuration(g, 0.3, 42).occupied,
                          sample_configuration(g, 0.3, 42).occupied)


def test_cluster_examples(q2):
    empty = BondConfiguration(q2, np.zeros(4, bool))
    full = BondConfiguration(q2, np.ones(4, bool))
    assert cluster_of(empty, 2).tolist() == [2]
    assert cluster_of(full, 0).tolist() == [0, 1, 2, 3]
    path = BondConfiguration.from_edges(q2, [(0, 1), (1, 3)])
    assert cluster_of(path, 0).tolist() == [0, 1, 3]


def test_two_point_p0(q3):
    tau, err = estimate_two_point(q3, 0.0, 50, seed=1)
    assert tau.tolist() == [1.0] + [0.0] * 7


def test_two_point_q1(q1):
    tau, err = estimate_two_point(q1, 0.35, 2000, seed=2)
    assert tau[0] == 1.0
    assert abs(tau[1] - 0.35) <= 3 * err[1]


def test_two_point_q2_diagonal(q2):
    p = 0.4
    tau, err = estimate_two_point(q2, p, 4000, seed=3)
    exact = 2 * p**2 - p**4
    assert float(exact_two_point(q2, 3).evaluate(Fraction(2, 5))) == pytest.approx(exact)
    assert abs(tau[3] - exact) <= 3 * err[3]
