import csv
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from lacelab import expansion as ex
from lacelab.enumeration import exact_chi
from lacelab.percolation import simulate
from lacelab.topology import build_graph


def test_truncation_examples():
    assert ex.truncate_pc(ex.ZN_SERIES, 6, 3) == Fraction(1, 6) + Fraction(1, 36) + Fraction(7, 432)
    assert ex.truncate_pc(ex.QN_SERIES, 10, 1) == Fraction(1, 10)
    assert ex.ZN_SERIES.truncate(2 * 7, 5) == sum(
        Fraction(a) / 14**i for i, a in enumerate((1, 1, Fraction(7, 2), 16, 103), start=1))


def test_hypercube_refuses_fourth_order():
    with pytest.raises(ex.CoefficientUnavailable, match="a_4 for the hypercube is not established"):
        ex.truncate_pc(ex.QN_SERIES, 10, 4)
    with pytest.raises(ex.CoefficientUnavailable):
        ex.truncate_pc(ex.ZN_SERIES, 10, 6)
    with pytest.raises(ValueError):
        ex.truncate_pc(ex.ZN_SERIES, 10, 0)


@given(st.integers(1, 10_000), st.integers(1, 4), st.sampled_from(["torus", "qn"]))
def test_successive_truncations_differ_by_one_term(omega, M, family):
    s = ex.series_for(family)
    if M + 1 > len(s.coefficients):
        return
    diff = ex.truncate_pc(s, omega, M + 1) - ex.truncate_pc(s, omega, M)
    assert diff == s.coefficients[M] / Fraction(omega) ** (M + 1)


def test_estimate_pc_q1_is_exact():
    g = build_graph("qn", 1)
    est = ex.estimate_pc(g, simulate(g, 5, seed=0), "explicit", 1.5)
    assert est.p_hat == pytest.approx(0.5, abs=1e-12)
    assert est.ci_lo <= 0.5 <= est.ci_hi


def _exact_root(poly, target):
    lo, hi = Fraction(0), Fraction(1)
    for _ in range(60):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if poly.evaluate(mid) < target else (lo, mid)
    return float(lo)


def test_estimate_pc_q2_against_enumeration(q2):
    stats = simulate(q2, 4000, seed=5)
    est = ex.estimate_pc(q2, stats, "explicit", 2.0)
    root = _exact_root(exact_chi(q2), 2)
    assert abs(est.p_hat - root) <= 3 * est.stderr


def test_estimate_pc_monotone_in_target():
    g = build_graph("qn", 6)
    stats = simulate(g, 200, seed=1)
    ps = [ex.estimate_pc(g, stats, "explicit", f).p_hat for f in (1.5, 2, 3, 4, 8, 16)]
    assert ps == sorted(ps)


def test_estimate_pc_rejects_unreachable_target():
    g = build_graph("qn", 3)
    stats = simulate(g, 10, seed=1)
    with pytest.raises(ValueError):
        ex.estimate_pc(g, stats, "explicit", 8.0)
    with pytest.raises(ValueError):
        ex.chi_target(g, "lambda0", -1.0)
    assert ex.chi_target(g, "lambda0", 1.0) == pytest.approx(2.0)


def test_chi_slope_matches_finite_difference():
    from lacelab.percolation import canonical_expectation
    g = build_graph("qn", 5)
    stats = simulate(g, 100, seed=3)
    p, h = 0.25, 1e-6
    fd = (canonical_expectation(stats, p + h).chi - canonical_expectation(stats, p - h).chi) / (2 * h)
    assert ex.chi_slope(stats, p) == pytest.approx(fd, rel=1e-6)


def test_residual_decay_on_synthetic_estimates():
    ns = [8, 10, 12, 14, 16]
    est = {n: (float(ex.truncate_pc(ex.QN_SERIES, n, 3)) + 5.0 / n**4, 1e-9) for n in ns}
    out = ex.residual_decay("qn", ns, [1, 2, 3], est)
    assert out["fits"][3]["slope"] == pytest.approx(-4.0, abs=1e-6)
    assert out["fits"][1]["slope"] > out["fits"][2]["slope"] > out["fits"][3]["slope"]
    assert out["flags"] == []
    assert {r["sign"] for r in out["rows"]} == {1}


def test_residual_decay_flags_stalled_order():
    ns = [8, 10, 12, 14]
    # a residual that decays like Omega^-2 at every order
    est = {n: (float(ex.truncate_pc(ex.QN_SERIES, n, 2)) + 3.0 / n**2, 1e-9) for n in ns}
    out = ex.residual_decay("qn", ns, [1, 2], est)
    assert out["flags"] == [2]


def test_estimates_csv(tmp_path):
    ns = [6, 8]
    est = {n: (0.2, 0.01) for n in ns}
    out = ex.residual_decay("qn", ns, [2], est)
    ex.estimates_csv(tmp_path / "e.csv", out["rows"])
    rows = list(csv.reader(open(tmp_path / "e.csv")))
    assert rows[0][4] == "p_trunc_exact_rational"
    assert rows[1][:5] == ["qn", "6", "6", "2", "7/36"]


def test_window_rows():
    g = build_graph("qn", 6)
    rows = ex.scaling_window_experiment(g, 1, [-2, -0.5, 0.5, 2], replicas=50, seed=2)
    assert rows[0]["status"].startswith("rejected")
    assert [r["status"] for r in rows[1:]] == ["ok"] * 3
    assert rows[1]["p"] == pytest.approx(1 / 6 - 0.5 / 6)
    assert rows[1]["chi_times_abs_eps"] == pytest.approx(rows[1]["chi"] * 0.5)
    assert rows[3]["cmax_over_eps_volume"] == pytest.approx(rows[3]["cmax"] / (2 * 64))
    assert rows[2]["chi_times_abs_eps"] is None


def test_window_csv(tmp_path):
    g = build_graph("qn", 5)
    rows = ex.scaling_window_experiment(g, 2, [-50, 1], replicas=20, seed=2)
    ex.window_csv(tmp_path / "w.csv", rows)
    got = list(csv.reader(open(tmp_path / "w.csv")))
    assert got[0] == ex.WINDOW_HEADER and len(got) == 3
    assert got[1][3].startswith("rejected")


def test_window_requires_hypercube():
    with pytest.raises(ValueError):
        ex.scaling_window_experiment(build_graph("torus", 2, 4), 1, [1.0], replicas=2)


def test_pc_table_and_json():
    table = ex.pc_table([4, 5], replicas=50, seed=3)
    assert set(table) == {4, 5}
    d = table[5].to_dict()
    assert d["target"] == pytest.approx(32 ** (1 / 3)) and d["ci_lo"] <= d["p_hat"] <= d["ci_hi"]
