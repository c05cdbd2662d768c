"""Inverse-degree expansion of the critical point and direct estimates of it.

``p_c^(M) = sum_{i<=M} a_i Omega^-i`` is evaluated exactly.  Direct estimates
solve ``chi(p) = target`` on a Newman-Ziff trace; residuals between the two
are analysed across n, and the scaling window around ``p_c^(M)`` is probed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .io import fmt_float
from .percolation import MicrocanonicalStats, binomial_weights, canonical_expectation, simulate
from .topology import HYPERCUBE, build_graph


class CoefficientUnavailable(ValueError):
    """Requested truncation order exceeds the established coefficients."""


@dataclass(frozen=True)
class ExpansionSeries:
    """Coefficients ``a_1..a_K`` of the expansion in ``1/Omega``."""

    family: str
    coefficients: tuple[Fraction, ...]
    note: str = ""

    def degree(self, n: int) -> int:
        return n if self.family == HYPERCUBE else 2 * n

    def truncate(self, omega: int, M: int) -> Fraction:
        return truncate_pc(self, omega, M)


ZN_SERIES = ExpansionSeries(
    "torus", tuple(Fraction(c) for c in (1, 1, Fraction(7, 2), 16, 103)),
    "coefficients for the nearest-neighbour lattice, Omega = 2n")
QN_SERIES = ExpansionSeries(
    HYPERCUBE, (Fraction(1), Fraction(1), Fraction(7, 2)),
    "a_4 for the hypercube is not established; it is expected to differ from the lattice value")


def series_for(family: str) -> ExpansionSeries:
    return QN_SERIES if family in (HYPERCUBE, "qn") else ZN_SERIES


def truncate_pc(series: ExpansionSeries, omega: int, M: int) -> Fraction:
    """``sum_{i=1}^M a_i omega^-i`` as an exact fraction."""
    if M < 1:
        raise ValueError("M must be at least 1")
    if omega < 1:
        raise ValueError("degree must be positive")
    K = len(series.coefficients)
    if M > K:
        why = (f"a_{K + 1} for the hypercube is not established: only a_1..a_{K} are "
               "proven, and a_4 is expected (without proof) to differ from the lattice value"
               if series.family == HYPERCUBE
               else f"only a_1..a_{K} are known for this family")
        raise CoefficientUnavailable(f"cannot truncate at M={M}: {why}")
    om = Fraction(omega)
    return sum((a / om**i for i, a in enumerate(series.coefficients[:M], start=1)), Fraction(0))


# -- direct estimates -------------------------------------------------------------


@dataclass
class CriticalEstimate:
    graph: object
    target: float
    target_rule: str
    p_hat: float
    ci_lo: float
    ci_hi: float
    method: str = "chi-bisection"
    notes: list = field(default_factory=list)

    @property
    def stderr(self) -> float:
        return (self.ci_hi - self.ci_lo) / 2

    def to_dict(self) -> dict:
        return {"graph": self.graph.to_dict(), "target": self.target,
                "target_rule": self.target_rule, "p_hat": self.p_hat, "ci_lo": self.ci_lo,
                "ci_hi": self.ci_hi, "method": self.method, "notes": list(self.notes)}


def chi_target(g, rule: str = "lambda0", value: float = 1.0) -> float:
    """``lambda0 * V^(1/3)`` or an explicit target ``f``."""
    if rule == "lambda0":
        if value <= 0:
            raise ValueError("lambda0 must be positive")
        return value * g.vertex_count ** (1 / 3)
    if rule == "explicit":
        return float(value)
    raise ValueError(f"unknown target rule {rule!r}")


def chi_slope(stats: MicrocanonicalStats, p: float) -> float:
    """d chi / dp from the derivative of the binomial weights."""
    B = stats.graph.edge_count
    if p <= 0.0 or p >= 1.0:
        return math.nan
    w = binomial_weights(B, p)
    b = np.arange(B + 1)
    return float(w @ ((b - B * p) / (p * (1 - p)) * stats.mean_s2)) / stats.graph.vertex_count


def estimate_pc(g, stats: MicrocanonicalStats, rule: str = "lambda0", value: float = 1.0,
                max_iter: int = 200) -> CriticalEstimate:
    """Solve ``chi(p) = target`` by bisection on the canonical chi.

    Bisection stops once the chi values at the bracket ends differ by less
    than the chi standard error.  The interval is the chi error at the root
    divided by the local slope.
    """
    target = chi_target(g, rule, value)
    V = g.vertex_count
    if not 1.0 < target < V:
        raise ValueError(f"target {target} outside (chi(0), chi(1)) = (1, {V})")
    lo, hi = 0.0, 1.0
    clo, chi_ = 1.0, float(V)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        cv = canonical_expectation(stats, mid)
        if cv.chi < target:
            lo, clo = mid, cv.chi
        else:
            hi, chi_ = mid, cv.chi
        if chi_ - clo < cv.chi_err or hi - lo < 1e-15:
            break
    # linear interpolation inside the final bracket
    p_hat = lo + (hi - lo) * (target - clo) / (chi_ - clo) if chi_ > clo else 0.5 * (lo + hi)
    cv = canonical_expectation(stats, p_hat)
    slope = chi_slope(stats, p_hat)
    half = cv.chi_err / slope if slope > 0 else math.inf
    half = max(half, 0.5 * (hi - lo))
    notes = []
    if g.__class__.__name__ == "GraphSpec" and getattr(g, "family", None) == "torus":
        notes.append("torus: chi-target definition is a finite-size surrogate for p_c(Z^n)")
    return CriticalEstimate(g, target, f"{rule}={value}", p_hat, p_hat - half, p_hat + half,
                            notes=notes)


# -- residual analysis --------------------------------------------------------------


def _wfit(x, y, s) -> tuple[float, float]:
    """Weighted least-squares slope and its standard error."""
    x, y, s = map(lambda a: np.asarray(a, float), (x, y, s))
    if len(x) < 2:
        return math.nan, math.nan
    w = 1.0 / np.maximum(s, 1e-300) ** 2
    W = w.sum()
    xm, ym = (w * x).sum() / W, (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    return float(slope), float(math.sqrt(1.0 / sxx))


def residual_decay(family: str, n_values: Sequence[int], M_values: Sequence[int],
                   estimates: Mapping[int, object]) -> dict:
    """Residuals ``p_hat(n) - p_c^(M)(n)`` and their log-log decay in Omega.

    ``estimates`` maps n to a :class:`CriticalEstimate` or a ``(p_hat,
    stderr)`` pair.  A flag is raised for each M whose slope is not
    steeper than the slope for the previous M beyond the combined error.
    Residual signs are reported, not asserted.
    """
    series = series_for(family)
    rows = []
    fits = {}
    for M in M_values:
        xs, ys, ss = [], [], []
        for n in n_values:
            est = estimates[n]
            p_hat, err = (est.p_hat, est.stderr) if hasattr(est, "p_hat") else est
            omega = series.degree(n)
            trunc = truncate_pc(series, omega, M)
            r = p_hat - float(trunc)
            rows.append({"family": family, "n": n, "omega": omega, "M": M,
                         "p_trunc_exact": trunc, "p_trunc": float(trunc), "p_hat": p_hat,
                         "stderr": err, "residual": r, "sign": int(np.sign(r))})
            if r != 0:
                xs.append(math.log(omega))
                ys.append(math.log(abs(r)))
                ss.append(max(err, 1e-300) / abs(r))
        fits[M] = _wfit(xs, ys, ss)
    flags = []
    Ms = list(M_values)
    for prev, M in zip(Ms, Ms[1:]):
        s0, e0 = fits[prev]
        s1, e1 = fits[M]
        if not s1 < s0 - math.hypot(e0, e1):
            flags.append(M)
    return {"rows": rows, "fits": {M: {"slope": s, "slope_err": e} for M, (s, e) in fits.items()},
            "flags": flags}


def estimates_csv(path, rows: Sequence[dict], estimates: Mapping[int, object] | None = None) -> None:
    """Write residual rows as ``family, n, Omega, M, p_trunc_exact_rational, ...``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "n", "Omega", "M", "p_trunc_exact_rational", "p_trunc_float",
                    "p_hat", "ci_lo", "ci_hi", "residual"])
        for r in rows:
            est = estimates.get(r["n"]) if estimates else None
            lo = est.ci_lo if est is not None else r["p_hat"] - r["stderr"]
            hi = est.ci_hi if est is not None else r["p_hat"] + r["stderr"]
            w.writerow([r["family"], r["n"], r["omega"], r["M"], str(r["p_trunc_exact"]),
                        fmt_float(r["p_trunc"]), fmt_float(r["p_hat"]), fmt_float(lo),
                        fmt_float(hi), fmt_float(r["residual"])])


# -- scaling window -----------------------------------------------------------------------


WINDOW_HEADER = ["n", "M", "delta", "status", "p", "epsilon", "chi", "chi_err", "cmax",
                 "cmax_err", "chi_times_abs_eps", "cmax_over_eps_volume", "cmax_fraction"]


def scaling_window_experiment(g, M: int, deltas: Sequence[float], replicas: int = 200,
                              seed: int = 0, workers: int | None = None,
                              stats: MicrocanonicalStats | None = None) -> list[dict]:
    """chi and E|C_max| at ``p = p_c^(M) + delta n^-M`` on Q_n.

    For ``delta < 0`` the row carries ``chi |eps|`` with ``eps = delta n^(1-M)``;
    for ``delta > 0`` it carries ``|C_max| / (eps 2^n)``.  A delta whose p
    falls outside (0, 1) yields a row with ``status="rejected"``.
    """
    if getattr(g, "family", None) != HYPERCUBE:
        raise ValueError("the scaling-window experiment is defined on the hypercube")
    n = g.n
    base = truncate_pc(QN_SERIES, n, M)
    if stats is None:
        stats = simulate(g, replicas, seed, workers)
    V = g.vertex_count
    rows = []
    for delta in deltas:
        d = Fraction(delta)
        p = base + d / Fraction(n) ** M
        eps = float(d * Fraction(n) ** (1 - M))
        row = dict.fromkeys(WINDOW_HEADER)
        row.update(n=n, M=M, delta=float(delta), p=float(p), epsilon=eps)
        if not 0 < p < 1:
            row["status"] = f"rejected: p={float(p):.6g} outside (0, 1)"
            rows.append(row)
            continue
        cv = canonical_expectation(stats, float(p))
        row.update(status="ok", chi=cv.chi, chi_err=cv.chi_err, cmax=cv.cmax,
                   cmax_err=cv.cmax_err, cmax_fraction=cv.cmax / V)
        if delta < 0:
            row["chi_times_abs_eps"] = cv.chi * abs(eps)
        elif delta > 0:
            row["cmax_over_eps_volume"] = cv.cmax / (eps * V)
        rows.append(row)
    return rows


def window_csv(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WINDOW_HEADER)
        for r in rows:
            w.writerow(["" if r[k] is None else (fmt_float(r[k]) if isinstance(r[k], float) else r[k])
                        for k in WINDOW_HEADER])


def pc_table(n_values: Sequence[int], replicas: int, seed: int = 0, lambda0: float = 1.0,
             workers: int | None = None) -> dict[int, CriticalEstimate]:
    """Direct ``lambda0`` estimates on Q_n for each n (one simulation per n)."""
    out = {}
    for n in n_values:
        g = build_graph("qn", n)
        stats = simulate(g, replicas, seed, workers)
        out[n] = estimate_pc(g, stats, "lambda0", lambda0)
    return out
