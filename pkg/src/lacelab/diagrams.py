"""Fourier-space diagram quantities and the spherical-model critical value.

The two-point function has no closed form, so every triangle-type quantity
here uses the random-walk surrogate ``C(k) = 1 / (1 - Omega p D(k))`` in its
place, except :func:`tau_hat_mc`, which transforms a Monte Carlo two-point
function on a small torus.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .io import fmt_float
from .percolation import estimate_two_point
from .runner import replica_rng

SURROGATE = "random-walk"


class PoleError(ValueError):
    """Surrogate evaluated at or beyond its pole Omega p = 1."""


@dataclass
class DiagramValue:
    """One diagram evaluation.

    ``quantity`` is ``(i, j)`` for triangle-type averages, or ``"T_p"`` /
    ``"spherical"``.  Exact sums carry ``error == 0``.
    """

    quantity: object
    family: str
    n: int
    p: float | Fraction | None
    value: float | Fraction
    error: float
    surrogate: str | None = SURROGATE
    extra: dict = field(default_factory=dict)

    @property
    def i(self):
        return self.quantity[0] if isinstance(self.quantity, tuple) else ""

    @property
    def j(self):
        return self.quantity[1] if isinstance(self.quantity, tuple) else ""

    def row(self) -> list:
        p = "" if self.p is None else fmt_float(self.p)
        return [self.family, self.n, p, self.i, self.j, fmt_float(self.value),
                fmt_float(self.error), self.surrogate or "none"]


CSV_HEADER = ["family", "n", "p", "i", "j", "value", "error", "surrogate"]


def write_csv(path, values: Sequence[DiagramValue]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for v in values:
            w.writerow(v.row())


# -- D-hat ------------------------------------------------------------------------


def dhat(family: str, n: int, k) -> Fraction | float:
    """Fourier transform of the one-step random-walk law.

    For the hypercube ``k`` is the number m of pi-components; for the
    torus/Z^n it is a real vector.
    """
    if family in ("qn", "hypercube"):
        m = int(k)
        if not 0 <= m <= n:
            raise ValueError(f"need 0 <= m <= n, got m={m}")
        return Fraction(n - 2 * m, n)
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != n:
        raise ValueError(f"expected a {n}-vector")
    return np.cos(k).sum(axis=-1) / n


# -- triangle-type sums -------------------------------------------------------------


def _exact(p) -> Fraction:
    return p if isinstance(p, Fraction) else Fraction(p)


def triangle_qn(n: int, p, i: int, j: int, surrogate: str = SURROGATE) -> DiagramValue:
    """``2^-n sum_k |D(k)|^i C(k)^j`` on Q_n as an exact rational."""
    if surrogate != SURROGATE:
        raise ValueError(f"unknown surrogate {surrogate!r}")
    if i < 0 or j < 0:
        raise ValueError("i and j must be non-negative")
    p = _exact(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if j >= 1 and n * p >= 1:
        raise PoleError(f"Omega p = {float(n * p)} >= 1: surrogate has a pole")
    total = Fraction(0)
    for m in range(n + 1):
        d = Fraction(n - 2 * m, n)
        term = abs(d) ** i
        if j:
            term *= (1 / (1 - n * p * d)) ** j
        total += math.comb(n, m) * term
    return DiagramValue((i, j), "qn", n, p, total / 2**n, 0.0)


def triangle_zn(n: int, p: float, i: int, j: int, samples: int = 100_000,
                seed: int = 0) -> DiagramValue:
    """Monte Carlo ``int |D(k)|^i C(k)^j dk / (2 pi)^n`` over uniform k."""
    if j >= 1 and 2 * n * p >= 1:
        raise PoleError(f"Omega p = {2 * n * p} >= 1: surrogate has a pole")
    if j >= 1 and n < 2 * j + 1:
        warnings.warn(f"n={n} < 2j+1={2 * j + 1}: the Z^n integral is not controlled here",
                      RuntimeWarning, stacklevel=2)
    rng = replica_rng(seed, 0)
    k = rng.uniform(-math.pi, math.pi, size=(samples, n))
    d = np.cos(k).mean(axis=1)
    f = np.abs(d) ** i / (1.0 - 2 * n * p * d) ** j
    err = float(f.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return DiagramValue((i, j), "zn", n, p, float(f.mean()), err)


def triangle_zn_bessel(n: int, p: float, j: int) -> DiagramValue:
    """``T^(0,j)`` on Z^n from the Laplace-Bessel representation.

    ``(1 - b D)^-j = Gamma(j)^-1 int t^(j-1) exp(-t (1 - b D)) dt`` and the
    k-integral of ``exp(t b D)`` factorises into ``I0(t b / n)^n``.
    """
    beta = 2 * n * p
    if j == 0:
        return DiagramValue((0, 0), "zn", n, p, 1.0, 0.0)
    if beta >= 1:
        raise PoleError(f"Omega p = {beta} >= 1: surrogate has a pole")

    def f(t):
        x = t * beta / n
        # e^-t I0(x)^n = e^(-t (1 - beta)) ive(0, x)^n
        return t ** (j - 1) * math.exp(-t * (1 - beta)) * special.ive(0, x) ** n

    val, err = integrate.quad(f, 0, math.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    g = math.gamma(j)
    return DiagramValue((0, j), "zn", n, p, val / g, err / g, extra={"method": "bessel"})


def _slope(x, y) -> tuple[float, float]:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if len(x) < 3:
        s = (y[-1] - y[0]) / (x[-1] - x[0])
        return float(s), 0.0
    coef, cov = np.polyfit(x, y, 1, cov=True)
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0)))


def diagram_bound_check(family: str, n_values: Sequence[int], p_rule, i: int, j: int,
                        samples: int = 100_000, seed: int = 0) -> dict:
    """``T^(i,j) Omega^(i/2)`` across n, with a log-log growth flag.

    ``p_rule`` is a callable ``Omega -> p`` or a number c meaning
    ``p = c / Omega``.
    """
    rule = p_rule if callable(p_rule) else (lambda om, c=p_rule: _exact(c) / om)
    rows = []
    for n in n_values:
        omega = n if family in ("qn", "hypercube") else 2 * n
        p = rule(omega)
        if family in ("qn", "hypercube"):
            dv = triangle_qn(n, p, i, j)
        else:
            dv = triangle_zn(n, float(p), i, j, samples, seed)
        scaled = float(dv.value) * omega ** (i / 2)
        rows.append({"n": n, "omega": omega, "p": float(p), "value": dv.value,
                     "error": dv.error, "scaled": scaled})
    slope, slope_err = _slope([r["omega"] for r in rows], [r["scaled"] for r in rows])
    return {"rows": rows, "slope": slope, "slope_err": slope_err, "growth": slope > 0.1}


# -- x-space T_p on small tori -------------------------------------------------------------


def _torus_dhat(n: int, L: int) -> np.ndarray:
    k = 2 * np.pi * np.arange(L) / L
    grids = np.meshgrid(*([k] * n), indexing="ij")
    return sum(np.cos(g) for g in grids) / n


def t_p_surrogate(n: int, L: int, p: float) -> DiagramValue:
    """``sup_x (p Omega)(D * C * C * C)(x)`` on the torus, C the surrogate.

    Convolutions are evaluated exactly in Fourier space; the maximising x
    is reported in ``extra["argmax"]`` rather than assumed.
    """
    omega = 2 * n
    if omega * p >= 1:
        raise PoleError(f"Omega p = {omega * p} >= 1: surrogate has a pole")
    D = _torus_dhat(n, L)
    C = 1.0 / (1.0 - omega * p * D)
    field_x = np.real(np.fft.ifftn(D * C**3)) * (p * omega)
    idx = np.unravel_index(int(np.argmax(field_x)), field_x.shape)
    # axis 0 of the grid is coordinate 0
    return DiagramValue("T_p", f"torus{L}", n, p, float(field_x[idx]), 0.0,
                        extra={"argmax": tuple(int(c) for c in idx)})


def tau_hat_mc(g, p: float, replicas: int, seed: int = 0, workers: int | None = None):
    """Fourier transform of the Monte Carlo two-point function on a torus (n <= 4)."""
    if g.family != "torus" or g.n > 4:
        raise ValueError("Monte Carlo tau-hat is provided for tori with n <= 4")
    tau, err = estimate_two_point(g, p, replicas, seed, workers)
    shape = (g.L,) * g.n
    # vertex index has coordinate 0 as the fastest digit, so reverse axes
    grid = tau.reshape(shape[::-1]).transpose(list(range(g.n))[::-1])
    that = np.real(np.fft.fftn(grid))
    # the transform sums V terms; a crude error bound adds the errors
    bound = float(err.sum())
    return that, bound


def triangle_torus_mc(g, p: float, i: int, j: int, replicas: int, seed: int = 0,
                      workers: int | None = None) -> DiagramValue:
    """Torus mode average of ``|D|^i tau_hat^j`` with the Monte Carlo tau-hat."""
    that, bound = tau_hat_mc(g, p, replicas, seed, workers)
    D = _torus_dhat(g.n, g.L)
    vals = np.abs(D) ** i * that**j
    top = float(np.abs(that).max())
    err = j * top ** max(j - 1, 0) * bound if j else 0.0
    return DiagramValue((i, j), f"torus{g.L}", g.n, p, float(vals.mean()), err,
                        surrogate="monte-carlo-tau")


# -- spherical model -------------------------------------------------------------------


SPHERICAL_METHODS = ("bessel-laplace", "walk-series", "mc-fourier")

# ive(0, t) sqrt(2 pi t) ~ sum_k ((2k-1)!!)^2 / (k! 8^k) t^-k
_I0_ASYMP = [1.0]
for _k in range(1, 12):
    _I0_ASYMP.append(_I0_ASYMP[-1] * (2 * _k - 1) ** 2 / (8 * _k))


def _i0e_taylor(t: float, terms: int = 30) -> float:
    s, term = 1.0, 1.0
    h = (t / 2) ** 2
    for k in range(1, terms):
        term *= h / (k * k)
        s += term
    return s * math.exp(-t)


def _bessel_tail(n: int, T: float, order: int = 10) -> float:
    """``int_T^inf ive(0, t)^n dt`` from the large-t expansion."""
    series = np.polynomial.polynomial.polypow(_I0_ASYMP[: order + 1], n)[: order + 1]
    a = n / 2
    return sum(c * T ** (1 - a - k) / (a + k - 1) for k, c in enumerate(series)) \
        / (2 * math.pi) ** a


def _spherical_bessel(n: int, split: float = 0.5, T: float = 400.0) -> tuple[float, float, list]:
    def f(t):
        return (_i0e_taylor(t) if t < split else special.ive(0, t)) ** n

    pieces = [(0.0, split), (split, 10.0), (10.0, T)]
    total, err = 0.0, 0.0
    for lo, hi in pieces:
        v, e = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=500)
        total += v
        err += e
    tail = _bessel_tail(n, T)
    total += tail
    # first omitted asymptotic term bounds the tail error
    err += abs(tail) * (12.0 / T) ** 11
    trace = [(float(t), f(t)) for t in np.geomspace(1e-3, T, 60)]
    return total, err, trace


def _return_probabilities(n: int, lmax: int) -> np.ndarray:
    """Return probability a_l of simple random walk on Z^n for l <= lmax.

    Dimensions are added one at a time: with s steps shared between the
    first d axes and one more, the new axis receives Binomial(s, 1/(d+1))
    of them.
    """
    ls = np.arange(lmax + 1)
    # one-dimensional return probability C(l, l/2) 2^-l, zero for odd l
    r = np.zeros(lmax + 1)
    even = ls[::2]
    r[::2] = np.exp(special.gammaln(even + 1) - 2 * special.gammaln(even / 2 + 1)
                    - even * math.log(2))
    G = r.copy()
    for d in range(1, n):
        q = 1.0 / (d + 1)
        new = np.empty_like(G)
        for s in range(lmax + 1):
            l = np.arange(s + 1)
            w = np.exp(special.gammaln(s + 1) - special.gammaln(l + 1) - special.gammaln(s - l + 1)
                       + l * math.log(q) + (s - l) * math.log1p(-q))
            new[s] = np.dot(w * r[: s + 1], G[s::-1])
        G = new
    return G


def _spherical_walk(n: int, lmax: int = 3000, fit_terms: int = 4) -> tuple[float, float, list]:
    """``int_0^inf ive(0,t)^n dt = (1/n) sum_l a_l`` with a fitted tail."""
    a = _return_probabilities(n, lmax)
    head = float(a.sum())
    # a_l ~ 2 (n / (2 pi l))^(n/2) (1 + c1/l + ...) for even l
    ls = np.arange(lmax // 2, lmax + 1, 2, dtype=float)
    lead = 2 * (n / (2 * math.pi * ls)) ** (n / 2)
    ratio = a[lmax // 2::2][: len(ls)] / lead - 1.0
    X = np.stack([ls ** -(k + 1) for k in range(fit_terms)], axis=1)
    coef, *_ = np.linalg.lstsq(X, ratio, rcond=None)
    # sum over even l = 2m with m >= M of 2 (n/(4 pi m))^(n/2) (1 + sum c_k (2m)^-k)
    M = lmax // 2 + 1
    s = n / 2
    pref = 2 * (n / (4 * math.pi)) ** s
    tail = pref * special.zeta(s, M)
    for k, c in enumerate(coef, start=1):
        tail += pref * c * 2.0**-k * special.zeta(s + k, M)
    # uncertainty: the last fitted correction term
    err = abs(pref * coef[-1] * 2.0**-fit_terms * special.zeta(s + fit_terms, M))
    trace = [(int(l), float(a[l])) for l in range(0, lmax + 1, max(2, lmax // 60) // 2 * 2)]
    return (head + tail) / n, err / n, trace


def _spherical_mc(n: int, samples: int, seed: int) -> tuple[float, float, list]:
    rng = replica_rng(seed, 0)
    k = rng.uniform(-math.pi, math.pi, size=(samples, n))
    f = 1.0 / (n - np.cos(k).sum(axis=1))
    # the second moment diverges for n <= 4; the reported error is then only indicative
    return float(f.mean()), float(f.std(ddof=1) / math.sqrt(samples)), []


def spherical_tc(n: int, method: str = "bessel-laplace", samples: int = 1_000_000,
                 seed: int = 0, **kw) -> DiagramValue:
    """Spherical-model critical value ``T_c = [1/2 int_0^inf e^-nt I0(t)^n dt]^-1``.

    Methods: ``bessel-laplace`` (adaptive quadrature with a Taylor start and
    an asymptotic tail), ``walk-series`` (exact random-walk return
    probabilities plus a Hurwitz-zeta tail) and ``mc-fourier`` (Monte Carlo
    over the Brillouin zone).  ``extra["trace"]`` holds integrand samples.
    """
    if n <= 2:
        raise ValueError(f"the integral diverges for n <= 2 (got n={n})")
    if method == "bessel-laplace":
        g, err, trace = _spherical_bessel(n, **kw)
    elif method == "walk-series":
        g, err, trace = _spherical_walk(n, **kw)
    elif method == "mc-fourier":
        g, err, trace = _spherical_mc(n, samples, seed)
    else:
        raise ValueError(f"unknown method {method!r}; choose from {SPHERICAL_METHODS}")
    tc = 2.0 / g
    return DiagramValue("spherical", "zn", n, None, tc, 2.0 * err / g**2, surrogate=None,
                        extra={"method": method, "integral": g, "trace": trace})
