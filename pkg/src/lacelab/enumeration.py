"""Exact event probabilities on small regions by exhaustive enumeration.

Every configuration of a region with ``B`` edges is a ``B``-bit integer in
canonical edge order.  An event probability is accumulated as integer counts
``c_k`` of favourable configurations with ``k`` occupied edges, i.e. in the
basis ``p^k (1-p)^(B-k)``, and then expanded into powers of ``p``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .percolation import BondConfiguration
from .topology import ExplicitGraph, GraphSpec, HYPERCUBE, TORUS

MAX_EDGES = 24
MAX_EDGES_TWO_LEVEL = 12


class EnumerationCapError(ValueError):
    """Region too large to enumerate."""


# -- polynomials -------------------------------------------------------------


def _trim(coeffs: list) -> list:
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


class RationalPolynomial:
    """Polynomial in ``p`` with exact rational coefficients (power basis).

    ``basis_counts``, when present, holds the integer coefficients in the
    ``p^k (1-p)^(degree-k)`` basis the polynomial was built from.
    """

    def __init__(self, coeffs: Sequence, basis_counts: Sequence[int] | None = None):
        self.coeffs = _trim([Fraction(c) for c in coeffs] or [Fraction(0)])
        self.basis_counts = None if basis_counts is None else [int(c) for c in basis_counts]

    @classmethod
    def from_bernstein_counts(cls, counts: Sequence[int], scale: Fraction | int = 1
                              ) -> "RationalPolynomial":
        """``scale * sum_k counts[k] p^k (1-p)^(D-k)`` with ``D = len(counts) - 1``."""
        counts = [int(c) for c in counts]
        D = len(counts) - 1
        out = [0] * (D + 1)
        for k, c in enumerate(counts):
            if not c:
                continue
            for i in range(D - k + 1):
                term = c * math.comb(D - k, i)
                out[k + i] += -term if i & 1 else term
        scale = Fraction(scale)
        return cls([scale * c for c in out], counts)

    def __call__(self, p) -> Fraction | float:
        return self.evaluate(p)

    def evaluate(self, p):
        """Horner evaluation; exact for Fraction/int input, float otherwise."""
        exact = isinstance(p, (Fraction, int))
        acc = Fraction(0) if exact else 0.0
        for c in reversed(self.coeffs):
            acc = acc * p + (c if exact else float(c))
        return acc

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __add__(self, other):
        other = other if isinstance(other, RationalPolynomial) else RationalPolynomial([other])
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + [Fraction(0)] * (n - len(self.coeffs))
        b = other.coeffs + [Fraction(0)] * (n - len(other.coeffs))
        return RationalPolynomial([x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self):
        return RationalPolynomial([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other if isinstance(other, RationalPolynomial) else -Fraction(other))

    def __mul__(self, other):
        if not isinstance(other, RationalPolynomial):
            return RationalPolynomial([c * Fraction(other) for c in self.coeffs])
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return RationalPolynomial(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, RationalPolynomial):
            other = RationalPolynomial([other])
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(tuple(self.coeffs))

    def derivative(self) -> "RationalPolynomial":
        return RationalPolynomial([i * c for i, c in enumerate(self.coeffs)][1:] or [0])

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.coeffs)

    def __repr__(self):
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            terms.append(f"{c}" if i == 0 else f"{c}*p" if i == 1 else f"{c}*p^{i}")
        return "RationalPolynomial(" + (" + ".join(terms) or "0") + ")"

    def to_json(self) -> list:
        return [{"numerator": str(c.numerator), "denominator": str(c.denominator)}
                for c in self.coeffs]

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data) -> "RationalPolynomial":
        if isinstance(data, str):
            data = json.loads(data)
        return cls([Fraction(int(d["numerator"]), int(d["denominator"])) for d in data])


# -- generic enumeration ------------------------------------------------------------


def _check_cap(region, cap: int) -> None:
    if region.edge_count > cap:
        raise EnumerationCapError(
            f"{region.edge_count} edges exceeds the enumeration cap of {cap}")
    if region.vertex_count > 64:
        raise EnumerationCapError("enumeration kernels support at most 64 vertices")


def _uv(region):
    e = region.edges
    return np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1])


def enumerate_event(region, predicate: Callable[[BondConfiguration], bool]) -> RationalPolynomial:
    """Probability of ``predicate`` as an exact polynomial in p.

    ``predicate`` receives a :class:`BondConfiguration` on ``region``.
    """
    _check_cap(region, MAX_EDGES)
    B = region.edge_count
    counts = [0] * (B + 1)
    bits = np.arange(B)
    for mask in range(1 << B):
        occ = ((mask >> bits) & 1).astype(bool)
        if predicate(BondConfiguration(region, occ)):
            counts[mask.bit_count()] += 1
    return RationalPolynomial.from_bernstein_counts(counts)


def cluster_stats(region, root: int | None = None):
    """``(conn, dbl, cmax_sum)`` counts from the enumeration kernel."""
    _check_cap(region, MAX_EDGES)
    root = region.root if root is None else root
    eu, ev = _uv(region)
    return kernels.enum_cluster_stats(region.vertex_count, eu, ev, int(root))


def exact_two_point(region, x: int, root: int | None = None) -> RationalPolynomial:
    conn, _, _ = cluster_stats(region, root)
    return RationalPolynomial.from_bernstein_counts(conn[x].tolist())


def exact_chi(region, root: int | None = None) -> RationalPolynomial:
    """E|C(root)| exactly."""
    conn, _, _ = cluster_stats(region, root)
    return RationalPolynomial.from_bernstein_counts(conn.sum(axis=0).tolist())


def exact_pi0(region, root: int | None = None) -> RationalPolynomial:
    """Sum over x != root of P(root <=> x)."""
    root = region.root if root is None else root
    _, dbl, _ = cluster_stats(region, root)
    counts = dbl.sum(axis=0) - dbl[root]
    return RationalPolynomial.from_bernstein_counts(counts.tolist())


def exact_cmax(region) -> RationalPolynomial:
    """E|C_max| exactly."""
    _, _, cmax = cluster_stats(region)
    return RationalPolynomial.from_bernstein_counts(cmax.tolist())


def _is_transitive_group(region) -> bool:
    return isinstance(region, GraphSpec) and region.family in (HYPERCUBE, TORUS)


def _translate_masks(region, v0: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Bit masks of ``A - v0`` for each record."""
    V = region.vertex_count
    table = np.array([[region.translate(x, v) for x in range(V)] for v in range(V)], np.int64)
    out = np.zeros(len(masks), np.uint64)
    for x in range(V):
        has = (masks >> np.uint64(x)) & np.uint64(1)
        out |= has << table[v0, x].astype(np.uint64)
    return out


def exact_pi1_two_level(region, root: int | None = None, max_edges: int = MAX_EDGES_TWO_LEVEL,
                        symmetry: bool = True) -> RationalPolynomial:
    """Exact two-level sum for Pi^(1) as a polynomial of degree <= 2B + 1.

    Level 0 enumerates configurations w0 and directed bonds (u0, v0) with
    ``root <=> u0``, yielding ``(v0, A)`` with A the cluster of root once
    the bond is vacant.  Level 1 counts the x with E'(v0, x; A) over all
    configurations w1.  Records sharing ``(v0, A)`` share the level-1 work.
    On hypercubes and tori, ``symmetry=True`` translates each record to
    ``(root, A - v0)``, which leaves the level-1 count unchanged.

    ``max_edges`` raises the default cap of 12 for the compiled kernel; the
    cost is roughly ``2^B`` times the number of distinct sets A.
    """
    _check_cap(region, max_edges)
    root = region.root if root is None else int(root)
    V, B = region.vertex_count, region.edge_count
    if B == 0:
        return RationalPolynomial([0])
    eu, ev = _uv(region)
    v0, masks, k0 = kernels.pi1_level0(V, eu, ev, root)
    if symmetry and _is_transitive_group(region) and root == 0:
        masks = _translate_masks(region, v0, masks)
        v0 = np.zeros_like(v0)
    total = [0] * (2 * B + 1)
    for v in np.unique(v0).tolist():
        sel = v0 == v
        keys, inverse = np.unique(masks[sel], return_inverse=True)
        # c0[key, k0]: level-0 weight of each distinct A
        c0 = np.zeros((len(keys), B + 1), np.int64)
        np.add.at(c0, (inverse, k0[sel]), 1)
        g = kernels.pi1_level1(V, eu, ev, int(v), keys)
        # sum over keys of the product of the two count vectors
        for a in range(B + 1):
            row = c0[:, a].astype(object)
            if not row.any():
                continue
            contrib = row @ g.astype(object)
            for b in range(B + 1):
                total[a + b] += int(contrib[b])
    base = RationalPolynomial.from_bernstein_counts(total)
    return base * RationalPolynomial([0, 1])


# -- regions and symmetry --------------------------------------------------------------


def symmetry_weight(n: int, m: int) -> int:
    """Number of dimension masks with m active coordinates out of n."""
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got n={n}, m={m}")
    return math.comb(n, m)


@dataclass(frozen=True)
class BoxSpec:
    """Induced region ``{x : |x|_inf <= R, x_i = 0 for inactive i}``.

    ``family="zn"`` uses integer coordinates in ``[-R, R]`` on the first
    ``m`` axes; ``family="qn"`` uses ``{0, 1}`` coordinates (R is ignored),
    i.e. the subcube spanned by m axes.
    """

    m: int
    R: int = 1
    family: str = "zn"

    def region(self) -> ExplicitGraph:
        if self.m < 0 or self.R < 0:
            raise ValueError("m and R must be non-negative")
        side = range(-self.R, self.R + 1) if self.family == "zn" else range(2)
        pts = list(itertools.product(side, repeat=self.m))
        # origin first so that the root is vertex 0
        origin = (0,) * self.m
        pts.remove(origin)
        pts.insert(0, origin)
        index = {x: i for i, x in enumerate(pts)}
        edges = []
        for x in pts:
            for i in range(self.m):
                y = list(x)
                y[i] += 1
                y = tuple(y)
                if y in index:
                    edges.append((index[x], index[y]))
        edges.sort(key=lambda e: (min(e), max(e)))
        label = f"box_{self.family}_m{self.m}_R{self.R}"
        return ExplicitGraph(len(pts), tuple(edges), 0, label)


def pi0_radius_convergence(m: int, radii: Sequence[int], p, family: str = "zn") -> list[dict]:
    """Exact Pi^(0) on boxes of growing radius, evaluated at ``p``.

    Returns one row per radius with the polynomial, its value and the change
    from the previous radius; no radius is declared sufficient.
    """
    rows = []
    prev = None
    for R in radii:
        region = BoxSpec(m, R, family).region()
        poly = exact_pi0(region)
        value = poly.evaluate(p)
        rows.append({"m": m, "R": R, "edges": region.edge_count, "polynomial": poly,
                     "value": value, "change": None if prev is None else value - prev})
        prev = value
    return rows
