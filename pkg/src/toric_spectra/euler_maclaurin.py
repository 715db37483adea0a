"""Euler-Maclaurin corrections for Riemann sums over dilated Delzant polytopes.

The lattice sum ``N^-n sum_{k in NP} f(k/N)`` is approximated by applying
``prod_i tau(d/dh_i / N)``, with ``tau(s) = s / (1 - exp(-s))``, to the
function ``h -> int_{P_h} f`` at ``h = 0``; ``P_h`` moves facet ``i`` out
by ``h_i``.  The operator is truncated at total degree ``m`` and the
``h``-derivatives are taken by fourth-order central differences of
quadratures over shifted polytopes.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import quadrature as quad
from .asymptotics import loglog_slope
from .polynomials import Polynomial
from .polytope import CombinatorialChangeError, DelzantPolytope, _solve, lattice_points

NOISE = 1e-14


@dataclass(frozen=True)
class TauSeries:
    order: int
    coefficients: tuple

    def __call__(self, s):
        return sum(c * s**j for j, c in enumerate(self.coefficients))


def tau_coefficients(m: int) -> TauSeries:
    """Exact Taylor coefficients of ``s / (1 - exp(-s))`` up to ``s^m``.

    The reciprocal of ``(1 - exp(-s)) / s = sum_j (-1)^j s^j / (j+1)!`` is
    formed by power-series division.
    """
    if m < 0:
        raise ValueError("order must be nonnegative")
    a = [Fraction((-1) ** j, math.factorial(j + 1)) for j in range(m + 1)]
    t = []
    for j in range(m + 1):
        acc = Fraction(int(j == 0))
        acc -= sum(a[i] * t[j - i] for i in range(1, j + 1))
        t.append(acc / a[0])
    return TauSeries(m, tuple(t))


@lru_cache(maxsize=None)
def central_stencil(order: int):
    """Offsets and weights of a 4th-order accurate central difference."""
    if order == 0:
        return (0,), (Fraction(1),)
    half = (order + 1) // 2 + 1
    offs = list(range(-half, half + 1))
    size = len(offs)
    # solve sum_j w_j o_j^p = order! * [p == order] for p < size
    A = [[Fraction(o) ** p for o in offs] for p in range(size)]
    b = [Fraction(math.factorial(order)) if p == order else Fraction(0) for p in range(size)]
    w = _solve(A, b)
    return tuple(offs), tuple(w)


def riemann_sum(P: DelzantPolytope, f, N: int, exact: bool = False):
    """``N^-n`` times the sum of ``f(k/N)`` over lattice points of ``N P``.

    A :class:`Polynomial` with rational coefficients is summed exactly
    (returned as a Fraction when ``exact`` is set).
    """
    pts = lattice_points(P, N)
    if isinstance(f, Polynomial) and all(isinstance(c, (int, Fraction)) for _, c in f.terms):
        total = sum((f.exact(tuple(Fraction(int(v), N) for v in k)) for k in pts), Fraction(0))
        total /= Fraction(N) ** P.dim
        return total if exact else float(total)
    vals = np.asarray(f(pts / float(N)), dtype=float)
    return math.fsum(vals) / float(N) ** P.dim


class _ShiftedIntegral:
    """Memoized ``h -> int_{P_h} f``."""

    def __init__(self, P, f, tol):
        self.P = P
        self.f = f
        self.tol = tol
        self.cache = {}

    def __call__(self, h):
        key = tuple(float(v) for v in h)
        if key not in self.cache:
            region = self.P.shift(h)
            self.cache[key] = quad.integrate(region, self.f, self.tol).value
        return self.cache[key]


def _multi_indices(d, degree):
    for combo in itertools.combinations_with_replacement(range(d), degree):
        alpha = [0] * d
        for i in combo:
            alpha[i] += 1
        yield tuple(alpha)


def _step(total_order, noise, cap):
    return min(cap, noise ** (1.0 / (total_order + 4)))


def _mixed_derivative(I, alpha, h, d):
    support = [i for i in range(d) if alpha[i]]
    stencils = [central_stencil(alpha[i]) for i in support]
    total = []
    for choice in itertools.product(*[range(len(s[0])) for s in stencils]):
        w = 1.0
        shift = [0.0] * d
        for i, (offs, wts), c in zip(support, stencils, choice):
            if wts[c] == 0:
                w = 0.0
                break
            w *= float(wts[c])
            shift[i] = offs[c] * h
        if w:
            total.append(w * I(shift))
    return math.fsum(total) / h ** sum(alpha)


def em_terms(P: DelzantPolytope, f, N: int, order: int = 2, tol: float = 1e-13, step: float = None):
    """Per-degree contributions ``T_0 .. T_order`` of the truncated operator.

    ``T_j`` collects every mixed ``h``-derivative of total degree ``j``,
    weighted by the product of ``tau`` coefficients and ``N^-j``.
    """
    tau = tau_coefficients(order).coefficients
    d = P.n_facets
    I = _ShiftedIntegral(P, f, tol)
    # largest admissible stencil reach before the combinatorial type changes
    edge = min(float(np.min([abs(float(a) - float(b)) for a, b in zip(p, q) if a != b]))
               for p, q in itertools.combinations(P.vertices, 2))
    cap = 0.05 * edge
    terms = [I([0.0] * d)]
    for j in range(1, order + 1):
        acc = []
        for alpha in _multi_indices(d, j):
            weight = math.prod(float(tau[a]) for a in alpha)
            if weight == 0.0:
                continue
            h = step if step is not None else _step(j, NOISE, cap)
            reach = max((len(central_stencil(a)[0]) // 2 for a in alpha if a), default=0)
            while True:
                try:
                    if h * reach > cap:
                        raise CombinatorialChangeError("stencil too wide")
                    acc.append(weight * _mixed_derivative(I, alpha, h, d))
                    break
                except CombinatorialChangeError:
                    h *= 0.5
                    if h < 1e-8:
                        raise
        terms.append(math.fsum(acc) / float(N) ** j)
    return terms


def em_sum(P: DelzantPolytope, f, N: int, order: int = 2, tol: float = 1e-13, step: float = None) -> float:
    """Truncated Euler-Maclaurin approximation of :func:`riemann_sum`."""
    return math.fsum(em_terms(P, f, N, order, tol, step))


@dataclass
class EMReport:
    rows: list  # (N, order, riemann_sum, em_sum, abs_error)
    slopes: dict = field(default_factory=dict)
    integral: float = None

    def errors(self, order):
        return [(r[0], r[4]) for r in self.rows if r[1] == order]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "order", "riemann_sum", "em_sum", "abs_error"])
        for N, m, rs, es, err in self.rows:
            w.writerow([N, m, f"{rs:.17g}", f"{es:.17g}", f"{err:.17g}"])
        return buf.getvalue()


def em_error_report(P: DelzantPolytope, f, N_grid, orders=(0, 1, 2), tol: float = 1e-13) -> EMReport:
    """``|riemann_sum - em_sum|`` per level and truncation order, with decay slopes.

    The slope reported for each order is ``-d log|error| / d log N``.
    """
    top = max(orders)
    rows = []
    integral = None
    for N in N_grid:
        terms = em_terms(P, f, N, top, tol)
        integral = terms[0]
        rs = riemann_sum(P, f, N)
        for m in orders:
            es = math.fsum(terms[: m + 1])
            rows.append((int(N), int(m), rs, es, abs(rs - es)))
    report = EMReport(rows, integral=integral)
    for m in orders:
        Ns, errs = zip(*report.errors(m))
        if len(Ns) < 2:
            continue
        if all(e > 0 for e in errs):
            report.slopes[m] = -loglog_slope(Ns, errs)[0]
        else:
            report.slopes[m] = math.inf
    return report
