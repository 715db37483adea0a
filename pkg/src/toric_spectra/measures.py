"""The pushed-forward spectral measure and quantities built from it.

At level ``N`` the measure on the polytope has density

    rho_N(y) = sum_{k in NP} exp(N phi(k/N, y)) / c_k,

so pairing it with ``f`` equals the lattice sum of transforms
``sum_k f#_N(k/N)``.  This module assembles the density, pairings,
eigensection averages, moments of single section norms, their
distribution functions, and the combined large-``N`` series of the
pairing.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import quadrature as quad
from .asymptotics import fit_expansion, hessian_det
from .euler_maclaurin import em_terms, riemann_sum
from .kernel import KernelContext, distances_at, log_phase
from .polytope import DelzantPolytope, lattice_points

THREADS_ENV = "TORIC_SPECTRA_THREADS"


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map(fn, items, threads):
    threads = default_threads() if threads is None else threads
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def compensated_sum(terms: np.ndarray, axis: int = 0) -> np.ndarray:
    """Neumaier summation along ``axis``, largest magnitudes first."""
    terms = np.moveaxis(np.asarray(terms, dtype=float), axis, 0)
    order = np.argsort(-np.abs(terms), axis=0, kind="stable")
    terms = np.take_along_axis(terms, order, axis=0)
    s = np.zeros(terms.shape[1:])
    c = np.zeros(terms.shape[1:])
    for t in terms:
        tot = s + t
        c += np.where(np.abs(s) >= np.abs(t), (s - tot) + t, (t - tot) + s)
        s = tot
    return s + c


@dataclass
class MomentReport:
    k: tuple
    exponents: list
    values: list
    predictions: list
    ratios: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "value", "prediction", "ratio"])
        for m, v, p, r in zip(self.exponents, self.values, self.predictions, self.ratios):
            w.writerow([m, _fmt(v), _fmt(p), _fmt(r)])
        return buf.getvalue()


def _fmt(v):
    return "" if v is None else f"{float(v):.17g}"


class SpectralMeasure:
    """The measure ``sum_k |s_k|^2`` pushed forward to the polytope at level ``N``."""

    def __init__(self, polytope: DelzantPolytope, N: int, tol: float = 1e-11, threads: int = None):
        self.polytope = polytope
        self.N = int(N)
        self.context = KernelContext(polytope, N, tol=tol)
        self.points = lattice_points(polytope, N)
        self.threads = threads

    def __len__(self):
        return len(self.points)

    def lattice_xs(self):
        return [tuple(Fraction(int(v), self.N) for v in k) for k in self.points]

    def log_normalizers(self) -> np.ndarray:
        """``log c_k`` for every lattice point, in lattice order."""
        return np.array(_map(self.context.log_c, self.lattice_xs(), self.threads))

    def log_section_terms(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float).reshape(-1, self.polytope.dim))
        logc = self.log_normalizers()
        rows = []
        for x, lc in zip(self.lattice_xs(), logc):
            lx = distances_at(self.polytope, x)
            rows.append(self.N * log_phase(self.polytope, lx, Y) - lc)
        return np.array(rows)

    def spectral_density(self, y):
        """Density of the measure against Lebesgue measure at ``y`` (vectorized)."""
        with np.errstate(under="ignore"):
            terms = np.exp(self.log_section_terms(y))
        out = compensated_sum(terms, axis=0)
        return float(out[0]) if np.ndim(y) <= 1 and out.size == 1 else out

    def pair(self, f, cross_check: bool = False, tol: float = 1e-9):
        """Lattice sum of transforms ``sum_k f#_N(k/N)``.

        With ``cross_check`` the density is also integrated against ``f``
        directly and ``(lattice_sum, quadrature_value)`` is returned.
        """
        vals = _map(lambda x: self.context.transform(f, x), self.lattice_xs(), self.threads)
        total = math.fsum(vals)
        if not cross_check:
            return total
        direct = quad.integrate(self.polytope,
                                lambda Y: np.asarray(f(Y), dtype=float) * self.spectral_density(Y),
                                tol).value
        return total, direct

    def eigensection_average(self, k, f):
        """Average of ``f`` against the weight-``k`` section norm (boundary ``k`` allowed)."""
        return self.context.transform(f, self.context.lattice_point(k))

    def moment(self, k, m):
        """``int |s_k|^(2m) = c_{k,m} / c_k^m`` and its steepest-descent prediction.

        ``m`` may be an integer or a list.  The prediction is ``None`` when
        ``k / N`` lies on the boundary.
        """
        ms = [int(m)] if np.ndim(m) == 0 else [int(v) for v in m]
        if any(v < 1 for v in ms):
            raise ValueError("moment order must be >= 1")
        x = self.context.lattice_point(k)
        n = self.polytope.dim
        base = self.context.log_c(x)
        try:
            h = hessian_det(self.polytope, x).determinant
        except ValueError:
            h = None
        values, preds, ratios = [], [], []
        for mm in ms:
            logv = self.context.log_c(x, power=mm) - mm * base
            values.append(math.exp(logv))
            if h is None:
                preds.append(None)
                ratios.append(None)
                continue
            logp = 0.5 * (mm - 1) * n * math.log(self.N / (2 * math.pi)) - 0.5 * n * math.log(mm) \
                + 0.5 * (mm - 1) * math.log(h)
            preds.append(math.exp(logp))
            ratios.append(math.exp(logv - logp))
        return MomentReport(tuple(int(v) for v in np.atleast_1d(k)), ms, values, preds, ratios)

    def distribution_function(self, k, t_grid, tol: float = 1e-9):
        """``[(t, Vol{y : |s_k|^2(y) >= t})]`` for each threshold."""
        k = tuple(int(v) for v in np.atleast_1d(k))
        out = []
        for t in t_grid:
            if t <= 0:
                out.append((float(t), float(self.polytope.volume)))
                continue
            vol = quad.superlevel_volume(self.polytope, lambda Y: self.context.section_norm(k, Y),
                                         float(t), tol,
                                         apex=np.array([float(v) for v in self.context.lattice_point(k)]))
            out.append((float(t), vol))
        return out


# functional aliases --------------------------------------------------------------

def spectral_density(measure: SpectralMeasure, y):
    return measure.spectral_density(y)


def pair(measure: SpectralMeasure, f, cross_check: bool = False):
    return measure.pair(f, cross_check)


def eigensection_average(measure: SpectralMeasure, k, f):
    return measure.eigensection_average(k, f)


def moment(measure: SpectralMeasure, k, m):
    return measure.moment(k, m)


def distribution_function(measure: SpectralMeasure, k, t_grid):
    return measure.distribution_function(k, t_grid)


# combined series -----------------------------------------------------------------

@dataclass
class PairingSeries:
    coefficients: list
    lattice_part: list
    kernel_part: list
    N_grid: tuple
    residual_norm: float
    values: list = field(default_factory=list)


DEFAULT_PAIRING_GRID = {1: (12, 16, 24, 32, 48, 64, 96), 2: (8, 10, 12, 16, 20, 24, 32)}


def asymptotic_pairing(P: DelzantPolytope, f, order: int = 2, N_grid=None, tol: float = 1e-11,
                       threads: int = None) -> PairingSeries:
    """Large-``N`` series of ``N^-n`` times the pairing of ``f`` with the measure.

    The series is split as ``N^-n sum_k f(k/N)`` plus the kernel correction
    ``N^-n sum_k (f#_N - f)(k/N)``.  The first part comes term by term from
    the Euler-Maclaurin operator; the second is fitted over a grid of levels.
    """
    if order > 2:
        raise ValueError("order must be at most 2")
    grid = tuple(N_grid or DEFAULT_PAIRING_GRID.get(P.dim, (6, 8, 10, 12, 16, 20)))
    lattice = em_terms(P, f, 1, order)
    diffs = []
    values = []
    for N in grid:
        meas = SpectralMeasure(P, N, tol=tol, threads=threads)
        total = meas.pair(f) / float(N) ** P.dim
        values.append(total)
        diffs.append(total - riemann_sum(P, f, N))
    diffs = np.array(diffs)
    if np.all(np.abs(diffs) <= 1e-13):
        kernel = [0.0] * (order + 1)
        resid = float(np.linalg.norm(diffs))
    else:
        fit_order = min(order + 3, len(grid) - 2)
        coef, res, _ = fit_expansion(grid, diffs, fit_order, start=1)
        kernel = [0.0] + [float(c) for c in coef[:order]]
        resid = float(np.linalg.norm(res))
    coeffs = [float(a) + float(b) for a, b in zip(lattice, kernel)]
    return PairingSeries(coeffs, [float(v) for v in lattice], kernel, grid, resid, values)
