"""Large-N behaviour of the kernel: Laplace constants and expansion fits.

The transform ``f#_N(x)`` admits an expansion ``sum_i a_i(x) N**-i`` with
``a_0 = f(x)``.  Rather than computing the coefficient operators
symbolically, :func:`extract_expansion` samples the transform on a grid of
levels and fits the series by least squares.  :class:`OrthantModel` is the
local model at a vertex (the positive orthant), where the transform of a
monomial is a finite product and serves as an exact oracle.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from . import quadrature as quad
from .kernel import KernelContext, as_point, distances_at, log_phase
from .polynomials import Polynomial
from .polytope import HalfspacePolytope, cube

DEFAULT_N_GRID = (50, 71, 100, 141, 200, 283, 400)
MAX_CONDITION = 1e12


class IllConditionedFitError(ValueError):
    pass


# Laplace constants -------------------------------------------------------------

@dataclass(frozen=True)
class HessianForm:
    matrix: np.ndarray
    determinant: float


def hessian_det(P: HalfspacePolytope, x) -> HessianForm:
    """The form ``sum_i (d l_i)^2 / l_i(x)`` and its determinant ``h(x)``."""
    lx = distances_at(P, x)
    if np.any(lx == 0):
        raise ValueError("the Hessian form is singular on the boundary")
    U = P.normal_matrix
    M = (U.T / lx) @ U
    return HessianForm(M, float(np.linalg.det(M)))


def laplace_normalization(P: HalfspacePolytope, N: int, x) -> float:
    """Log of the leading steepest-descent prediction for ``c_N(x)``."""
    h = hessian_det(P, x).determinant
    n = P.dim
    lx = distances_at(P, x)
    return 0.5 * n * math.log(2 * math.pi / N) - 0.5 * math.log(h) + N * float(np.sum(lx * np.log(lx) - lx))


def log_pointwise_norm_asymptotic(P: HalfspacePolytope, N: int, x, y) -> np.ndarray:
    h = hessian_det(P, x).determinant
    lx = distances_at(P, x)
    Y = np.atleast_2d(np.asarray(y, dtype=float).reshape(-1, P.dim))
    peak = float(np.sum(lx * np.log(lx) - lx))
    return 0.5 * P.dim * math.log(N / (2 * math.pi)) + 0.5 * math.log(h) + N * (log_phase(P, lx, Y) - peak)


def pointwise_norm_asymptotic(P: HalfspacePolytope, N: int, x, y):
    """Leading prediction of the weight-``Nx`` section norm at ``y``."""
    out = np.exp(log_pointwise_norm_asymptotic(P, N, x, y))
    return float(out[0]) if out.size == 1 else out


# orthant model ---------------------------------------------------------------------

class OrthantModel:
    """Kernel on the positive orthant with phase ``sum_j x_j log y_j - y_j``.

    Numerically the orthant is truncated to a box far enough out that the
    neglected tail is below ``exp(-tail)`` relative to the peak.
    """

    def __init__(self, dim: int = 1, tail: float = 80.0, tol: float = 1e-12):
        self.dim = dim
        self.tail = tail
        self.tol = tol

    def cutoff(self, x, N) -> int:
        L = 2
        for xj in x:
            while True:
                drop = L - xj - (xj * math.log(L / xj) if xj > 0 else 0.0)
                if N * drop >= self.tail and L >= 2 * (xj + 1):
                    break
                L *= 2
        return L

    def region(self, x, N):
        return cube(self.dim, self.cutoff(x, N))

    def log_weight(self, x, N):
        x = np.asarray(x, dtype=float)

        def lw(Y):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(x > 0, x * np.log(np.clip(Y, 0, None)), 0.0) - Y
            return N * t.sum(axis=1)
        return lw

    def _point(self, x):
        x = np.atleast_1d(np.asarray([float(v) for v in np.atleast_1d(x)]))
        if x.shape != (self.dim,) or np.any(x < 0):
            raise ValueError("x must be a point of the closed orthant")
        return x

    def log_c(self, x, N) -> float:
        x = self._point(x)
        res = quad.integrate_log(self.region(x, N), self.log_weight(x, N), self.tol, apex=x)
        return float(res.log_value)

    def exact_log_c(self, x, N) -> float:
        x = self._point(x)
        return float(sum(gammaln(N * xj + 1) - (N * xj + 1) * math.log(N) for xj in x))

    def transform(self, f, x, N):
        x = self._point(x)
        value, _, _ = quad.expectation(self.region(x, N), self.log_weight(x, N), f, self.tol, apex=x)
        return value

    def exact_transform(self, poly: Polynomial, x, N):
        """Closed form: ``y^m`` maps to ``prod_{j=1..m} (x + j/N)`` per coordinate."""
        x = [Fraction(v) if isinstance(v, (int, Fraction)) else float(v) for v in np.atleast_1d(x)]
        total = 0
        for exps, coef in poly.terms:
            term = coef
            for xj, m in zip(x, exps):
                for j in range(1, m + 1):
                    term = term * (xj + Fraction(j, N) if isinstance(xj, Fraction) else xj + j / N)
            total = total + term
        return total


def model_P1(f: Polynomial, x):
    """First-order coefficient of the orthant-model transform.

    ``sum_j (x_j / 2) d^2 f / dy_j^2 + d f / dy_j`` evaluated at ``x``.
    """
    x = tuple(np.atleast_1d(x))
    total = 0
    for j in range(f.dim):
        xj = x[j]
        total = total + xj * f.derivative(j, 2)(_as_eval(x)) / 2 + f.derivative(j)(_as_eval(x))
    return _scalar(total)


def _as_eval(x):
    if all(isinstance(v, (int, Fraction)) for v in x):
        return tuple(x)
    return np.array([[float(v) for v in x]])


def _scalar(v):
    return v if isinstance(v, Fraction) else float(np.asarray(v).reshape(-1)[0])


# expansion fitting ----------------------------------------------------------------

def loglog_slope(N, values):
    """Least-squares slope and R^2 of ``log|values|`` against ``log N``."""
    lx = np.log(np.asarray(N, dtype=float))
    ly = np.log(np.abs(np.asarray(values, dtype=float)))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def linear_fit(x, y):
    """Slope, intercept and R^2 of an ordinary least-squares line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - A @ coef) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return float(coef[0]), float(coef[1]), 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def fit_expansion(N_grid, values, order: int, start: int = 0):
    """Fit ``values ~ sum_{i=start}^{order} a_i N^-i``.

    Columns are scaled to unit max-norm before solving; returns
    ``(coefficients, residuals, condition_number)``.
    """
    N = np.asarray(N_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    powers = np.arange(start, order + 1)
    A = N[:, None] ** (-powers[None, :].astype(float))
    scale = np.max(np.abs(A), axis=0)
    As = A / scale
    cond = float(np.linalg.cond(As))
    if cond > MAX_CONDITION:
        raise IllConditionedFitError(f"fit condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}")
    sol, *_ = np.linalg.lstsq(As, values, rcond=None)
    coef = sol / scale
    resid = values - A @ coef
    return coef, resid, cond


@dataclass
class ExpansionReport:
    x: tuple
    coefficients: np.ndarray
    N_grid: tuple
    values: np.ndarray
    residual_norm: float
    tail_order: float
    condition_number: float
    fitted: np.ndarray = field(repr=False, default=None)

    def leading_residuals(self):
        """``|f#_N(x) - a_0 - a_1 / N|`` on the grid."""
        N = np.asarray(self.N_grid, dtype=float)
        return np.abs(self.values - self.coefficients[0] - self.coefficients[1] / N)

    def rows(self):
        return [(int(N), float(v), float(p), float(v / p) if p else math.nan)
                for N, v, p in zip(self.N_grid, self.values, self.fitted)]

    def to_dict(self):
        return {"x": [float(v) for v in self.x], "coefficients": [float(c) for c in self.coefficients],
                "N_grid": list(map(int, self.N_grid)), "values": [float(v) for v in self.values],
                "residual_norm": self.residual_norm, "tail_order": self.tail_order,
                "condition_number": self.condition_number}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def grid_for_point(x, N_grid):
    """Round each level up to a multiple of the common denominator of ``x``."""
    dens = [Fraction(v).denominator for v in x if isinstance(v, (int, Fraction))]
    if len(dens) != len(x):
        return tuple(sorted(set(int(N) for N in N_grid)))
    q = math.lcm(*dens) if dens else 1
    return tuple(sorted({q * math.ceil(N / q) for N in N_grid}))


def extract_expansion(source, f, x, order: int = 4, N_grid=DEFAULT_N_GRID,
                      tol: float = 1e-12) -> ExpansionReport:
    """Fit the large-``N`` expansion of ``f#_N(x)`` from sampled levels.

    ``source`` is a polytope or an :class:`OrthantModel`.  For rational ``x``
    (given as Fractions) the levels are moved to multiples of the
    denominator so that ``N x`` is a lattice point at every level.
    """
    if isinstance(source, OrthantModel):
        x = tuple(np.atleast_1d(x))
        grid = grid_for_point(x, N_grid)

        def sample(N):
            return source.transform(f, x, N)
    else:
        x = as_point(source, x)
        grid = grid_for_point(x, N_grid)

        def sample(N):
            return KernelContext(source, N, tol=tol).transform(f, x)
    if len(grid) < order + 3:
        raise ValueError(f"need at least {order + 3} distinct levels, got {len(grid)}")
    values = np.array([sample(N) for N in grid], dtype=float)
    coef, resid, cond = fit_expansion(grid, values, order)
    N = np.asarray(grid, dtype=float)
    lead = np.abs(values - coef[0] - coef[1] / N)
    tail = -loglog_slope(N, lead)[0] if np.all(lead > 0) else math.inf
    fitted = values - resid
    return ExpansionReport(x, coef, grid, values, float(np.linalg.norm(resid)), tail, cond, fitted)


# pinched averages ---------------------------------------------------------------

def bump_window(u):
    """Smooth bump ``exp(1 - 1/(1 - |u|^2))`` on the unit ball, 1 at the origin."""
    u = np.asarray(u, dtype=float)
    r2 = np.sum(u * u, axis=-1)
    inside = r2 < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(1.0 - 1.0 / np.where(inside, 1.0 - r2, 1.0))
    return np.where(inside, val, 0.0)


@dataclass
class PinchedAverageReport:
    x: tuple
    delta: float
    window: str
    N_grid: tuple
    values: np.ndarray
    sigma0: float
    exponent: float
    exponent_r2: float
    differences: np.ndarray
    flags: list

    def to_dict(self):
        d = asdict(self)
        d["x"] = [float(v) for v in self.x]
        for key in ("values", "differences"):
            d[key] = [float(v) for v in d[key]]
        return d


def pinched_average(P: HalfspacePolytope, x, delta: float, window=bump_window,
                    N_grid=(50, 100, 200, 400), tol: float = 1e-12,
                    window_name: str = None) -> PinchedAverageReport:
    """Section norm of weight ``N x`` averaged against ``window(N^delta (x - y))``.

    ``x`` must be rational so that ``N x`` is a lattice point at every
    level of the grid.  The report carries a power-law fit of the
    successive differences: ``|v_{j+1} - v_j| ~ N^-exponent``.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    x = tuple(Fraction(v) for v in np.atleast_1d(x))
    grid = tuple(N_grid)
    flags = []
    values = []
    xf = np.array([float(v) for v in x])
    for N in grid:
        if any((v * N).denominator != 1 for v in x):
            raise ValueError(f"N x is not a lattice point at N={N}")
        ctx = KernelContext(P, N, tol=tol)
        scale = N ** delta
        val = ctx.transform(lambda Y: window(scale * (xf[None, :] - Y)), x)
        if val == 0.0:
            flags.append(f"window support misses the polytope at N={N}")
        values.append(val)
    values = np.array(values)
    diffs = np.diff(values)
    exponent, r2 = math.nan, math.nan
    sigma0 = float(values[-1])
    if len(diffs) >= 2 and np.all(np.abs(diffs) > 0):
        slope, r2 = loglog_slope(np.asarray(grid[1:], dtype=float), diffs)
        exponent = -slope
        ratio = grid[-1] / grid[-2]
        if exponent > 0:
            sigma0 = float(values[-1] + diffs[-1] / (ratio ** exponent - 1.0))
    name = window_name or getattr(window, "__name__", "window")
    return PinchedAverageReport(x, delta, name, grid, values, sigma0, exponent, r2, diffs, flags)
