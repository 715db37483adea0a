"""Phase function, normalized kernel, and section norms on a Delzant polytope.

For points ``x, y`` of the polytope the phase is

    phi(x, y) = sum_i l_i(x) log l_i(y) - l_i(y)

with the convention ``0 log 0 = 0``.  The level-``N`` kernel is
``K_N(x, y) = exp(N phi(x, y)) / c_N(x)`` where ``c_N(x)`` integrates the
numerator over the polytope, and the transform of a function ``f`` is
``f#_N(x) = int K_N(x, y) f(y) dy``.  Weight-``k`` section norms are the
kernel rows at the lattice points ``x = k / N``.

All of this is carried out in log space; exponentials are taken only at
the very end.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import null_space

from . import quadrature as quad
from .polytope import HalfspacePolytope

FACE_TOL = 1e-12
GRADING = 4
# exponents N * l_i(x) at or above this are smooth enough without grading
GRADING_LIMIT = 12


class OptimizationError(RuntimeError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


@dataclass(frozen=True)
class PhaseEvaluation:
    value: float
    gradient_y: np.ndarray = None
    hessian_y: np.ndarray = None


def _exact(x):
    return all(isinstance(v, (int, Fraction)) for v in x)


def as_point(P, x):
    """Normalize ``x`` to a tuple (Fractions stay exact) of length ``P.dim``."""
    if np.ndim(x) == 0:
        x = (x,)
    x = tuple(x)
    if len(x) != P.dim:
        raise ValueError(f"expected a point of dimension {P.dim}, got {len(x)}")
    return tuple(v if isinstance(v, (int, Fraction)) else float(v) for v in x)


def distances_at(P: HalfspacePolytope, x) -> np.ndarray:
    """Float lattice distances at ``x`` with tight facets set exactly to zero.

    Exact zeros are detected exactly for rational ``x`` and within
    ``FACE_TOL`` otherwise.  Raises if ``x`` lies outside the polytope.
    """
    x = as_point(P, x)
    vals = P.lattice_distances(x).values
    if vals.dtype == object:
        if any(v < 0 for v in vals):
            raise ValueError(f"point {x} is outside the polytope")
        return np.array([float(v) for v in vals])
    vals = np.asarray(vals, dtype=float)
    scale = 1.0 + float(np.max(np.abs(P.offset_vector)))
    if np.any(vals < -FACE_TOL * scale):
        raise ValueError(f"point {x} is outside the polytope")
    return np.where(np.abs(vals) <= FACE_TOL * scale, 0.0, vals)


def log_phase(P: HalfspacePolytope, lx: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``phi(x, y)`` for every row of ``Y``, given ``lx = distances_at(P, x)``."""
    L = np.clip(P.distances(Y), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lx > 0, lx * np.log(L), 0.0) - L
    return terms.sum(axis=1)


def phi(P: HalfspacePolytope, x, y, derivatives: bool = True) -> PhaseEvaluation:
    lx = distances_at(P, x)
    ly = distances_at(P, y)
    value = float(log_phase(P, lx, np.array([[float(c) for c in as_point(P, y)]]))[0])
    if not derivatives or not np.isfinite(value):
        return PhaseEvaluation(value)
    U = P.normal_matrix
    pos = lx > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pos, lx / np.where(ly > 0, ly, 1.0), 0.0)
        curv = np.where(pos, lx / np.where(ly > 0, ly, 1.0) ** 2, 0.0)
    # d l_i = -u_i
    grad = -(ratio - 1.0) @ U
    hess = -(U.T * curv) @ U
    return PhaseEvaluation(value, grad, hess)


def argmax_phi(P: HalfspacePolytope, x, tol: float = 1e-10, max_iter: int = 100,
               start=None, return_trace: bool = False):
    """Maximize ``y -> phi(x, y)`` by damped Newton ascent on the face of ``x``.

    The face is found exactly for rational ``x``; the ascent starts from the
    face barycenter (or ``start``) and stops once the gradient along the
    face is below ``tol``.
    """
    lx = distances_at(P, x)
    active = [i for i in range(P.n_facets) if lx[i] == 0]
    if len(active) and len(P.face_vertices(active)) == 0:
        raise ValueError("inconsistent face for x")
    k = P.dim - len(active)
    if k == 0:
        y = np.array([float(c) for c in P.face_vertices(active)[0].point])
        return (y, []) if return_trace else y
    U = P.normal_matrix
    B = null_space(U[active]) if active else np.eye(P.dim)
    free = np.array([i not in active for i in range(P.n_facets)])
    y = np.array([float(c) for c in (start if start is not None else P.barycenter(active))])
    Uf, cf, lf = U[free], P.offset_vector[free], lx[free]

    def restricted(y):
        L = cf - Uf @ y
        if np.any(L <= 0):
            return -np.inf, None, None
        val = float(np.sum(lf * np.log(L) - L))
        g = B.T @ (-(lf / L - 1.0) @ Uf)
        H = B.T @ (-(Uf.T * (lf / L**2)) @ Uf) @ B
        return val, g, H

    trace = []
    val, g, H = restricted(y)
    for _ in range(max_iter):
        gnorm = float(np.linalg.norm(g))
        trace.append((y.copy(), val, gnorm))
        if gnorm < tol:
            return (y, trace) if return_trace else y
        step = -np.linalg.solve(H, g)
        alpha = 1.0
        while alpha > 1e-12:
            cand = y + alpha * (B @ step)
            cval, cg, cH = restricted(cand)
            if cval >= val + 1e-4 * alpha * float(g @ step) or (np.isfinite(cval) and abs(cval - val) < 1e-15 * max(1.0, abs(val))):
                break
            alpha *= 0.5
        else:
            break
        y, val, g, H = cand, cval, cg, cH
    raise OptimizationError(f"Newton ascent did not converge for x={x}", trace)


def _key(x):
    return tuple(Fraction(v) if isinstance(v, (int, Fraction)) else float(v) for v in x)


class KernelContext:
    """A polytope at a fixed level ``N`` with a memo of ``log c_N(x)``.

    The memo is keyed by the exact point (rational when ``x`` is given as
    Fractions, e.g. ``x = k / N``).  Filling it from several threads is
    safe: the computation is deterministic, so racing writers store the
    same value.
    """

    def __init__(self, polytope: HalfspacePolytope, N: int, tol: float = 1e-11,
                 order: int = quad.DEFAULT_ORDER, max_evals: int = quad.DEFAULT_MAX_EVALS,
                 grading: int = GRADING):
        if int(N) != N or N < 1:
            raise ValueError("level N must be a positive integer")
        self.polytope = polytope
        self.N = int(N)
        self.tol = tol
        self.order = order
        self.max_evals = max_evals
        self.grading = grading
        self.log_norm_cache = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"KernelContext(N={self.N}, dim={self.polytope.dim}, cached={len(self.log_norm_cache)})"

    def _log_weight(self, x, power=1):
        lx = distances_at(self.polytope, x)
        scale = self.N * power
        return lambda Y: scale * log_phase(self.polytope, lx, Y)

    def _grading(self, x, power=1):
        """Grading power for the weight at ``x``: only fractional, small exponents need it."""
        if self.grading <= 1:
            return 1
        vals = self.polytope.lattice_distances(as_point(self.polytope, x)).values
        for v in vals:
            a = v * self.N * power
            if 0 < a < GRADING_LIMIT and abs(float(a) - round(float(a))) > 1e-9:
                return self.grading
        return 1

    def _apex(self, x):
        return np.array([float(c) for c in as_point(self.polytope, x)])

    def log_c(self, x, power: int = 1) -> float:
        """``log int exp(power * N * phi(x, y)) dy`` (memoized)."""
        x = as_point(self.polytope, x)
        key = (_key(x), power)
        with self._lock:
            if key in self.log_norm_cache:
                return self.log_norm_cache[key]
        res = quad.integrate_log(self.polytope, self._log_weight(x, power), self.tol,
                                 apex=self._apex(x), order=self.order, max_evals=self.max_evals,
                                 grading=self._grading(x, power))
        with self._lock:
            return self.log_norm_cache.setdefault(key, float(res.log_value))

    def log_kernel(self, x, y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(y, dtype=float).reshape(-1, self.polytope.dim))
        return self._log_weight(x)(Y) - self.log_c(x)

    def kernel_eval(self, x, y):
        """``K_N(x, y)``; ``y`` may be one point or an ``(M, n)`` array."""
        out = np.exp(self.log_kernel(x, y))
        return float(out[0]) if np.ndim(y) <= 1 and out.size == 1 else out

    def transform(self, f, x, tol: float = None):
        """``f#_N(x)``, computed as a ratio of integrals on one adaptive mesh.

        ``f`` is vectorized over ``(M, n)`` arrays; it may return ``(M, q)``
        to transform several functions at once.
        """
        x = as_point(self.polytope, x)
        value, _, _ = quad.expectation(self.polytope, self._log_weight(x), f,
                                       self.tol if tol is None else tol, apex=self._apex(x),
                                       order=self.order, max_evals=self.max_evals,
                                       grading=self._grading(x))
        return value

    def lattice_point(self, k):
        k = tuple(int(v) for v in np.atleast_1d(k))
        if len(k) != self.polytope.dim:
            raise ValueError("weight has the wrong dimension")
        if any(sum(u * kv for u, kv in zip(un, k)) > self.N * c
               for un, c in zip(self.polytope.normals, self.polytope.offsets)):
            raise ValueError(f"{k} is not a lattice point of {self.N} * polytope")
        return tuple(Fraction(v, self.N) for v in k)

    def log_section_norm(self, k, y) -> np.ndarray:
        return self.log_kernel(self.lattice_point(k), y)

    def section_norm(self, k, y):
        """Norm squared of the weight-``k`` section pushed forward to ``y``."""
        out = np.exp(self.log_section_norm(k, y))
        return float(out[0]) if np.ndim(y) <= 1 and out.size == 1 else out

    def log_localization_ratio(self, f, g, x) -> float:
        """``log(|int e^{N phi} g| / |int e^{N phi} f|)``."""
        x = as_point(self.polytope, x)

        def both(Y):
            return np.stack([np.asarray(g(Y), dtype=float), np.asarray(f(Y), dtype=float)], axis=1)

        res = quad.integrate_log(self.polytope, self._log_weight(x), self.tol, factors=both,
                                 apex=self._apex(x), order=self.order, max_evals=self.max_evals,
                                 grading=self._grading(x))
        lg, lf = res.log_value
        if res.sign[1] == 0:
            raise ZeroDivisionError("the f-integral vanishes")
        return float(lg - lf)

    def localization_ratio(self, f, g, x) -> float:
        return float(np.exp(self.log_localization_ratio(f, g, x)))


# functional aliases ----------------------------------------------------------------

def log_c(ctx: KernelContext, x) -> float:
    return ctx.log_c(x)


def kernel_eval(ctx: KernelContext, x, y):
    return ctx.kernel_eval(x, y)


def transform(ctx: KernelContext, f, x):
    return ctx.transform(f, x)


def section_norm(ctx: KernelContext, k, y):
    return ctx.section_norm(k, y)


def localization_ratio(ctx: KernelContext, f, g, x) -> float:
    return ctx.localization_ratio(f, g, x)
