"""Adaptive cubature over polytopes, their faces, and level sets.

The domain is cut into simplices (a fan from the vertex barycenter, or
from a caller-chosen apex), and each simplex carries a tensor
Gauss-Legendre rule pulled back through the collapsed-coordinate (Duffy)
map.  Cells whose high/low order estimates disagree the most are bisected
along their longest edge until the requested tolerance is met.

Integrands are vectorized: they receive an ``(M, n)`` array of points and
return ``(M,)`` values (or ``(M, q)`` for several integrands sharing one
mesh).

In log mode every cell keeps its own exponent shift, so integrands of the
form ``exp(N * phase)`` are summed without under- or overflow.  Final
accumulation uses :func:`math.fsum` in a fixed cell order, which keeps the
result bit-identical from run to run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_ORDER = 12
DEFAULT_TOL = 1e-9
DEFAULT_LOG_TOL = 1e-8
DEFAULT_MAX_EVALS = 2_000_000


class QuadratureError(RuntimeError):
    """Raised when the evaluation budget runs out; carries the partial result."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class QuadratureResult:
    """Outcome of an adaptive integration.

    In plain mode ``value`` is the integral and ``error_estimate`` is an
    absolute bound.  In log mode ``log_value`` is ``log|integral|``,
    ``sign`` its sign, and ``error_estimate`` is relative.  With several
    integrands the fields are arrays.
    """

    value: object
    error_estimate: object
    cells_used: int
    evaluations: int
    log_value: object = None
    sign: object = None
    log_mode: bool = False


@dataclass(frozen=True)
class SimplexDecomposition:
    simplices: list
    volumes: np.ndarray = field(repr=False)

    @property
    def total_volume(self) -> float:
        return math.fsum(self.volumes)


def decompose(region, apex=None) -> SimplexDecomposition:
    simplices = region.simplices(apex=apex)
    n = region.dim
    vols = np.array([abs(np.linalg.det(s[1:] - s[0])) / math.factorial(n) for s in simplices])
    keep = vols > 1e-15 * max(1.0, float(vols.max(initial=0.0)))
    return SimplexDecomposition([s for s, k in zip(simplices, keep) if k], vols[keep])


# reference rules ---------------------------------------------------------------

@lru_cache(maxsize=None)
def simplex_rule(k: int, order: int):
    """Barycentric nodes and weights (summing to 1) on the ``k``-simplex.

    The collapsed map sends the unit cube to the simplex with the whole face
    ``u_1 = 1`` landing on vertex 0, so nodes cluster at the first vertex.
    """
    if k == 0:
        return np.ones((1, 1)), np.ones(1)
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([t] * k), indexing="ij")
    U = np.stack([g.reshape(-1) for g in grids], axis=1)
    W = np.ones(U.shape[0])
    for wg in np.meshgrid(*([w] * k), indexing="ij"):
        W = W * wg.reshape(-1)
    bary = np.empty((U.shape[0], k + 1))
    rest = np.ones(U.shape[0])
    for j in range(k):
        bary[:, j] = rest * U[:, j]
        if j < k - 1:
            W = W * (1.0 - U[:, j]) ** (k - 1 - j)
        rest = rest * (1.0 - U[:, j])
    bary[:, k] = rest
    W = W * math.factorial(k)
    return bary, W


def _bisect(cells: np.ndarray, vols: np.ndarray):
    """Split each simplex in two across the midpoint of its longest edge."""
    C, kp1, _ = cells.shape
    if kp1 == 2:
        mid = 0.5 * (cells[:, 0] + cells[:, 1])
        a = cells.copy()
        b = cells.copy()
        a[:, 1] = mid
        b[:, 0] = mid
        return np.concatenate([a, b]), np.concatenate([vols / 2, vols / 2])
    pairs = [(i, j) for i in range(kp1) for j in range(i + 1, kp1)]
    lengths = np.stack([np.sum((cells[:, i] - cells[:, j]) ** 2, axis=1) for i, j in pairs], axis=1)
    pick = np.argmax(lengths, axis=1)
    a = cells.copy()
    b = cells.copy()
    rows = np.arange(C)
    I = np.array([p[0] for p in pairs])[pick]
    J = np.array([p[1] for p in pairs])[pick]
    mid = 0.5 * (cells[rows, I] + cells[rows, J])
    a[rows, I] = mid
    b[rows, J] = mid
    return np.concatenate([a, b]), np.concatenate([vols / 2, vols / 2])


class _Engine:
    """Shared adaptive loop for plain and log-scaled integration."""

    def __init__(self, cells, vols, evaluate, log_mode, order, max_evals):
        self.k = cells.shape[1] - 1
        self.evaluate = evaluate
        self.log_mode = log_mode
        self.hi = simplex_rule(self.k, order)
        self.lo = simplex_rule(self.k, max(2, order - 4))
        self.max_evals = max_evals
        self.evals = 0
        self.cells = cells
        self.vols = vols
        self.shift, self.val, self.err = self._estimate(cells, vols)

    def _call(self, pts):
        self.evals += pts.shape[0]
        out = self.evaluate(pts)
        if self.log_mode:
            lw, fac = out
            lw = np.asarray(lw, dtype=float).reshape(-1)
            fac = None if fac is None else np.asarray(fac, dtype=float).reshape(lw.size, -1)
            return lw, fac
        return None, np.asarray(out, dtype=float).reshape(pts.shape[0], -1)

    def _estimate(self, cells, vols):
        C = cells.shape[0]
        (bh, wh), (bl, wl) = self.hi, self.lo
        ph = np.matmul(bh, cells)
        pl = np.matmul(bl, cells)
        n = cells.shape[2]
        pts = np.concatenate([ph.reshape(-1, n), pl.reshape(-1, n)])
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lw, fac = self._call(pts)
        nh = ph.shape[1]
        nl = pl.shape[1]
        if lw is None:
            shift = np.zeros(C)
            wexp = np.ones(pts.shape[0])
        else:
            lwh = lw[: C * nh].reshape(C, nh)
            lwl = lw[C * nh:].reshape(C, nl)
            shift = np.maximum(lwh.max(axis=1), lwl.max(axis=1))
            if np.any(np.isnan(shift)) or np.any(shift == np.inf):
                raise QuadratureError("log-integrand produced NaN or +inf")
            safe = np.where(np.isfinite(shift), shift, 0.0)
            wexp = np.concatenate([np.exp(lwh - safe[:, None]).reshape(-1),
                                   np.exp(lwl - safe[:, None]).reshape(-1)])
        if fac is None:
            fac = np.ones((pts.shape[0], 1))
        q = fac.shape[1]
        g = fac * wexp[:, None]
        g = np.where(wexp[:, None] == 0.0, 0.0, g)
        if not np.all(np.isfinite(g)):
            raise QuadratureError("integrand is not finite on the domain")
        gh = g[: C * nh].reshape(C, nh, q)
        gl = g[C * nh:].reshape(C, nl, q)
        vh = np.matmul(wh, gh) * vols[:, None]
        vl = np.matmul(wl, gl) * vols[:, None]
        return shift, vh, np.abs(vh - vl)

    def totals(self):
        finite = np.isfinite(self.shift)
        if not np.any(finite):
            return -np.inf, np.zeros(self.val.shape[1]), np.zeros(self.val.shape[1]), np.zeros(len(self.shift))
        top = self.shift[finite].max()
        scale = np.where(finite, np.exp(np.where(finite, self.shift, 0.0) - top), 0.0)
        q = self.val.shape[1]
        tot = np.array([math.fsum(self.val[:, j] * scale) for j in range(q)])
        err = np.array([math.fsum(self.err[:, j] * scale) for j in range(q)])
        return top, tot, err, scale

    def run(self, target):
        """Refine until ``err_q <= target(tot, top)_q`` for every integrand."""
        while True:
            top, tot, err, scale = self.totals()
            allowed = target(tot)
            if np.all(err <= allowed):
                return top, tot, err
            if self.evals >= self.max_evals:
                raise QuadratureError(
                    f"no convergence after {self.evals} evaluations (error {err.max():.3g})",
                    partial=(top, tot, err))
            ratio = np.max(self.err * scale[:, None] / np.maximum(allowed, 1e-300)[None, :], axis=1)
            # split the cells carrying the largest errors: everything above an
            # equal share of the budget, but never cells far below the worst one
            cut = max(1.0 / len(ratio), 0.1 * float(ratio.max()))
            pick = np.flatnonzero(ratio >= cut)
            keep = np.ones(len(self.cells), dtype=bool)
            keep[pick] = False
            new_cells, new_vols = _bisect(self.cells[pick], self.vols[pick])
            s, v, e = self._estimate(new_cells, new_vols)
            self.cells = np.concatenate([self.cells[keep], new_cells])
            self.vols = np.concatenate([self.vols[keep], new_vols])
            self.shift = np.concatenate([self.shift[keep], s])
            self.val = np.concatenate([self.val[keep], v])
            self.err = np.concatenate([self.err[keep], e])


def _cells_for(region, apex):
    dec = decompose(region, apex)
    return np.array(dec.simplices), np.asarray(dec.volumes)


def _squeeze(a, vector):
    return a if vector else float(a[0])


def integrate(region, g, tol: float = DEFAULT_TOL, *, apex=None, order: int = DEFAULT_ORDER,
              max_evals: int = DEFAULT_MAX_EVALS, cells=None) -> QuadratureResult:
    """Integrate ``g`` over a polytope (or shifted polytope).

    The stopping rule is ``error <= tol * max(1, |value|)`` for each output
    column of ``g``.
    """
    if cells is None:
        cells, vols = _cells_for(region, apex)
    else:
        cells, vols = cells
    probe = np.asarray(g(cells[0, :1]))
    vector = probe.ndim == 2
    eng = _Engine(cells, vols, g, False, order, max_evals)
    try:
        _, tot, err = eng.run(lambda tot: tol * np.maximum(1.0, np.abs(tot)))
    except QuadratureError as exc:
        _, tot, err = exc.partial
        exc.partial = QuadratureResult(_squeeze(tot, vector), _squeeze(err, vector),
                                       len(eng.cells), eng.evals)
        raise
    return QuadratureResult(_squeeze(tot, vector), _squeeze(err, vector), len(eng.cells), eng.evals)


def radial_grading(region, apex, power: int):
    """Self-map of ``region`` that grades points toward the facets away from ``apex``.

    With the gauge ``lam(y) = max_i <u_i, y - apex> / l_i(apex)`` (over the
    facets not containing ``apex``) a point at gauge ``lam`` is moved
    radially to gauge ``1 - (1 - lam)^power``.  On each cell of the fan
    from ``apex`` the map is smooth, and a factor ``l_i(y)^a`` of the
    integrand becomes ``(1 - lam)^(power * (a + 1) - 1)`` times smooth
    terms, which removes the algebraic edge singularities that isotropic
    refinement resolves only slowly.

    Returns ``(points -> (mapped points, log Jacobian))``.
    """
    A = np.asarray(apex, dtype=float)
    U = region.normal_matrix
    lA = region.offset_vector - U @ A
    far = lA > 1e-12 * (1.0 + np.max(np.abs(region.offset_vector)))
    G = U[far] / lA[far][:, None]
    n = A.size

    def mapping(Y):
        D = Y - A
        lam = np.clip((D @ G.T).max(axis=1), 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_rest = np.log1p(-lam)
            rho = -np.expm1(power * log_rest)
            scale = np.where(lam > 0, rho / np.where(lam > 0, lam, 1.0), float(power))
            logj = (n - 1) * np.log(scale) + math.log(power) + (power - 1) * log_rest
        return A + scale[:, None] * D, logj

    return mapping


def integrate_log(region, log_g, tol: float = DEFAULT_LOG_TOL, *, factors=None, floors=None,
                  apex=None, order: int = DEFAULT_ORDER, max_evals: int = DEFAULT_MAX_EVALS,
                  cells=None, grading: int = 1) -> QuadratureResult:
    """Integrate ``exp(log_g) * factor`` in log-scaled arithmetic.

    ``log_g`` may return ``-inf`` (treated as an exact zero).  Without
    ``factors`` the result is ``log of the integral of exp(log_g)``.  With
    ``factors`` (a vectorized function returning ``(M,)`` or ``(M, q)``)
    one integral per column is returned, sharing the weight
    ``exp(log_g)``; ``log_value`` then holds ``log|I_q|`` and ``sign``
    their signs.

    Convergence is relative: ``err_q <= tol * max(|I_q|, floors_q * I_0)``
    where ``I_0`` is the integral of the bare weight.  ``floors`` lets a
    signed factor with near-zero mean stop at an absolute accuracy.

    ``grading > 1`` (requires ``apex``) integrates after the substitution
    :func:`radial_grading`; use it for weights with fractional powers of
    the lattice distances.
    """
    if cells is None:
        cells, vols = _cells_for(region, apex)
    else:
        cells, vols = cells
    if grading > 1:
        if apex is None:
            raise ValueError("grading needs an apex")
        mapping = radial_grading(region, apex, grading)
        raw_log_g, raw_factors = log_g, factors

        def log_g(Y):
            Z, logj = mapping(Y)
            return np.asarray(raw_log_g(Z), dtype=float).reshape(-1) + logj
        if factors is not None:
            def factors(Y):
                return raw_factors(mapping(Y)[0])
    if factors is None:
        def evaluate(pts):
            return log_g(pts), None
        vector = False
        floors_arr = np.zeros(1)
    else:
        probe = np.asarray(factors(cells[0, :1]))
        vector = probe.ndim == 2
        q = 1 if probe.ndim < 2 else probe.shape[1]

        def evaluate(pts):
            fac = np.asarray(factors(pts), dtype=float).reshape(pts.shape[0], q)
            return log_g(pts), np.concatenate([np.ones((pts.shape[0], 1)), fac], axis=1)
        floors_arr = np.zeros(q + 1) if floors is None else np.concatenate([[0.0], np.broadcast_to(floors, (q,))])

    def target(tot):
        ref = np.maximum(np.abs(tot), floors_arr * abs(tot[0]))
        return tol * ref

    eng = _Engine(cells, vols, evaluate, True, order, max_evals)

    def pack(top, tot, err):
        with np.errstate(divide="ignore"):
            logs = top + np.log(np.abs(tot))
        rel = np.where(tot != 0, err / np.where(tot != 0, np.abs(tot), 1.0), 0.0)
        if factors is not None:
            logs, tot, rel = logs[1:], tot[1:], rel[1:]
        with np.errstate(over="ignore"):
            vals = np.sign(tot) * np.exp(logs)
        return QuadratureResult(_squeeze(vals, vector), _squeeze(rel, vector), len(eng.cells),
                                eng.evals, log_value=_squeeze(logs, vector),
                                sign=_squeeze(np.sign(tot), vector), log_mode=True)

    try:
        top, tot, err = eng.run(target)
    except QuadratureError as exc:
        exc.partial = pack(*exc.partial)
        raise
    res = pack(top, tot, err)
    if factors is not None:
        res.normalizer = top + math.log(tot[0]) if tot[0] > 0 else -math.inf
    return res


def expectation(region, log_w, f, tol: float = 1e-10, *, apex=None, order: int = DEFAULT_ORDER,
                max_evals: int = DEFAULT_MAX_EVALS, grading: int = 1):
    """Ratio ``int exp(log_w) f / int exp(log_w)`` computed on one mesh.

    Returns ``(value, log_normalizer, result)``; the absolute accuracy of
    ``value`` is roughly ``tol * max(1, |value|)``.
    """
    res = integrate_log(region, log_w, tol, factors=f, floors=1.0, apex=apex, order=order,
                        max_evals=max_evals, grading=grading)
    ratio = np.asarray(res.sign) * np.exp(np.asarray(res.log_value) - res.normalizer)
    ratio = np.where(np.asarray(res.sign) == 0, 0.0, ratio)
    if np.ndim(ratio) == 0:
        ratio = float(ratio)
    return ratio, res.normalizer, res


# faces -------------------------------------------------------------------------

def face_cells(P, face):
    """Simplices of a face with their lattice-normalized volumes.

    The lattice measure on a face is Lebesgue measure in the free
    coordinates of a vertex chart, where a primitive lattice segment has
    length one.
    """
    active = frozenset(face.active_set if hasattr(face, "active_set") else face)
    verts = P.face_vertices(active)
    if not verts:
        raise ValueError("face is empty")
    k = P.dim - len(active)
    if k == P.dim:
        return _cells_for(P, None)
    chart = P.vertex_chart(verts[0].point)
    free = [j for j, i in enumerate(chart.facets) if i not in active]
    simplices = P.simplices(active=active)
    cells = np.array(simplices)
    if k == 0:
        return cells, np.ones(1)
    Z = chart(cells)[:, :, free]
    vols = np.abs(np.linalg.det(Z[:, 1:] - Z[:, :1])) / math.factorial(k)
    return cells, vols


def integrate_face(P, face, g, tol: float = DEFAULT_TOL, **kw) -> QuadratureResult:
    """Integrate ``g`` over a proper face with the lattice-normalized measure."""
    active = frozenset(face.active_set if hasattr(face, "active_set") else face)
    if not active:
        raise ValueError("integrate_face expects a proper face")
    return integrate(P, g, tol, cells=face_cells(P, active), **kw)


# level sets ---------------------------------------------------------------------

def _cut_fraction(s: np.ndarray) -> float:
    """Fraction of a simplex where the affine interpolant of ``s`` is >= 0."""
    k = len(s) - 1
    if np.all(s >= 0):
        return 1.0
    if np.all(s < 0):
        return 0.0
    if k == 1:
        a, b = s
        pos = a if a >= 0 else b
        return float(pos / (abs(a) + abs(b)))
    if k == 2:
        # clip the reference triangle in barycentric coordinates
        poly = [np.eye(3)[i] for i in range(3)]
        vals = list(s)
        out = []
        for i in range(3):
            p, q = poly[i], poly[(i + 1) % 3]
            a, b = vals[i], vals[(i + 1) % 3]
            if a >= 0:
                out.append(p)
            if (a >= 0) != (b >= 0):
                t = a / (a - b)
                out.append(p + t * (q - p))
        if len(out) < 3:
            return 0.0
        xy = np.array([[o[1], o[2]] for o in out])
        x, y = xy[:, 0], xy[:, 1]
        area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        return float(area / 0.5)
    span = float(np.max(np.abs(s)))
    s = s + span * 1e-9 * np.arange(len(s))
    frac = 0.0
    for i in range(len(s)):
        if s[i] > 0:
            frac += s[i] ** k / np.prod([s[i] - s[j] for j in range(len(s)) if j != i])
    return float(min(1.0, max(0.0, frac)))


def superlevel_volume(region, g, t: float, tol: float = 1e-7, *, apex=None,
                      max_cells: int = 400_000) -> float:
    """Lebesgue volume of ``{y in region : g(y) >= t}``.

    Cells straddling the level set are bisected; inside them the set is
    approximated by the cut of the linear interpolant of ``g``.  Refinement
    stops when successive estimates agree to ``tol``.
    """
    if t == -math.inf:
        return float(region.volume)
    cells, vols = _cells_for(region, apex)
    k = cells.shape[1] - 1
    probe_b, _ = simplex_rule(k, 3)
    bary = np.concatenate([np.eye(k + 1), probe_b])
    full = 0.0
    prev = None
    while True:
        pts = np.matmul(bary, cells)
        vals = np.asarray(g(pts.reshape(-1, cells.shape[2])), dtype=float).reshape(len(cells), -1) - t
        above = np.all(vals >= 0, axis=1)
        below = np.all(vals < 0, axis=1)
        mixed = ~(above | below)
        full += math.fsum(vols[above])
        part = math.fsum(v * _cut_fraction(s[: k + 1]) for v, s in zip(vols[mixed], vals[mixed]))
        est = full + part
        if prev is not None and abs(est - prev) <= tol:
            return est
        if not np.any(mixed):
            return est
        if len(cells) > max_cells:
            raise QuadratureError("superlevel_volume exceeded its cell budget", partial=est)
        prev = est
        cells, vols = _bisect(cells[mixed], vols[mixed])
