"""Delzant polytopes in facet-inequality form.

A polytope is stored as a list of outward primitive normals ``u_i`` and
integer offsets ``c_i``; a point ``x`` belongs to it when
``<u_i, x> <= c_i`` for every facet.  The lattice distance to facet ``i``
is the affine function ``l_i(x) = c_i - <u_i, x>``.

Vertices, faces and volumes are computed in exact rational arithmetic so
that the Delzant check never suffers from rounding.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.optimize import linprog


class PolytopeError(ValueError):
    """Base class for invalid polytope input."""


class PolytopeParseError(PolytopeError):
    pass


class UnboundedPolytopeError(PolytopeError):
    pass


class EmptyPolytopeError(PolytopeError):
    pass


class NonPrimitiveNormalError(PolytopeError):
    pass


class RedundantFacetError(PolytopeError):
    pass


class NonDelzantError(PolytopeError):
    """A vertex whose tight normals do not form a lattice basis."""


class CombinatorialChangeError(PolytopeError):
    """A shifted polytope no longer has the combinatorics of its parent."""


# exact linear algebra helpers ---------------------------------------------

def _det(rows):
    """Determinant of a square matrix of Fractions/ints by elimination."""
    m = [[Fraction(v) for v in row] for row in rows]
    n = len(m)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        for r in range(col + 1, n):
            f = m[r][col] / m[col][col]
            if f:
                for c in range(col, n):
                    m[r][c] -= f * m[col][c]
    return det


def _solve(a, b):
    """Solve ``a x = b`` exactly; returns None when ``a`` is singular."""
    n = len(a)
    m = [[Fraction(v) for v in row] + [Fraction(bv)] for row, bv in zip(a, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[col])]
    return tuple(m[r][n] for r in range(n))


def _as_point(x, n):
    """Coerce ``x`` to a tuple of length ``n`` (keeps Fractions exact)."""
    if np.ndim(x) == 0:
        x = (x,)
    x = tuple(x)
    if len(x) != n:
        raise ValueError(f"expected a point of dimension {n}, got {len(x)}")
    return tuple(v if isinstance(v, (int, Fraction)) else float(v) for v in x)


def _is_exact(x):
    return all(isinstance(v, (int, Fraction)) for v in x)


# data types --------------------------------------------------------------

@dataclass(frozen=True)
class Facet:
    normal: tuple
    offset: object


@dataclass(frozen=True)
class Vertex:
    point: tuple
    active: frozenset


@dataclass(frozen=True)
class Face:
    """A nonempty face, identified by the set of facets tight on it."""

    active_set: frozenset
    dimension: int


@dataclass(frozen=True)
class LatticeDistanceVector:
    values: np.ndarray

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


@dataclass(frozen=True)
class VertexChart:
    """Unimodular affine map ``z = matrix @ x + translation``.

    It sends ``vertex`` to the origin and the lattice distances of the
    facets listed in ``facets`` to the coordinate functions.
    """

    vertex: tuple
    facets: tuple
    matrix: np.ndarray
    translation: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + np.asarray(self.translation, dtype=float)

    def inverse(self, z):
        z = np.asarray(z, dtype=float) - np.asarray(self.translation, dtype=float)
        inv = np.rint(np.linalg.inv(self.matrix)).astype(np.int64)
        return z @ inv.T


@dataclass(frozen=True, eq=False)
class HalfspacePolytope:
    """Simple polytope ``{x : <u_i, x> <= c_i}`` with fixed facet order.

    This is the common base for validated Delzant polytopes (integer
    offsets) and their shifts (real offsets).  Subclasses populate the
    vertex list.
    """

    normals: tuple
    offsets: tuple
    _vertices: tuple = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return len(self.normals[0])

    @property
    def n_facets(self) -> int:
        return len(self.normals)

    @cached_property
    def normal_matrix(self) -> np.ndarray:
        return np.array(self.normals, dtype=float)

    @cached_property
    def offset_vector(self) -> np.ndarray:
        return np.array([float(c) for c in self.offsets])

    @property
    def facets(self):
        return [Facet(u, c) for u, c in zip(self.normals, self.offsets)]

    # geometry ---------------------------------------------------------

    def lattice_distances(self, x) -> LatticeDistanceVector:
        """``c_i - <u_i, x>`` for every facet; exact for rational ``x``."""
        x = _as_point(x, self.dim)
        if _is_exact(x) and all(isinstance(c, (int, Fraction)) for c in self.offsets):
            vals = [Fraction(c) - sum(Fraction(u) * xi for u, xi in zip(un, x))
                    for un, c in zip(self.normals, self.offsets)]
            return LatticeDistanceVector(np.array(vals, dtype=object))
        return LatticeDistanceVector(self.offset_vector - self.normal_matrix @ np.array(x, dtype=float))

    def distances(self, points) -> np.ndarray:
        """Vectorized lattice distances for an ``(M, n)`` array of points."""
        points = np.asarray(points, dtype=float)
        return self.offset_vector - points @ self.normal_matrix.T

    def contains(self, x, tol: float = 0.0) -> bool:
        return all(v >= -tol for v in self.lattice_distances(x).values)

    def active_set(self, x, tol: float = 1e-12) -> frozenset:
        """Facets tight at ``x`` (exact for rational input)."""
        vals = self.lattice_distances(x).values
        if vals.dtype == object:
            return frozenset(i for i, v in enumerate(vals) if v == 0)
        return frozenset(i for i, v in enumerate(vals) if abs(v) <= tol)

    def face_of(self, x, tol: float = 1e-12) -> Face:
        """The face containing ``x`` in its relative interior."""
        if not self.contains(x, tol=tol):
            raise ValueError(f"point {x} is outside the polytope")
        active = self.active_set(x, tol)
        return Face(active, self.dim - len(active))

    @property
    def vertices(self) -> list:
        return [v.point for v in self._vertices]

    @property
    def vertex_records(self) -> tuple:
        return self._vertices

    def face_vertices(self, active) -> list:
        active = frozenset(active)
        return [v for v in self._vertices if active <= v.active]

    def faces(self) -> list:
        """All nonempty faces, including the polytope itself (empty active set)."""
        seen = set()
        for v in self._vertices:
            for r in range(len(v.active) + 1):
                for sub in itertools.combinations(sorted(v.active), r):
                    seen.add(frozenset(sub))
        return sorted((Face(s, self.dim - len(s)) for s in seen),
                      key=lambda f: (-f.dimension, sorted(f.active_set)))

    def barycenter(self, active=frozenset()):
        verts = [v.point for v in self.face_vertices(active)]
        if all(_is_exact(p) for p in verts):
            return tuple(sum(c) / Fraction(len(verts)) for c in zip(*verts))
        return tuple(float(np.mean(c)) for c in zip(*verts))

    def bounding_box(self):
        pts = np.array([[float(c) for c in p] for p in self.vertices])
        return pts.min(axis=0), pts.max(axis=0)

    def simplices(self, apex=None, active=frozenset()) -> list:
        """Fan triangulation of a face (default: the whole polytope).

        Each simplex is an ``(k+1, n)`` float array whose first row is the
        apex.  Without an explicit apex the fan is centred at the vertex
        barycenter, and sub-faces are fanned recursively from theirs.
        Simplices that degenerate because the apex lies on a facet are
        dropped.
        """
        active = frozenset(active)
        if apex is None:
            apex = self.barycenter(active)
        apex = np.array([float(c) for c in apex])
        return [np.array(s) for s in self._fan(active, apex)]

    def _fan(self, active, apex):
        k = self.dim - len(active)
        if k == 0:
            return [[apex]]
        scale = 1.0 + float(np.max(np.abs(self.offset_vector)))
        dist = self.offset_vector - self.normal_matrix @ apex
        out = []
        for j in range(self.n_facets):
            if j in active:
                continue
            sub = active | {j}
            if not self.face_vertices(sub):
                continue
            if dist[j] <= 1e-12 * scale:
                continue
            sub_apex = np.array([float(c) for c in self.barycenter(sub)])
            for s in self._fan(sub, sub_apex):
                out.append([apex] + s)
        return out

    @cached_property
    def volume(self) -> float:
        total = 0.0
        n = self.dim
        for s in self.simplices():
            total += abs(np.linalg.det(s[1:] - s[0])) / math.factorial(n)
        return total


@dataclass(frozen=True, eq=False)
class DelzantPolytope(HalfspacePolytope):
    """Validated Delzant polytope with integer offsets.

    Construct through :func:`make_polytope` or :func:`load_polytope`; both
    run the full validation.
    """

    def __eq__(self, other):
        return (isinstance(other, DelzantPolytope) and self.normals == other.normals
                and self.offsets == other.offsets)

    def __hash__(self):
        return hash((self.normals, self.offsets))

    @cached_property
    def exact_volume(self) -> Fraction:
        n = self.dim
        total = Fraction(0)
        for s in self._exact_fan(frozenset(), self.barycenter()):
            rows = [[a - b for a, b in zip(p, s[0])] for p in s[1:]]
            total += abs(_det(rows))
        return total / math.factorial(n)

    def _exact_fan(self, active, apex):
        if self.dim == len(active):
            return [[apex]]
        dist = self.lattice_distances(apex).values
        out = []
        for j in range(self.n_facets):
            if j in active or not self.face_vertices(active | {j}) or dist[j] == 0:
                continue
            for s in self._exact_fan(active | {j}, self.barycenter(active | {j})):
                out.append([apex] + s)
        return out

    @property
    def volume(self) -> float:
        return float(self.exact_volume)

    def vertex_chart(self, v) -> VertexChart:
        """Unimodular chart carrying vertex ``v`` to the origin.

        Rows of the matrix are ``-u_i`` for the ``n`` facets tight at ``v``
        (in increasing facet order) and the translation is ``c_i``, so the
        chart coordinates are exactly the lattice distances ``l_i``.
        """
        v = tuple(Fraction(c) for c in _as_point(v, self.dim))
        rec = next((r for r in self._vertices if r.point == v), None)
        if rec is None:
            raise ValueError(f"{v} is not a vertex of the polytope")
        idx = tuple(sorted(rec.active))
        mat = np.array([[-u for u in self.normals[i]] for i in idx], dtype=np.int64)
        if abs(_det(mat.tolist())) != 1:
            raise NonDelzantError(f"normals at vertex {v} are not unimodular")
        return VertexChart(v, idx, mat, tuple(Fraction(self.offsets[i]) for i in idx))

    def dilate(self, N: int) -> "DelzantPolytope":
        return make_polytope(self.normals, [N * c for c in self.offsets])

    def shift(self, h) -> "ShiftedPolytope":
        """The region ``<u_i, x> <= c_i + h_i`` with the same combinatorics."""
        h = np.asarray(h, dtype=float).reshape(-1)
        if h.shape != (self.n_facets,):
            raise ValueError(f"shift needs {self.n_facets} entries")
        offsets = tuple(float(c) + float(hi) for c, hi in zip(self.offsets, h))
        if not np.any(h):
            return ShiftedPolytope(self.normals, offsets, self._vertices, parent=self)
        A = self.normal_matrix
        b = np.array(offsets)
        scale = 1.0 + float(np.max(np.abs(b)))
        verts = []
        for rec in self._vertices:
            idx = sorted(rec.active)
            p = np.linalg.solve(A[idx], b[idx])
            slack = b - A @ p
            others = [i for i in range(self.n_facets) if i not in rec.active]
            if np.any(slack[others] <= 1e-12 * scale):
                raise CombinatorialChangeError(
                    f"shift {h.tolist()} changes the combinatorial type near vertex {rec.point}")
            verts.append(Vertex(tuple(float(c) for c in p), rec.active))
        pts = np.array([v.point for v in verts])
        for a, b2 in itertools.combinations(range(len(pts)), 2):
            if np.allclose(pts[a], pts[b2], atol=1e-12 * scale, rtol=0):
                raise CombinatorialChangeError("shift collapses two vertices")
        return ShiftedPolytope(self.normals, offsets, tuple(verts), parent=self)


@dataclass(frozen=True, eq=False)
class ShiftedPolytope(HalfspacePolytope):
    """A Delzant polytope with real-valued, slightly moved facet offsets."""

    parent: DelzantPolytope = field(default=None, repr=False)


# construction --------------------------------------------------------------

def _enumerate_vertices(normals, offsets):
    n = len(normals[0])
    d = len(normals)
    found = {}
    for idx in itertools.combinations(range(d), n):
        sol = _solve([normals[i] for i in idx], [offsets[i] for i in idx])
        if sol is None:
            continue
        dist = [Fraction(c) - sum(Fraction(u) * x for u, x in zip(un, sol))
                for un, c in zip(normals, offsets)]
        if any(v < 0 for v in dist):
            continue
        active = frozenset(i for i, v in enumerate(dist) if v == 0)
        found[sol] = active
    return [Vertex(p, found[p]) for p in sorted(found)]


def make_polytope(normals, offsets) -> DelzantPolytope:
    """Build and validate a Delzant polytope.

    Raises a distinct :class:`PolytopeError` subclass for each failure:
    non-primitive normal, empty or unbounded region, redundant facet,
    or a vertex that is not simple/unimodular.
    """
    try:
        normals = tuple(tuple(int(u) for u in un) for un in normals)
        offsets = tuple(int(c) for c in offsets)
    except (TypeError, ValueError) as exc:
        raise PolytopeParseError(f"normals and offsets must be integers: {exc}") from exc
    if not normals or len(normals) != len(offsets):
        raise PolytopeParseError("need the same positive number of normals and offsets")
    n = len(normals[0])
    if n == 0 or any(len(u) != n for u in normals):
        raise PolytopeParseError("all normals must have the same positive length")
    for u in normals:
        if math.gcd(*u) != 1:
            raise NonPrimitiveNormalError(f"normal {list(u)} is not primitive")

    A = np.array(normals, dtype=float)
    b = np.array(offsets, dtype=float)
    for j in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[j] = -sign
            res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
            if res.status == 2:
                raise EmptyPolytopeError("the inequalities have no common solution")
            if res.status == 3:
                raise UnboundedPolytopeError("the region is unbounded")

    verts = _enumerate_vertices(normals, offsets)
    if len(verts) < n + 1:
        raise EmptyPolytopeError("the region is not full-dimensional")
    for i in range(len(normals)):
        if not any(i in v.active for v in verts):
            raise RedundantFacetError(f"facet {i} is redundant")
    for v in verts:
        if len(v.active) != n:
            tight = sorted(v.active)
            # a facet touching only at a vertex is redundant; otherwise the vertex is singular
            lonely = [i for i in tight if sum(i in w.active for w in verts) < n]
            if lonely:
                raise RedundantFacetError(f"facet {lonely[0]} meets the polytope only in lower dimension")
            raise NonDelzantError(f"vertex {[str(c) for c in v.point]} lies on {len(tight)} facets")
        det = _det([normals[i] for i in sorted(v.active)])
        if abs(det) != 1:
            raise NonDelzantError(
                f"vertex {[str(c) for c in v.point]}: normals of facets "
                f"{sorted(v.active)} have determinant {det}")
    return DelzantPolytope(normals, offsets, tuple(verts))


def load_polytope(source) -> DelzantPolytope:
    """Parse the JSON polytope document ``{"dim": n, "facets": [...]}``.

    ``source`` may be a JSON string, an already-decoded mapping, or a path.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PolytopeParseError(f"invalid JSON: {exc}") from exc
    try:
        dim = int(doc["dim"])
        facets = doc["facets"]
        normals = [f["normal"] for f in facets]
        offsets = [f["offset"] for f in facets]
    except (KeyError, TypeError, ValueError) as exc:
        raise PolytopeParseError(f"document does not match the polytope schema: {exc}") from exc
    for u in normals:
        if not isinstance(u, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in u):
            raise PolytopeParseError(f"normal {u!r} is not a list of integers")
    for c in offsets:
        if isinstance(c, bool) or not isinstance(c, int):
            raise PolytopeParseError(f"offset {c!r} is not an integer")
    if any(len(u) != dim for u in normals):
        raise PolytopeParseError("normal length differs from dim")
    return make_polytope(normals, offsets)


def dump_polytope(P: HalfspacePolytope) -> str:
    return json.dumps({"dim": P.dim,
                       "facets": [{"normal": list(u), "offset": c}
                                  for u, c in zip(P.normals, P.offsets)]},
                      sort_keys=True)


def lattice_points(P: DelzantPolytope, N: int) -> np.ndarray:
    """Integer points of the dilate ``N P`` in lexicographic order.

    Membership is decided with integer arithmetic only.
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    pts = [[Fraction(c) * N for c in p] for p in P.vertices]
    lo = [math.ceil(min(c)) for c in zip(*pts)]
    hi = [math.floor(max(c)) for c in zip(*pts)]
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
    U = np.array(P.normals, dtype=np.int64)
    c = np.array(P.offsets, dtype=np.int64) * N
    keep = np.all(grid @ U.T <= c, axis=1)
    return grid[keep]


# module-level aliases ---------------------------------------------------------

def lattice_distances(P: HalfspacePolytope, x) -> LatticeDistanceVector:
    return P.lattice_distances(x)


def vertex_chart(P: DelzantPolytope, v) -> VertexChart:
    return P.vertex_chart(v)


def shift(P: DelzantPolytope, h) -> ShiftedPolytope:
    return P.shift(h)


def vertices(P: HalfspacePolytope) -> list:
    return P.vertices


def faces(P: HalfspacePolytope) -> list:
    return P.faces()


def contains(P: HalfspacePolytope, x, tol: float = 0.0) -> bool:
    return P.contains(x, tol)


def active_set(P: HalfspacePolytope, x, tol: float = 1e-12) -> frozenset:
    return P.active_set(x, tol)


def dilate(P: DelzantPolytope, N: int) -> DelzantPolytope:
    return P.dilate(N)


# model polytopes used throughout the tests and examples

def interval(length: int = 1) -> DelzantPolytope:
    return make_polytope([[-1], [1]], [0, length])


def simplex(n: int = 2, size: int = 1) -> DelzantPolytope:
    normals = [[-int(i == j) for j in range(n)] for i in range(n)] + [[1] * n]
    return make_polytope(normals, [0] * n + [size])


def cube(n: int = 2, size: int = 1) -> DelzantPolytope:
    normals = [[-int(i == j) for j in range(n)] for i in range(n)]
    normals += [[int(i == j) for j in range(n)] for i in range(n)]
    return make_polytope(normals, [0] * n + [size] * n)


def hirzebruch(a: int = 1, height: int = 1, base: int = 2) -> DelzantPolytope:
    """Trapezoid ``x, y >= 0, y <= height, x + a y <= base``."""
    return make_polytope([[-1, 0], [0, -1], [0, 1], [1, a]], [0, 0, height, base])
