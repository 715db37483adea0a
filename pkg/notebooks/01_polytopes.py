"""
Delzant polytopes in facet form
===============================

A polytope is a list of primitive integer normals u_i and integer offsets
c_i; the lattice distance to facet i is l_i(x) = c_i - <u_i, x>.
"""
from fractions import Fraction

from toric_spectra.polytope import NonDelzantError, hirzebruch, lattice_points, make_polytope, simplex

# %% The standard triangle and the trapezoid of the first Hirzebruch surface
for name, P in (("simplex", simplex(2)), ("trapezoid", hirzebruch())):
    print(name, "vertices", P.vertices, "volume", P.exact_volume)

# %% Lattice distances are exact for rational points
P = hirzebruch()
x = (Fraction(1, 2), Fraction(1, 3))
print("l(x) =", [str(v) for v in P.lattice_distances(x)])

# %% Vertex charts turn the distances into coordinates
for v in P.vertices:
    chart = P.vertex_chart(v)
    print(v, "facets", chart.facets, "matrix", chart.matrix.tolist())

# %% Lattice points of the dilates: (N + 1)(3N + 2) / 2 for the trapezoid
for N in range(1, 6):
    print(N, len(lattice_points(P, N)))

# %% A triangle that is not Delzant: the normals at one vertex span an index-2 lattice
try:
    make_polytope([[-1, 0], [0, -1], [1, 2]], [0, 0, 2])
except NonDelzantError as exc:
    print("rejected:", exc)
