"""
Large-N expansion of the transform
==================================

f#_N(x) = a_0 + a_1 / N + a_2 / N^2 + ...  with a_0 = f(x).  The
coefficients are fitted on a geometric grid of levels; on the half-line
model the transform of y^m is known exactly.
"""
from fractions import Fraction

import numpy as np

from toric_spectra.asymptotics import OrthantModel, extract_expansion, model_P1
from toric_spectra.polynomials import Polynomial
from toric_spectra.polytope import cube

# %% Half-line model: y^2 -> x^2 + 3x / N + 2 / N^2
p = Polynomial.monomial((2,))
rep = extract_expansion(OrthantModel(1), p, (0.4,), order=3, N_grid=(20, 30, 40, 60, 80, 120, 160))
print("fitted", rep.coefficients, "first-order operator", model_P1(p, (Fraction(2, 5),)))

# %% A smooth function on the square
f = lambda Y: np.exp(Y[:, 0] + 0.5 * Y[:, 1])
x = (Fraction(1, 5), Fraction(2, 5))
rep = extract_expansion(cube(2), f, x, order=4)
print("a_0 =", rep.coefficients[0], " f(x) =", float(np.exp(0.2 + 0.2)))
print("a_1 =", rep.coefficients[1], " tail order", rep.tail_order)
for row in rep.rows():
    print(row)

# %% On a facet and at a vertex a_0 = f(x) still holds
for pt in ((Fraction(1, 2), Fraction(0)), (Fraction(0), Fraction(0))):
    print(pt, extract_expansion(cube(2), f, pt, order=4).coefficients[:2])
