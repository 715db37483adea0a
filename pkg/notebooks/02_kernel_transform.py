"""
The normalized kernel and its transform
=======================================

K_N(x, y) = exp(N phi(x, y)) / c_N(x) is a probability density in y that
concentrates at y = x.  On the interval its moments are Beta integrals.
"""
from fractions import Fraction

import numpy as np

from toric_spectra.kernel import KernelContext, argmax_phi
from toric_spectra.polytope import cube, interval

# %% The transform of f(y) = y on the interval is (N x + 1) / (N + 2)
x = 0.3
for N in (3, 10, 100, 1000):
    ctx = KernelContext(interval(), N)
    val = ctx.transform(lambda Y: Y[:, 0], (x,))
    print(f"N={N:5d}  transform={val:.15f}  exact={(N * x + 1) / (N + 2):.15f}")

# %% The phase is maximized at y = x, also on the boundary
P = cube(2)
for pt in ((Fraction(1, 3), Fraction(2, 3)), (Fraction(1, 2), Fraction(0)), (Fraction(0), Fraction(0))):
    print(pt, "->", argmax_phi(P, pt))

# %% Section norms: the weight-k section at level N peaks on k / N
ctx = KernelContext(P, 40)
ys = np.array([[0.25, 0.5], [0.3, 0.5], [0.4, 0.5], [0.6, 0.5]])
print(ctx.section_norm((10, 20), ys))
