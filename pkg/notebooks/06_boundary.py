"""
Behaviour at the boundary
=========================

Averages over windows of radius N^-delta stay well behaved at a vertex,
and the normalizer c_N loses a different power of N on a facet.
"""
from fractions import Fraction

import numpy as np

from toric_spectra.asymptotics import loglog_slope, pinched_average
from toric_spectra.kernel import KernelContext, distances_at
from toric_spectra.polytope import cube, interval

# %% Pinched averages at the midpoint and at the vertex of the interval
for x in (Fraction(1, 2), Fraction(0)):
    rep = pinched_average(interval(), (x,), 0.25)
    print(x, rep.values, "difference exponent", rep.exponent)

# %% Power of N in c_N(x) exp(-N phi(x, x)) on the square
P = cube(2)
Ns = (50, 100, 200, 400, 800)
for x in ((Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 2), Fraction(0))):
    lx = distances_at(P, x)
    peak = float(np.sum(np.where(lx > 0, lx * np.log(np.where(lx > 0, lx, 1)), 0) - lx))
    vals = [np.exp(KernelContext(P, N).log_c(x) - N * peak) for N in Ns]
    print(x, "power", loglog_slope(Ns, vals)[0])
