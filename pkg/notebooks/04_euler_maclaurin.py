"""
Euler-Maclaurin on dilated polytopes
====================================

Riemann sums over the lattice points of N P are corrected by the operator
prod_i tau(d/dh_i / N) applied to h -> int_{P_h} f.
"""
import numpy as np

from toric_spectra.euler_maclaurin import em_error_report, em_sum, riemann_sum, tau_coefficients
from toric_spectra.polynomials import Polynomial
from toric_spectra.polytope import cube, hirzebruch, interval

print("tau:", [str(c) for c in tau_coefficients(4).coefficients])

# %% Counting: the order-2 operator reproduces the Ehrhart polynomial
one = Polynomial.constant(1, 2)
for P in (cube(2), hirzebruch()):
    print(riemann_sum(P, one, 4, exact=True), em_sum(P, one, 4, order=2))

# %% Error rates for f = e^y: order m gains a power of N per order
rep = em_error_report(interval(), lambda Y: np.exp(Y[:, 0]), (8, 16, 32, 64, 128), orders=(0, 1, 2))
print(rep.to_csv())
print("slopes", rep.slopes)
