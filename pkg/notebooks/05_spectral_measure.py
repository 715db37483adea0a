"""
The spectral measure
====================

sum_k |s_k|^2 pushed to the polytope has density rho_N(y).  It is constant
for products of simplices; on the trapezoid it is only asymptotically so.
"""
import numpy as np

from toric_spectra.measures import SpectralMeasure, asymptotic_pairing
from toric_spectra.polytope import hirzebruch, interval, simplex

# %% Constant density: N + 1 on the interval, (N + 1)(N + 2) on the triangle
print(SpectralMeasure(interval(), 10).spectral_density(np.linspace(0, 1, 5)[:, None]))
print(SpectralMeasure(simplex(2), 4).spectral_density(np.array([[0.1, 0.1], [0.3, 0.6]])))

# %% The trapezoid: the density relative to its average, on a few points
for N in (4, 8, 16):
    meas = SpectralMeasure(hirzebruch(), N)
    dens = meas.spectral_density(np.array([[0.2, 0.2], [1.0, 0.5], [1.6, 0.2], [0.5, 0.9]]))
    print(N, np.round(dens * 1.5 / len(meas), 6))

# %% Pairing with 1 counts lattice points; the quadrature of the density agrees
meas = SpectralMeasure(hirzebruch(), 6)
print(meas.pair(lambda Y: np.ones(len(Y)), cross_check=True), len(meas))

# %% Moments of a single section norm against the steepest-descent prediction
for N in (50, 100, 200):
    rep = SpectralMeasure(interval(), N).moment((N // 2,), [2, 3])
    print(N, rep.ratios)

# %% Large-N series of the pairing on the interval, f(y) = y: 1/2 + 1/(2N)
print(asymptotic_pairing(interval(), lambda Y: Y[:, 0], order=2).coefficients)
