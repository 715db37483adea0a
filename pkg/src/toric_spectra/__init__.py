"""Spectral density computations on toric moment polytopes.

The library works entirely with a Delzant polytope given by its facet
inequalities: the kernel transform and its large-``N`` expansion, the
Euler-Maclaurin correction of lattice sums, and section-norm moments.
"""
__version__ = "0.1.0"

from .polytope import (CombinatorialChangeError, DelzantPolytope, NonDelzantError, PolytopeError,
                       cube, dump_polytope, hirzebruch, interval, lattice_points, load_polytope,
                       make_polytope, simplex)
from .polynomials import Polynomial, parse_poly
from .quadrature import QuadratureError, integrate, integrate_log, superlevel_volume
from .kernel import KernelContext, OptimizationError, argmax_phi, phi
from .asymptotics import (OrthantModel, extract_expansion, hessian_det, laplace_normalization,
                          pinched_average)
from .euler_maclaurin import em_error_report, em_sum, em_terms, riemann_sum, tau_coefficients
from .measures import SpectralMeasure, asymptotic_pairing

__all__ = [
    "CombinatorialChangeError", "DelzantPolytope", "NonDelzantError", "PolytopeError", "cube",
    "dump_polytope", "hirzebruch", "interval", "lattice_points", "load_polytope", "make_polytope",
    "simplex", "Polynomial", "parse_poly", "QuadratureError", "integrate", "integrate_log",
    "superlevel_volume", "KernelContext", "OptimizationError", "argmax_phi", "phi", "OrthantModel",
    "extract_expansion", "hessian_det", "laplace_normalization", "pinched_average",
    "em_error_report", "em_sum", "em_terms", "riemann_sum", "tau_coefficients", "SpectralMeasure",
    "asymptotic_pairing",
]
