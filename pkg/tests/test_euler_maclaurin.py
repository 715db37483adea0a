import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toric_spectra.euler_maclaurin import (central_stencil, em_error_report, em_sum, em_terms,
                                           riemann_sum, tau_coefficients)
from toric_spectra.polynomials import Polynomial
from toric_spectra.polytope import cube, hirzebruch, interval, simplex


def test_tau_coefficients():
    assert tau_coefficients(4).coefficients == (1, F(1, 2), F(1, 12), 0, F(-1, 720))
    tau = tau_coefficients(8)
    s = 0.3
    assert tau(s) == pytest.approx(s / (1 - math.exp(-s)), rel=1e-12)


def test_central_stencils():
    offs, w = central_stencil(2)
    vals = [F(o) ** 2 for o in offs]
    assert sum(wi * v for wi, v in zip(w, vals)) == 2
    for order in (1, 2, 3):
        offs, w = central_stencil(order)
        for p in range(order + 4):
            moment = sum(wi * F(o) ** p for wi, o in zip(w, offs))
            assert moment == (math.factorial(order) if p == order else 0) or p >= len(offs)


def test_riemann_sum_exact_counts():
    one = Polynomial.constant(1, 2)
    assert riemann_sum(cube(2), one, 4, exact=True) == F(25, 16)
    assert riemann_sum(simplex(2), one, 3, exact=True) == F(10, 9)


@pytest.mark.parametrize("P, N, expected", [(cube(2), 4, 25 / 16), (simplex(2), 3, 10 / 9),
                                            (hirzebruch(), 2, 12 / 4)])
def test_em_sum_of_one_is_exact_at_order_two(P, N, expected):
    # for f = 1 the operator reproduces the Ehrhart polynomial, which has degree n
    assert em_sum(P, Polynomial.constant(1, 2), N, order=2) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4), st.integers(1, 9))
def test_cubic_exactness_on_interval(coefs, N):
    p = Polynomial.from_terms([((j,), c) for j, c in enumerate(coefs) if c] or [((0,), 0)])
    assert em_sum(interval(), p, N, order=3) == pytest.approx(riemann_sum(interval(), p, N), abs=1e-9)


def test_exponential_error_rates():
    rep = em_error_report(interval(), lambda Y: np.exp(Y[:, 0]), (8, 16, 32, 64, 128), orders=(0, 1, 2))
    assert rep.slopes[0] == pytest.approx(1.0, abs=0.2)
    assert rep.slopes[1] == pytest.approx(2.0, abs=0.2)
    assert rep.slopes[2] >= 3.5
    assert rep.to_csv().splitlines()[0] == "N,order,riemann_sum,em_sum,abs_error"


def test_terms_factor_over_products():
    f = lambda Y: np.exp(0.5 * Y[:, 0])
    g = lambda Y: 1 / (1 + Y[:, 0])
    a = em_terms(interval(), f, 5, 2)
    b = em_terms(interval(), g, 5, 2)
    s = em_terms(cube(2), lambda Y: np.exp(0.5 * Y[:, 0]) / (1 + Y[:, 1]), 5, 2)
    for j in range(3):
        assert s[j] == pytest.approx(sum(a[i] * b[j - i] for i in range(j + 1)), abs=1e-9)


def test_quadratic_on_trapezoid():
    p = Polynomial.from_terms([((2, 0), 1), ((1, 1), -1), ((0, 1), 3)])
    for N in (2, 5):
        assert em_sum(hirzebruch(), p, N, order=4) == pytest.approx(riemann_sum(hirzebruch(), p, N), abs=1e-8)


def test_compactly_supported_regime():
    # with f flat near the boundary every correction term vanishes and the plain
    # Riemann sum already converges faster than any fixed power
    from toric_spectra.asymptotics import bump_window
    f = lambda Y: bump_window((Y - 0.5) / 0.45)
    terms = em_terms(interval(), f, 1, 2)
    assert abs(terms[1]) < 1e-9 and abs(terms[2]) < 1e-9
    rep = em_error_report(interval(), f, (16, 24, 32, 48, 64), orders=(0,))
    assert rep.slopes[0] > 4
