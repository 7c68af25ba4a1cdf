import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, special

from hmflow.errors import DimensionTooSmall, DomainError, IndexOutOfRange, QuadratureNonConvergent
from hmflow.spectral import (
    Bump,
    RadialProfile,
    apply_operator,
    compute_constants,
    eigenfunction_eval,
    eigenvalue,
    gauss_laguerre,
    hardy_margin,
    inner_product,
    laguerre_explicit,
    laguerre_table,
    make_basis,
    norm,
    project,
    random_bumps,
)


def test_d7_constants_exact():
    c = compute_constants(7)
    assert (c.omega, c.gamma) == (1.0, 2.0)
    assert eigenvalue(c, 1) == 0.0
    assert eigenvalue(c, 0) == -1.0


def test_d8_constants_match_extended_precision():
    mpmath.mp.dps = 40
    omega = mpmath.sqrt(8)
    gamma = (6 - omega) / 2
    c = compute_constants(8)
    assert_allclose(c.omega, float(omega), rtol=1e-15)
    assert_allclose(c.gamma, float(gamma), rtol=1e-15)
    assert_allclose(c.gamma, 1.5857864, atol=1e-7)
    assert_allclose(eigenvalue(c, 1), float((mpmath.sqrt(2) - 1) / 2), rtol=1e-14)


@pytest.mark.parametrize("d", [6, 3, 7.5])
def test_small_or_fractional_dimension_rejected(d):
    with pytest.raises(DimensionTooSmall):
        compute_constants(d)


@given(st.integers(min_value=7, max_value=200))
def test_gamma_is_smaller_root_of_quadratic(d):
    c = compute_constants(d)
    roots = np.sort(np.roots([1.0, -(d - 2.0), d - 1.0]).real)
    assert abs(c.quadratic_residual()) < 1e-12 * max(1.0, d)
    assert_allclose(c.gamma, roots[0], rtol=1e-10)


def test_negative_index_rejected(c8):
    with pytest.raises(IndexOutOfRange):
        eigenvalue(c8, -1)


@pytest.mark.parametrize("n", range(7))
@pytest.mark.parametrize("a", [0.5, 1.414, 3.0])
def test_laguerre_recurrence_matches_explicit_and_scipy(n, a):
    x = np.linspace(0.0, 30.0, 41)
    rec = laguerre_table(6, a, x)[n]
    assert_allclose(rec, laguerre_explicit(n, a, x), rtol=1e-12, atol=1e-12 * np.abs(rec).max())
    assert_allclose(rec, special.eval_genlaguerre(n, a, x), rtol=1e-12, atol=1e-12 * np.abs(rec).max())


def test_gauss_laguerre_matches_scipy():
    x, w = gauss_laguerre(40, 1.3)
    xs, ws = special.roots_genlaguerre(40, 1.3)
    assert_allclose(x, xs, rtol=1e-12)
    assert_allclose(w, ws, rtol=1e-9)


def test_eigenfunction_n0_is_pure_power(c8):
    B = make_basis(c8, 4)
    y = np.array([0.3, 1.0, 2.0, 7.5])
    assert_allclose(eigenfunction_eval(B, 0, y), B.norms[0] * y ** (-c8.gamma), rtol=1e-15)


def test_d7_ground_state_value():
    # unit L^2(rho) normalization: N_0^2 * int y^{d-1-2 gamma} e^{-y^2/4} dy = 1
    c = compute_constants(7)
    B = make_basis(c, 0)
    mass = integrate.quad(lambda y: y ** (6 - 4) * math.exp(-y * y / 4), 0, math.inf)[0]
    assert_allclose(B.norms[0], mass**-0.5, rtol=1e-12)
    assert_allclose(eigenfunction_eval(B, 0, 2.0), B.norms[0] / 4, rtol=1e-15)


@pytest.mark.parametrize("d", [7, 8, 11])
def test_origin_coefficients(d):
    c = compute_constants(d)
    B = make_basis(c, 6)
    y = 1e-4
    for n in range(7):
        assert_allclose(B(n, y) * y**c.gamma, B.origin_coeffs[n], rtol=1e-6)


def test_infinity_coefficients(c8):
    B = make_basis(c8, 5)
    y = 400.0
    for n in range(6):
        lead = (-1) ** n * B.infinity_coeffs[n] * y ** (2 * n - c8.gamma)
        assert_allclose(B(n, y), lead, rtol=5e-3)


def test_domain_error_at_origin(c8):
    B = make_basis(c8, 2)
    with pytest.raises(DomainError):
        B(1, 0.0)


@pytest.mark.parametrize("d", [7, 8, 9, 11])
def test_orthonormality_against_adaptive_quadrature(d):
    c = compute_constants(d)
    B = make_basis(c, 15)
    for m, n in [(0, 0), (0, 1), (3, 3), (2, 7), (15, 15), (14, 15)]:
        f = lambda y: B(m, y) * B(n, y) * y ** (d - 1) * math.exp(-y * y / 4)
        ref = integrate.quad(f, 0, 80, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
        got = inner_product(B.mode(m), B.mode(n), c)
        assert_allclose(got, float(m == n), atol=1e-8)
        assert_allclose(got, ref, atol=1e-9)


@pytest.mark.parametrize("d", [7, 8, 9, 11])
def test_gram_matrix_up_to_15(d):
    c = compute_constants(d)
    B = make_basis(c, 15)
    G = np.array([[inner_product(B.mode(m), B.mode(n), c) for n in range(16)] for m in range(16)])
    assert np.max(np.abs(G - np.eye(16))) < 1e-8


def test_inner_product_of_constants(c8):
    d = c8.d
    got = inner_product(lambda y: np.ones_like(y), lambda y: np.ones_like(y), c8, origin_power=0.0)
    assert_allclose(got, 2 ** (d - 1) * special.gamma(d / 2), rtol=1e-12)


def test_inner_product_profile_path(c8):
    B = make_basis(c8, 3)
    y = np.geomspace(1e-4, 40, 20001)
    prof = RadialProfile(y, B(2, y) + 0.5 * B(3, y), "y")
    assert_allclose(inner_product(prof, B.mode(2), c8), 1.0, atol=1e-6)
    assert_allclose(inner_product(B.mode(3), prof, c8), 0.5, atol=1e-6)


def test_nonconvergent_quadrature_flagged(c8):
    wild = lambda y: np.exp(y * y / 8)
    with np.errstate(over="ignore"), pytest.raises(QuadratureNonConvergent):
        inner_product(wild, wild, c8, origin_power=0.0)


@pytest.mark.parametrize("d", [7, 8, 9, 11])
def test_eigen_residual_analytic(d):
    c = compute_constants(d)
    B = make_basis(c, 10)
    y = np.linspace(0.1, 10, 300)
    for n in range(11):
        Av = apply_operator(B.mode(n), c, y).values
        scale = np.max(np.abs(B(n, y)))
        assert np.max(np.abs(Av - B.eigenvalues()[n] * B(n, y))) < 1e-6 * scale


def test_eigen_residual_finite_difference_path(c8):
    B = make_basis(c8, 6)
    y = np.linspace(0.1, 10, 4000)
    for n in range(7):
        plain = lambda x, n=n: B(n, x)
        Av = apply_operator(plain, c8, y).values
        lam = B.eigenvalues()[n]
        rel = np.sqrt(np.sum((Av - lam * B(n, y)) ** 2 * y ** 7 * np.exp(-y * y / 4)))
        rel /= np.sqrt(np.sum(B(n, y) ** 2 * y**7 * np.exp(-y * y / 4)))
        assert rel < 1e-6


def test_operator_on_power_and_constant(c8):
    y = np.linspace(0.2, 9, 50)
    g = c8.gamma

    class Power:
        def derivatives(self, y):
            return y**-g, -g * y ** (-g - 1), g * (g + 1) * y ** (-g - 2)

    assert_allclose(apply_operator(Power(), c8, y).values, -0.5 * g * y**-g, rtol=1e-12)

    class Const:
        def derivatives(self, y):
            return 3.0 * np.ones_like(y), np.zeros_like(y), np.zeros_like(y)

    assert_allclose(apply_operator(Const(), c8, y).values, -(c8.d - 1) * 3.0 / y**2, rtol=1e-14)


def test_operator_rejects_origin(c8):
    with pytest.raises(DomainError):
        apply_operator(lambda y: y, c8, np.array([0.0, 1.0, 2.0]))


def test_hardy_zero_function(c8):
    zero = Bump(3.0, 1.0, 0.0)
    assert hardy_margin(zero, c8, c8.gamma) == 0.0


def test_hardy_gaussian_like_bump(c8):
    assert hardy_margin(Bump(3.0, 1.5), c8, c8.gamma) >= 0


def test_hardy_matches_adaptive_quadrature(c8):
    b = Bump(2.0, 1.2, 1.7)
    a = 0.5 * (c8.d - 2)
    f = lambda y: (b.derivative(np.array([y]))[0] ** 2 + (a * a - 6 * a) * b(np.array([y]))[0] ** 2 / y**2
                   + 0.5 * a * b(np.array([y]))[0] ** 2) * y**7 * math.exp(-y * y / 4)
    ref = integrate.quad(f, *b.support, epsabs=1e-13, limit=200)[0]
    assert_allclose(hardy_margin(b, c8, a), ref, rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    center=st.floats(0.3, 12.0),
    frac=st.floats(0.05, 0.95),
    amp=st.floats(-3.0, 3.0),
    d=st.sampled_from([7, 8, 9, 11]),
)
def test_hardy_margin_nonnegative_property(center, frac, amp, d):
    c = compute_constants(d)
    b = Bump(center, frac * min(center, 4.0), amp)
    for a in (c.gamma, 0.5 * (d - 2)):
        assert hardy_margin(b, c, a) >= -1e-10


def test_random_bumps_reproducible():
    a = random_bumps(5, seed=3)
    b = random_bumps(5, seed=3)
    assert a == b


def test_projection_of_modes(basis8):
    B = make_basis(basis8.constants, 10)
    assert_allclose(project(B.mode(2), B), np.eye(11)[2], atol=1e-9)
    coeffs = np.zeros(11)
    coeffs[0], coeffs[4] = 3.0, -2.0
    assert_allclose(project(B.combination(coeffs[:5]), B), coeffs, atol=1e-9)


def test_norm_of_mode(c8):
    B = make_basis(c8, 3)
    assert_allclose(norm(B.mode(3), c8), 1.0, atol=1e-10)


def test_eigen_residual_sampled_profile_path(c8):
    B = make_basis(c8, 4)
    y = np.geomspace(0.1, 10, 3000)
    for n in range(5):
        Av = apply_operator(RadialProfile(y, B(n, y), "y"), c8, y).values
        rel = np.max(np.abs(Av - B.eigenvalues()[n] * B(n, y))[2:-2]) / np.max(np.abs(B(n, y)) / y**2)
        assert rel < 1e-6
