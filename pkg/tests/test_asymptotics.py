import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from hmflow.asymptotics import (
    InitialDataSpec,
    build_initial_data,
    composite_profile,
    default_sigma,
    default_sigma_tilde,
    initial_psi,
    overlap_window,
    predict_epsilon,
    predict_exponent,
    projection_vector,
    region_jump,
    save_initial_data,
)
from hmflow.errors import EmptyOverlap, InvalidInput, NegativeMode, NeutralMode, SignError, SpecViolation
from hmflow.spectral import compute_constants, make_basis

EPS_D8_S20 = 0.032236052578224136


@pytest.fixture(scope="module")
def spec8():
    return InitialDataSpec(8, 1, 20.0)


def test_exponent_d8_matches_rationalized_form():
    mpmath.mp.dps = 40
    exact = (3 + mpmath.sqrt(2)) / 7
    p = predict_exponent(8, 1)
    assert_allclose(p.exponent, float(exact), rtol=1e-15)
    assert_allclose(p.exponent, 0.6306019, atol=1e-7)
    assert p.type_ii


def test_exponent_d7_l2_is_one():
    assert predict_exponent(7, 2).exponent == 1.0


def test_neutral_and_invalid_modes():
    with pytest.raises(NeutralMode):
        predict_exponent(7, 1)
    with pytest.raises(InvalidInput):
        predict_exponent(8, 0)
    with pytest.raises(InvalidInput):
        predict_exponent(8, 1.5)


@given(d=st.integers(7, 60), l=st.integers(1, 8))
def test_rate_identity_and_type_ii(d, l):
    try:
        p = predict_exponent(d, l)
    except NeutralMode:
        assert d == 7 and l == 1
        return
    assert abs(p.exponent - (0.5 + p.lambda_l / p.gamma)) < 1e-14
    assert p.exponent > 0.5
    if l > 1 and (d, l) != (7, 2):
        assert p.exponent > predict_exponent(d, l - 1).exponent


def test_negative_mode_is_not_a_blowup_mode():
    # lambda_0 < 0 always; index 0 is rejected before reaching the eigenvalue
    with pytest.raises(InvalidInput):
        predict_exponent(9, 0)
    assert issubclass(NegativeMode, InvalidInput)


def test_epsilon_shift_is_pure_exponential():
    p = predict_exponent(8, 1)
    e0 = predict_epsilon(-1.0, 0.4, 1.3, p, 20.0)
    e1 = predict_epsilon(-1.0, 0.4, 1.3, p, 60.0)
    assert_allclose(e1 / e0, math.exp(-40 * p.omega_l), rtol=1e-13)


def test_epsilon_prefactor_cancels():
    p = predict_exponent(8, 1)
    h, c_l = 1.3, 0.4
    assert_allclose(predict_epsilon(-h / c_l, c_l, h, p, 0.0), 1.0, rtol=1e-15)


def test_epsilon_sign_gate():
    p = predict_exponent(8, 1)
    with pytest.raises(SignError):
        predict_epsilon(0.5, 0.4, 1.3, p, 0.0)


def test_epsilon_d8_regression(U8):
    # origin coefficient of phi_1 from Gamma functions, independent of the basis code
    a = math.sqrt(8) / 2
    c1 = math.exp(0.5 * (math.lgamma(2 + a) - math.lgamma(2)) - math.lgamma(1 + a)) * 2 ** (-(math.sqrt(8) + 1) / 2)
    p = predict_exponent(8, 1)
    expected = (c1 / U8.h_estimate) ** (1 / p.gamma) * math.exp(-p.omega_l * 20.0)
    got = predict_epsilon(-1.0, make_basis(compute_constants(8), 1).origin_coeffs[1], U8.h_estimate, p, 20.0)
    assert_allclose(got, expected, rtol=1e-12)
    assert_allclose(got, EPS_D8_S20, rtol=1e-6)


def test_default_constants():
    assert default_sigma(1) == pytest.approx(0.09)
    assert default_sigma(5) == pytest.approx(0.018)
    s = default_sigma(1)
    assert s / (1 - 2 * s) < default_sigma_tilde(s) < 0.5


def test_spec_validation():
    with pytest.raises(NeutralMode):
        InitialDataSpec(7, 1, 20.0)
    with pytest.raises(SpecViolation):
        InitialDataSpec(8, 1, 20.0, k=0.3, k_tilde=0.5)
    with pytest.raises(SpecViolation):
        InitialDataSpec(8, 1, 20.0, q=(0.1, 0.2))
    with pytest.raises(SpecViolation):
        InitialDataSpec(8, 1, 20.0, a_l0=0.5)
    with pytest.raises(SpecViolation):
        InitialDataSpec(8, 1, 20.0, sigma=0.2, strict=True)
    with pytest.raises(SpecViolation):
        InitialDataSpec(8, 1, 20.0, sigma=0.05, sigma_tilde=0.04, strict=True)
    with pytest.raises(SpecViolation):
        InitialDataSpec(8, 1, -1.0)
    assert InitialDataSpec(8, 1, 20.0, strict=True).strict


def test_region_two_is_pure_mode(spec8, basis8, U8):
    psi = initial_psi(spec8, basis8, U8)
    s = psi.spec
    y = np.geomspace(s.inner_edge, s.outer_edge, 50)[1:-1]
    lam = basis8.eigenvalues()[1]
    assert_allclose(psi(y), -math.exp(-lam * s.s0) * basis8(1, y), rtol=1e-14)


def test_region_one_is_stationary_profile(spec8, basis8, U8):
    psi = initial_psi(spec8, basis8, U8)
    y = np.geomspace(1e-6, psi.spec.inner_edge, 20)[:-1]
    assert_allclose(psi(y), U8(psi.origin_slope * y) - 0.5 * math.pi, rtol=1e-14)
    assert_allclose(psi.origin_slope, psi.spec.alpha * math.exp(psi.spec.omega_l * 20.0))


def test_matching_slope_gives_same_leading_term(spec8, basis8, U8):
    # inner: pi/2 - h (alpha e^{omega_l s0} y)^-gamma; outer: e^{-lambda s0} c_1 y^-gamma
    s = initial_psi(spec8, basis8, U8).spec
    g = basis8.constants.gamma
    inner = U8.h_estimate * (s.alpha * math.exp(s.omega_l * s.s0)) ** (-g)
    outer = math.exp(-basis8.eigenvalues()[1] * s.s0) * basis8.origin_coeffs[1]
    assert_allclose(inner, outer, rtol=1e-12)


def test_region_three_clamped(basis8, U8):
    spec = InitialDataSpec(8, 1, 20.0, a_l0=-50.0)
    psi = initial_psi(spec, basis8, U8)
    y = np.linspace(psi.spec.outer_edge, 40.0, 300)
    assert np.all(np.abs(psi(y)) <= 0.5 * math.pi)


def test_jump_small(spec8, basis8, U8):
    assert region_jump(spec8, basis8, U8) < 0.1


def test_projection_reproduces_unstable_coefficient(spec8, basis8, U8):
    prof = build_initial_data(spec8, basis8, U8)
    a = projection_vector(prof, basis8, 2)
    lam = basis8.eigenvalues()[1]
    assert abs(a[1] / -math.exp(-lam * 20.0) - 1) < 0.05


def test_projection_near_identity_in_q(basis8, U8):
    base = build_initial_data(InitialDataSpec(8, 1, 20.0), basis8, U8)
    bumped = build_initial_data(InitialDataSpec(8, 1, 20.0, q=(1e-3,)), basis8, U8, grid=base.grid)
    diff = projection_vector(bumped, basis8, 1) - projection_vector(base, basis8, 1)
    assert_allclose(diff, [1e-3], rtol=0.05)


def test_projection_kills_higher_mode(basis8):
    from hmflow.spectral import RadialProfile

    y = np.geomspace(1e-4, 40, 20001)
    prof = RadialProfile(y, basis8(4, y), "y")
    assert_allclose(projection_vector(prof, basis8, 1), [0.0], atol=1e-9)
    two = RadialProfile(y, 2.0 * basis8(4, y) + 3.0 * basis8(0, y), "y")
    assert_allclose(projection_vector(two, basis8, 1), [3.0], atol=1e-6)


def test_projection_vector_needs_positive_l(basis8):
    with pytest.raises(InvalidInput):
        projection_vector(lambda y: y, basis8, 0)


def test_composite_inner_limit(spec8, basis8, U8):
    res = composite_profile(20.0, spec8, basis8, U8)
    assert res.profile.values[0] < 1e-2
    assert_allclose(res.profile(1e-12), res.profile.values[0])


def test_composite_mismatch_decreases_and_eps_sensitive(spec8, basis8, U8):
    m = [composite_profile(s, spec8, basis8, U8).overlap_mismatch for s in (20.0, 22.0, 25.0)]
    assert m[0] > m[1] > m[2]
    doubled = composite_profile(20.0, spec8, basis8, U8, eps_factor=2.0).overlap_mismatch
    assert doubled >= 2 * m[0]


def test_overlap_window_and_empty_overlap(spec8, basis8, U8):
    lo, hi = overlap_window(1e-4, 0.1, 20.0)
    assert lo == pytest.approx(1e-2) and hi == pytest.approx(0.1)
    with pytest.raises(EmptyOverlap):
        composite_profile(20.0, spec8, basis8, U8, eps_factor=1e3)
    with pytest.raises(InvalidInput):
        composite_profile(10.0, spec8, basis8, U8)


def test_save_initial_data(tmp_path, spec8, basis8, U8):
    prof = build_initial_data(spec8, basis8, U8)
    path = tmp_path / "psi.csv"
    save_initial_data(prof, path, config={"d": 8})
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert_allclose(data[:, 1], prof.values, rtol=1e-15)
    meta = json.loads((tmp_path / "psi.csv.json").read_text())
    assert meta["config"] == {"d": 8}
    assert meta["spec"]["s0"] == 20.0


@settings(max_examples=10, deadline=None)
@given(s0=st.floats(15.0, 40.0))
def test_regions_ordered(s0):
    spec = InitialDataSpec(8, 1, s0)
    assert spec.inner_edge < spec.outer_edge
