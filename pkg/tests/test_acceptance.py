"""End-to-end acceptance suite: one PASS/FAIL line per criterion, each with its runtime budget."""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from hmflow.asymptotics import InitialDataSpec, composite_profile, predict_exponent
from hmflow.solver import SolverParams, detect_blowup_and_fit, run_simulation, similarity_diagnostics
from hmflow.spectral import apply_operator, compute_constants, eigenvalue, hardy_margin, inner_product, make_basis, random_bumps
from hmflow.stationary import extract_h, solve_q_ivp, solve_q_profile, solve_stationary
from hmflow.verify import comparison_violation, stationary_drift

P_EXACT = (3 + math.sqrt(2)) / 7
LAMBDA1_EXACT = (math.sqrt(2) - 1) / 2


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail} ({elapsed:.2f} s, budget {budget:g} s)")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def benchmark():
    """Base run plus one run with every spacing halved, d=8, l=1, q=0, s0=20."""
    pred = predict_exponent(8, 1)
    basis = make_basis(compute_constants(8), 6)
    runs = {}
    for name, params in (("base", SolverParams()), ("refined", SolverParams().refined(2))):
        t0 = time.perf_counter()
        res = run_simulation(InitialDataSpec(8, 1, 20.0), params, d=8)
        fit = detect_blowup_and_fit(res.series_t, res.series_g, p0=pred.exponent)
        diag = similarity_diagnostics(res.checkpoints, fit.T, basis, 1)
        runs[name] = dict(result=res, fit=fit, diag=diag, seconds=time.perf_counter() - t0)
    return runs


def test_spectral_exactness(report):
    t0 = time.perf_counter()
    worst = max(abs(compute_constants(d).quadratic_residual()) for d in range(7, 13))
    c7 = compute_constants(7)
    err7 = max(abs(c7.gamma - 2.0), abs(c7.omega - 1.0), abs(eigenvalue(c7, 1)))
    report(1, "spectral exactness", worst < 1e-12 and err7 < 1e-15,
           f"max quadratic residual {worst:.1e}, d=7 deviation {err7:.1e}", time.perf_counter() - t0, 1.0)


def test_eigenbasis_quality(report):
    t0 = time.perf_counter()
    ortho = resid = 0.0
    y = np.geomspace(1e-3, 30.0, 6001)
    for d in (7, 8, 9, 11):
        c = compute_constants(d)
        B = make_basis(c, 10)
        G = np.array([[inner_product(B.mode(m), B.mode(n), c) for n in range(11)] for m in range(11)])
        ortho = max(ortho, float(np.max(np.abs(G - np.eye(11)))))
        w = y ** (d - 1) * np.exp(-y * y / 4)
        for n in range(11):
            phi = B(n, y)
            r = apply_operator(B.mode(n), c, y).values - B.eigenvalues()[n] * phi
            resid = max(resid, math.sqrt(integrate.trapezoid(r * r * w, y) / integrate.trapezoid(phi * phi * w, y)))
    report(2, "eigenbasis quality", ortho < 1e-8 and resid < 1e-6,
           f"orthonormality {ortho:.1e}, eigen-residual {resid:.1e}", time.perf_counter() - t0, 10.0)


def test_hardy_suite(report):
    t0 = time.perf_counter()
    c = compute_constants(8)
    worst = min(hardy_margin(b, c, a) for b in random_bumps(100, seed=2024) for a in (c.gamma, 0.5 * (c.d - 2)))
    report(3, "Hardy suite (d=8)", worst >= -1e-10, f"min margin {worst:.3e}", time.perf_counter() - t0, 30.0)


def test_stationary_profile(report):
    t0 = time.perf_counter()
    c = compute_constants(8)
    U = solve_stationary(c)
    mono = bool(np.all(np.diff(U.values) > 0))
    scale = 0.0
    for alpha in (0.5, 2.0, 4.0):
        Ua = solve_stationary(c, alpha=alpha, fit_h=False)
        xi = np.geomspace(1e-3, 200.0 / alpha, 400)
        scale = max(scale, float(np.max(np.abs(Ua(xi) - U(alpha * xi)))))
    h1, h2 = extract_h(U, (30.0, 300.0)), extract_h(U, (100.0, 1000.0))
    spread = abs(h1 - h2) / h2
    drift = stationary_drift(8, n_inner=256, grid_ratio=1.003, t_end=1.0)
    ok = mono and scale < 1e-6 and spread < 5e-3 and drift < 1e-5
    report(4, "stationary profile", ok,
           f"monotone={mono}, scaling {scale:.1e}, h spread {spread:.1e}, drift over [0,1] {drift:.1e}",
           time.perf_counter() - t0, 60.0)


def test_q_profile(report):
    t0 = time.perf_counter()
    c = compute_constants(8)
    kw = dict(omega_l=predict_exponent(8, 1).omega_l)
    q = solve_q_profile(c, 0.5, 0.5, 1e3, **kw)
    slope = q.tail_slope()
    target = 2 - c.gamma
    x = q.grid[(q.grid >= 1.0) & (q.grid <= 500.0)]
    ref = solve_q_ivp(c, 0.5, 0.5, 1e3, grid=x, **kw)
    agree = float(np.max(np.abs(np.interp(x, q.grid, q.values) / ref.values - 1)))
    ok = bool(np.all(q.values >= 0)) and abs(slope - target) < 0.05 * target and agree < 1e-5
    report(5, "q-profile (d=8)", ok,
           f"min q {q.values.min():.1e}, tail slope {slope:.4f} vs {target:.4f}, IVP agreement {agree:.1e}",
           time.perf_counter() - t0, 30.0)


def test_fit_round_trip(report):
    t0 = time.perf_counter()
    worst = 0.0
    labels = []
    for T, p, C in [(0.3, 0.63, 5.0), (1.0, 0.75, 0.2), (2.5, 1.2, 40.0), (0.05, 0.5, 1.0), (1.0, 0.53, 3.0)]:
        t = T - T * np.geomspace(0.5, 1e-8, 300)
        fit = detect_blowup_and_fit(t, C * (T - t) ** (-p))
        worst = max(worst, abs(fit.T / T - 1), abs(fit.p / p - 1), abs(fit.C / C - 1))
        labels.append(fit.classification)
    expected = ["TypeII", "TypeII", "TypeII", "TypeI", "TypeII"]
    report(6, "fit round trip", worst < 1e-6 and labels == expected,
           f"max relative error {worst:.1e}, classes {labels}", time.perf_counter() - t0, 1.0)


@pytest.mark.slow
def test_blowup_benchmark(report, benchmark):
    base, fine = benchmark["base"], benchmark["refined"]
    p, p_fine = base["fit"].p, fine["fit"].p
    change = abs(p_fine - p) / p
    ok = base["fit"].decades >= 3 and abs(p - P_EXACT) < 0.1 * P_EXACT and change < 0.01
    report(7, "blow-up benchmark d=8 l=1 s0=20", ok,
           f"{base['fit'].decades:.2f} decades, p={p:.6f} vs {P_EXACT:.6f}, refined p={p_fine:.6f} "
           f"(change {change:.1e}), refined run {fine['seconds']:.0f} s",
           base["seconds"], 600.0)


@pytest.mark.slow
def test_mechanism(report, benchmark):
    diag = benchmark["base"]["diag"]
    lo, hi = diag.window
    ok = abs(diag.slope + LAMBDA1_EXACT) < 0.1 * LAMBDA1_EXACT and hi - lo >= 3 and diag.strip_ok
    report(8, "unstable-mode mechanism", ok,
           f"slope {diag.slope:.5f} vs {-LAMBDA1_EXACT:.5f} over s in [{lo:.2f}, {hi:.2f}]",
           benchmark["base"]["seconds"], 600.0)


def test_comparison_principle(report):
    t0 = time.perf_counter()
    order, strip = comparison_violation(8)
    report(9, "strip and comparison, 5 pairs", order <= 1e-8 and strip <= 1e-8,
           f"ordering violation {order:.1e}, strip excess {strip:.1e}", time.perf_counter() - t0, 120.0)


def test_composite_mismatch(report):
    t0 = time.perf_counter()
    c = compute_constants(8)
    B = make_basis(c, 2)
    U = solve_stationary(c)
    spec = InitialDataSpec(8, 1, 20.0)
    m = [composite_profile(s, spec, B, U).overlap_mismatch for s in (20.0, 22.0, 25.0)]
    m2 = composite_profile(20.0, spec, B, U, eps_factor=2.0).overlap_mismatch
    ok = m[0] > m[1] > m[2] and m2 >= 2 * m[0]
    report(10, "composite mismatch", ok,
           "mismatch " + ", ".join(f"{v:.4f}" for v in m) + f"; eps x2 gives {m2:.4f} ({m2 / m[0]:.2f}x)",
           time.perf_counter() - t0, 30.0)
