"""Self-checks bundled with the CLI ``verify`` subcommand.

Each check returns (ok, detail).  ``fast`` checks run in seconds; ``full``
adds the stationary drift check and a base-grid blow-up run (minutes).
"""

from __future__ import annotations

import math
from typing import Callable, List, Tuple

import numpy as np

from .asymptotics import InitialDataSpec, composite_profile, predict_exponent
from .errors import InvalidInput
from .semigroup import maximal_function
from .solver import (
    SolverParams,
    detect_blowup_and_fit,
    run_lockstep,
    run_simulation,
    similarity_diagnostics,
)
from .spectral import apply_operator, compute_constants, hardy_margin, inner_product, make_basis, random_bumps
from .stationary import extract_h, solve_q_profile, solve_stationary

Check = Callable[[], Tuple[bool, str]]


def check_quadratic() -> Tuple[bool, str]:
    worst = max(abs(compute_constants(d).quadratic_residual()) for d in range(7, 13))
    return worst < 1e-12, f"max residual {worst:.2e}"


def check_orthonormality() -> Tuple[bool, str]:
    c = compute_constants(8)
    B = make_basis(c, 10)
    G = np.array([[inner_product(B.mode(m), B.mode(n), c) for n in range(11)] for m in range(11)])
    err = float(np.max(np.abs(G - np.eye(11))))
    return err < 1e-8, f"max Gram error {err:.2e}"


def check_eigen_residual() -> Tuple[bool, str]:
    c = compute_constants(9)
    B = make_basis(c, 10)
    y = np.geomspace(0.05, 12.0, 400)
    worst = 0.0
    for n in range(11):
        Av = apply_operator(B.mode(n), c, y).values
        worst = max(worst, float(np.max(np.abs(Av - B.eigenvalues()[n] * B(n, y)) / (1 + np.abs(B(n, y))))))
    return worst < 1e-6, f"max pointwise residual {worst:.2e}"


def check_hardy() -> Tuple[bool, str]:
    c = compute_constants(8)
    worst = min(hardy_margin(b, c, a) for b in random_bumps(10, seed=0) for a in (c.gamma, 0.5 * (c.d - 2)))
    return worst >= -1e-10, f"min margin {worst:.3e}"


def check_maximal_function() -> Tuple[bool, str]:
    c = compute_constants(8)
    val = maximal_function(lambda x: x ** (-c.gamma), c, 1.0)
    return abs(val - 1.0) < 1e-6, f"M(y^-gamma)(1) = {val:.10f}"


def check_stationary() -> Tuple[bool, str]:
    c = compute_constants(8)
    U = solve_stationary(c)
    U2 = solve_stationary(c, alpha=2.0, fit_h=False)
    xi = np.geomspace(1e-3, 100.0, 200)
    scale = float(np.max(np.abs(U2(xi) - U(2 * xi))))
    mono = bool(np.all(np.diff(U.values) > 0))
    h1 = extract_h(U, (30.0, 300.0))
    h2 = extract_h(U, (100.0, 1000.0))
    spread = abs(h1 - h2) / h2
    ok = mono and scale < 1e-6 and spread < 5e-3
    return ok, f"monotone={mono} scaling={scale:.2e} h-spread={spread:.2e}"


def check_q_profile() -> Tuple[bool, str]:
    c = compute_constants(8)
    q = solve_q_profile(c, 0.5, 0.5, 1e3, omega_l=predict_exponent(8, 1).omega_l)
    slope = q.tail_slope()
    target = 2 - c.gamma
    ok = bool(np.all(q.values >= 0)) and abs(slope - target) < 0.05 * target
    return ok, f"min q {q.values.min():.2e}, tail slope {slope:.4f} vs {target:.4f}"


def check_fit_roundtrip() -> Tuple[bool, str]:
    T, p, C = 0.3, 0.63, 5.0
    t = T - np.geomspace(1e-1, 1e-8, 400)
    fit = detect_blowup_and_fit(t, C * (T - t) ** (-p), p0=0.6)
    err = max(abs(fit.T - T) / T, abs(fit.p - p) / p, abs(fit.C - C) / C)
    return err < 1e-6 and fit.classification == "TypeII", f"relative error {err:.2e}"


def comparison_pairs(U) -> list:
    """Five pointwise ordered pairs (lower, upper) of u-level data that stay smooth up to t = 1."""
    return [
        (lambda r: 0.01 * r * np.exp(-r * r), lambda r: 0.02 * r * np.exp(-r * r)),
        (lambda r: U(r), lambda r: U(2 * r)),
        (lambda r: 0.5 * U(r), lambda r: U(0.5 * r)),
        (lambda r: 0.3 * math.pi * r * r / (1 + r * r), lambda r: 0.45 * math.pi * r * r / (1 + r * r)),
        (lambda r: U(0.5 * r), lambda r: 0.5 * (U(0.5 * r) + U(r))),
    ]


def comparison_violation(d: int = 8, times=None) -> Tuple[float, float]:
    """Worst ordering violation and worst strip excess over all pairs and output times."""
    c = compute_constants(d)
    U = solve_stationary(c, fit_h=False)
    times = np.linspace(0.05, 1.0, 20) if times is None else times
    order = strip = -math.inf
    for lo, hi in comparison_pairs(U):
        _, out = run_lockstep([lo, hi], c, SolverParams(), times, core_radius=0.25)
        order = max(order, float(np.max(out[0] - out[1])))
        strip = max(strip, float(np.max(np.abs(out - 0.5 * math.pi))) - 0.5 * math.pi)
    return order, strip


def check_comparison() -> Tuple[bool, str]:
    order, strip = comparison_violation()
    return order <= 1e-8 and strip <= 1e-8, f"ordering violation {order:.2e}, strip excess {strip:.2e}"


def check_composite() -> Tuple[bool, str]:
    c = compute_constants(8)
    B = make_basis(c, 2)
    U = solve_stationary(c)
    spec = InitialDataSpec(8, 1, 20.0)
    m = [composite_profile(s, spec, B, U).overlap_mismatch for s in (20.0, 22.0, 25.0)]
    m2 = composite_profile(20.0, spec, B, U, eps_factor=2.0).overlap_mismatch
    ok = m[0] > m[1] > m[2] and m2 >= 2 * m[0]
    return ok, "mismatch " + ", ".join(f"{v:.4f}" for v in m) + f"; doubled eps {m2:.4f}"


def stationary_drift(d: int, n_inner: int = 256, grid_ratio: float = 1.003, t_end: float = 1.0) -> float:
    """max |u(t) - U| over r after evolving the stationary profile to t_end."""
    c = compute_constants(d)
    U = solve_stationary(c, fit_h=False)
    r, out = run_lockstep([U], c, SolverParams(n_inner=n_inner, grid_ratio=grid_ratio), [t_end])
    return float(np.max(np.abs(out[0, -1] - U(r))))


def check_drift() -> Tuple[bool, str]:
    drift = stationary_drift(8)
    return drift < 1e-5, f"drift {drift:.2e}"


def check_benchmark() -> Tuple[bool, str]:
    pred = predict_exponent(8, 1)
    res = run_simulation(InitialDataSpec(8, 1, 20.0), SolverParams(), d=8)
    fit = detect_blowup_and_fit(res.series_t, res.series_g, p0=pred.exponent)
    diag = similarity_diagnostics(res.checkpoints, fit.T, make_basis(compute_constants(8), 6), 1)
    ok = (
        fit.decades >= 3
        and abs(fit.p - pred.exponent) < 0.1 * pred.exponent
        and abs(diag.slope + pred.lambda_l) < 0.1 * pred.lambda_l
        and diag.strip_ok
    )
    return ok, f"p={fit.p:.5f} (predicted {pred.exponent:.5f}), mode slope {diag.slope:.5f}"


FAST: List[Tuple[str, Check]] = [
    ("spectral.quadratic", check_quadratic),
    ("spectral.orthonormality", check_orthonormality),
    ("spectral.eigen_residual", check_eigen_residual),
    ("spectral.hardy", check_hardy),
    ("semigroup.maximal_function", check_maximal_function),
    ("stationary.profile", check_stationary),
    ("stationary.q_profile", check_q_profile),
    ("solver.fit_roundtrip", check_fit_roundtrip),
    ("solver.comparison", check_comparison),
    ("asymptotics.composite", check_composite),
]

FULL: List[Tuple[str, Check]] = FAST + [
    ("solver.stationary_drift", check_drift),
    ("solver.benchmark", check_benchmark),
]


def run_checks(level: str = "fast", stop_on_failure: bool = True) -> List[dict]:
    if level not in ("fast", "full"):
        raise InvalidInput(f"unknown level {level!r}")
    records = []
    for name, fn in FAST if level == "fast" else FULL:
        ok, detail = fn()
        records.append({"check": name, "ok": bool(ok), "detail": detail})
        if stop_on_failure and not ok:
            break
    return records
