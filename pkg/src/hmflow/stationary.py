"""Stationary profiles U_alpha and the auxiliary profile q.

U_alpha solves

    U'' + (d-1)/xi U' - (d-1)/(2 xi^2) sin(2U) = 0,   U(0) = 0, U'(0) = alpha,

and approaches pi/2 from below like pi/2 - h_alpha xi^-gamma.  The scaling
U_alpha(xi) = U_1(alpha xi) gives h_alpha = h alpha^-gamma with h = h_1.

q solves the linearization of the same equation around U with source
c xi U', c = beta + 1/2 + omega_l, and q(0) = q'(0) = 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import (
    DomainError,
    FitUnstable,
    IntegrationBlowup,
    InvalidInput,
    SeriesStartFailure,
)
from .spectral import SpectralConstants

XI0 = 1e-4
XI_MAX = 1e3
RTOL = 1e-12
ATOL = 1e-14
SERIES_TOL = 1e-12


def series_c3(d: int, alpha: float) -> float:
    """Cubic Taylor coefficient of U_alpha at the origin."""
    return -(d - 1) * alpha**3 / (3.0 * (d + 2))


def _rhs(d: int):
    k = d - 1

    def f(x, Y):
        return [Y[1], -k / x * Y[1] + 0.5 * k / (x * x) * np.sin(2.0 * Y[0])]

    return f


@dataclass(frozen=True)
class StationaryProfile:
    alpha: float
    constants: SpectralConstants
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)
    h_estimate: float = float("nan")
    h_fit_window: tuple = (float("nan"), float("nan"))
    fit_residual: float = float("nan")
    xi0: float = XI0
    solution: object = field(default=None, repr=False, compare=False)

    @property
    def xi_max(self) -> float:
        return float(self.grid[-1])

    def _eval(self, xi, k: int):
        xi = np.asarray(xi, dtype=float)
        if np.any(xi < 0):
            raise DomainError("stationary profile needs xi >= 0")
        x = np.atleast_1d(xi).ravel()
        out = np.empty_like(x)
        c3 = series_c3(self.constants.d, self.alpha)
        small = x < self.xi0
        big = x > self.xi_max
        mid = ~(small | big)
        xs = x[small]
        out[small] = self.alpha * xs + c3 * xs**3 if k == 0 else self.alpha + 3 * c3 * xs**2
        if np.any(mid):
            out[mid] = self.solution.sol(x[mid])[k]
        if np.any(big):
            # far field pi/2 - A xi^-gamma matched at xi_max
            g = self.constants.gamma
            amp = (0.5 * math.pi - self.values[-1]) * self.xi_max**g
            xb = x[big]
            out[big] = 0.5 * math.pi - amp * xb ** (-g) if k == 0 else g * amp * xb ** (-g - 1)
        return out.reshape(np.shape(xi))

    def __call__(self, xi):
        """U_alpha(xi); far-field power law beyond xi_max."""
        return self._eval(xi, 0)

    def derivative(self, xi):
        return self._eval(xi, 1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "U"])
            for x, u in zip(self.grid, self.values):
                w.writerow([repr(float(x)), repr(float(u))])


def solve_stationary(
    constants: SpectralConstants,
    alpha: float = 1.0,
    xi_max: float = XI_MAX,
    *,
    xi0: Optional[float] = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    n_grid: int = 2001,
    fit_h: bool = True,
) -> StationaryProfile:
    """Shoot U_alpha from a two-term series start with DOP853."""
    if not alpha > 0:
        raise InvalidInput(f"alpha must be positive, got {alpha}")
    if not xi_max >= 100:
        raise InvalidInput(f"xi_max must be >= 100, got {xi_max}")
    d = constants.d
    # keep alpha*xi0 fixed so the neglected O((alpha xi)^5) term stays tiny
    if xi0 is None:
        xi0 = XI0 / max(alpha, 1.0)
    c3 = series_c3(d, alpha)
    if (alpha * xi0) ** 4 > SERIES_TOL:
        raise SeriesStartFailure(f"series start xi0={xi0} too far out for alpha={alpha}")
    y0 = [alpha * xi0 + c3 * xi0**3, alpha + 3 * c3 * xi0**2]

    def escape(x, Y):
        return math.pi - abs(Y[0])

    escape.terminal = True
    sol = integrate.solve_ivp(
        _rhs(d), (xi0, xi_max), y0, method="DOP853", rtol=rtol, atol=atol,
        dense_output=True, events=escape,
    )
    if sol.status != 0 or sol.t[-1] < xi_max:
        raise IntegrationBlowup(f"stationary integration stopped at xi={sol.t[-1]:.4g}: {sol.message}")
    grid = np.geomspace(xi0, xi_max, n_grid)
    U, V = sol.sol(grid)
    prof = StationaryProfile(alpha, constants, grid, U, V, xi0=xi0, solution=sol)
    if not fit_h:
        return prof
    h, window, resid = _fit_plateau(prof, (xi_max / 10, xi_max))
    return StationaryProfile(alpha, constants, grid, U, V, h, window, resid, xi0, sol)


def correction_exponents(constants: SpectralConstants) -> tuple:
    """Relative decay exponents of the two leading far-field corrections."""
    return tuple(sorted({round(constants.omega, 14), round(2 * constants.gamma, 14)}))


def _fit_plateau(profile: StationaryProfile, window):
    lo, hi = window
    g = profile.constants.gamma
    x = np.geomspace(lo, hi, 200)
    P = (0.5 * math.pi - profile(x)) * x**g
    cols = [np.ones_like(x)] + [x ** (-e) for e in correction_exponents(profile.constants)]
    M = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(M, P, rcond=None)
    h = float(coef[0])
    if not h > 0:
        raise FitUnstable(f"plateau fit gave non-positive h={h}")
    flat = P - M[:, 1:] @ coef[1:]
    spread = float(np.ptp(flat) / h)
    if spread > 0.01:
        raise FitUnstable(f"plateau varies by {spread:.3%} after correction")
    resid = float(np.sqrt(np.mean((M @ coef - P) ** 2)) / h)
    return h, (float(lo), float(hi)), resid


def extract_h(profile: StationaryProfile, window=None) -> float:
    """Plateau of (pi/2 - U) xi^gamma, i.e. h alpha^-gamma for U_alpha.

    Fits the plateau plus the two leading far-field corrections by linear least
    squares over ``window`` (default [xi_max/10, xi_max]).
    """
    if profile.xi_max < 100:
        raise InvalidInput("profile must extend to xi_max >= 100")
    if window is None:
        window = (profile.xi_max / 10, profile.xi_max)
    return _fit_plateau(profile, window)[0]


@dataclass(frozen=True)
class QProfile:
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    beta: float
    delta: float
    source_coeff: float

    def tail_slope(self, decades: float = 1.0) -> float:
        """Log-log slope of q over the last ``decades`` of the grid."""
        x = self.grid
        m = x >= x[-1] * 10.0 ** (-decades)
        return float(np.polyfit(np.log(x[m]), np.log(self.values[m]), 1)[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "q"])
            for x, q in zip(self.grid, self.values):
                w.writerow([repr(float(x)), repr(float(q))])


def _check_q_args(delta, beta):
    if not 0 < delta < 1:
        raise InvalidInput(f"delta must lie in (0, 1), got {delta}")
    if not beta > 0:
        raise InvalidInput(f"beta must be positive, got {beta}")


def solve_q_profile(
    constants: SpectralConstants,
    delta: float,
    beta: float,
    xi_max: float = XI_MAX,
    *,
    omega_l: float,
    alpha: float = 1.0,
    stationary: Optional[StationaryProfile] = None,
    n_grid: int = 4001,
) -> QProfile:
    """q from the reduction-of-order formula around the scaling mode xi U'.

        q = xi U' int_0^xi (t^{d+1} U'^2)^-1 int_0^t c s^{d+1} U'^2 ds dt,

    with U = U_{alpha delta}.  Every factor is positive, so q >= 0.
    """
    _check_q_args(delta, beta)
    a = alpha * delta
    if stationary is None:
        stationary = solve_stationary(constants, a, max(xi_max, 100.0), fit_h=False)
    elif not math.isclose(stationary.alpha, a, rel_tol=1e-12):
        raise InvalidInput("stationary profile must have alpha*delta as its slope")
    d = constants.d
    c = beta + 0.5 + omega_l
    x = np.geomspace(stationary.xi0, xi_max, n_grid)
    V = stationary.derivative(x)
    weight = x ** (d + 1) * V * V
    # analytic start on [0, x0]: weight ~ a^2 x^{d+1}
    x0 = x[0]
    inner = c * _cumulative(weight, x, a * a * x0 ** (d + 2) / (d + 2))
    outer = _cumulative(inner / weight, x, c * x0 * x0 / (2.0 * (d + 2)))
    q = x * V * outer
    return QProfile(x, q, float(beta), float(delta), float(c))


def _cumulative(f, x, start):
    """start + int_{x0}^x f, by cumulative Simpson on a log grid."""
    lx = np.log(x)
    return start + integrate.cumulative_simpson(f * x, x=lx, initial=0.0)


def solve_q_ivp(
    constants: SpectralConstants,
    delta: float,
    beta: float,
    xi_max: float = XI_MAX,
    *,
    omega_l: float,
    alpha: float = 1.0,
    stationary: Optional[StationaryProfile] = None,
    grid=None,
) -> QProfile:
    """q by direct integration of the linear ODE from its series start (oracle)."""
    _check_q_args(delta, beta)
    a = alpha * delta
    if stationary is None:
        stationary = solve_stationary(constants, a, max(xi_max, 100.0), fit_h=False)
    d = constants.d
    c = beta + 0.5 + omega_l
    k = d - 1
    x0 = stationary.xi0
    lead = c * a / (2.0 * (d + 2))

    def rhs(x, Y):
        U = stationary(x)
        V = stationary.derivative(x)
        return [Y[1], -k / x * Y[1] + k / (x * x) * np.cos(2 * U) * Y[0] + c * x * V]

    sol = integrate.solve_ivp(
        rhs, (x0, xi_max), [lead * x0**3, 3 * lead * x0**2], method="DOP853",
        rtol=1e-12, atol=1e-30, dense_output=True,
    )
    if sol.status != 0:
        raise IntegrationBlowup(f"q integration failed: {sol.message}")
    x = np.geomspace(x0, xi_max, 2001) if grid is None else np.asarray(grid, float)
    return QProfile(x, sol.sol(x)[0], float(beta), float(delta), float(c))
