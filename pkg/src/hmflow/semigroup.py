"""The semigroup exp(-sA) by eigen-expansion, and the weighted maximal function.

For v = sum a_n phi_n, exp(-sA) v = sum exp(-lambda_n s) a_n phi_n.  Because
lambda_0 = -gamma/2 < 0 the bottom coefficient grows.

The maximal function of psi at y is the supremum over intervals I containing
y of the average of |psi(x)| x^gamma against the weight x^(1+omega) exp(-x^2/4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidInput, NonIntegrable, QuadratureNonConvergent
from .spectral import EigenfunctionBasis, SpectralConstants, project


@dataclass(frozen=True)
class ModeCoefficients:
    basis: EigenfunctionBasis = field(repr=False)
    coeffs: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=float)
        if a.ndim != 1 or a.size != self.basis.n_max + 1:
            raise InvalidInput(f"need {self.basis.n_max + 1} coefficients, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInput("coefficients must be finite")
        object.__setattr__(self, "coeffs", a)

    @classmethod
    def from_function(cls, psi, basis: EigenfunctionBasis, s: float = 0.0, **kw) -> "ModeCoefficients":
        return cls(basis, project(psi, basis, **kw), s)

    def __call__(self, y, n_max: Optional[int] = None):
        """Truncated sum over n <= n_max."""
        n_max = self.basis.n_max if n_max is None else n_max
        return self.coeffs[: n_max + 1] @ self.basis.evaluate_all(y, n_max)


def evolve(coeffs: ModeCoefficients, s_elapsed: float) -> ModeCoefficients:
    if s_elapsed < 0:
        raise InvalidInput("evolution time must be nonnegative")
    factors = np.exp(-coeffs.basis.eigenvalues() * s_elapsed)
    return replace(coeffs, coeffs=coeffs.coeffs * factors, s=coeffs.s + s_elapsed)


def semigroup_values(coeffs: ModeCoefficients, s: float, y, n_max: Optional[int] = None):
    """(exp(-sA) v)(y) from the truncated expansion."""
    return evolve(coeffs, s)(y, n_max)


def truncation_gap(coeffs: ModeCoefficients, s: float, y, n_max: int) -> float:
    """Largest |S_{2n} - S_n| relative to max |S_{2n}| at time s."""
    if 2 * n_max > coeffs.basis.n_max:
        raise InvalidInput("basis too small for the doubled truncation")
    ev = evolve(coeffs, s)
    full = ev(y, 2 * n_max)
    return float(np.max(np.abs(full - ev(y, n_max))) / max(np.max(np.abs(full)), 1e-300))


@dataclass(frozen=True)
class _Averager:
    """Cumulative integrals of |psi| x^gamma w and w on a fine log grid."""

    x: np.ndarray
    F: np.ndarray
    W: np.ndarray

    def average(self, a, b):
        Fa, Fb = np.interp(a, self.x, self.F), np.interp(b, self.x, self.F)
        Wa, Wb = np.interp(a, self.x, self.W), np.interp(b, self.x, self.W)
        return (Fb - Fa) / np.maximum(Wb - Wa, 1e-300)


def _averager(psi: Callable, constants: SpectralConstants, x_lo: float, x_hi: float, n: int, extra=()):
    g, om = constants.gamma, constants.omega
    x = np.unique(np.concatenate([np.geomspace(x_lo, x_hi, n), np.asarray(extra, float)]))
    w = x ** (1 + om) * np.exp(-0.25 * x * x)
    f = np.abs(np.asarray(psi(x), dtype=float)) * x**g * w
    if not np.all(np.isfinite(f)):
        raise NonIntegrable("weighted integrand is not finite on the sample grid")
    lx = np.log(x)
    F = integrate.cumulative_trapezoid(f * x, lx, initial=0.0)
    W = integrate.cumulative_trapezoid(w * x, lx, initial=0.0)
    # analytic head on [0, x_lo] assuming |psi| x^gamma ~ const there
    head_w = x_lo ** (2 + om) / (2 + om)
    F += f[0] / w[0] * head_w
    W += head_w
    if F[-1] > 0 and f[-1] * x[-1] > 1e-8 * F[-1]:
        raise NonIntegrable("weighted integrand does not decay at the upper end")
    return _Averager(x, F, W)


def _grid_search(avg: _Averager, y: float, n_grid: int, x_lo: float, x_hi: float):
    a_cand = np.concatenate([[avg.x[0]], np.geomspace(x_lo, y, n_grid)])
    b_cand = np.concatenate([np.geomspace(y, x_hi, n_grid), [avg.x[-1]]])
    A, B = np.meshgrid(a_cand, b_cand, indexing="ij")
    vals = avg.average(A, B)
    vals[B <= A] = -np.inf
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    return a_cand, b_cand, i, j, float(vals[i, j])


def _refine(avg: _Averager, y, a_cand, b_cand, i, j, best, sweeps: int = 4):
    a = a_cand[i]
    b = b_cand[j]
    a_lo, a_hi = a_cand[max(i - 1, 0)], a_cand[min(i + 1, len(a_cand) - 1)]
    b_lo, b_hi = b_cand[max(j - 1, 0)], b_cand[min(j + 1, len(b_cand) - 1)]
    for _ in range(sweeps):
        if a_hi > a_lo:
            r = optimize.minimize_scalar(lambda t: -avg.average(t, b), bounds=(a_lo, min(a_hi, y)), method="bounded")
            if -r.fun > best:
                best, a = -r.fun, r.x
        if b_hi > b_lo:
            r = optimize.minimize_scalar(lambda t: -avg.average(a, t), bounds=(max(b_lo, y), b_hi), method="bounded")
            if -r.fun > best:
                best, b = -r.fun, r.x
    return float(best), (float(a), float(b))


def maximal_function(
    psi: Callable,
    constants: SpectralConstants,
    y: float,
    *,
    monotone: Optional[str] = None,
    n_grid: int = 64,
    n_fine: int = 20000,
    x_range=(1e-6, 60.0),
    breakpoints: Sequence[float] = (),
    return_interval: bool = False,
    check: bool = True,
):
    """Weighted maximal function (M psi)(y).

    ``monotone`` may declare |psi(x)| x^gamma "nonincreasing" (the sup is the
    average over [0, y]) or "nondecreasing" (over [y, inf)).  Otherwise a
    log-spaced n_grid x n_grid search over endpoints is refined around the best
    cell by bounded scalar maximization in each endpoint.  ``breakpoints``
    lists jump locations of psi so the quadrature grid brackets them.
    """
    if not y > 0:
        raise InvalidInput("maximal function needs y > 0")
    x_lo, x_hi = x_range
    bp = np.asarray(breakpoints, dtype=float)
    avg = _averager(psi, constants, x_lo, x_hi, n_fine, extra=np.concatenate([[y], bp, bp * (1 - 1e-12)]))
    if monotone == "nonincreasing":
        k = np.searchsorted(avg.x, y)
        val, iv = float(avg.F[k] / avg.W[k]), (0.0, y)
    elif monotone == "nondecreasing":
        val, iv = float(avg.average(y, avg.x[-1])), (y, math.inf)
    elif monotone is None:
        a_c, b_c, i, j, best = _grid_search(avg, y, n_grid, x_lo, x_hi)
        val, iv = _refine(avg, y, a_c, b_c, i, j, best)
    else:
        raise InvalidInput(f"unknown monotonicity flag {monotone!r}")
    if check:
        coarse = maximal_function(
            psi, constants, y, monotone=monotone, n_grid=n_grid, n_fine=n_fine // 2,
            x_range=x_range, breakpoints=breakpoints, check=False,
        )
        if abs(coarse - val) > 1e-3 * max(abs(val), 1e-300):
            raise QuadratureNonConvergent(f"maximal function changed from {coarse} to {val} on refinement")
    return (val, iv) if return_interval else val


def check_pointwise_bound(
    psi_coeffs: ModeCoefficients,
    s_values: Sequence[float],
    y_values: Sequence[float],
    *,
    monotone: Optional[str] = None,
) -> float:
    """max over (s, y) of |exp(-sA) psi (y)| / ((y e^{-s/2})^-gamma (M psi)(y))."""
    g = psi_coeffs.basis.constants.gamma
    consts = psi_coeffs.basis.constants
    y = np.asarray(y_values, dtype=float)
    M = np.array([maximal_function(psi_coeffs, consts, yi, monotone=monotone) for yi in y])
    worst = 0.0
    for s in s_values:
        vals = np.abs(semigroup_values(psi_coeffs, s, y))
        bound = (y * math.exp(-0.5 * s)) ** (-g) * M
        worst = max(worst, float(np.max(vals / bound)))
    return worst
