"""Time integration of the flow for Phi = u/r, blow-up fitting and similarity diagnostics.

With u(r,t) = r Phi(r,t) the equation becomes

    Phi_t = Delta_n Phi + 4(d-1) Phi^3 g(2 r Phi),   n = d + 2,

where Delta_n is the radial Laplacian in n dimensions and
g(x) = (x - sin x)/x^3.  Phi(0,t) = u_r(0,t) is the origin gradient.

Space: nonuniform grid with a uniform core of width 1/|Phi(0)| clustered at
the origin and geometric spacing outside.  Core rows use the conservative
finite-volume Laplacian; geometric rows use the three-point stencil that is
exact on r^-1 (the equator u = pi/2) and on r^(-gamma-1) (its static
perturbation), which removes the leading error in the self-similar region.
Both give an M-matrix, so the scheme is monotone.

Time: Lie splitting, explicit reaction then backward-Euler diffusion, with
dt <= react_cfl / max dF/dPhi and a relative-change step controller.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from numba import njit
from scipy import interpolate, optimize

from . import __version__
from .errors import (
    CFLViolation,
    FitDiverged,
    InsufficientDecades,
    InvalidInput,
    StepSizeUnderflow,
    WindowTooShort,
)
from .spectral import EigenfunctionBasis, RadialProfile, SpectralConstants, compute_constants, inner_product

TAYLOR_CUT = 1e-2

# kernel exit codes
_STOP, _TMAX, _REMESH, _BUFFER, _CHECKPOINT, _MAXSTEPS, _UNDERFLOW = range(1, 8)


def nonlinearity_g(x):
    """(x - sin x)/x^3, with a Taylor branch for |x| < 1e-2."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < TAYLOR_CUT
    xs = x[small] ** 2
    out[small] = 1.0 / 6.0 - xs / 120.0 + xs * xs / 5040.0
    xl = x[~small]
    out[~small] = (xl - np.sin(xl)) / xl**3
    return out if out.ndim else float(out)


def reaction(r, phi, d: int):
    phi = np.asarray(phi, dtype=float)
    return 4.0 * (d - 1) * phi**3 * nonlinearity_g(2.0 * np.asarray(r) * phi)


@njit(cache=True, fastmath=True)
def _g(x):
    if abs(x) < TAYLOR_CUT:
        x2 = x * x
        return 1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0
    return (x - math.sin(x)) / (x * x * x)

@njit(cache=True)
def _max_dreact(r, P, dm1):
    # dF/dPhi = 2(d-1) Phi^2 (sin(r Phi)/(r Phi))^2 >= 0
    m = 0.0
    for i in range(P.shape[0]):
        x = r[i] * P[i]
        s = 1.0 if x == 0.0 else math.sin(x) / x
        v = 2.0 * dm1 * P[i] * P[i] * s * s
        if v > m:
            m = v
    return m


@njit(cache=True, fastmath=True)
def _lie_step(r, cl, cr, P, dt, dm1, cp, out):
    """Explicit reaction fused into the forward sweep of a backward-Euler
    diffusion solve (Thomas algorithm); the last node is Dirichlet."""
    n = P.shape[0]
    k = 4.0 * dm1 * dt
    p = P[0]
    b = 1.0 + dt * (cl[0] + cr[0])
    cp[0] = -dt * cr[0] / b
    out[0] = (p + k * p * p * p * _g(2.0 * r[0] * p)) / b
    for i in range(1, n - 1):
        p = P[i]
        rhs = p + k * p * p * p * _g(2.0 * r[i] * p)
        a = -dt * cl[i]
        den = 1.0 + dt * (cl[i] + cr[i]) - a * cp[i - 1]
        cp[i] = -dt * cr[i] / den
        out[i] = (rhs - a * out[i - 1]) / den
    out[n - 1] = P[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]

@njit(cache=True, fastmath=True)
def _advance(r, cl, cr, P, t, dt, dm1, rtol, floor, react_cfl, dt_min, t_max, g_stop,
             remesh_r, g_check, rec_t, rec_g, rec_dlog, max_steps, stats):
    n = P.shape[0]
    work = np.empty(n)
    P1 = np.empty(n)
    nrec = 0
    glast = abs(P[0])
    steps = 0
    status = 0
    pmax = 0.0
    for i in range(n):
        pmax = max(pmax, abs(P[i]))
    while True:
        g = abs(P[0])
        if g >= g_stop:
            status = 1
            break
        if t >= t_max:
            status = 2
            break
        if g * remesh_r >= 1.0:
            status = 3
            break
        if nrec >= rec_t.shape[0]:
            status = 4
            break
        if g >= g_check:
            status = 5
            break
        if steps >= max_steps:
            status = 6
            break
        # dF/dPhi = 2(d-1) Phi^2 sinc^2(r Phi) <= 2(d-1) max Phi^2
        lim = react_cfl / max(2.0 * dm1 * pmax * pmax, 1e-300)
        if dt > lim:
            dt = lim
            stats[0] += 1
        if t + dt > t_max:
            dt = t_max - t
        _lie_step(r, cl, cr, P, dt, dm1, work, P1)
        err = 0.0
        tolf = floor * pmax
        newmax = 0.0
        for i in range(n):
            e = abs(P1[i] - P[i]) / (rtol * (abs(P[i]) + tolf) + 1e-300)
            err = max(err, e)
            newmax = max(newmax, abs(P1[i]))
        if err > 1.0:
            stats[1] += 1
            dt *= max(0.2, 0.9 / err)
            if dt < dt_min:
                status = 7
                break
            continue
        for i in range(n):
            P[i] = P1[i]
        pmax = newmax
        t += dt
        steps += 1
        g = abs(P[0])
        if abs(math.log(max(g, 1e-300) / max(glast, 1e-300))) >= rec_dlog:
            rec_t[nrec] = t
            rec_g[nrec] = g
            nrec += 1
            glast = g
        dt *= min(2.0, 0.9 / max(err, 1e-12))
    return status, t, dt, nrec, steps


@njit(cache=True, fastmath=True)
def _advance_lockstep(r, cl, cr, P, t, t_out, dt, dm1, rtol, floor, react_cfl, dt_min, max_steps):
    """Advance every row of P to t_out with one shared step sequence."""
    m, n = P.shape
    work = np.empty(n)
    P1 = np.empty((m, n))
    steps = 0
    while t < t_out:
        if steps >= max_steps:
            return t, dt, False
        lim = 1e300
        for j in range(m):
            lim = min(lim, react_cfl / max(_max_dreact(r, P[j], dm1), 1e-300))
        h = min(dt, lim, t_out - t)
        change = 0.0
        for j in range(m):
            _lie_step(r, cl, cr, P[j], h, dm1, work, P1[j])
            pmax = 0.0
            for i in range(n):
                pmax = max(pmax, abs(P[j, i]))
            for i in range(n):
                change = max(change, abs(P1[j, i] - P[j, i]) / (rtol * (abs(P[j, i]) + floor * pmax) + 1e-300))
        if change > 1.0:
            dt = h * max(0.2, 0.9 / change)
            if dt < dt_min:
                return t, dt, False
            continue
        P[:, :] = P1
        t += h
        steps += 1
        dt = h * min(2.0, 0.9 / max(change, 1e-12))
    return t, dt, True


@dataclass(frozen=True)
class SolverParams:
    n_inner: int = 32
    grid_ratio: float = 1.05
    r_max: float = 50.0
    react_cfl: float = 0.2
    rtol: float = 1e-2
    floor: float = 1e-2
    dt0: float = 1e-6
    dt_min: float = 1e-300
    stop: float = 1e6
    t_max: float = 10.0
    record_dlog: float = 1e-3
    checkpoint_ratio: float = 2.0**0.5
    max_steps: int = 50_000_000
    max_core: float = 1.0
    stencil: str = "matched"

    def __post_init__(self):
        if self.n_inner < 4:
            raise InvalidInput("n_inner must be >= 4")
        if not 1.0 < self.grid_ratio < 1.5:
            raise InvalidInput("grid_ratio must lie in (1, 1.5)")
        if not 0 < self.react_cfl <= 1.0:
            raise CFLViolation(f"react_cfl={self.react_cfl}: explicit reaction is monotone only for react_cfl <= 1")
        if self.stencil not in ("matched", "conservative"):
            raise InvalidInput("stencil must be 'matched' or 'conservative'")

    def refined(self, factor: int = 2) -> "SolverParams":
        """Same run with factor-times finer spacing everywhere."""
        return replace(self, n_inner=self.n_inner * factor, grid_ratio=self.grid_ratio ** (1.0 / factor))


@dataclass
class SimState:
    r_grid: np.ndarray
    phi_values: np.ndarray
    t: float
    dt: float
    refinement_level: int = 0
    core_radius: float = 1.0

    def validate(self) -> None:
        r = self.r_grid
        if r.ndim != 1 or r.shape != self.phi_values.shape:
            raise InvalidInput("grid and values must be 1-D and equal length")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise InvalidInput("grid must start at the origin and increase strictly")
        if not np.all(np.isfinite(self.phi_values)):
            raise InvalidInput("Phi must be finite")

    @property
    def origin_gradient(self) -> float:
        return float(self.phi_values[0])

    def u(self) -> np.ndarray:
        return self.r_grid * self.phi_values

    def copy(self) -> "SimState":
        return SimState(self.r_grid.copy(), self.phi_values.copy(), self.t, self.dt,
                        self.refinement_level, self.core_radius)


def build_grid(core_radius: float, params: SolverParams) -> np.ndarray:
    """Uniform core [0, core_radius] plus geometric nodes r_max q^-j.

    The geometric nodes do not depend on core_radius, so shrinking the core
    only inserts nodes.
    """
    h0 = core_radius / (2 * params.n_inner)
    q = params.grid_ratio
    outer = [params.r_max]
    while outer[-1] * (1 - 1 / q) > h0 and outer[-1] / q > core_radius:
        outer.append(outer[-1] / q)
    top = outer[-1]
    m = int(math.ceil(top / h0))
    core = np.linspace(0.0, top, m + 1)[:-1]
    return np.concatenate([core, outer[::-1]])


def _exact_pair(rl, ri, rr, e1, e2, n):
    def row(e):
        return rl**e - ri**e, rr**e - ri**e, e * (e + n - 2) * ri ** (e - 2)

    a1, b1, f1 = row(e1)
    a2, b2, f2 = row(e2)
    det = a1 * b2 - a2 * b1
    return (f1 * b2 - f2 * b1) / det, (a1 * f2 - a2 * f1) / det


def laplacian_coefficients(r: np.ndarray, constants: SpectralConstants, core_radius: float, stencil: str = "matched"):
    """Off-diagonal weights (cl, cr) of the radial Laplacian in n = d+2 dimensions.

    Row i reads cl_i (Phi_{i-1} - Phi_i) + cr_i (Phi_{i+1} - Phi_i); the origin
    row is the symmetric limit 2n (Phi_1 - Phi_0)/r_1^2 (finite-volume form).
    """
    n = constants.d + 2
    cl = np.zeros_like(r)
    cr = np.zeros_like(r)
    rf = 0.5 * (r[1:] + r[:-1])
    vol = np.empty_like(r)
    vol[0] = rf[0] ** n / n
    vol[1:-1] = (rf[1:] ** n - rf[:-1] ** n) / n
    vol[-1] = 1.0
    area = rf ** (n - 1) / np.diff(r)
    cr[:-1] = area / vol[:-1]
    cl[1:-1] = area[:-1] / vol[1:-1]
    if stencil == "matched":
        i0 = max(int(np.searchsorted(r, core_radius * (1 + 1e-12))), 2)
        i = np.arange(i0, len(r) - 1)
        if i.size:
            a, b = _exact_pair(r[i - 1], r[i], r[i + 1], -1.0, -constants.gamma - 1.0, n)
            cl[i], cr[i] = a, b
    if np.any(cl[1:-1] <= 0) or np.any(cr[:-1] <= 0):
        raise InvalidInput("grid too coarse: Laplacian weights lost positivity")
    return cl, cr


@dataclass
class SimResult:
    status: str
    series_t: np.ndarray
    series_g: np.ndarray
    checkpoints: List[SimState]
    final: SimState
    steps: int
    remeshes: int
    cfl_limited: int
    rejected: int
    d: int
    config: dict = field(default_factory=dict)


def _origin_slope(u0: Callable, r1: float) -> float:
    return float(u0(np.array([r1]))[0] / r1)


def initial_state(u0, constants: SpectralConstants, params: SolverParams, origin_slope: Optional[float] = None) -> SimState:
    """Grid and Phi = u0/r for a u-level callable, profile or initial-data spec.

    An InitialDataSpec is placed at t = 0 with T0 = exp(-s0) scaled to 1, so
    y = r and u0(r) = pi/2 + psi(r).
    """
    from .asymptotics import InitialDataSpec, initial_psi
    from .stationary import solve_stationary

    if isinstance(u0, InitialDataSpec):
        from .spectral import make_basis

        basis = make_basis(constants, max(u0.l, 1))
        psi = initial_psi(u0, basis, solve_stationary(constants))
        origin_slope = psi.origin_slope
        func = lambda r: 0.5 * math.pi + psi(r)
    elif isinstance(u0, RadialProfile):
        prof = u0
        func = lambda r: np.interp(r, prof.grid, prof.values)
    elif callable(u0):
        func = u0
    else:
        raise InvalidInput("u0 must be a callable, RadialProfile or InitialDataSpec")
    if origin_slope is None:
        origin_slope = _origin_slope(func, 1e-8)
    core = min(params.max_core, 1.0 / max(abs(origin_slope), 1e-300))
    r = build_grid(core, params)
    phi = np.empty_like(r)
    phi[1:] = np.asarray(func(r[1:]), dtype=float) / r[1:]
    phi[0] = origin_slope
    state = SimState(r, phi, 0.0, params.dt0, 0, core)
    state.validate()
    return state


def _remesh(state: SimState, params: SolverParams) -> SimState:
    core = min(params.max_core, 1.0 / abs(state.phi_values[0]))
    r_new = build_grid(core, params)
    spline = interpolate.CubicSpline(state.r_grid, state.phi_values, bc_type=((1, 0.0), "not-a-knot"))
    phi = spline(r_new)
    phi[-1] = state.phi_values[-1]
    return SimState(r_new, phi, state.t, state.dt, state.refinement_level + 1, core)


def step(state: SimState, constants: SpectralConstants, params: SolverParams = SolverParams()) -> SimState:
    """One accepted adaptive time step (no remeshing)."""
    new = state.copy()
    cl, cr = laplacian_coefficients(new.r_grid, constants, new.core_radius, params.stencil)
    rec = np.empty(4)
    stats = np.zeros(2, dtype=np.int64)
    status, t, dt, _, steps = _advance(
        new.r_grid, cl, cr, new.phi_values, new.t, new.dt, float(constants.d - 1), params.rtol,
        params.floor, params.react_cfl, params.dt_min, math.inf, math.inf, 0.0, math.inf,
        rec, rec.copy(), math.inf, 1, stats,
    )
    if status == _UNDERFLOW:
        raise StepSizeUnderflow(f"step size fell below {params.dt_min} at t={t}")
    new.t, new.dt = t, dt
    return new


def run_simulation(
    u0,
    params: SolverParams = SolverParams(),
    *,
    d: Optional[int] = None,
    constants: Optional[SpectralConstants] = None,
    origin_slope: Optional[float] = None,
    config: Optional[dict] = None,
) -> SimResult:
    """Integrate until |Phi(0)| >= params.stop (blow-up) or t_max (NoBlowup)."""
    if constants is None:
        if d is None:
            d = getattr(u0, "d", None)
        if d is None:
            raise InvalidInput("dimension d is required")
        constants = compute_constants(d)
    state = initial_state(u0, constants, params, origin_slope)
    dm1 = float(constants.d - 1)
    ts, gs = [0.0], [abs(state.phi_values[0])]
    checkpoints = [state.copy()]
    g_check = abs(state.phi_values[0]) * params.checkpoint_ratio
    stats = np.zeros(2, dtype=np.int64)
    steps = remeshes = 0
    buf_t = np.empty(200_000)
    buf_g = np.empty(200_000)
    while True:
        cl, cr = laplacian_coefficients(state.r_grid, constants, state.core_radius, params.stencil)
        remesh_r = state.r_grid[params.n_inner] if state.core_radius < params.max_core else 0.0
        status, t, dt, nrec, k = _advance(
            state.r_grid, cl, cr, state.phi_values, state.t, state.dt, dm1, params.rtol, params.floor,
            params.react_cfl, params.dt_min, params.t_max, params.stop, remesh_r, g_check,
            buf_t, buf_g, params.record_dlog, params.max_steps - steps, stats,
        )
        state.t, state.dt = t, dt
        steps += k
        ts.extend(buf_t[:nrec])
        gs.extend(buf_g[:nrec])
        if status == _REMESH:
            state = _remesh(state, params)
            remeshes += 1
        elif status == _CHECKPOINT:
            checkpoints.append(state.copy())
            g_check *= params.checkpoint_ratio
        elif status == _BUFFER:
            continue
        elif status == _UNDERFLOW:
            raise StepSizeUnderflow(f"step size fell below {params.dt_min} at t={t}")
        else:
            break
    if ts[-1] != state.t:
        ts.append(state.t)
        gs.append(abs(state.phi_values[0]))
    checkpoints.append(state.copy())
    outcome = {_STOP: "Blowup", _TMAX: "NoBlowup"}.get(status, "StepBudget")
    return SimResult(outcome, np.array(ts), np.array(gs), checkpoints, state, steps, remeshes,
                     int(stats[0]), int(stats[1]), constants.d, dict(config or {}))


def run_lockstep(
    initial: Sequence[Callable],
    constants: SpectralConstants,
    params: SolverParams,
    output_times: Sequence[float],
    *,
    core_radius: float = 1.0,
) -> tuple:
    """Evolve several u-level data on one fixed grid with a shared step sequence.

    Returns the grid and u at each output time, shape (members, times, nodes).  Sharing the
    grid and every dt makes the discrete comparison principle exact.
    """
    r = build_grid(core_radius, params)
    P = []
    for f in initial:
        phi = np.empty_like(r)
        phi[1:] = np.asarray(f(r[1:]), dtype=float) / r[1:]
        phi[0] = _origin_slope(f, 1e-8)
        P.append(phi)
    P = np.array(P)
    cl, cr = laplacian_coefficients(r, constants, core_radius, params.stencil)
    dm1 = float(constants.d - 1)
    out = np.empty((len(P), len(output_times), r.size))
    t = 0.0
    dt = params.dt0
    for k, t_out in enumerate(output_times):
        t, dt, ok = _advance_lockstep(r, cl, cr, P, t, float(t_out), dt, dm1, params.rtol,
                                      params.floor, params.react_cfl, params.dt_min, params.max_steps)
        if not ok:
            raise StepSizeUnderflow(f"lockstep ensemble stalled at t={t:.6g}")
        out[:, k] = P * r
    return r, out


@dataclass(frozen=True)
class BlowupFit:
    T: float
    p: float
    C: float
    residual: float
    classification: str
    n_points: int = 0
    decades: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def classify(p: float, margin: float = 0.02) -> str:
    if abs(p - 0.5) <= margin:
        return "TypeI"
    if p > 0.5 + margin:
        return "TypeII"
    return "Undetermined"


def _initial_T(t, g, p0):
    # g^{-1/p0} is linear in t near T; extrapolate its zero from the last decade
    m = g >= g[-1] / 10.0
    if m.sum() < 3:
        m = np.arange(len(t)) >= len(t) - 3
    z = g[m] ** (-1.0 / p0)
    slope, icpt = np.polyfit(t[m], z, 1)
    if slope >= 0:
        return t[-1] + (t[-1] - t[0]) * 1e-3
    return max(-icpt / slope, t[-1] * (1 + 1e-15) + 1e-300)


def detect_blowup_and_fit(
    t,
    g,
    *,
    p0: float = 0.6,
    window_decades: float = 4.0,
    min_decades: float = 3.0,
    margin: float = 0.02,
    residual_gate: float = 0.05,
) -> BlowupFit:
    """Fit log g = log C - p log(T - t) over the trailing window with T free."""
    t = np.asarray(t, dtype=float)
    g = np.abs(np.asarray(g, dtype=float))
    if t.size < 5:
        raise InsufficientDecades("need at least five samples")
    g_top = g[-1]
    m = g >= g_top * 10.0 ** (-window_decades)
    # the window must be a contiguous trailing segment
    start = len(g) - np.argmin(m[::-1]) if not m.all() else 0
    t, g = t[start:], g[start:]
    decades = math.log10(g[-1] / g[0]) if g[0] > 0 else 0.0
    if decades < min_decades:
        raise InsufficientDecades(f"tail spans {decades:.2f} decades, need {min_decades}")
    T0 = _initial_T(t, g, p0)
    lg = np.log(g)
    span = t[-1] - t[0]

    back = t[-1] - t

    def linear_part(delta):
        # with delta = T - t_last fixed the model is linear in (log C, p)
        A = np.column_stack([np.ones_like(t), -np.log(back + delta)])
        return np.linalg.lstsq(A, lg, rcond=None)[0], A

    # parametrize by log(T - t_last) so the distance to the last sample is resolved to full precision
    def resid(x):
        coef, A = linear_part(math.exp(x[0]))
        return lg - A @ coef

    # coarse scan seeds the local solve; the extrapolated T0 is one of the candidates
    scale = max(span, 1e-300)
    cands = np.append(math.log(scale) + np.linspace(math.log(1e-12), math.log(10.0), 80),
                      math.log(max(T0 - t[-1], 1e-12 * scale)))
    x0 = min(cands, key=lambda x: float(np.sum(resid([x]) ** 2)))
    sol = optimize.least_squares(resid, [x0], xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10_000)
    delta = math.exp(sol.x[0])
    T = float(t[-1] + delta)
    (logC, p), _ = linear_part(delta)
    if not (sol.success and np.isfinite(T) and np.isfinite(p) and np.isfinite(logC)):
        raise FitDiverged(f"least squares failed: {sol.message}")
    residual = float(np.sqrt(np.mean(sol.fun**2)))
    t_decades = math.log10((back[0] + delta) / delta)
    if t_decades < 2.0:
        raise InsufficientDecades(f"fit window covers {t_decades:.2f} decades of T - t, need 2")
    if residual > residual_gate:
        raise FitDiverged(f"fit residual {residual:.3g} above gate {residual_gate}")
    return BlowupFit(float(T), float(p), float(math.exp(logC)), residual, classify(p, margin), int(t.size), decades)


@dataclass
class Diagnostics:
    s: np.ndarray
    coeffs: np.ndarray
    slope: float
    window: tuple
    strip_ok: bool
    strip_excess: float
    mode: int


def similarity_slice(state: SimState, T_est: float) -> RadialProfile:
    """psi(y) = u - pi/2 at y = r / sqrt(T - t), origin node dropped."""
    tau = T_est - state.t
    if not tau > 0:
        raise InvalidInput("checkpoint lies beyond the blow-up time estimate")
    r = state.r_grid[1:]
    psi = r * state.phi_values[1:] - 0.5 * math.pi
    return RadialProfile(r / math.sqrt(tau), psi, "y", json.dumps({"t": state.t, "T": T_est}))


def similarity_diagnostics(
    checkpoints: Sequence[SimState],
    T_est: float,
    basis: EigenfunctionBasis,
    l: int,
    *,
    s_window: Optional[tuple] = None,
    min_length: float = 3.0,
    strip_tol: float = 1e-8,
) -> Diagnostics:
    """Project each slice onto phi_0..phi_{n_max}; slope of log|a_l(s)| over the window.

    The default window runs from the first checkpoint whose inner scale
    1/(|Phi(0)| sqrt(T - t)) is below y = 0.1 to the last checkpoint before T.
    """
    basis.check_index(l)
    usable = [c for c in checkpoints if c.t < T_est]
    s = np.array([-math.log(T_est - c.t) for c in usable])
    inner = np.array([1.0 / (abs(c.phi_values[0]) * math.sqrt(T_est - c.t)) for c in usable])
    coeffs = np.array([
        [inner_product(similarity_slice(c, T_est), basis.mode(n), basis.constants) for n in range(basis.n_max + 1)]
        for c in usable
    ])
    excess = max(float(np.max(np.abs(c.u() - 0.5 * math.pi))) - 0.5 * math.pi for c in checkpoints)
    if s_window is None:
        ok = inner < 0.1
        if not ok.any():
            raise WindowTooShort("inner layer never separates from the similarity region")
        s_window = (float(s[ok][0]), float(s[ok][-1]))
    lo, hi = s_window
    m = (s >= lo) & (s <= hi)
    if hi - lo < min_length or m.sum() < 3:
        raise WindowTooShort(f"s-window [{lo:.2f}, {hi:.2f}] shorter than {min_length}")
    slope = float(np.polyfit(s[m], np.log(np.abs(coeffs[m, l])), 1)[0])
    return Diagnostics(s, coeffs, slope, (lo, hi), excess <= strip_tol, excess, l)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o))


def write_checkpoint(path, state: SimState, d: int, config: Optional[dict] = None) -> None:
    """One JSON header line, then CSV columns r, phi."""
    header = {
        "d": d, "t": state.t, "dt": state.dt, "refinement_level": state.refinement_level,
        "core_radius": state.core_radius, "n": int(state.r_grid.size),
        "version": __version__, "config": config or {},
    }
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True, default=_json_default) + "\n")
        w = csv.writer(fh)
        w.writerow(["r", "phi"])
        for r, p in zip(state.r_grid, state.phi_values):
            w.writerow([repr(float(r)), repr(float(p))])


def read_checkpoint(path):
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise InvalidInput(f"{path}: missing JSON header")
        header = json.loads(first[2:])
        body = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    state = SimState(body[:, 0].copy(), body[:, 1].copy(), header["t"], header["dt"],
                     header["refinement_level"], header["core_radius"])
    return header, state


def write_series(path, t, g, config: Optional[dict] = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps({"version": __version__, "config": config or {}}, sort_keys=True,
                                   default=_json_default) + "\n")
        w = csv.writer(fh)
        w.writerow(["t", "grad"])
        for a, b in zip(t, g):
            w.writerow([repr(float(a)), repr(float(b))])


def read_series(path):
    with open(path) as fh:
        first = fh.readline()
        header = json.loads(first[2:]) if first.startswith("# ") else {}
        data = np.loadtxt(fh, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    return header, data[:, 0], data[:, 1]
