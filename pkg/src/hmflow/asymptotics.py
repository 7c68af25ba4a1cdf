"""Blow-up rate prediction, boundary-layer width, composite profiles and initial data.

Near the origin the solution is a rescaled stationary profile U_1(y/eps(s));
away from it, it is the equator pi/2 plus a single decaying mode
a_l(s) phi_l(y) with a_l(s) = a_l(s0) exp(-lambda_l (s - s0)).  Matching
U_1(xi) ~ pi/2 - h xi^-gamma against a_l phi_l(y) ~ a_l alpha_l y^-gamma
fixes eps(s) = (-a_l alpha_l / h)^(1/gamma) and hence the rate
(T - t)^(l/gamma).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    EmptyOverlap,
    InvalidInput,
    NegativeMode,
    NeutralMode,
    SignError,
    SpecViolation,
)
from .spectral import EigenfunctionBasis, RadialProfile, compute_constants, project
from .stationary import StationaryProfile

NEUTRAL_TOL = 1e-12


@dataclass(frozen=True)
class RatePrediction:
    d: int
    l: int
    lambda_l: float
    gamma: float
    exponent: float
    omega_l: float

    @property
    def type_ii(self) -> bool:
        return self.exponent > 0.5


def predict_exponent(d: int, l: int) -> RatePrediction:
    """Blow-up exponent p = l/gamma of the origin gradient, |u_r(0,t)| ~ (T-t)^-p."""
    if int(l) != l or l < 1:
        raise InvalidInput(f"mode index l must be a positive integer, got {l!r}")
    c = compute_constants(d)
    lam = c.eigenvalue(int(l))
    if abs(lam) <= NEUTRAL_TOL:
        raise NeutralMode(
            f"d={d}, l={l}: eigenvalue lambda_l = 0 is neutral; the rate acquires "
            "logarithmic corrections and is not predicted"
        )
    if lam < 0:
        raise NegativeMode(f"d={d}, l={l}: lambda_l = {lam:.6g} < 0, mode is unstable")
    return RatePrediction(c.d, int(l), lam, c.gamma, l / c.gamma, lam / c.gamma)


def predict_epsilon(a_l0: float, c_l: float, h: float, prediction: RatePrediction, s: float) -> float:
    """Boundary-layer width eps(s) = (-a_l0 c_l / h)^(1/gamma) exp(-omega_l s)."""
    if not a_l0 < 0:
        raise SignError(f"matching needs a_l(0) < 0, got {a_l0}")
    if not (c_l > 0 and h > 0):
        raise InvalidInput("c_l and h must be positive")
    pre = (-a_l0 * c_l / h) ** (1.0 / prediction.gamma)
    return pre * math.exp(-prediction.omega_l * s)


def default_sigma(l: int) -> float:
    return min(0.24, 0.9 / (10 * l))


def default_sigma_tilde(sigma: float) -> float:
    return 0.5 * (sigma / (1 - 2 * sigma) + 0.5)


@dataclass(frozen=True)
class InitialDataSpec:
    """Three-region initial data at similarity time s0.

    ``alpha`` is the slope of the inner stationary profile in the variable
    xi = y exp(omega_l s0); it is chosen so that the inner and middle regions
    agree to leading order.
    """

    d: int
    l: int
    s0: float
    k: float = 0.9
    k_tilde: float = 0.45
    sigma: Optional[float] = None
    sigma_tilde: Optional[float] = None
    q: tuple = ()
    a_l0: float = -1.0
    strict: bool = False
    alpha: Optional[float] = None

    def __post_init__(self):
        sigma = default_sigma(self.l) if self.sigma is None else float(self.sigma)
        object.__setattr__(self, "sigma", sigma)
        if self.sigma_tilde is None:
            object.__setattr__(self, "sigma_tilde", default_sigma_tilde(sigma))
        q = tuple(float(v) for v in (self.q or (0.0,) * self.l))
        object.__setattr__(self, "q", q)
        self.validate()

    @property
    def prediction(self) -> RatePrediction:
        return predict_exponent(self.d, self.l)

    @property
    def omega_l(self) -> float:
        return self.prediction.omega_l

    @property
    def K(self) -> float:
        return math.exp(self.k * self.omega_l * self.s0)

    @property
    def K_tilde(self) -> float:
        return math.exp(self.k_tilde * self.omega_l * self.s0)

    @property
    def inner_edge(self) -> float:
        """y below which the stationary profile is used."""
        return self.K_tilde * math.exp(-self.omega_l * self.s0)

    @property
    def outer_edge(self) -> float:
        """y above which the mode expansion is clamped to the strip."""
        return math.exp(self.sigma_tilde * self.s0)

    def validate(self) -> None:
        self.prediction  # raises NeutralMode / NegativeMode
        if len(self.q) != self.l:
            raise SpecViolation(f"q must have {self.l} entries, got {len(self.q)}")
        if not 0 < self.k_tilde < self.k < 1:
            raise SpecViolation("need 0 < k_tilde < k < 1")
        if not (0 < self.sigma < 0.5 and 0 < self.sigma_tilde < 0.5):
            raise SpecViolation("sigma and sigma_tilde must lie in (0, 1/2)")
        if not self.a_l0 < 0:
            raise SpecViolation("a_l0 must be negative")
        if self.s0 <= 0:
            raise SpecViolation("s0 must be positive")
        if self.strict:
            if not self.sigma < 1.0 / (10 * self.l):
                raise SpecViolation(f"strict mode needs sigma < 1/(10 l) = {1 / (10 * self.l):.4g}")
            if not self.sigma / (1 - 2 * self.sigma) < self.sigma_tilde:
                raise SpecViolation("strict mode needs sigma_tilde > sigma/(1-2 sigma)")
        if not self.inner_edge < self.outer_edge:
            raise SpecViolation("inner region must end before the outer region starts")
        if self.alpha is not None and not self.alpha > 0:
            raise SpecViolation("alpha must be positive")

    def with_alpha(self, basis: EigenfunctionBasis, h: float) -> "InitialDataSpec":
        """Copy with the leading-order matching slope alpha = (h / (-a_l0 alpha_l))^(1/gamma)."""
        c_l = basis.origin_coeffs[self.l]
        alpha = (h / (-self.a_l0 * c_l)) ** (1.0 / basis.constants.gamma)
        return _replace(self, alpha=alpha)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["q"] = list(self.q)
        return out


def _replace(spec: InitialDataSpec, **kw) -> InitialDataSpec:
    data = asdict(spec)
    data.update(kw)
    return InitialDataSpec(**data)


def matched_spec(spec: InitialDataSpec, basis: EigenfunctionBasis, stationary: StationaryProfile) -> InitialDataSpec:
    if spec.alpha is not None:
        return spec
    if stationary.alpha != 1.0:
        raise InvalidInput("matching needs the unit-slope stationary profile")
    return spec.with_alpha(basis, stationary.h_estimate)


def _mode_part(spec: InitialDataSpec, basis: EigenfunctionBasis, y, s: float):
    lam = basis.constants.eigenvalue(spec.l)
    coeffs = np.zeros(spec.l + 1)
    coeffs[: spec.l] = spec.q
    coeffs[spec.l] = spec.a_l0 * math.exp(-lam * s)
    return coeffs @ basis.evaluate_all(y, spec.l)


def initial_psi(spec: InitialDataSpec, basis: EigenfunctionBasis, stationary: StationaryProfile):
    """psi_{0,q}(y) as a vectorized callable (y > 0)."""
    spec = matched_spec(spec, basis, stationary)
    scale = spec.alpha * math.exp(spec.omega_l * spec.s0)
    y1, y2 = spec.inner_edge, spec.outer_edge
    half_pi = 0.5 * math.pi

    def psi(y):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        inner = y < y1
        out[inner] = stationary(scale * y[inner]) - half_pi
        rest = ~inner
        vals = _mode_part(spec, basis, y[rest], spec.s0)
        far = y[rest] >= y2
        vals[far] = np.clip(vals[far], -half_pi, half_pi)
        out[rest] = vals
        return out

    psi.spec = spec
    psi.origin_slope = scale
    return psi


def initial_grid(spec: InitialDataSpec, n: int = 4000, y_max: float = 40.0) -> np.ndarray:
    eps = 1.0 / (spec.alpha * math.exp(spec.omega_l * spec.s0))
    top = max(y_max, 2.0 * spec.outer_edge)
    g = np.geomspace(1e-3 * eps, top, n)
    # region boundaries are nodes; drop neighbours closer than a tenth of a cell
    edges = np.array([spec.inner_edge, spec.outer_edge])
    cell = math.log(g[1] / g[0])
    keep = np.all(np.abs(np.log(g[:, None] / edges[None, :])) > 0.1 * cell, axis=1)
    return np.sort(np.concatenate([g[keep], edges]))


def build_initial_data(
    spec: InitialDataSpec,
    basis: EigenfunctionBasis,
    stationary: StationaryProfile,
    grid=None,
) -> RadialProfile:
    """Sample psi_{0,q} on a y-grid (default: log grid resolving the inner layer)."""
    psi = initial_psi(spec, basis, stationary)
    spec = psi.spec
    y = initial_grid(spec) if grid is None else np.asarray(grid, dtype=float)
    meta = json.dumps({"kind": "psi", "spec": spec.to_dict()}, sort_keys=True)
    return RadialProfile(y, psi(y), "y", meta)


def region_jump(spec: InitialDataSpec, basis: EigenfunctionBasis, stationary: StationaryProfile) -> float:
    """Jump at the inner edge divided by the leading y^-gamma term there."""
    psi = initial_psi(spec, basis, stationary)
    spec = psi.spec
    y1 = spec.inner_edge
    inner = stationary(psi.origin_slope * y1) - 0.5 * math.pi
    outer = _mode_part(spec, basis, np.array([y1]), spec.s0)[0]
    lam = basis.constants.eigenvalue(spec.l)
    lead = abs(spec.a_l0) * math.exp(-lam * spec.s0) * basis.origin_coeffs[spec.l] * y1 ** (-basis.constants.gamma)
    return abs(inner - outer) / lead


def projection_vector(profile, basis: EigenfunctionBasis, l: int) -> np.ndarray:
    """(<profile, phi_0>, ..., <profile, phi_{l-1}>)."""
    if l < 1:
        raise InvalidInput("l must be >= 1")
    return project(profile, basis, l - 1)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10 - 15 * t + 6 * t * t)


def overlap_window(eps: float, sigma: float, s: float) -> tuple:
    """[sqrt(eps), min(eps^(1/4), 1, e^{sigma s})]: both expansions hold here."""
    return math.sqrt(eps), min(eps**0.25, 1.0, math.exp(sigma * s))


@dataclass(frozen=True)
class CompositeResult:
    profile: RadialProfile
    overlap_mismatch: float
    eps: float
    window: tuple = field(default=(0.0, 0.0))


def composite_profile(
    s: float,
    spec: InitialDataSpec,
    basis: EigenfunctionBasis,
    stationary: StationaryProfile,
    *,
    eps_factor: float = 1.0,
    grid=None,
) -> CompositeResult:
    """Blend the inner and outer approximations of u at similarity time s.

    Returns the u-level composite on a y-grid and the largest relative
    mismatch |f_inn - f_out| / (pi/2 - f_out) over the overlap window.
    ``eps_factor`` rescales the boundary-layer width (sensitivity checks).
    """
    if s < spec.s0:
        raise InvalidInput(f"s={s} precedes s0={spec.s0}")
    spec = matched_spec(spec, basis, stationary)
    pred = spec.prediction
    c_l = basis.origin_coeffs[spec.l]
    eps = eps_factor * predict_epsilon(spec.a_l0, c_l, stationary.h_estimate, pred, s)
    half_pi = 0.5 * math.pi
    lam = pred.lambda_l

    def f_inn(y):
        return stationary(np.asarray(y) / eps)

    def f_out(y):
        return half_pi + spec.a_l0 * math.exp(-lam * s) * basis(spec.l, y)

    lo, hi = overlap_window(eps, spec.sigma, s)
    if not lo < hi:
        raise EmptyOverlap(f"overlap window [{lo:.3g}, {hi:.3g}] is empty at s={s}")
    yw = np.geomspace(lo, hi, 400)
    fo = f_out(yw)
    mismatch = float(np.max(np.abs(f_inn(yw) - fo) / np.abs(half_pi - fo)))

    y = np.geomspace(1e-3 * eps, 40.0, 3000) if grid is None else np.asarray(grid, float)
    yb = spec.K_tilde * math.exp(-pred.omega_l * s)
    w = _smoothstep((np.log10(y / yb) + 0.5))
    blend = (1 - w) * f_inn(y) + w * np.clip(f_out(y), 0.0, math.pi)
    meta = json.dumps({"kind": "u", "s": s, "eps": eps}, sort_keys=True)
    return CompositeResult(RadialProfile(y, blend, "y", meta), mismatch, eps, (lo, hi))


def save_initial_data(profile: RadialProfile, path, config: Optional[dict] = None) -> None:
    """CSV (y, psi) plus a JSON sidecar with the spec and effective config."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "psi"])
        for y, v in zip(profile.grid, profile.values):
            w.writerow([repr(float(y)), repr(float(v))])
    meta = json.loads(profile.metadata) if profile.metadata else {}
    if config is not None:
        meta["config"] = config
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
