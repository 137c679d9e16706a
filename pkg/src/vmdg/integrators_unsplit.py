"""Unsplit time integrators for the coupled Vlasov-Maxwell system and the triple-jump composition.

Every step function has the signature ``step(mesh, state, dt, config) -> State``.
Negative ``dt`` is allowed; an upwind Vlasov flux then becomes downwind.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .fields import EMField, MaxwellFlux, curl_derivative, maxwell_leapfrog_halves, maxwell_midpoint_solve
from .mesh import Mesh1D2V
from .solvers import (
    GMRESError,
    KrylovConfig,
    NewtonConfig,
    NewtonError,
    dense_matrix,
    gmres,
    newton_krylov,
)
from .vlasov import VlasovFlux, compute_moments, lorentz_coefficients, vlasov_rhs

SCHEMES = ("1", "2", "3", "4", "5", "3F", "4F", "5F")
EXPLICIT_SCHEMES = ("1", "2")
DEFAULT_CFL = {1: 0.3, 2: 0.15, 3: 0.08}


class BlowUpError(RuntimeError):
    """Non-finite values appeared; ``stage`` names where."""

    def __init__(self, stage: str, t: float | None = None):
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"non-finite values after {stage}{where}")
        self.stage = stage
        self.t = t


class SolverFailure(RuntimeError):
    """An implicit solve inside a step failed; ``location`` names the worst slice or node."""

    def __init__(self, message: str, stage: str, location: tuple | None = None):
        super().__init__(message)
        self.stage = stage
        self.location = location


@dataclass(frozen=True)
class CompositionCoefficients:
    beta1: float
    beta2: float
    beta3: float

    @classmethod
    def triple_jump(cls) -> "CompositionCoefficients":
        b1 = (2.0 + 2.0 ** (1.0 / 3.0) + 2.0 ** (-1.0 / 3.0)) / 3.0
        return cls(b1, 1.0 - 2.0 * b1, b1)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.beta1, self.beta2, self.beta3)


TRIPLE_JUMP = CompositionCoefficients.triple_jump()


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "2"
    vlasov_flux: VlasovFlux = VlasovFlux.UPWIND
    maxwell_flux: MaxwellFlux = MaxwellFlux.CENTRAL
    dt: float | None = None
    cfl: float | None = None
    eps_tol: float = 1e-12
    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    newton_max_iter: int = 30
    linear_solver: str = "gmres"

    def __post_init__(self):
        scheme = str(self.scheme).strip().upper()
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {', '.join(SCHEMES)}")
        object.__setattr__(self, "scheme", scheme)
        object.__setattr__(self, "vlasov_flux", VlasovFlux.parse(self.vlasov_flux))
        object.__setattr__(self, "maxwell_flux", MaxwellFlux.parse(self.maxwell_flux))
        if self.dt is not None and self.cfl is not None:
            raise ValueError("give either dt or cfl, not both")
        if scheme not in EXPLICIT_SCHEMES:
            if self.dt is None:
                raise ValueError("fixed dt required for implicit schemes")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.cfl is not None and not self.cfl > 0:
            raise ValueError(f"cfl must be positive, got {self.cfl!r}")
        if not self.eps_tol > 0:
            raise ValueError("eps_tol must be positive")
        if self.linear_solver not in ("gmres", "dense"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")

    @property
    def newton(self) -> NewtonConfig:
        return NewtonConfig(eps_tol=self.eps_tol, max_iter=self.newton_max_iter)

    def cfl_for(self, k: int) -> float:
        if self.cfl is not None:
            return self.cfl
        return DEFAULT_CFL.get(k, 0.08 * 3.0 / k)


@dataclass(frozen=True)
class State:
    f: np.ndarray
    fields: EMField
    t: float = 0.0
    step: int = 0

    def advanced(self, f: np.ndarray, fields: EMField, dt: float) -> "State":
        return State(f, fields, self.t + dt, self.step + 1)


def ensure_finite(stage: str, *arrays: np.ndarray, t: float | None = None) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise BlowUpError(stage, t)


def cfl_time_step(mesh: Mesh1D2V, fields: EMField, cfl: float) -> float:
    """CFL * min(dx/V2c, dv1/A1, dv2/A2) with A the largest Lorentz coefficient."""
    dx = float(np.min(mesh.widths("x2")))
    dv1 = float(np.min(mesh.widths("v1")))
    dv2 = float(np.min(mesh.widths("v2")))
    vmax1 = float(np.max(np.abs(mesh.v1_edges)))
    vmax2 = float(np.max(np.abs(mesh.v2_edges)))
    b = np.abs(fields.b3)
    a1 = float(np.max(np.abs(fields.e1) + vmax2 * b))
    a2 = float(np.max(np.abs(fields.e2) + vmax1 * b))
    limits = [dx / vmax2]
    if a1 > 0:
        limits.append(dv1 / a1)
    if a2 > 0:
        limits.append(dv2 / a2)
    return cfl * min(limits)


# ---------------------------------------------------------------- Scheme-1
def scheme1_step(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    """Explicit half Vlasov step, leapfrog Maxwell with J^{n+1/2}, full Vlasov step."""
    flux = cfg.vlasov_flux.for_step(dt)
    f, em = state.f, state.fields
    f_half = f + 0.5 * dt * vlasov_rhs(mesh, f, em.e1, em.e2, em.b3, flux)
    ensure_finite("scheme1 half Vlasov", f_half, t=state.t)
    mom = compute_moments(mesh, f_half)
    new = maxwell_leapfrog_halves(mesh, em, dt, cfg.maxwell_flux, mom.j1, mom.j2, t=state.t)
    e1_bar = 0.5 * (em.e1 + new.e1)
    e2_bar = 0.5 * (em.e2 + new.e2)
    f_new = f + dt * vlasov_rhs(mesh, f_half, e1_bar, e2_bar, new.b3_half, flux)
    ensure_finite("scheme1 full Vlasov", f_new, new.e1, new.b3, t=state.t)
    return state.advanced(f_new, new, dt)


def scheme1_prime(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    """Attach B^{-1/2} = B^0 - dt/2 Dh(E1^0) so the modified energy is defined at t=0."""
    theta_e, _ = cfg.maxwell_flux.thetas
    em = state.fields
    b_prev = em.b3 - 0.5 * dt * curl_derivative(mesh, em.e1, theta_e)
    return replace(state, fields=em.with_(b3_half=b_prev, half_time=state.t - 0.5 * dt))


# ---------------------------------------------------------------- Scheme-2
def scheme2_step(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    """Explicit half Vlasov step, implicit-midpoint Maxwell with J^{n+1/2}, full Vlasov step."""
    flux = cfg.vlasov_flux.for_step(dt)
    f, em = state.f, state.fields
    f_half = f + 0.5 * dt * vlasov_rhs(mesh, f, em.e1, em.e2, em.b3, flux)
    ensure_finite("scheme2 half Vlasov", f_half, t=state.t)
    mom = compute_moments(mesh, f_half)
    e1_new, b3_new = maxwell_midpoint_solve(
        mesh, em.e1, em.b3, dt, mom.j1, cfg.maxwell_flux, cfg.linear_solver, cfg.krylov
    )
    e2_new = em.e2 - dt * mom.j2
    f_new = f + dt * vlasov_rhs(
        mesh, f_half, 0.5 * (em.e1 + e1_new), 0.5 * (em.e2 + e2_new), 0.5 * (em.b3 + b3_new), flux
    )
    ensure_finite("scheme2 full Vlasov", f_new, e1_new, b3_new, t=state.t)
    return state.advanced(f_new, EMField(e1_new, e2_new, b3_new), dt)


# ---------------------------------------------------------------- Scheme-3
def _linear_vlasov_midpoint(
    mesh: Mesh1D2V,
    f: np.ndarray,
    e1: np.ndarray,
    e2: np.ndarray,
    b3: np.ndarray,
    dt: float,
    flux: VlasovFlux,
    cfg: SchemeConfig,
    stage: str,
) -> np.ndarray:
    """Solve g - dt/2 L(g) = f + dt/2 L(f) for frozen fields."""
    shape = f.shape
    rhs = f + 0.5 * dt * vlasov_rhs(mesh, f, e1, e2, b3, flux)

    def apply(u):
        g = u.reshape(shape)
        return (g - 0.5 * dt * vlasov_rhs(mesh, g, e1, e2, b3, flux)).ravel()

    if cfg.linear_solver == "dense":
        A = dense_matrix(apply, f.size)
        return np.linalg.solve(A, rhs.ravel()).reshape(shape)
    try:
        sol, _ = gmres(apply, rhs.ravel(), x0=rhs.ravel(), config=cfg.krylov)
    except GMRESError as exc:
        raise SolverFailure(f"{stage}: {exc}", stage) from exc
    return sol.reshape(shape)


def scheme3_step(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    """Leapfrog E around an implicit-midpoint (linear) Vlasov solve."""
    flux = cfg.vlasov_flux.for_step(dt)
    theta_e, theta_b = cfg.maxwell_flux.thetas
    f, em = state.f, state.fields
    mom = compute_moments(mesh, f)
    e1_half = em.e1 + 0.5 * dt * (curl_derivative(mesh, em.b3, theta_b) - mom.j1)
    e2_half = em.e2 - 0.5 * dt * mom.j2
    b3_new = em.b3 + dt * curl_derivative(mesh, e1_half, theta_e)
    b3_bar = 0.5 * (em.b3 + b3_new)
    f_new = _linear_vlasov_midpoint(mesh, f, e1_half, e2_half, b3_bar, dt, flux, cfg, "scheme3 Vlasov solve")
    ensure_finite("scheme3 Vlasov solve", f_new, t=state.t)
    mom_new = compute_moments(mesh, f_new)
    e1_new = e1_half + 0.5 * dt * (curl_derivative(mesh, b3_new, theta_b) - mom_new.j1)
    e2_new = e2_half - 0.5 * dt * mom_new.j2
    ensure_finite("scheme3 field update", e1_new, e2_new, b3_new, t=state.t)
    fields = EMField(e1_new, e2_new, b3_new, e1_half=e1_half, e2_half=e2_half, half_time=state.t + 0.5 * dt)
    return state.advanced(f_new, fields, dt)


def scheme3_prime(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    """Attach E^{-1/2} = E^0 - dt/2 (Dh B^0 - J^0) for the modified energy at t=0."""
    _, theta_b = cfg.maxwell_flux.thetas
    em = state.fields
    mom = compute_moments(mesh, state.f)
    e1_prev = em.e1 - 0.5 * dt * (curl_derivative(mesh, em.b3, theta_b) - mom.j1)
    e2_prev = em.e2 + 0.5 * dt * mom.j2
    return replace(state, fields=em.with_(e1_half=e1_prev, e2_half=e2_prev, half_time=state.t - 0.5 * dt))


# ---------------------------------------------------------------- Scheme-4
def scheme4_residual(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig):
    """Residual of the fully implicit midpoint system in the packed unknown (f, E1, E2, B3).

    ``residual(u, wind_at=w)`` takes its velocity upwind sides from the state ``w``.
    """
    flux = cfg.vlasov_flux.for_step(dt)
    theta_e, theta_b = cfg.maxwell_flux.thetas
    f0, em = state.f, state.fields
    nf = f0.size
    nfield = em.e1.size
    fs = mesh.field_shape

    def unpack(u):
        f = u[:nf].reshape(f0.shape)
        e1 = u[nf : nf + nfield].reshape(fs)
        e2 = u[nf + nfield : nf + 2 * nfield].reshape(fs)
        b3 = u[nf + 2 * nfield :].reshape(fs)
        return f, e1, e2, b3

    def midpoint_fields(u):
        _, e1, e2, b3 = unpack(u)
        return 0.5 * (e1 + em.e1), 0.5 * (e2 + em.e2), 0.5 * (b3 + em.b3)

    def residual(u, wind_at=None):
        f, e1, e2, b3 = unpack(u)
        e1b, e2b, b3b = midpoint_fields(u)
        wind = None if wind_at is None else lorentz_coefficients(mesh, *midpoint_fields(wind_at))
        fb = 0.5 * (f + f0)
        mom = compute_moments(mesh, fb)
        rf = f - f0 - dt * vlasov_rhs(mesh, fb, e1b, e2b, b3b, flux, wind)
        re1 = e1 - em.e1 - dt * (curl_derivative(mesh, b3b, theta_b) - mom.j1)
        re2 = e2 - em.e2 + dt * mom.j2
        rb3 = b3 - em.b3 - dt * curl_derivative(mesh, e1b, theta_e)
        return np.concatenate([rf.ravel(), re1.ravel(), re2.ravel(), rb3.ravel()])

    u0 = np.concatenate([f0.ravel(), em.e1.ravel(), em.e2.ravel(), em.b3.ravel()])
    return residual, u0, unpack


def scheme4_step(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    """Implicit midpoint on the whole system, solved by Jacobian-free Newton-Krylov."""
    residual, u0, unpack = scheme4_residual(mesh, state, dt, cfg)
    try:
        u, _ = newton_krylov(
            residual, u0, cfg.newton, cfg.krylov,
            smooth_model=lambda at: (lambda v: residual(v, wind_at=at)),
        )
    except NewtonError as exc:
        raise SolverFailure(f"scheme4: {exc}", "scheme4 Newton") from exc
    f, e1, e2, b3 = unpack(u)
    ensure_finite("scheme4 Newton", f, e1, e2, b3, t=state.t)
    return state.advanced(f.copy(), EMField(e1.copy(), e2.copy(), b3.copy()), dt)


# ---------------------------------------------------------------- composition
StepFn = Callable[[Mesh1D2V, State, float, SchemeConfig], State]


def compose_triple_jump(
    step_fn: StepFn,
    coefficients: CompositionCoefficients,
    mesh: Mesh1D2V,
    state: State,
    dt: float,
    cfg: SchemeConfig,
) -> State:
    """Three substeps of sizes beta_i * dt; the negative middle one runs with swapped upwinding."""
    t0, step0 = state.t, state.step
    for beta in coefficients.as_tuple():
        state = step_fn(mesh, state, beta * dt, cfg)
    return replace(state, t=t0 + dt, step=step0 + 1)


def scheme3f_step(mesh, state, dt, cfg):
    return compose_triple_jump(scheme3_step, TRIPLE_JUMP, mesh, state, dt, cfg)


def scheme4f_step(mesh, state, dt, cfg):
    return compose_triple_jump(scheme4_step, TRIPLE_JUMP, mesh, state, dt, cfg)


__all__ = [
    "SCHEMES",
    "EXPLICIT_SCHEMES",
    "DEFAULT_CFL",
    "BlowUpError",
    "SolverFailure",
    "CompositionCoefficients",
    "TRIPLE_JUMP",
    "SchemeConfig",
    "State",
    "ensure_finite",
    "cfl_time_step",
    "scheme1_step",
    "scheme1_prime",
    "scheme2_step",
    "scheme3_step",
    "scheme3_prime",
    "scheme4_residual",
    "scheme4_step",
    "compose_triple_jump",
    "scheme3f_step",
    "scheme4f_step",
]
