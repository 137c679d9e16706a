"""Conserved quantities, energy partition, modified energies and log Fourier modes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .fields import EMField, MaxwellFlux, curl_derivative
from .integrators_unsplit import State
from .mesh import Mesh1D2V
from .quadrature import gauss_rule
from .vlasov import compute_moments

LOG_FLOOR = -300.0
LOGFM_FIELDS = ("E1", "E2", "B3")


def particle_number(mesh: Mesh1D2V, f: np.ndarray) -> float:
    return float(np.sum(mesh.phase_weights * f))


def l2_norm(mesh: Mesh1D2V, f: np.ndarray) -> float:
    return math.sqrt(float(np.sum(mesh.phase_weights * f * f)))


def kinetic_moments(mesh: Mesh1D2V, f: np.ndarray) -> tuple[float, float]:
    """Integrals of f v1^2 and f v2^2 over phase space."""
    W = mesh.phase_weights
    v1 = mesh.v1_nodes[None, None, :, :, None, None]
    v2 = mesh.v2_nodes[None, None, None, None, :, :]
    fw = W * f
    return float(np.sum(fw * v1 * v1)), float(np.sum(fw * v2 * v2))


def field_integrals(mesh: Mesh1D2V, fields: EMField) -> tuple[float, float, float]:
    w = mesh.wx
    return (
        float(np.sum(w * fields.e1**2)),
        float(np.sum(w * fields.e2**2)),
        float(np.sum(w * fields.b3**2)),
    )


def total_energy(mesh: Mesh1D2V, f: np.ndarray, fields: EMField) -> float:
    """1/2 [ int f |v|^2 + int (E1^2 + E2^2 + B3^2) ]."""
    k1, k2 = kinetic_moments(mesh, f)
    return 0.5 * (k1 + k2 + sum(field_integrals(mesh, fields)))


def modified_energy(
    mesh: Mesh1D2V,
    state: State,
    scheme: str,
    maxwell_flux: MaxwellFlux = MaxwellFlux.CENTRAL,
) -> float | None:
    """Energy functional that the leapfrog-type schemes conserve exactly.

    Scheme 1 pairs B3 at t - h and t + h; scheme 3 does the same with E.
    ``h`` is read from the staggered field's time stamp, so the step size must
    not change between steps. Returns None for other schemes.
    """
    scheme = str(scheme).upper()
    em = state.fields
    theta_e, theta_b = MaxwellFlux.parse(maxwell_flux).thetas
    k1, k2 = kinetic_moments(mesh, state.f)
    w = mesh.wx
    if scheme == "1":
        if em.b3_half is None or em.half_time is None:
            raise ValueError("scheme 1 modified energy needs the staggered B3")
        h = state.t - em.half_time
        b_next = em.b3 + h * curl_derivative(mesh, em.e1, theta_e)
        fld = np.sum(w * (em.e1**2 + em.e2**2 + em.b3_half * b_next))
        return 0.5 * (k1 + k2 + float(fld))
    if scheme == "3":
        if em.e1_half is None or em.e2_half is None or em.half_time is None:
            raise ValueError("scheme 3 modified energy needs the staggered E")
        h = state.t - em.half_time
        mom = compute_moments(mesh, state.f)
        e1_next = em.e1 + h * (curl_derivative(mesh, em.b3, theta_b) - mom.j1)
        e2_next = em.e2 - h * mom.j2
        fld = np.sum(w * (em.e1_half * e1_next + em.e2_half * e2_next + em.b3**2))
        return 0.5 * (k1 + k2 + float(fld))
    return None


def boundary_mass(mesh: Mesh1D2V, f: np.ndarray) -> float:
    """Integral of |f| over the outermost layer of velocity cells."""
    mask = np.zeros((mesh.nv1, mesh.nv2), dtype=bool)
    mask[[0, -1], :] = True
    mask[:, [0, -1]] = True
    W = mesh.phase_weights * np.abs(f)
    per_cell = W.sum(axis=(0, 1, 3, 5))
    return float(per_cell[mask].sum())


def _fine_rule(mesh: Mesh1D2V, extra: int):
    rule = gauss_rule(mesh.npts + extra)
    interp = mesh.basis.evaluate(rule.nodes)  # (Q, k+1)
    return rule, interp


def _fine_coords(mesh: Mesh1D2V, direction: str, rule) -> tuple[np.ndarray, np.ndarray]:
    e = mesh.edges(direction)
    mid = 0.5 * (e[:-1] + e[1:])[:, None]
    half = 0.5 * np.diff(e)[:, None]
    return mid + half * rule.nodes[None, :], half * rule.weights[None, :]


def field_l2_error(mesh: Mesh1D2V, values: np.ndarray, exact, extra: int = 3) -> float:
    """L2 distance on [0, L] between a nodal x2 field and a callable, on an oversampled Gauss rule."""
    rule, P = _fine_rule(mesh, extra)
    x, w = _fine_coords(mesh, "x2", rule)
    fine = values @ P.T
    return math.sqrt(float(np.sum(w * (fine - exact(x)) ** 2)))


def distribution_l2_error(mesh: Mesh1D2V, f: np.ndarray, exact, extra: int = 3) -> float:
    """L2 distance over phase space between nodal f and ``exact(x, v1, v2)``.

    The discrete f is evaluated through its Lagrange basis at a finer Gauss
    rule, so interpolation error of the exact function is counted too.
    """
    rule, P = _fine_rule(mesh, extra)
    x, wx = _fine_coords(mesh, "x2", rule)
    v1, w1 = _fine_coords(mesh, "v1", rule)
    v2, w2 = _fine_coords(mesh, "v2", rule)
    total = 0.0
    # one x cell at a time keeps the oversampled tensor small
    for i in range(mesh.nx):
        fine = np.einsum("pa,qb,rc,ajbkc->pjqkr", P, P, P, f[i], optimize=True)
        ex = exact(
            x[i][:, None, None, None, None],
            v1[None, :, :, None, None],
            v2[None, None, None, :, :],
        )
        wt = wx[i][:, None, None, None, None] * w1[None, :, :, None, None] * w2[None, None, None, :, :]
        total += float(np.sum(wt * (fine - ex) ** 2))
    return math.sqrt(total)


def log_fourier_modes(mesh: Mesh1D2V, values: np.ndarray, n_modes: int = 4, kappa: float | None = None) -> np.ndarray:
    """log10 of (1/L) |int W(x) exp(i n kappa x) dx| for n = 1..n_modes, floored at -300."""
    if kappa is None:
        kappa = 2.0 * np.pi / mesh.L
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    x = mesh.x_nodes
    w = mesh.wx * np.asarray(values, dtype=float)
    out = np.empty(n_modes)
    for n in range(1, n_modes + 1):
        s = float(np.sum(w * np.sin(n * kappa * x)))
        c = float(np.sum(w * np.cos(n * kappa * x)))
        amp = math.hypot(s, c) / mesh.L
        out[n - 1] = max(math.log10(amp), LOG_FLOOR) if amp > 0 else LOG_FLOOR
    return out


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    particle_number: float
    l2_f: float
    K1: float
    K2: float
    E1_energy: float
    E2_energy: float
    B3_energy: float
    total_energy: float
    modified_energy: float | None = None
    boundary_mass: float = 0.0
    logfm: dict[str, np.ndarray] = field(default_factory=dict)

    CSV_COLUMNS = (
        "step",
        "t",
        "particle_number",
        "l2_f",
        "K1",
        "K2",
        "E1_energy",
        "E2_energy",
        "B3_energy",
        "total_energy",
        "modified_energy",
    )

    def as_row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in self.CSV_COLUMNS}


def energies(mesh: Mesh1D2V, state: State, scheme: str | None = None, maxwell_flux=MaxwellFlux.CENTRAL):
    """(K1, K2, E1e, E2e, B3e, TE, modified) with the 1/(2L) normalisation on the partition."""
    norm = 1.0 / (2.0 * mesh.L)
    k1, k2 = kinetic_moments(mesh, state.f)
    i1, i2, ib = field_integrals(mesh, state.fields)
    te = 0.5 * (k1 + k2 + i1 + i2 + ib)
    mod = modified_energy(mesh, state, scheme, maxwell_flux) if scheme is not None else None
    return norm * k1, norm * k2, norm * i1, norm * i2, norm * ib, te, mod


def record(
    mesh: Mesh1D2V,
    state: State,
    scheme: str | None = None,
    maxwell_flux=MaxwellFlux.CENTRAL,
    kappa: float | None = None,
) -> DiagnosticsRecord:
    k1, k2, e1e, e2e, b3e, te, mod = energies(mesh, state, scheme, maxwell_flux)
    em = state.fields
    logfm = {
        name: log_fourier_modes(mesh, arr, 4, kappa)
        for name, arr in zip(LOGFM_FIELDS, (em.e1, em.e2, em.b3))
    }
    return DiagnosticsRecord(
        step=state.step,
        t=state.t,
        particle_number=particle_number(mesh, state.f),
        l2_f=l2_norm(mesh, state.f),
        K1=k1,
        K2=k2,
        E1_energy=e1e,
        E2_energy=e2e,
        B3_energy=b3e,
        total_energy=te,
        modified_energy=mod,
        boundary_mass=boundary_mass(mesh, state.f),
        logfm=logfm,
    )


def relative_drift(series) -> float:
    """max |q_n - q_0| / |q_0| over a sequence."""
    arr = np.asarray(list(series), dtype=float)
    ref = abs(arr[0]) if arr[0] != 0 else 1.0
    return float(np.max(np.abs(arr - arr[0])) / ref)


__all__ = [
    "LOG_FLOOR",
    "particle_number",
    "l2_norm",
    "kinetic_moments",
    "field_integrals",
    "total_energy",
    "modified_energy",
    "boundary_mass",
    "log_fourier_modes",
    "field_l2_error",
    "distribution_l2_error",
    "DiagnosticsRecord",
    "energies",
    "record",
    "relative_drift",
]
