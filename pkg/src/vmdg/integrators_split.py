"""Energy-conserving operator splitting: x-streaming (a), electric push (b), magnetic rotation plus Maxwell (c).

Each sub-flow is advanced by the implicit midpoint rule on Gauss-node data.
The many independent per-node systems of a sub-step are stacked into one
block-diagonal system and handed to a single Krylov or Newton-Krylov solve;
the blocks do not interact, so this gives the same answer as looping.
"""

from __future__ import annotations

import numpy as np

from .fields import EMField, maxwell_midpoint_solve
from .integrators_unsplit import (
    TRIPLE_JUMP,
    SchemeConfig,
    SolverFailure,
    State,
    compose_triple_jump,
    ensure_finite,
)
from .mesh import Mesh1D2V
from .solvers import GMRESError, KrylovConfig, NewtonConfig, NewtonError, dense_matrix, gmres, newton_krylov
from .vlasov import VlasovFlux, compute_moments, transport_v_rhs, transport_x_rhs


# ---------------------------------------------------------------- (a) x2 streaming
def _x_dense_solve(mesh: Mesh1D2V, f: np.ndarray, dt: float, flux: VlasovFlux) -> np.ndarray:
    # one small matrix per v2 node; every v1 node shares it
    out = np.empty_like(f)
    nxn = mesh.nx * mesh.npts
    for j2 in range(mesh.nv2):
        for m2 in range(mesh.npts):
            speed = mesh.v2_nodes[j2, m2]

            def apply(u, speed=speed):
                g = u.reshape(mesh.field_shape)
                return (g - 0.5 * dt * transport_x_rhs(mesh, g, speed, flux)).ravel()

            A = dense_matrix(apply, nxn)
            src = f[:, :, :, :, j2, m2]
            rhs = src + 0.5 * dt * transport_x_rhs(mesh, src, speed, flux)
            sol = np.linalg.solve(A, rhs.reshape(nxn, -1))
            out[:, :, :, :, j2, m2] = sol.reshape(src.shape)
    return out


def scheme_a_step(
    mesh: Mesh1D2V,
    f: np.ndarray,
    dt: float,
    flux: VlasovFlux = VlasovFlux.UPWIND,
    krylov: KrylovConfig = KrylovConfig(),
    method: str = "gmres",
) -> np.ndarray:
    """Implicit midpoint for f_t + v2 f_x2 = 0 at every velocity node."""
    flux = VlasovFlux.parse(flux, allow_downwind=True).for_step(dt)
    if method == "dense":
        return _x_dense_solve(mesh, f, dt, flux)
    speed = mesh.v2_nodes[None, None]
    shape = f.shape
    rhs = f + 0.5 * dt * transport_x_rhs(mesh, f, speed, flux)

    def apply(u):
        g = u.reshape(shape)
        return (g - 0.5 * dt * transport_x_rhs(mesh, g, speed, flux)).ravel()

    try:
        sol, _ = gmres(apply, rhs.ravel(), x0=rhs.ravel(), config=krylov)
    except GMRESError as exc:
        res = (rhs - apply(exc.x).reshape(shape)) ** 2
        per_slice = np.sqrt(res.sum(axis=(0, 1, 2, 3)))
        j2, m2 = np.unravel_index(int(np.argmax(per_slice)), per_slice.shape)
        raise SolverFailure(
            f"scheme-a solve failed; worst velocity slice v2 cell {j2}, node {m2} "
            f"(residual {per_slice[j2, m2]:.3e})",
            "scheme-a",
            (int(j2), int(m2)),
        ) from exc
    return sol.reshape(shape)


# ---------------------------------------------------------------- (b) electric push
def scheme_b_residual(mesh: Mesh1D2V, f: np.ndarray, e1: np.ndarray, e2: np.ndarray, dt: float, flux: VlasovFlux):
    """Residual of the coupled midpoint system for (g, E1', E2'), packed flat.

    ``residual(u, wind_at=w)`` takes its upwind sides from the state ``w``.
    """
    flux = VlasovFlux.parse(flux, allow_downwind=True).for_step(dt)
    nf = f.size
    nfld = e1.size
    fs = mesh.field_shape
    mom0 = compute_moments(mesh, f)
    expand = (slice(None), slice(None), None, None)

    def unpack(u):
        return (
            u[:nf].reshape(f.shape),
            u[nf : nf + nfld].reshape(fs),
            u[nf + nfld :].reshape(fs),
        )

    def residual(u, wind_at=None):
        g, e1n, e2n = unpack(u)
        e1b = 0.5 * (e1 + e1n)
        e2b = 0.5 * (e2 + e2n)
        wind = None
        if wind_at is not None:
            _, w1, w2 = unpack(wind_at)
            wind = ((0.5 * (e1 + w1))[expand], (0.5 * (e2 + w2))[expand])
        rg = g - f - dt * transport_v_rhs(mesh, 0.5 * (g + f), e1b[expand], e2b[expand], flux, wind)
        mom = compute_moments(mesh, g)
        r1 = e1n - e1 + 0.5 * dt * (mom0.j1 + mom.j1)
        r2 = e2n - e2 + 0.5 * dt * (mom0.j2 + mom.j2)
        return np.concatenate([rg.ravel(), r1.ravel(), r2.ravel()])

    u0 = np.concatenate([f.ravel(), e1.ravel(), e2.ravel()])
    return residual, u0, unpack


def _pinned(residual):
    return lambda at: (lambda u: residual(u, wind_at=at))


def scheme_b_step(
    mesh: Mesh1D2V,
    f: np.ndarray,
    e1: np.ndarray,
    e2: np.ndarray,
    dt: float,
    flux: VlasovFlux = VlasovFlux.UPWIND,
    newton: NewtonConfig = NewtonConfig(),
    krylov: KrylovConfig = KrylovConfig(),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Implicit midpoint for f_t + E . grad_v f = 0 with E_t = -j, independently at every x node."""
    residual, u0, unpack = scheme_b_residual(mesh, f, e1, e2, dt, flux)
    try:
        u, _ = newton_krylov(residual, u0, newton, krylov, smooth_model=_pinned(residual))
    except NewtonError as exc:
        rg, r1, r2 = unpack(np.abs(exc.residual))
        per_node = np.maximum(rg.max(axis=(2, 3, 4, 5)), np.maximum(r1, r2))
        i, l = np.unravel_index(int(np.argmax(per_node)), per_node.shape)
        raise SolverFailure(
            f"scheme-b Newton failed; worst x node cell {i}, node {l} "
            f"(residual {per_node[i, l]:.3e}): {exc}",
            "scheme-b",
            (int(i), int(l)),
        ) from exc
    g, e1n, e2n = unpack(u)
    return g.copy(), e1n.copy(), e2n.copy()


# ---------------------------------------------------------------- (c) magnetic rotation + Maxwell
def rotation_midpoint_solve(
    mesh: Mesh1D2V,
    f: np.ndarray,
    b3_bar: np.ndarray,
    dt: float,
    flux: VlasovFlux,
    krylov: KrylovConfig = KrylovConfig(),
    method: str = "gmres",
) -> np.ndarray:
    """Midpoint step of f_t + (v2 B, -v1 B) . grad_v f = 0 with B frozen per x node."""
    flux = VlasovFlux.parse(flux, allow_downwind=True).for_step(dt)
    b = b3_bar[:, :, None, None]
    a1 = mesh.v2_nodes[None, None] * b
    a2 = -mesh.v1_nodes[None, None] * b
    shape = f.shape
    rhs = f + 0.5 * dt * transport_v_rhs(mesh, f, a1, a2, flux)

    def apply(u):
        g = u.reshape(shape)
        return (g - 0.5 * dt * transport_v_rhs(mesh, g, a1, a2, flux)).ravel()

    if method == "dense":
        out = np.empty_like(f)
        for i in range(mesh.nx):
            for l in range(mesh.npts):
                a1l, a2l = a1[i, l], a2[i, l]
                vshape = shape[2:]

                def local(u, a1l=a1l, a2l=a2l):
                    g = u.reshape(vshape)
                    return (g - 0.5 * dt * transport_v_rhs(mesh, g, a1l, a2l, flux)).ravel()

                A = dense_matrix(local, int(np.prod(vshape)))
                out[i, l] = np.linalg.solve(A, rhs[i, l].ravel()).reshape(vshape)
        return out

    try:
        sol, _ = gmres(apply, rhs.ravel(), x0=rhs.ravel(), config=krylov)
    except GMRESError as exc:
        res = (rhs - apply(exc.x).reshape(shape)) ** 2
        per_node = np.sqrt(res.sum(axis=(2, 3, 4, 5)))
        i, l = np.unravel_index(int(np.argmax(per_node)), per_node.shape)
        raise SolverFailure(
            f"scheme-c rotation solve failed; worst x node cell {i}, node {l}",
            "scheme-c",
            (int(i), int(l)),
        ) from exc
    return sol.reshape(shape)


def scheme_c_step(
    mesh: Mesh1D2V,
    f: np.ndarray,
    e1: np.ndarray,
    b3: np.ndarray,
    dt: float,
    maxwell_flux,
    flux: VlasovFlux = VlasovFlux.UPWIND,
    krylov: KrylovConfig = KrylovConfig(),
    method: str = "gmres",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source-free midpoint Maxwell for (E1, B3), then the v-rotation with the averaged B3."""
    maxwell_method = "dense" if method == "dense" and e1.size <= 512 else "gmres"
    e1n, b3n = maxwell_midpoint_solve(mesh, e1, b3, dt, 0.0, maxwell_flux, maxwell_method, krylov)
    g = rotation_midpoint_solve(mesh, f, 0.5 * (b3 + b3n), dt, flux, krylov, method)
    return g, e1n, b3n


# ---------------------------------------------------------------- Strang composition
def scheme5_step(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    """a(dt/2) b(dt/2) c(dt) b(dt/2) a(dt/2)."""
    flux = cfg.vlasov_flux
    method = cfg.linear_solver
    newton = cfg.newton
    f, em = state.f, state.fields
    e1, e2, b3 = em.e1, em.e2, em.b3
    t = state.t
    half = 0.5 * dt

    f = scheme_a_step(mesh, f, half, flux, cfg.krylov, method)
    ensure_finite("scheme-a (first)", f, t=t)
    f, e1, e2 = scheme_b_step(mesh, f, e1, e2, half, flux, newton, cfg.krylov)
    ensure_finite("scheme-b (first)", f, e1, e2, t=t)
    f, e1, b3 = scheme_c_step(mesh, f, e1, b3, dt, cfg.maxwell_flux, flux, cfg.krylov, method)
    ensure_finite("scheme-c", f, e1, b3, t=t)
    f, e1, e2 = scheme_b_step(mesh, f, e1, e2, half, flux, newton, cfg.krylov)
    ensure_finite("scheme-b (second)", f, e1, e2, t=t)
    f = scheme_a_step(mesh, f, half, flux, cfg.krylov, method)
    ensure_finite("scheme-a (second)", f, t=t)
    return state.advanced(f, EMField(e1, e2, b3), dt)


def scheme5f_step(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    return compose_triple_jump(scheme5_step, TRIPLE_JUMP, mesh, state, dt, cfg)


__all__ = [
    "scheme_a_step",
    "scheme_b_residual",
    "scheme_b_step",
    "rotation_midpoint_solve",
    "scheme_c_step",
    "scheme5_step",
    "scheme5f_step",
]
