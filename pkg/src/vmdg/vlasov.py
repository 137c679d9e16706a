"""Nodal DG transport operators for f(x2, v1, v2) and velocity moments.

A distribution tensor has axes (x cell, x node, v1 cell, v1 node, v2 cell, v2 node).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .mesh import V1, V2, X2, Mesh1D2V
from .quadrature import upwind_theta, weak_derivative


class VlasovFlux(enum.Enum):
    UPWIND = "upwind"
    CENTRAL = "central"
    DOWNWIND = "downwind"

    @classmethod
    def parse(cls, name: "str | VlasovFlux", allow_downwind: bool = False) -> "VlasovFlux":
        if isinstance(name, cls):
            flux = name
        else:
            try:
                flux = cls(str(name).strip().lower())
            except ValueError:
                raise ValueError(
                    f"unknown vlasov flux {name!r}; expected upwind or central"
                ) from None
        if flux is cls.DOWNWIND and not allow_downwind:
            raise ValueError("downwind flux is only used internally on negative time steps")
        return flux

    @property
    def sign(self) -> int:
        return {VlasovFlux.UPWIND: 1, VlasovFlux.CENTRAL: 0, VlasovFlux.DOWNWIND: -1}[self]

    def for_step(self, dt: float) -> "VlasovFlux":
        """Flux to use for a step of signed size ``dt``: negative steps swap upwind and downwind."""
        if dt >= 0 or self is VlasovFlux.CENTRAL:
            return self
        return VlasovFlux.DOWNWIND if self is VlasovFlux.UPWIND else VlasovFlux.UPWIND


@dataclass(frozen=True)
class Moments:
    rho: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    rho_ion: float = 1.0


def check_distribution(mesh: Mesh1D2V, f: np.ndarray) -> None:
    if np.shape(f) != mesh.shape:
        raise ValueError(f"distribution has shape {np.shape(f)}, mesh expects {mesh.shape}")


def transport_x_rhs(
    mesh: Mesh1D2V, u: np.ndarray, speed, flux: VlasovFlux
) -> np.ndarray:
    """-speed * d(u)/dx2 in DG weak form with periodic traces.

    ``u`` has shape (Nx, k+1, *rest) and ``speed`` broadcasts against ``rest``.
    """
    if u.ndim < 2 or u.shape[:2] != mesh.field_shape:
        raise ValueError(f"x-slice leading shape {u.shape[:2]} does not match {mesh.field_shape}")
    speed = np.asarray(speed, dtype=float)
    theta = upwind_theta(speed, VlasovFlux.parse(flux, allow_downwind=True).sign)
    rest = u.shape[2:]
    theta = np.broadcast_to(theta, rest) if rest else theta
    du = weak_derivative(u, mesh.basis, mesh.widths(X2), theta, periodic=True, axis=0)
    return -speed * du


def transport_v_rhs(
    mesh: Mesh1D2V, g: np.ndarray, a1, a2, flux: VlasovFlux, wind=None
) -> np.ndarray:
    """-(a1 dg/dv1 + a2 dg/dv2) in DG weak form with zero exterior state.

    ``g`` has shape (*batch, Nv1, k+1, Nv2, k+1). The coefficients must be
    constant along their own direction, as E1 + v2 B3 and E2 - v1 B3 are:
    ``a1`` broadcasts to (*batch, Nv2, k+1) and ``a2`` to (*batch, Nv1, k+1).
    Upwinding follows the sign of the coefficient at each face node, or of
    ``wind = (w1, w2)`` when given. Newton solvers pass a frozen wind so the
    operator stays bilinear while they difference it.
    """
    n = mesh.npts
    if g.ndim < 4 or g.shape[-4:] != (mesh.nv1, n, mesh.nv2, n):
        raise ValueError(f"velocity slice trailing shape {g.shape[-4:]} does not match mesh")
    batch = g.shape[:-4]
    sign = VlasovFlux.parse(flux, allow_downwind=True).sign
    a1 = np.broadcast_to(np.asarray(a1, dtype=float), batch + (mesh.nv2, n))
    a2 = np.broadcast_to(np.asarray(a2, dtype=float), batch + (mesh.nv1, n))
    w1, w2 = (a1, a2) if wind is None else wind
    w1 = np.broadcast_to(np.asarray(w1, dtype=float), a1.shape)
    w2 = np.broadcast_to(np.asarray(w2, dtype=float), a2.shape)
    nd = g.ndim
    basis = mesh.basis

    d1 = weak_derivative(g, basis, mesh.widths(V1), upwind_theta(w1, sign), periodic=False, axis=nd - 4)
    d2 = weak_derivative(g, basis, mesh.widths(V2), upwind_theta(w2, sign), periodic=False, axis=nd - 2)
    return -(a1[..., None, None, :, :] * d1 + a2[..., :, :, None, None] * d2)


def lorentz_coefficients(
    mesh: Mesh1D2V, e1: np.ndarray, e2: np.ndarray, b3: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(E1 + v2 B3, E2 - v1 B3) at every x node, shaped for :func:`transport_v_rhs`."""
    v1 = mesh.v1_nodes[None, None]
    v2 = mesh.v2_nodes[None, None]
    a1 = e1[:, :, None, None] + v2 * b3[:, :, None, None]
    a2 = e2[:, :, None, None] - v1 * b3[:, :, None, None]
    return a1, a2


def vlasov_rhs(
    mesh: Mesh1D2V,
    f: np.ndarray,
    e1: np.ndarray,
    e2: np.ndarray,
    b3: np.ndarray,
    flux: VlasovFlux,
    wind=None,
) -> np.ndarray:
    """Full semi-discrete right-hand side: x2 streaming plus Lorentz forcing.

    ``wind`` optionally fixes the velocity upwind directions, see :func:`transport_v_rhs`.
    """
    check_distribution(mesh, f)
    speed = mesh.v2_nodes[None, None]
    a1, a2 = lorentz_coefficients(mesh, e1, e2, b3)
    return transport_x_rhs(mesh, f, speed, flux) + transport_v_rhs(mesh, f, a1, a2, flux, wind)


def compute_moments(mesh: Mesh1D2V, f: np.ndarray, rho_ion: float = 1.0) -> Moments:
    """Charge density and current at every x node by tensor Gauss quadrature."""
    check_distribution(mesh, f)
    w1 = mesh.wv1
    w2 = mesh.wv2
    fw = np.einsum("iajbkc,jb,kc->iajbkc", f, w1, w2, optimize=True)
    rho = fw.sum(axis=(2, 3, 4, 5))
    j1 = np.einsum("iajbkc,jb->ia", fw, mesh.v1_nodes, optimize=True)
    j2 = np.einsum("iajbkc,kc->ia", fw, mesh.v2_nodes, optimize=True)
    return Moments(rho, j1, j2, rho_ion)


def reflect_velocity(f: np.ndarray) -> np.ndarray:
    """f(x, v) -> f(x, -v) on a velocity mesh symmetric about zero."""
    return np.ascontiguousarray(f[:, :, ::-1, ::-1, ::-1, ::-1])


__all__ = [
    "VlasovFlux",
    "Moments",
    "check_distribution",
    "transport_x_rhs",
    "transport_v_rhs",
    "lorentz_coefficients",
    "vlasov_rhs",
    "compute_moments",
    "reflect_velocity",
]
