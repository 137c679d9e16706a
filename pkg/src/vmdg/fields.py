"""Transverse electromagnetic fields (E1, E2, B3) on the x2 mesh and their DG curl operators."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .mesh import X2, Mesh1D2V
from .quadrature import weak_derivative
from .solvers import GMRESError, KrylovConfig, dense_matrix, gmres

DENSE_LIMIT = 512


class MaxwellFlux(enum.Enum):
    CENTRAL = "central"
    ALT_EP_BM = "alt_ep_bm"  # E from the right neighbour, B from the left
    ALT_EM_BP = "alt_em_bp"

    @classmethod
    def parse(cls, name: "str | MaxwellFlux") -> "MaxwellFlux":
        if isinstance(name, cls):
            return name
        aliases = {
            "alternating_eplus_bminus": cls.ALT_EP_BM,
            "alternating_eminus_bplus": cls.ALT_EM_BP,
        }
        key = str(name).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(
                f"unknown maxwell flux {name!r}; expected one of "
                + ", ".join(m.value for m in cls)
            ) from None

    @property
    def thetas(self) -> tuple[float, float]:
        """Left-state weights (theta_E, theta_B) at every interface."""
        return {
            MaxwellFlux.CENTRAL: (0.5, 0.5),
            MaxwellFlux.ALT_EP_BM: (0.0, 1.0),
            MaxwellFlux.ALT_EM_BP: (1.0, 0.0),
        }[self]


@dataclass(frozen=True)
class EMField:
    """Nodal E1, E2, B3, each of shape (Nx, k+1).

    Leapfrog-type integrators keep a copy of the staggered field from the last
    half step (``b3_half`` or ``e1_half``/``e2_half``) stamped with ``half_time``.
    """

    e1: np.ndarray
    e2: np.ndarray
    b3: np.ndarray
    b3_half: np.ndarray | None = None
    e1_half: np.ndarray | None = None
    e2_half: np.ndarray | None = None
    half_time: float | None = None

    def __post_init__(self):
        shape = np.shape(self.e1)
        for name in ("e2", "b3", "b3_half", "e1_half", "e2_half"):
            arr = getattr(self, name)
            if arr is not None and np.shape(arr) != shape:
                raise ValueError(f"{name} has shape {np.shape(arr)}, expected {shape}")

    @classmethod
    def zeros(cls, mesh: Mesh1D2V) -> "EMField":
        z = np.zeros(mesh.field_shape)
        return cls(z, z.copy(), z.copy())

    def check(self, mesh: Mesh1D2V) -> None:
        if np.shape(self.e1) != mesh.field_shape:
            raise ValueError(f"field shape {np.shape(self.e1)} does not match mesh {mesh.field_shape}")

    def plain(self) -> "EMField":
        """Copy without staggered data."""
        return EMField(self.e1, self.e2, self.b3)

    def with_(self, **changes) -> "EMField":
        return replace(self, **changes)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.e1, self.e2, self.b3


def curl_derivative(mesh: Mesh1D2V, u: np.ndarray, theta: float) -> np.ndarray:
    """Periodic DG derivative of a nodal x2 field with interface weight ``theta``."""
    return weak_derivative(u, mesh.basis, mesh.widths(X2), theta, periodic=True, axis=0)


def maxwell_weak_rhs(
    mesh: Mesh1D2V, e1: np.ndarray, b3: np.ndarray, flux: MaxwellFlux
) -> tuple[np.ndarray, np.ndarray]:
    """Spatial parts of dE1/dt = dB3/dx2 and dB3/dt = dE1/dx2."""
    if np.shape(e1) != mesh.field_shape or np.shape(b3) != mesh.field_shape:
        raise ValueError(
            f"field shapes {np.shape(e1)}, {np.shape(b3)} do not match mesh {mesh.field_shape}"
        )
    theta_e, theta_b = MaxwellFlux.parse(flux).thetas
    return curl_derivative(mesh, b3, theta_b), curl_derivative(mesh, e1, theta_e)


def _midpoint_operator(mesh: Mesh1D2V, dt: float, flux: MaxwellFlux):
    shape = mesh.field_shape
    n = int(np.prod(shape))

    def apply(u: np.ndarray) -> np.ndarray:
        e1 = u[:n].reshape(shape)
        b3 = u[n:].reshape(shape)
        de, db = maxwell_weak_rhs(mesh, e1, b3, flux)
        return np.concatenate([(e1 - 0.5 * dt * de).ravel(), (b3 - 0.5 * dt * db).ravel()])

    return apply


@lru_cache(maxsize=32)
def _dense_midpoint_inverse(widths: bytes, k: int, nx: int, dt: float, flux: MaxwellFlux):
    # keyed on raw edge bytes so meshes that are equal share the factor
    edges = np.concatenate([[0.0], np.cumsum(np.frombuffer(widths))])
    mesh = Mesh1D2V(edges, np.array([-1.0, 1.0]), np.array([-1.0, 1.0]), k)
    A = dense_matrix(_midpoint_operator(mesh, dt, flux), 2 * nx * (k + 1))
    return np.linalg.inv(A)


def maxwell_midpoint_solve(
    mesh: Mesh1D2V,
    e1: np.ndarray,
    b3: np.ndarray,
    dt: float,
    j1: np.ndarray | float = 0.0,
    flux: MaxwellFlux = MaxwellFlux.CENTRAL,
    method: str = "gmres",
    krylov: KrylovConfig = KrylovConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Implicit midpoint step for (E1, B3) with a time-centred current ``j1``.

    Solves
        E1' - dt/2 Dh(B3') = E1 + dt/2 Dh(B3) - dt j1
        B3' - dt/2 Dh(E1') = B3 + dt/2 Dh(E1)
    ``method`` is "gmres" (matrix-free, with a dense fallback on small meshes
    if it stalls) or "dense".
    """
    if dt == 0.0:
        raise ValueError("dt must be nonzero")
    flux = MaxwellFlux.parse(flux)
    de, db = maxwell_weak_rhs(mesh, e1, b3, flux)
    j1 = np.broadcast_to(np.asarray(j1, dtype=float), mesh.field_shape)
    rhs = np.concatenate(
        [(e1 + 0.5 * dt * de - dt * j1).ravel(), (b3 + 0.5 * dt * db).ravel()]
    )
    n = e1.size
    small = n <= DENSE_LIMIT

    if method == "dense":
        if not small:
            raise ValueError(f"dense Maxwell solve limited to {DENSE_LIMIT} nodes, mesh has {n}")
        sol = _dense_midpoint_inverse(mesh.widths(X2).tobytes(), mesh.k, mesh.nx, float(dt), flux) @ rhs
    elif method == "gmres":
        x0 = np.concatenate([e1.ravel(), b3.ravel()])
        try:
            sol, _ = gmres(_midpoint_operator(mesh, dt, flux), rhs, x0=x0, config=krylov)
        except GMRESError:
            if not small:
                raise
            sol = _dense_midpoint_inverse(mesh.widths(X2).tobytes(), mesh.k, mesh.nx, float(dt), flux) @ rhs
    else:
        raise ValueError(f"unknown method {method!r}")
    return sol[:n].reshape(mesh.field_shape), sol[n:].reshape(mesh.field_shape)


def maxwell_leapfrog_halves(
    mesh: Mesh1D2V,
    fields: EMField,
    dt: float,
    flux: MaxwellFlux = MaxwellFlux.CENTRAL,
    j1: np.ndarray | float = 0.0,
    j2: np.ndarray | float = 0.0,
    t: float | None = None,
) -> EMField:
    """Staggered B half step, full E step with current (j1, j2), second B half step.

    The intermediate B3 is kept as ``b3_half`` (time ``t + dt/2`` when ``t`` is given).
    """
    fields.check(mesh)
    flux = MaxwellFlux.parse(flux)
    theta_e, theta_b = flux.thetas
    b_half = fields.b3 + 0.5 * dt * curl_derivative(mesh, fields.e1, theta_e)
    e1_new = fields.e1 + dt * (curl_derivative(mesh, b_half, theta_b) - j1)
    e2_new = fields.e2 - dt * np.asarray(j2, dtype=float)
    b_new = b_half + 0.5 * dt * curl_derivative(mesh, e1_new, theta_e)
    return EMField(
        e1_new,
        np.broadcast_to(e2_new, mesh.field_shape).copy(),
        b_new,
        b3_half=b_half,
        half_time=None if t is None else t + 0.5 * dt,
    )


def em_energy(mesh: Mesh1D2V, fields: EMField) -> float:
    """Integral of E1^2 + E2^2 + B3^2 over x2 (no 1/2)."""
    w = mesh.wx
    return float(np.sum(w * (fields.e1**2 + fields.e2**2 + fields.b3**2)))


__all__ = [
    "MaxwellFlux",
    "EMField",
    "curl_derivative",
    "maxwell_weak_rhs",
    "maxwell_midpoint_solve",
    "maxwell_leapfrog_halves",
    "em_energy",
]
