"""Cartesian phase-space mesh for the 1D2V reduction (x2 periodic, truncated velocity box)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .quadrature import NodalBasis1D, nodal_basis

X2, V1, V2 = "x2", "v1", "v2"
DIRECTIONS = (X2, V1, V2)


def _check_edges(name: str, edges: np.ndarray) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError(f"{name} needs at least two edges")
    if not np.all(np.diff(edges) > 0):
        raise ValueError(f"{name} must be strictly increasing")
    edges = edges.copy()
    edges.setflags(write=False)
    return edges


@dataclass(frozen=True, eq=False)
class Mesh1D2V:
    """Tensor mesh of [0, L] x [-V1c, V1c] x [-V2c, V2c] with degree ``k`` in every direction.

    Edge arrays may be nonuniform; all operators read cell widths from them.
    """

    x2_edges: np.ndarray
    v1_edges: np.ndarray
    v2_edges: np.ndarray
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"polynomial degree must be >= 1, got {self.k!r}")
        object.__setattr__(self, "x2_edges", _check_edges("x2_edges", self.x2_edges))
        object.__setattr__(self, "v1_edges", _check_edges("v1_edges", self.v1_edges))
        object.__setattr__(self, "v2_edges", _check_edges("v2_edges", self.v2_edges))
        if self.x2_edges[0] != 0.0:
            raise ValueError("x2 domain must start at 0")

    # geometry -------------------------------------------------------------
    @property
    def nx(self) -> int:
        return self.x2_edges.size - 1

    @property
    def nv1(self) -> int:
        return self.v1_edges.size - 1

    @property
    def nv2(self) -> int:
        return self.v2_edges.size - 1

    @property
    def L(self) -> float:
        return float(self.x2_edges[-1])

    @property
    def v1c(self) -> float:
        return float(self.v1_edges[-1])

    @property
    def v2c(self) -> float:
        return float(self.v2_edges[-1])

    @property
    def npts(self) -> int:
        return self.k + 1

    @cached_property
    def basis(self) -> NodalBasis1D:
        return nodal_basis(self.k + 1)

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of a distribution-function nodal tensor."""
        n = self.npts
        return (self.nx, n, self.nv1, n, self.nv2, n)

    @property
    def field_shape(self) -> tuple[int, int]:
        return (self.nx, self.npts)

    def edges(self, direction: str) -> np.ndarray:
        return {X2: self.x2_edges, V1: self.v1_edges, V2: self.v2_edges}[direction]

    def widths(self, direction: str) -> np.ndarray:
        return np.diff(self.edges(direction))

    def nodes(self, direction: str) -> np.ndarray:
        """Physical Gauss nodes, shape (cells, k+1)."""
        e = self.edges(direction)
        xi = self.basis.rule.nodes
        return 0.5 * (e[:-1] + e[1:])[:, None] + 0.5 * np.diff(e)[:, None] * xi[None, :]

    def weights(self, direction: str) -> np.ndarray:
        """Physical quadrature weights (= diagonal mass matrix), shape (cells, k+1)."""
        return 0.5 * self.widths(direction)[:, None] * self.basis.rule.weights[None, :]

    @cached_property
    def x_nodes(self) -> np.ndarray:
        return self.nodes(X2)

    @cached_property
    def v1_nodes(self) -> np.ndarray:
        return self.nodes(V1)

    @cached_property
    def v2_nodes(self) -> np.ndarray:
        return self.nodes(V2)

    @cached_property
    def wx(self) -> np.ndarray:
        return self.weights(X2)

    @cached_property
    def wv1(self) -> np.ndarray:
        return self.weights(V1)

    @cached_property
    def wv2(self) -> np.ndarray:
        return self.weights(V2)

    @cached_property
    def phase_weights(self) -> np.ndarray:
        """Tensor quadrature weights matching :attr:`shape`."""
        return (
            self.wx[:, :, None, None, None, None]
            * self.wv1[None, None, :, :, None, None]
            * self.wv2[None, None, None, None, :, :]
        )

    @property
    def measure(self) -> float:
        return self.L * (self.v1_edges[-1] - self.v1_edges[0]) * (self.v2_edges[-1] - self.v2_edges[0])

    # topology -------------------------------------------------------------
    def x_neighbor(self, i: int, step: int = 1) -> int:
        """Periodic neighbour index in x2."""
        if not 0 <= i < self.nx:
            raise IndexError(f"x2 cell {i} out of range [0, {self.nx})")
        return (i + step) % self.nx

    def physical_node(self, cell: int, node: int, direction: str) -> float:
        if direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {direction!r}")
        e = self.edges(direction)
        if not 0 <= cell < e.size - 1:
            raise IndexError(f"{direction} cell {cell} out of range [0, {e.size - 1})")
        if not 0 <= node < self.npts:
            raise IndexError(f"node {node} out of range [0, {self.npts})")
        xi = self.basis.rule.nodes[node]
        return float(0.5 * (e[cell] + e[cell + 1]) + 0.5 * (e[cell + 1] - e[cell]) * xi)

    def locate_x(self, x: float) -> tuple[int, float]:
        """Cell index and reference coordinate of a point in [0, L]."""
        x = float(x) % self.L
        i = int(np.searchsorted(self.x2_edges, x, side="right") - 1)
        i = min(max(i, 0), self.nx - 1)
        a, b = self.x2_edges[i], self.x2_edges[i + 1]
        return i, 2.0 * (x - a) / (b - a) - 1.0

    def is_velocity_symmetric(self, tol: float = 1e-12) -> bool:
        """True when both velocity edge arrays are mirror images about zero."""
        return all(
            np.allclose(e, -e[::-1], rtol=0.0, atol=tol * max(1.0, abs(e[-1])))
            for e in (self.v1_edges, self.v2_edges)
        )


def build_mesh(
    nx: int, nv1: int, nv2: int, L: float, v1c: float, v2c: float, k: int
) -> Mesh1D2V:
    """Uniform mesh of [0, L] x [-v1c, v1c] x [-v2c, v2c]."""
    for name, n in (("nx", nx), ("nv1", nv1), ("nv2", nv2)):
        if int(n) != n or n < 1:
            raise ValueError(f"{name} must be a positive integer, got {n!r}")
    for name, val in (("L", L), ("v1c", v1c), ("v2c", v2c)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val!r}")
    xe = np.linspace(0.0, L, int(nx) + 1)
    v1e = np.linspace(-v1c, v1c, int(nv1) + 1)
    v2e = np.linspace(-v2c, v2c, int(nv2) + 1)
    # exact mirror symmetry of the velocity edges
    v1e = 0.5 * (v1e - v1e[::-1])
    v2e = 0.5 * (v2e - v2e[::-1])
    return Mesh1D2V(xe, v1e, v2e, int(k))
