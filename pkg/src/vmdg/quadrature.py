"""Gauss-Legendre rules, Lagrange nodal bases at Gauss points and 1D DG derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class QuadRule:
    """Gauss-Legendre rule on the reference cell [-1, 1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray


def _legendre_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p_prev = np.ones_like(x)
    p = x.copy()
    for j in range(2, n + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_rule(order: int) -> QuadRule:
    """Return the ``order``-point Gauss-Legendre rule.

    Nodes are the roots of the Legendre polynomial of degree ``order``, found by
    Newton iteration from Chebyshev-like initial guesses.
    """
    if int(order) != order or order < 1:
        raise ValueError(f"quadrature order must be a positive integer, got {order!r}")
    n = int(order)
    if n == 1:
        return QuadRule(1, np.array([0.0]), np.array([2.0]))

    i = np.arange(1, n + 1)
    x = -np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    # enforce exact symmetry about 0
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if n % 2 == 1:
        x[n // 2] = 0.0
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(n, x, w)


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


@dataclass(frozen=True)
class NodalBasis1D:
    """Lagrange polynomials interpolating at the Gauss nodes of ``rule``.

    ``diff_matrix[q, l]`` is the reference-coordinate derivative of the l-th
    Lagrange polynomial at node q; ``boundary_values`` has rows for the left
    (-1) and right (+1) reference endpoints.
    """

    rule: QuadRule
    diff_matrix: np.ndarray
    boundary_values: np.ndarray
    _bary: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return self.rule.order

    @property
    def degree(self) -> int:
        return self.rule.order - 1

    @property
    def left(self) -> np.ndarray:
        return self.boundary_values[0]

    @property
    def right(self) -> np.ndarray:
        return self.boundary_values[1]

    def evaluate(self, xi) -> np.ndarray:
        """Values of every Lagrange polynomial at reference points ``xi``.

        Returns an array of shape ``xi.shape + (order,)``.
        """
        xi = np.asarray(xi, dtype=float)
        nodes = self.rule.nodes
        flat = xi.reshape(-1)
        out = np.empty((flat.size, nodes.size))
        for r, x in enumerate(flat):
            d = x - nodes
            hit = np.flatnonzero(d == 0.0)
            if hit.size:
                out[r] = 0.0
                out[r, hit[0]] = 1.0
            else:
                t = self._bary / d
                out[r] = t / t.sum()
        return out.reshape(xi.shape + (nodes.size,))


def nodal_basis(order: int) -> NodalBasis1D:
    rule = gauss_rule(order)
    x = rule.nodes
    lam = _barycentric_weights(x)
    n = x.size
    D = np.zeros((n, n))
    for q in range(n):
        for l in range(n):
            if q != l:
                D[q, l] = (lam[l] / lam[q]) / (x[q] - x[l])
        D[q, q] = -D[q].sum()
    basis = NodalBasis1D(rule, D, np.empty((2, n)), lam)
    ends = basis.evaluate(np.array([-1.0, 1.0]))
    D.setflags(write=False)
    ends.setflags(write=False)
    return NodalBasis1D(rule, D, ends, lam)


def project_1d(
    func: Callable[[np.ndarray], np.ndarray],
    basis: NodalBasis1D,
    a: float,
    b: float,
    cell: int | None = None,
) -> np.ndarray:
    """Collocate ``func`` at the Gauss nodes mapped to the cell ``[a, b]``."""
    x = 0.5 * (a + b) + 0.5 * (b - a) * basis.rule.nodes
    vals = np.broadcast_to(np.asarray(func(x), dtype=float), x.shape).copy()
    if not np.all(np.isfinite(vals)):
        where = f"cell {cell} " if cell is not None else ""
        raise ValueError(f"non-finite sample in {where}[{a}, {b}]")
    return vals


def weak_derivative(
    u: np.ndarray,
    basis: NodalBasis1D,
    widths: np.ndarray,
    theta,
    periodic: bool,
    axis: int = 0,
) -> np.ndarray:
    """DG weak derivative of nodal data along one direction.

    ``u`` carries the cell index on ``axis`` and the local node index on
    ``axis + 1``. The interface value is ``theta * u_left + (1 - theta) * u_right``;
    ``theta`` is a scalar or an array broadcastable to the remaining (line) axes.
    Non-periodic lines see a zero exterior state at both ends.

    Returns the nodal values of ``M^{-1}(-(u, phi') + [u_hat phi])`` cell by cell,
    i.e. the DG approximation of du/dx.
    """
    nd = u.ndim
    axis = axis % nd
    ul = np.moveaxis(u, (axis, axis + 1), (nd - 2, nd - 1))
    w = basis.rule.weights
    vol = ul @ (w[:, None] * basis.diff_matrix)
    face_l = ul @ basis.left
    face_r = ul @ basis.right

    theta = np.asarray(theta, dtype=float)
    if theta.ndim:
        theta = theta[..., None]

    if periodic:
        right_next = np.roll(face_l, -1, axis=-1)
        left_prev = np.roll(face_r, 1, axis=-1)
    else:
        zeros = np.zeros(face_l.shape[:-1] + (1,))
        right_next = np.concatenate([face_l[..., 1:], zeros], axis=-1)
        left_prev = np.concatenate([zeros, face_r[..., :-1]], axis=-1)

    hat_r = theta * face_r + (1.0 - theta) * right_next
    hat_l = theta * left_prev + (1.0 - theta) * face_l

    out = -vol
    out += hat_r[..., None] * basis.right
    out -= hat_l[..., None] * basis.left
    out *= 2.0 / (np.asarray(widths, dtype=float)[:, None] * w[None, :])
    return np.moveaxis(out, (nd - 2, nd - 1), (axis, axis + 1))


def upwind_theta(speed, sign: float):
    """Interface weight for the left state given the advection speed.

    ``sign`` is +1 for upwind, 0 for central and -1 for downwind.
    """
    return 0.5 + 0.5 * sign * np.sign(speed)


__all__ = [
    "QuadRule",
    "NodalBasis1D",
    "gauss_rule",
    "nodal_basis",
    "project_1d",
    "weak_derivative",
    "upwind_theta",
]
