"""Matrix-free restarted GMRES and a Jacobian-free Newton-Krylov wrapper.

Both work on flat float vectors; callers reshape. Nothing here knows about
meshes or physics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class KrylovConfig:
    restart: int = 30
    max_iter: int = 200
    rtol: float = 1e-13
    atol: float = 0.0

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.rtol < 0 or self.atol < 0 or (self.rtol == 0 and self.atol == 0):
            raise ValueError("need rtol > 0 or atol > 0, both non-negative")


@dataclass(frozen=True)
class NewtonConfig:
    eps_tol: float = 1e-12
    max_iter: int = 30
    line_search: bool = True
    max_backtracks: int = 12
    # inner linear solve stops at max(linear_rtol * |R|, forcing * eps_tol)
    forcing: float = 1e-2
    linear_rtol: float = 1e-6

    def __post_init__(self):
        if not self.eps_tol > 0:
            raise ValueError("eps_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class GMRESReport:
    iterations: int
    residual: float
    converged: bool
    history: list[float] = field(default_factory=list)


@dataclass
class NewtonReport:
    iterations: int
    residual_inf: float
    krylov_iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


class GMRESError(RuntimeError):
    """GMRES stopped without meeting its tolerance; ``x`` is the best iterate."""

    def __init__(self, message: str, x: np.ndarray, residual: float, report: GMRESReport):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.report = report


class NewtonError(RuntimeError):
    """Newton failed; ``u`` is the last iterate and ``residual`` its residual vector."""

    def __init__(self, message: str, u: np.ndarray, residual: np.ndarray, report: NewtonReport):
        super().__init__(message)
        self.u = u
        self.residual = residual
        self.report = report


def _givens(a: float, b: float) -> tuple[float, float]:
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def gmres(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    x0: np.ndarray | None = None,
    config: KrylovConfig = KrylovConfig(),
    raise_on_fail: bool = True,
    check_true_residual: bool = True,
    precondition: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, GMRESReport]:
    """Solve ``apply(x) = b`` by restarted GMRES(m).

    The stopping test is ``|b - A x| <= max(rtol*|b|, atol)`` in the 2-norm.
    ``precondition`` is applied on the right, so the test still uses the
    unpreconditioned residual; none of the built-in solves pass one.
    With ``check_true_residual`` the residual is recomputed at every restart
    boundary; switch it off when ``apply`` is only approximately linear
    (finite-difference Jacobians), where the recomputed value is noise-limited.
    """
    b = np.asarray(b, dtype=float).ravel()
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).ravel()
    bnorm = float(np.linalg.norm(b))
    target = max(config.rtol * bnorm, config.atol)
    report = GMRESReport(0, np.inf, False)

    if bnorm == 0.0 and x0 is None:
        report.residual = 0.0
        report.converged = True
        return x, report

    r = b - apply(x) if np.any(x) else b.copy()
    beta = float(np.linalg.norm(r))
    report.history.append(beta)
    best_x, best_res = x.copy(), beta
    m = config.restart

    while beta > target and report.iterations < config.max_iter:
        V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_used = 0
        est = beta
        breakdown = False
        for j in range(m):
            w = np.array(apply(V[j] if precondition is None else precondition(V[j])), dtype=float).ravel()
            # classical Gram-Schmidt applied twice (CGS2): BLAS-friendly and as stable as MGS
            for _ in range(2):
                h = V[: j + 1] @ w
                w -= V[: j + 1].T @ h
                H[: j + 1, j] += h
            hn = float(np.linalg.norm(w))
            H[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            est = abs(g[j + 1])
            report.iterations += 1
            report.history.append(est)
            j_used = j + 1
            if est <= target or report.iterations >= config.max_iter:
                break
            if hn <= 1e-300:
                breakdown = True
                break
            V[j + 1] = w / hn

        diag = np.abs(np.diag(H[:j_used, :j_used]))
        if np.any(diag == 0.0):
            break
        y = np.linalg.solve(np.triu(H[:j_used, :j_used]), g[:j_used])
        dx = V[:j_used].T @ y
        x = x + (dx if precondition is None else np.asarray(precondition(dx), dtype=float).ravel())
        r = b - apply(x)
        true_res = float(np.linalg.norm(r))
        beta = true_res if check_true_residual else est
        if beta < best_res:
            best_x, best_res = x.copy(), beta
        if beta <= target:
            break
        beta = true_res
        if breakdown:
            # invariant subspace reached yet residual above target: stalled by rounding
            break

    report.residual = best_res
    report.converged = best_res <= target
    if report.converged:
        return best_x, report
    if raise_on_fail:
        raise GMRESError(
            f"GMRES did not converge in {report.iterations} iterations "
            f"(residual {best_res:.3e}, target {target:.3e})",
            best_x,
            best_res,
            report,
        )
    return best_x, report


def fd_jacobian_vector(
    residual: Callable[[np.ndarray], np.ndarray],
    u: np.ndarray,
    r_u: np.ndarray,
    p: np.ndarray,
) -> np.ndarray:
    """One-sided finite-difference approximation of J(u) p."""
    pn = float(np.linalg.norm(p))
    if pn == 0.0:
        return np.zeros_like(r_u)
    sigma = np.sqrt(_EPS) * (1.0 + float(np.linalg.norm(u))) / pn
    return (residual(u + sigma * p) - r_u) / sigma


def newton_krylov(
    residual: Callable[[np.ndarray], np.ndarray],
    u0: np.ndarray,
    newton: NewtonConfig = NewtonConfig(),
    krylov: KrylovConfig = KrylovConfig(),
    smooth_model: Callable[[np.ndarray], Callable[[np.ndarray], np.ndarray]] | None = None,
) -> tuple[np.ndarray, NewtonReport]:
    """Find ``u`` with ``max|residual(u)| < eps_tol`` by inexact Newton.

    Jacobian-vector products are finite differences of ``residual``, or of
    ``smooth_model(u)`` when given: a residual that agrees with ``residual``
    at ``u`` but has its non-smooth switches (upwind sides) pinned there, so
    the difference quotient never straddles a kink. An inner
    GMRES that stalls is not fatal: its best iterate is still a descent
    direction in practice and the line search guards the step.
    """
    u = np.array(u0, dtype=float).ravel()
    r = np.asarray(residual(u), dtype=float).ravel()
    report = NewtonReport(0, float(np.max(np.abs(r), initial=0.0)), 0, False)
    report.history.append(report.residual_inf)

    for _ in range(newton.max_iter):
        if report.residual_inf < newton.eps_tol:
            report.converged = True
            return u, report
        if not np.all(np.isfinite(r)):
            raise NewtonError("non-finite residual", u, r, report)

        rn = float(np.linalg.norm(r))
        lin = KrylovConfig(
            restart=krylov.restart,
            max_iter=krylov.max_iter,
            rtol=newton.linear_rtol,
            atol=newton.forcing * newton.eps_tol,
        )
        u_fixed, r_fixed = u, r
        model = residual if smooth_model is None else smooth_model(u)
        step, lrep = gmres(
            lambda p: fd_jacobian_vector(model, u_fixed, r_fixed, p),
            -r,
            config=lin,
            raise_on_fail=False,
            check_true_residual=False,
        )
        report.krylov_iterations += lrep.iterations

        lam = 1.0
        trial = u + step
        r_trial = np.asarray(residual(trial), dtype=float).ravel()
        if newton.line_search:
            tries = 0
            while not (
                np.all(np.isfinite(r_trial))
                and np.linalg.norm(r_trial) <= (1.0 - 1e-4 * lam) * rn
            ):
                tries += 1
                if tries > newton.max_backtracks:
                    break
                lam *= 0.5
                trial = u + lam * step
                r_trial = np.asarray(residual(trial), dtype=float).ravel()
            else:
                tries = 0
            if tries > newton.max_backtracks:
                if np.all(np.isfinite(r_trial)) and np.linalg.norm(r_trial) < rn:
                    pass  # tiny but real progress; accept it
                else:
                    report.iterations += 1
                    raise NewtonError(
                        f"line search failed at Newton iteration {report.iterations} "
                        f"(residual {report.residual_inf:.3e})",
                        u,
                        r,
                        report,
                    )
        u, r = trial, r_trial
        report.iterations += 1
        report.residual_inf = float(np.max(np.abs(r), initial=0.0))
        report.history.append(report.residual_inf)

    if report.residual_inf < newton.eps_tol:
        report.converged = True
        return u, report
    raise NewtonError(
        f"Newton did not converge in {report.iterations} iterations "
        f"(residual {report.residual_inf:.3e}, tolerance {newton.eps_tol:.1e})",
        u,
        r,
        report,
    )


def dense_matrix(apply: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Assemble the matrix of a linear callable column by column (small n only)."""
    cols = [np.asarray(apply(e), dtype=float).ravel() for e in np.eye(n)]
    return np.array(cols).T


__all__ = [
    "KrylovConfig",
    "NewtonConfig",
    "GMRESReport",
    "NewtonReport",
    "GMRESError",
    "NewtonError",
    "gmres",
    "newton_krylov",
    "fd_jacobian_vector",
    "dense_matrix",
]
