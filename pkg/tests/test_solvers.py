import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vmdg.solvers import (
    GMRESError,
    KrylovConfig,
    NewtonConfig,
    NewtonError,
    dense_matrix,
    fd_jacobian_vector,
    gmres,
    newton_krylov,
)


def test_identity_one_iteration():
    b = np.array([1.0, -2.0, 3.0])
    x, rep = gmres(lambda v: v, b)
    np.testing.assert_allclose(x, b, atol=1e-15)
    assert rep.iterations == 1 and rep.converged


def test_spd_3x3_against_hand_inverse():
    A = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    inv = np.array([[3.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 3.0]]) / 4
    b = np.array([1.0, 0.0, 2.0])
    x, _ = gmres(lambda v: A @ v, b)
    np.testing.assert_allclose(x, inv @ b, atol=1e-12)


def test_random_50_against_dense(rng):
    A = np.eye(50) * 3 + 0.3 * rng.standard_normal((50, 50))
    b = rng.standard_normal(50)
    x, rep = gmres(lambda v: A @ v, b)
    want = np.linalg.solve(A, b)
    assert np.linalg.norm(x - want) <= 1e-12 * np.linalg.norm(want) * np.linalg.cond(A)
    assert np.linalg.norm(b - A @ x) <= 1e-13 * np.linalg.norm(b)


def test_residual_monotone_within_restart(rng):
    A = np.eye(80) + 0.5 * rng.standard_normal((80, 80)) / np.sqrt(80)
    b = rng.standard_normal(80)
    _, rep = gmres(lambda v: A @ v, b, config=KrylovConfig(restart=80))
    h = np.array(rep.history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])


def test_failure_carries_best_iterate(rng):
    # rotation-like operator: GMRES(1) stagnates completely
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    b = np.array([1.0, 0.0])
    with pytest.raises(GMRESError) as info:
        gmres(lambda v: A @ v, b, config=KrylovConfig(restart=1, max_iter=5))
    err = info.value
    assert err.x.shape == (2,)
    assert err.residual == pytest.approx(np.linalg.norm(b - A @ err.x))
    x, rep = gmres(lambda v: A @ v, b, config=KrylovConfig(restart=1, max_iter=5), raise_on_fail=False)
    assert not rep.converged


def test_preconditioner_hook(rng):
    A = np.diag(np.linspace(1, 1e4, 60)) + 0.1 * rng.standard_normal((60, 60))
    b = rng.standard_normal(60)
    d = np.diag(A)
    x, rep = gmres(lambda v: A @ v, b, precondition=lambda v: v / d)
    np.testing.assert_allclose(A @ x, b, atol=1e-9)
    _, plain = gmres(lambda v: A @ v, b, raise_on_fail=False)
    assert rep.iterations < plain.iterations


def test_config_validation():
    with pytest.raises(ValueError):
        KrylovConfig(restart=0)
    with pytest.raises(ValueError):
        KrylovConfig(rtol=0, atol=0)
    with pytest.raises(ValueError):
        NewtonConfig(eps_tol=0)


def test_newton_linear_shift_one_step():
    c = np.array([1.0, 2.0, -3.0])
    u, rep = newton_krylov(lambda u: u - c, np.zeros(3))
    np.testing.assert_allclose(u, c, atol=1e-12)
    # the first step is exact up to finite-difference rounding (~sqrt(eps));
    # at most one more polishes it below eps_tol
    assert rep.history[1] < 1e-7 * rep.history[0]
    assert rep.iterations <= 2


def test_newton_scalar_root():
    u, rep = newton_krylov(lambda u: u**2 - 4, np.array([3.0]))
    assert abs(u[0] - 2) < 1e-12
    assert rep.converged and rep.residual_inf < 1e-12


def test_newton_two_by_two():
    def res(u):
        return np.array([u[0] + u[1] - 3, u[0] * u[1] - 2])

    u, rep = newton_krylov(res, np.array([2.5, 0.5]))
    assert np.max(np.abs(res(u))) < 1e-12
    assert min(np.abs(u - [2, 1]).max(), np.abs(u - [1, 2]).max()) < 1e-10


def test_newton_reports_divergence():
    # no real root
    with pytest.raises(NewtonError) as info:
        newton_krylov(lambda u: u**2 + 1, np.array([0.5]), NewtonConfig(max_iter=8))
    assert info.value.u.shape == (1,)


def test_smooth_model_is_used_for_jacobian():
    # u + |u|/2 = c has a kink at 0; roots are 2c/3 (c > 0) and 2c (c < 0)
    c = np.array([0.3, -0.2])
    pinned = []

    def res(u, at=None):
        s = np.sign(u if at is None else at)
        return u + 0.5 * s * u - c

    def model(at):
        pinned.append(at.copy())
        return lambda v: res(v, at)

    u, rep = newton_krylov(res, np.array([1e-9, -1e-9]), smooth_model=model)
    np.testing.assert_allclose(u, [0.2, -0.4], atol=1e-12)
    assert len(pinned) == rep.iterations


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12))
def test_jfnk_linear_residual_one_newton_step(seed, n):
    rng = np.random.default_rng(seed)
    A = np.eye(n) * 2 + 0.3 * rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    u, rep = newton_krylov(lambda u: A @ u - b, np.zeros(n), NewtonConfig(eps_tol=1e-9))
    assert rep.iterations <= 2
    assert np.max(np.abs(A @ u - b)) < 1e-9


@given(seed=st.integers(0, 2**32 - 1))
def test_fd_jacobian_matches_analytic(seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(5)
    p = rng.standard_normal(5)

    def res(v):
        return np.array([v[0] ** 2 * v[1], v[1] ** 3 - v[2], v[2] * v[3] * v[4], v[4] ** 2, v[0]])

    J = np.array(
        [
            [2 * u[0] * u[1], u[0] ** 2, 0, 0, 0],
            [0, 3 * u[1] ** 2, -1, 0, 0],
            [0, 0, u[3] * u[4], u[2] * u[4], u[2] * u[3]],
            [0, 0, 0, 0, 2 * u[4]],
            [1, 0, 0, 0, 0],
        ]
    )
    got = fd_jacobian_vector(res, u, res(u), p)
    sigma = np.sqrt(np.finfo(float).eps) * (1 + np.linalg.norm(u)) / np.linalg.norm(p)
    scale = 1 + np.abs(u).max() ** 2
    np.testing.assert_allclose(got, J @ p, atol=50 * sigma * scale * np.linalg.norm(p) ** 2)


def test_dense_matrix_recovers_operator(rng):
    A = rng.standard_normal((7, 7))
    np.testing.assert_allclose(dense_matrix(lambda v: A @ v, 7), A, atol=1e-15)
