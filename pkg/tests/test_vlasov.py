import math

import numpy as np
import pytest
from conftest import random_fields, smooth_f
from hypothesis import given
from hypothesis import strategies as st

from vmdg.harness import PRESETS, weibel_initial_state
from vmdg.integrators_split import scheme_a_step
from vmdg.mesh import build_mesh
from vmdg.vlasov import (
    VlasovFlux,
    compute_moments,
    lorentz_coefficients,
    reflect_velocity,
    transport_v_rhs,
    transport_x_rhs,
    vlasov_rhs,
)

K0 = 0.2
L = 10 * math.pi
USER_FLUXES = [VlasovFlux.UPWIND, VlasovFlux.CENTRAL]
ALL_FLUXES = list(VlasovFlux)


def vel_weights(m):
    return m.wv1[:, :, None, None] * m.wv2[None, None]


def test_parse_rejects_downwind_from_users():
    with pytest.raises(ValueError):
        VlasovFlux.parse("downwind")
    assert VlasovFlux.parse("downwind", allow_downwind=True) is VlasovFlux.DOWNWIND
    with pytest.raises(ValueError):
        VlasovFlux.parse("lax")


def test_negative_step_swaps_upwinding():
    assert VlasovFlux.UPWIND.for_step(-0.1) is VlasovFlux.DOWNWIND
    assert VlasovFlux.DOWNWIND.for_step(-0.1) is VlasovFlux.UPWIND
    assert VlasovFlux.CENTRAL.for_step(-0.1) is VlasovFlux.CENTRAL
    assert VlasovFlux.UPWIND.for_step(0.1) is VlasovFlux.UPWIND


@pytest.mark.parametrize("flux", ALL_FLUXES)
def test_x_constant_and_zero_speed(flux, rng):
    m = build_mesh(6, 1, 1, L, 1, 1, 2)
    assert np.abs(transport_x_rhs(m, np.full(m.field_shape, 3.0), 0.4, flux)).max() < 1e-13
    u = rng.standard_normal(m.field_shape)
    assert not transport_x_rhs(m, u, 0.0, flux).any()


def test_x_rhs_converges_at_order_k():
    errs = []
    for nx in (10, 20, 40):
        m = build_mesh(nx, 1, 1, L, 1, 1, 2)
        d = transport_x_rhs(m, np.sin(K0 * m.x_nodes), 0.3, VlasovFlux.UPWIND)
        errs.append(math.sqrt(np.sum(m.wx * (d + 0.3 * K0 * np.cos(K0 * m.x_nodes)) ** 2)))
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) >= 1.95)


def test_upwind_x_transport_solution_converges_at_k_plus_one():
    # evolved solution, not the rhs, carries the optimal k+1 rate
    errs = []
    for nx in (10, 20, 40):
        m = build_mesh(nx, 1, 2, L, 1.0, 1.2, 2)
        x = m.x_nodes[:, :, None, None, None, None]
        v2 = m.v2_nodes[None, None, None, None]
        f = np.broadcast_to(np.sin(K0 * x), m.shape).copy()
        for _ in range(400):
            f = scheme_a_step(m, f, 0.005, VlasovFlux.UPWIND)
        errs.append(math.sqrt(np.sum(m.phase_weights * (f - np.sin(K0 * (x - 2.0 * v2))) ** 2)))
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) >= 2.7)


@pytest.mark.parametrize("flux", ALL_FLUXES)
def test_v_zero_coefficients(flux, rng):
    m = build_mesh(1, 4, 3, 1, 1.2, 1.2, 2)
    g = rng.standard_normal(m.shape[2:])
    assert not transport_v_rhs(m, g, 0.0, 0.0, flux).any()


def test_v_constant_state_central_only_feels_boundary():
    m = build_mesh(1, 5, 4, 1, 1.2, 1.2, 2)
    g = np.ones(m.shape[2:])
    r = transport_v_rhs(m, g, 0.6, 0.0, VlasovFlux.CENTRAL)
    assert np.abs(r[1:-1]).max() < 1e-13
    assert np.abs(r[0]).max() > 0.1 and np.abs(r[-1]).max() > 0.1


def test_rotation_annihilates_radial_functions():
    errs = []
    for nv in (16, 32, 64):
        m = build_mesh(1, nv, nv, 1.0, 1.2, 1.2, 2)
        v1, v2 = m.v1_nodes[:, :, None, None], m.v2_nodes[None, None]
        g = np.exp(-(v1**2 + v2**2) / 0.1)
        r = transport_v_rhs(m, g, 0.7 * m.v2_nodes, -0.7 * m.v1_nodes, VlasovFlux.UPWIND)
        errs.append(math.sqrt(np.sum(vel_weights(m) * r**2)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert errs[-1] < 5e-4 and np.all(orders >= 1.8), (errs, orders)


def test_moments_of_zero():
    m = build_mesh(3, 4, 4, L, 1.2, 1.2, 1)
    mom = compute_moments(m, np.zeros(m.shape))
    assert not (mom.rho.any() or mom.j1.any() or mom.j2.any())


@pytest.mark.parametrize("preset", ["weibel_run1", "weibel_run2"])
def test_weibel_net_current_vanishes(preset):
    # 48 cells resolve the sqrt(beta) = 0.1 beams, leaving Gaussian truncation at |v| = 1.5
    m = build_mesh(2, 48, 48, L, 1.5, 1.5, 2)
    f, _ = weibel_initial_state(PRESETS[preset], m)
    mom = compute_moments(m, f)
    assert np.abs(mom.j1).max() < 1e-8
    assert np.abs(mom.j2).max() < 1e-12
    np.testing.assert_allclose(mom.rho, 1.0, atol=1e-8)


def test_moments_match_direct_quadrature(small_mesh, rng):
    m = small_mesh
    f = smooth_f(m, rng)
    mom = compute_moments(m, f)
    W = vel_weights(m)
    v1 = m.v1_nodes[:, :, None, None]
    for i, l in [(0, 0), (3, 2), (5, 1)]:
        assert mom.j1[i, l] == pytest.approx(np.sum(W * v1 * f[i, l]), rel=1e-13)


def test_reflect_is_involution_and_negates_odd_moments(small_mesh, rng):
    f = smooth_f(small_mesh, rng)
    np.testing.assert_array_equal(reflect_velocity(reflect_velocity(f)), f)
    a, b = compute_moments(small_mesh, f), compute_moments(small_mesh, reflect_velocity(f))
    np.testing.assert_allclose(b.j1, -a.j1, atol=1e-13)
    np.testing.assert_allclose(b.rho, a.rho, atol=1e-13)


# ---------------------------------------------------------------- properties
def _interior_support(m, rng):
    """Random f that vanishes in the outermost velocity cells, so nothing leaves the box."""
    f = rng.standard_normal(m.shape)
    f[:, :, [0, -1]] = 0
    f[:, :, :, :, [0, -1]] = 0
    return f


@given(flux=st.sampled_from(ALL_FLUXES), seed=st.integers(0, 2**32 - 1))
def test_rhs_conserves_mass(flux, seed):
    rng = np.random.default_rng(seed)
    m = build_mesh(3, 4, 3, L, 1.2, 1.2, 2)
    f = _interior_support(m, rng)
    em = random_fields(m, rng, amp=0.3)
    r = vlasov_rhs(m, f, *em.arrays(), flux)
    assert abs(np.sum(m.phase_weights * r)) < 1e-12
    # x streaming conserves mass for any f thanks to periodicity
    g = rng.standard_normal(m.shape)
    assert abs(np.sum(m.phase_weights * transport_x_rhs(m, g, m.v2_nodes[None, None], flux))) < 1e-12


@given(flux=st.sampled_from(ALL_FLUXES), seed=st.integers(0, 2**32 - 1))
def test_v_rhs_conserves_mass_with_interior_support(flux, seed):
    rng = np.random.default_rng(seed)
    m = build_mesh(1, 6, 5, 1.0, 1.2, 1.2, 2)
    g = np.zeros(m.shape[2:])
    g[1:-1, :, 1:-1, :] = rng.standard_normal((4, 3, 3, 3))
    a1 = rng.standard_normal((5, 3))
    a2 = rng.standard_normal((6, 3))
    r = transport_v_rhs(m, g, a1, a2, flux)
    # outflow reaches the boundary cells but never leaves the box
    assert abs(np.sum(vel_weights(m) * r)) < 1e-12


def _hat(nodes, edges):
    """Continuous piecewise-linear tent through the edges, zero at the ends."""
    vals = np.sin(np.linspace(0, math.pi, edges.size)) ** 2
    return np.interp(nodes, edges, vals)


@given(seed=st.integers(0, 2**32 - 1))
def test_upwind_equals_central_on_continuous_data(seed):
    rng = np.random.default_rng(seed)
    m = build_mesh(5, 6, 6, L, 1.2, 1.2, 1)
    # x: periodic continuous piecewise linear
    xe = m.x2_edges
    vals = rng.standard_normal(xe.size)
    vals[-1] = vals[0]
    u = np.interp(m.x_nodes, xe, vals)
    speed = rng.uniform(-1, 1)
    np.testing.assert_allclose(
        transport_x_rhs(m, u, speed, VlasovFlux.UPWIND), transport_x_rhs(m, u, speed, VlasovFlux.CENTRAL), atol=1e-12
    )
    # v: tent functions vanishing at the box edge
    g = _hat(m.v1_nodes, m.v1_edges)[:, :, None, None] * _hat(m.v2_nodes, m.v2_edges)[None, None]
    a1 = rng.standard_normal((6, 2))
    a2 = rng.standard_normal((6, 2))
    np.testing.assert_allclose(
        transport_v_rhs(m, g, a1, a2, VlasovFlux.UPWIND), transport_v_rhs(m, g, a1, a2, VlasovFlux.CENTRAL), atol=1e-12
    )


@given(flux=st.sampled_from(ALL_FLUXES), seed=st.integers(0, 2**32 - 1), alpha=st.floats(-2, 2), beta=st.floats(-2, 2))
def test_rhs_linear_in_f(flux, seed, alpha, beta):
    rng = np.random.default_rng(seed)
    m = build_mesh(3, 3, 3, L, 1.2, 1.2, 1)
    f, g = rng.standard_normal(m.shape), rng.standard_normal(m.shape)
    em = random_fields(m, rng)
    lhs = vlasov_rhs(m, alpha * f + beta * g, *em.arrays(), flux)
    rhs = alpha * vlasov_rhs(m, f, *em.arrays(), flux) + beta * vlasov_rhs(m, g, *em.arrays(), flux)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(lhs).max()))


@given(flux=st.sampled_from(ALL_FLUXES), seed=st.integers(0, 2**32 - 1))
def test_kinetic_energy_exchange_identity(flux, seed):
    # sum W |v|^2 rhs = 2 int E . j, because |v|^2 is continuous and in the space for k >= 2
    rng = np.random.default_rng(seed)
    m = build_mesh(3, 4, 4, L, 1.2, 1.2, 2)
    f = _interior_support(m, rng)
    em = random_fields(m, rng, amp=0.3)
    r = vlasov_rhs(m, f, *em.arrays(), flux)
    v1 = m.v1_nodes[None, None, :, :, None, None]
    v2 = m.v2_nodes[None, None, None, None, :, :]
    lhs = np.sum(m.phase_weights * r * (v1**2 + v2**2))
    mom = compute_moments(m, f)
    rhs = 2 * np.sum(m.wx * (em.e1 * mom.j1 + em.e2 * mom.j2))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(rhs))


def test_lorentz_coefficients_shapes(small_mesh, rng):
    em = random_fields(small_mesh, rng)
    a1, a2 = lorentz_coefficients(small_mesh, *em.arrays())
    assert a1.shape == (6, 3, 6, 3) and a2.shape == (6, 3, 6, 3)
    np.testing.assert_allclose(a1[2, 1, 4, 0], em.e1[2, 1] + small_mesh.v2_nodes[4, 0] * em.b3[2, 1])
