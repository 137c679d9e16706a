import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vmdg.mesh import build_mesh

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_mesh():
    """4 x-cells, 4x4 velocity cells, k=1: every dense oracle fits in memory."""
    return build_mesh(4, 4, 4, 10 * math.pi, 1.2, 1.2, 1)


@pytest.fixture
def small_mesh():
    """Quadratic elements, still small enough for dense checks along one line."""
    return build_mesh(6, 6, 6, 10 * math.pi, 1.2, 1.2, 2)


def smooth_f(mesh, rng=None, scale=1.0, width=0.15):
    """Smooth positive distribution with a little x dependence and beam asymmetry.

    On a velocity box of half-width 2.4 it is below 1e-16 at the edge, so
    boundary outflow does not spoil conservation checks.
    """
    x = mesh.x_nodes[:, :, None, None, None, None]
    v1 = mesh.v1_nodes[None, None, :, :, None, None]
    v2 = mesh.v2_nodes[None, None, None, None, :, :]
    k0 = 2 * math.pi / mesh.L
    f = (1 + 0.1 * np.sin(k0 * x)) * np.exp(-((v1 - 0.2) ** 2 + v2**2) / width)
    if rng is not None:
        f = f * (1 + 0.01 * rng.standard_normal(f.shape))
    return scale * f


def random_fields(mesh, rng, amp=0.05):
    from vmdg.fields import EMField

    shape = mesh.field_shape
    return EMField(
        amp * rng.standard_normal(shape),
        amp * rng.standard_normal(shape),
        amp * rng.standard_normal(shape),
    )


# ---------------------------------------------------------------- acceptance report
_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the session."""

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
