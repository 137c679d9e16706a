"""End-to-end acceptance criteria, each at its stated tolerance.

These take minutes. Every test prints a single PASS/FAIL line through the
``acceptance_report`` fixture, and the lines are repeated at the end of the run.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from vmdg import diagnostics as diag
from vmdg.harness import (
    ACCURACY_VBOX,
    initial_state,
    parse_config,
    reversal_accuracy_study,
    reversal_errors,
    run_simulation,
)
from vmdg.schemes import advance, prime

pytestmark = pytest.mark.acceptance

TESTS = Path(__file__).parent


def test_1_exact_conservation_scheme2(acceptance_report):
    cfg = parse_config("preset = weibel_run1\nscheme = 2\nk = 2\nnx = 32\nnv = 32\nt_final = 50\n")
    assert cfg.scheme.cfl == 0.15
    res = run_simulation(cfg, write=False)
    assert not res.failed, res.error
    assert res.records[-1].t == pytest.approx(50.0)
    mass = diag.relative_drift(r.particle_number for r in res.records)
    energy = diag.relative_drift(r.total_energy for r in res.records)
    ok = mass <= 1e-10 and energy <= 1e-10
    acceptance_report(1, ok, f"scheme 2, 32^3, CFL 0.15, t<=50: mass drift {mass:.2e}, energy drift {energy:.2e} (<= 1e-10)")
    assert ok


def test_2_split_scheme_energy(acceptance_report):
    cfg = parse_config(
        "preset = weibel_run1\nscheme = 5\nk = 2\nnx = 24\nnv = 24\ndt = 0.2\neps_tol = 1e-8\nt_final = 50\n"
    )
    res = run_simulation(cfg, write=False)
    assert not res.failed, res.error
    energy = diag.relative_drift(r.total_energy for r in res.records)
    mass = diag.relative_drift(r.particle_number for r in res.records)
    ok = energy <= 1e-6
    acceptance_report(2, ok, f"scheme 5, 24^3, dt 0.2, eps 1e-8, t=50: energy drift {energy:.2e} (<= 1e-6), mass {mass:.2e}")
    assert ok


def _scheme1_drifts(steps, T=20.0):
    cfg = parse_config(f"preset = weibel_run1\nscheme = 1\nk = 2\nnx = 24\nnv = 24\ndt = {T / steps!r}\n")
    dt = cfg.scheme.dt
    mesh, s = initial_state(cfg)
    s = prime(mesh, s, dt, cfg.scheme)
    te = [diag.total_energy(mesh, s.f, s.fields)]
    mod = [diag.modified_energy(mesh, s, "1")]
    for _ in range(steps):
        s = advance(mesh, s, dt, cfg.scheme)
        te.append(diag.total_energy(mesh, s.f, s.fields))
        mod.append(diag.modified_energy(mesh, s, "1"))
    assert s.t == pytest.approx(T)
    return diag.relative_drift(mod), diag.relative_drift(te)


def test_3_modified_energy_scheme1(acceptance_report):
    # 154 steps puts the coarse step at the CFL limit of this mesh (about 0.13)
    mod_coarse, te_coarse = _scheme1_drifts(154)
    mod_fine, te_fine = _scheme1_drifts(308)
    ratio = te_coarse / te_fine
    ok = max(mod_coarse, mod_fine) <= 1e-10 and 3.5 <= ratio <= 4.5
    acceptance_report(
        3,
        ok,
        f"scheme 1, 24^3, T=20: modified drift {mod_coarse:.2e}/{mod_fine:.2e} (<= 1e-10), "
        f"energy drift ratio {ratio:.3f} (in [3.5, 4.5])",
    )
    assert ok


def test_4_reversal_orders(acceptance_report):
    orders = {}
    for k, meshes in ((1, [16, 32]), (2, [12, 24])):
        cfg = parse_config(f"preset = weibel_run1\nscheme = 2\nk = {k}\n", default_vbox=ACCURACY_VBOX)
        rows = reversal_accuracy_study(cfg, meshes, T=5.0)
        orders[k] = next(r.order for r in rows if r.field == "f" and r.order is not None)
    ok = orders[1] >= 1.6 and orders[2] >= 2.5
    acceptance_report(
        4, ok, f"reversal f order: k=1 16/32 {orders[1]:.2f} (>= 1.6), k=2 12/24 {orders[2]:.2f} (>= 2.5)"
    )
    assert ok


def test_5_fourth_order_composition(acceptance_report):
    T = 5.0
    cfg = parse_config("preset = weibel_run1\nscheme = 5F\nk = 3\ndt = 0.5\n", default_vbox=ACCURACY_VBOX)
    steps = [10, 20, 40]
    errors = [reversal_errors(cfg, 12, T / n, T)["f"] for n in steps]
    orders = [math.log(errors[i] / errors[i + 1]) / math.log(2) for i in range(2)]
    ok = min(orders) >= 3.3
    acceptance_report(
        5,
        ok,
        "scheme 5F, k=3, 12^3, dt=T/10,T/20,T/40: f errors "
        + ", ".join(f"{e:.4e}" for e in errors)
        + ", orders "
        + ", ".join(f"{o:.2f}" for o in orders)
        + " (>= 3.3)",
    )
    assert ok


def _scheme3_norms(flux):
    cfg = parse_config(f"preset = weibel_run1\nscheme = 3\nk = 2\nnx = 16\nnv = 16\ndt = 0.2\nvlasov_flux = {flux}\n")
    mesh, s = initial_state(cfg)
    norms = [diag.l2_norm(mesh, s.f)]
    for _ in range(200):
        s = advance(mesh, s, 0.2, cfg.scheme)
        norms.append(diag.l2_norm(mesh, s.f))
    return np.array(norms)


def test_6_l2_stability_scheme3(acceptance_report):
    up = _scheme3_norms("upwind")
    central = _scheme3_norms("central")
    worst_rise = float(np.max(np.diff(up)))
    drift = diag.relative_drift(central)
    ok = worst_rise <= 0.0 and drift <= 1e-10
    acceptance_report(
        6,
        ok,
        f"scheme 3, 16^3, 200 steps: upwind largest step change {worst_rise:.2e} (<= 0), "
        f"central drift {drift:.2e} (<= 1e-10)",
    )
    assert ok


# linear phase: after the start-up transient, before nonlinear speed-up near t = 60
GROWTH_WINDOW = (20.0, 50.0)


def _growth_rate(t, energy, window):
    sel = (t >= window[0]) & (t <= window[1])
    return np.polyfit(t[sel], np.log(energy[sel]), 1)[0]


# At the k=2 default of 0.15 this run goes unstable near t = 88.6, after
# saturation; 0.1 reaches t = 100 (see the decisions ledger).
WEIBEL_CFL = 0.1


def test_7_e2_grows_twice_as_fast_as_b3(acceptance_report):
    cfg = parse_config(
        f"preset = weibel_run1\nscheme = 2\nk = 2\nnx = 32\nnv = 32\ncfl = {WEIBEL_CFL}\nt_final = 100\n"
    )
    res = run_simulation(cfg, write=False)
    assert not res.failed, res.error
    assert res.records[-1].t == pytest.approx(100.0)
    t = np.array([r.t for r in res.records])
    e2 = np.array([r.E2_energy for r in res.records])
    b3 = np.array([r.B3_energy for r in res.records])
    rate_e2 = _growth_rate(t, e2, GROWTH_WINDOW)
    rate_b3 = _growth_rate(t, b3, GROWTH_WINDOW)
    ratio = rate_e2 / rate_b3
    ok = 1.6 <= ratio <= 2.4
    acceptance_report(
        7,
        ok,
        f"scheme 2, 32^3, CFL {WEIBEL_CFL}, t=100, fit on t in {GROWTH_WINDOW}: E2 rate {rate_e2:.4f}, B3 rate {rate_b3:.4f}, "
        f"ratio {ratio:.3f} (in [1.6, 2.4])",
    )
    assert ok


PROPERTY_SUITES = [
    "test_quadrature.py",
    "test_mesh.py",
    "test_fields.py",
    "test_vlasov.py",
    "test_solvers.py",
    "test_integrators_unsplit.py",
    "test_integrators_split.py",
    "test_diagnostics.py",
    "test_harness.py",
]


def test_8_property_suites_under_a_minute(acceptance_report):
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *(str(TESTS / s) for s in PROPERTY_SUITES)],
        capture_output=True,
        text=True,
        cwd=TESTS.parent,
    )
    elapsed = time.perf_counter() - start
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and elapsed < 60
    acceptance_report(8, ok, f"property and oracle suites: {summary}; wall time {elapsed:.1f} s (< 60 s)")
    assert ok
