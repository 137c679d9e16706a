"""Lookup from scheme id to step function, plus the start-up hooks some schemes need."""

from __future__ import annotations

from .integrators_split import scheme5_step, scheme5f_step
from .integrators_unsplit import (
    SchemeConfig,
    State,
    StepFn,
    scheme1_prime,
    scheme1_step,
    scheme2_step,
    scheme3_prime,
    scheme3_step,
    scheme3f_step,
    scheme4_step,
    scheme4f_step,
)
from .mesh import Mesh1D2V

STEPPERS: dict[str, StepFn] = {
    "1": scheme1_step,
    "2": scheme2_step,
    "3": scheme3_step,
    "4": scheme4_step,
    "5": scheme5_step,
    "3F": scheme3f_step,
    "4F": scheme4f_step,
    "5F": scheme5f_step,
}

# schemes whose diagnostics include a modified energy built from a staggered field
MODIFIED_ENERGY_SCHEMES = ("1", "3")


def stepper(scheme: str) -> StepFn:
    try:
        return STEPPERS[str(scheme).upper()]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}") from None


def prime(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    """Attach the staggered field at t - dt/2 for schemes that report a modified energy."""
    if cfg.scheme == "1":
        return scheme1_prime(mesh, state, dt, cfg)
    if cfg.scheme == "3":
        return scheme3_prime(mesh, state, dt, cfg)
    return state


def advance(mesh: Mesh1D2V, state: State, dt: float, cfg: SchemeConfig) -> State:
    return stepper(cfg.scheme)(mesh, state, dt, cfg)
