"""Weibel presets, run configuration, simulation driver, time-reversal accuracy studies and CSV output."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .fields import EMField, MaxwellFlux
from .integrators_unsplit import (
    EXPLICIT_SCHEMES,
    SCHEMES,
    BlowUpError,
    SchemeConfig,
    SolverFailure,
    State,
    cfl_time_step,
)
from .mesh import Mesh1D2V, build_mesh
from .schemes import MODIFIED_ENERGY_SCHEMES, advance, prime
from .vlasov import VlasovFlux, reflect_velocity

REAL = ".17g"

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- presets
@dataclass(frozen=True)
class WeibelParams:
    beta: float = 0.01
    b: float = 0.001
    delta: float = 0.5
    v01: float = 0.3
    v02: float = 0.3
    k0: float = 0.2

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not self.k0 > 0:
            raise ValueError("k0 must be positive")

    @property
    def length(self) -> float:
        return 2.0 * math.pi / self.k0


PRESETS: dict[str, WeibelParams] = {
    # symmetric counter-streaming beams
    "weibel_run1": WeibelParams(delta=0.5, v01=0.3, v02=0.3, k0=0.2),
    # nonsymmetric beams with zero net current
    "weibel_run2": WeibelParams(delta=1.0 / 6.0, v01=0.5, v02=0.1, k0=0.2),
}

DEFAULT_SNAPSHOT_TIMES = (55.0, 82.0, 125.0)
DEFAULT_SLICE_LOCATIONS = (0.0625 * math.pi, 4.9375 * math.pi)
PHYSICS_VBOX = 1.5
ACCURACY_VBOX = 1.2


def weibel_distribution(params: WeibelParams, v1, v2):
    beta = params.beta
    return (
        np.exp(-(v2**2) / beta)
        * (
            params.delta * np.exp(-((v1 - params.v01) ** 2) / beta)
            + (1.0 - params.delta) * np.exp(-((v1 + params.v02) ** 2) / beta)
        )
        / (math.pi * beta)
    )


def weibel_initial_state(params: WeibelParams, mesh: Mesh1D2V) -> tuple[np.ndarray, EMField]:
    """Collocated two-beam Maxwellian f, E = 0 and B3 = b sin(k0 x2)."""
    if not math.isclose(mesh.L, params.length, rel_tol=1e-12):
        raise ValueError(f"mesh length {mesh.L} does not match 2*pi/k0 = {params.length}")
    v1 = mesh.v1_nodes[:, :, None, None]
    v2 = mesh.v2_nodes[None, None, :, :]
    fv = weibel_distribution(params, v1, v2)
    f = np.broadcast_to(fv[None, None], mesh.shape).copy()
    zero = np.zeros(mesh.field_shape)
    b3 = params.b * np.sin(params.k0 * mesh.x_nodes)
    return f, EMField(zero, zero.copy(), b3)


# ---------------------------------------------------------------- configuration
class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


@dataclass(frozen=True)
class RunManifest:
    scheme: SchemeConfig
    nx: int
    nv1: int
    nv2: int
    k: int
    v1c: float = PHYSICS_VBOX
    v2c: float = PHYSICS_VBOX
    t_final: float = 125.0
    cadence: int = 1
    out_dir: str = "output"
    preset: str = "weibel_run1"
    snapshot_times: tuple[float, ...] = DEFAULT_SNAPSHOT_TIMES
    slice_locations: tuple[float, ...] = DEFAULT_SLICE_LOCATIONS
    params: WeibelParams | None = None

    def __post_init__(self):
        if not self.t_final >= 0:
            raise ValueError("t_final must be non-negative")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.params is None:
            object.__setattr__(self, "params", PRESETS[self.preset])

    def build_mesh(self, n: int | None = None) -> Mesh1D2V:
        if n is None:
            return build_mesh(self.nx, self.nv1, self.nv2, self.params.length, self.v1c, self.v2c, self.k)
        return build_mesh(n, n, n, self.params.length, self.v1c, self.v2c, self.k)


_INT_KEYS = {"k", "nx", "nv1", "nv2", "nv", "cadence"}
_FLOAT_KEYS = {"v1c", "v2c", "dt", "cfl", "t_final", "eps_tol"}
_LIST_KEYS = {"snapshot_times", "slice_locations"}
_STR_KEYS = {"preset", "scheme", "vlasov_flux", "maxwell_flux", "out_dir"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _LIST_KEYS | _STR_KEYS


def _parse_float(text: str) -> float:
    # allow simple multiples of pi, e.g. "0.0625pi" or "pi/4"
    t = text.strip().lower().replace("π", "pi")
    if "pi" in t:
        t = t.replace("*pi", "pi")
        head, _, tail = t.partition("pi")
        scale = float(head) if head else 1.0
        if tail.startswith("/"):
            scale /= float(tail[1:])
        elif tail:
            raise ValueError(text)
        return scale * math.pi
    return float(t)


def parse_config(text: str, default_vbox: float = PHYSICS_VBOX) -> RunManifest:
    """Parse ``key = value`` lines into a validated manifest.

    ``default_vbox`` fills v1c/v2c when the file leaves them out; accuracy
    studies pass the narrower box.
    """
    raw: dict[str, tuple[object, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, _, value = (s.strip() for s in body.partition("="))
        key = key.lower()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            if key in _INT_KEYS:
                parsed: object = int(value)
            elif key in _FLOAT_KEYS:
                parsed = _parse_float(value)
                if not math.isfinite(parsed):
                    raise ValueError(value)
            elif key in _LIST_KEYS:
                parsed = tuple(_parse_float(p) for p in value.replace(";", ",").split(",") if p.strip())
            else:
                parsed = value
        except ValueError:
            raise ConfigError(f"malformed value {value!r} for {key}", lineno) from None
        raw[key] = (parsed, lineno)

    def get(key, default=None):
        return raw[key][0] if key in raw else default

    def line_of(*keys):
        for k in keys:
            if k in raw:
                return raw[k][1]
        return None

    if "nv" in raw and ("nv1" in raw or "nv2" in raw):
        raise ConfigError("give nv or nv1/nv2, not both", line_of("nv"))
    preset = str(get("preset", "weibel_run1"))
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}", line_of("preset"))
    scheme = str(get("scheme", "2")).upper()
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}", line_of("scheme"))

    try:
        vflux = VlasovFlux.parse(get("vlasov_flux", "upwind"))
    except ValueError as exc:
        raise ConfigError(str(exc), line_of("vlasov_flux")) from None
    try:
        mflux = MaxwellFlux.parse(get("maxwell_flux", "central"))
    except ValueError as exc:
        raise ConfigError(str(exc), line_of("maxwell_flux")) from None

    k = int(get("k", 2))
    if k < 1:
        raise ConfigError("k must be >= 1", line_of("k"))
    nv = get("nv")
    nx = int(get("nx", 32))
    nv1 = int(get("nv1", nv if nv is not None else 32))
    nv2 = int(get("nv2", nv if nv is not None else 32))
    for name, val in (("nx", nx), ("nv1", nv1), ("nv2", nv2)):
        if val < 1:
            raise ConfigError(f"{name} must be >= 1", line_of(name, "nv"))

    dt = get("dt")
    cfl = get("cfl")
    if dt is not None and cfl is not None:
        raise ConfigError("give either dt or cfl, not both", line_of("cfl"))
    if scheme in EXPLICIT_SCHEMES and dt is None and cfl is None:
        cfl = SchemeConfig(scheme="1").cfl_for(k)
    if scheme not in EXPLICIT_SCHEMES and cfl is not None:
        raise ConfigError("cfl applies only to explicit schemes 1 and 2", line_of("cfl"))
    try:
        scfg = SchemeConfig(
            scheme=scheme,
            vlasov_flux=vflux,
            maxwell_flux=mflux,
            dt=dt,
            cfl=cfl,
            eps_tol=float(get("eps_tol", 1e-12)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), line_of("dt", "cfl", "eps_tol", "scheme")) from None

    try:
        return RunManifest(
            scheme=scfg,
            nx=nx,
            nv1=nv1,
            nv2=nv2,
            k=k,
            v1c=float(get("v1c", default_vbox)),
            v2c=float(get("v2c", default_vbox)),
            t_final=float(get("t_final", 125.0)),
            cadence=int(get("cadence", 1)),
            out_dir=str(get("out_dir", "output")),
            preset=preset,
            snapshot_times=tuple(get("snapshot_times", DEFAULT_SNAPSHOT_TIMES)),
            slice_locations=tuple(get("slice_locations", DEFAULT_SLICE_LOCATIONS)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), line_of("t_final", "cadence", "v1c", "v2c")) from None


def load_config(path: str | os.PathLike, default_vbox: float = PHYSICS_VBOX) -> RunManifest:
    return parse_config(Path(path).read_text(encoding="utf-8"), default_vbox)


# ---------------------------------------------------------------- CSV output
def fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), REAL)


def _tag(x: float) -> str:
    return format(float(x), ".6g")


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_diagnostics(out_dir: Path, records: list[diag.DiagnosticsRecord]) -> None:
    cols = diag.DiagnosticsRecord.CSV_COLUMNS
    write_rows(out_dir / "diagnostics.csv", cols, ([r.as_row()[c] for c in cols] for r in records))
    for name in diag.LOGFM_FIELDS:
        write_rows(
            out_dir / f"logfm_{name}.csv",
            ("t", "mode1", "mode2", "mode3", "mode4"),
            ([r.t, *r.logfm[name]] for r in records),
        )


def write_fields(out_dir: Path, mesh: Mesh1D2V, fields: EMField, t_label: float) -> Path:
    path = out_dir / f"fields_t{_tag(t_label)}.csv"
    x = mesh.x_nodes.ravel()
    write_rows(path, ("x2", "E1", "E2", "B3"), zip(x, fields.e1.ravel(), fields.e2.ravel(), fields.b3.ravel()))
    return path


def f_slice(mesh: Mesh1D2V, f: np.ndarray, x: float) -> np.ndarray:
    """f(x, v1, v2) at every velocity node, interpolated in x with the cell's Lagrange basis."""
    i, xi = mesh.locate_x(x)
    phi = mesh.basis.evaluate(np.array([xi]))[0]
    return np.tensordot(phi, f[i], axes=(0, 0))


def write_fslice(out_dir: Path, mesh: Mesh1D2V, f: np.ndarray, x: float, t_label: float) -> Path:
    path = out_dir / f"fslice_x{_tag(x)}_t{_tag(t_label)}.csv"
    vals = f_slice(mesh, f, x)
    v1 = mesh.v1_nodes.ravel()
    v2 = mesh.v2_nodes.ravel()
    flat = vals.reshape(v1.size, v2.size)
    rows = ((a, b, flat[p, q]) for p, a in enumerate(v1) for q, b in enumerate(v2))
    write_rows(path, ("v1", "v2", "f"), rows)
    return path


# ---------------------------------------------------------------- simulation driver
@dataclass
class RunResult:
    records: list[diag.DiagnosticsRecord]
    state: State
    mesh: Mesh1D2V
    snapshots: list[Path] = field(default_factory=list)
    failed: bool = False
    error: str | None = None


def initial_state(manifest: RunManifest, mesh: Mesh1D2V | None = None) -> tuple[Mesh1D2V, State]:
    mesh = mesh or manifest.build_mesh()
    f, em = weibel_initial_state(manifest.params, mesh)
    return mesh, State(f, em, 0.0, 0)


def _next_dt(mesh: Mesh1D2V, state: State, cfg: SchemeConfig, t_final: float) -> float:
    dt = cfg.dt if cfg.dt is not None else cfl_time_step(mesh, state.fields, cfg.cfl_for(mesh.k))
    remaining = t_final - state.t
    # land on t_final exactly instead of leaving a sliver step
    if dt >= remaining * (1.0 - 1e-10):
        return remaining
    return dt


def integrate(
    mesh: Mesh1D2V,
    state: State,
    cfg: SchemeConfig,
    t_final: float,
    on_step=None,
) -> State:
    """Advance ``state`` to ``t_final``; ``on_step(state)`` sees every accepted step."""
    if cfg.scheme in MODIFIED_ENERGY_SCHEMES and state.fields.half_time is None:
        state = prime(mesh, state, _next_dt(mesh, state, cfg, t_final) if t_final > state.t else 1.0, cfg)
    while t_final - state.t > 1e-12 * max(1.0, abs(t_final)):
        dt = _next_dt(mesh, state, cfg, t_final)
        state = advance(mesh, state, dt, cfg)
        if on_step is not None:
            on_step(state)
    return state


def run_simulation(manifest: RunManifest, write: bool = True) -> RunResult:
    """Run one manifest; writes diagnostics and snapshots under ``out_dir`` when ``write``."""
    cfg = manifest.scheme
    mesh, state = initial_state(manifest)
    out = Path(manifest.out_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        stale = out / "FAILED"
        if stale.exists():
            stale.unlink()

    def rec(s: State) -> diag.DiagnosticsRecord:
        scheme = cfg.scheme if cfg.scheme in MODIFIED_ENERGY_SCHEMES else None
        return diag.record(mesh, s, scheme, cfg.maxwell_flux, manifest.params.k0)

    pending = sorted(t for t in manifest.snapshot_times if t <= manifest.t_final + 1e-12)
    result = RunResult([], state, mesh)

    def snapshot(s: State) -> None:
        while pending and s.t >= pending[0] - 1e-9:
            target = pending.pop(0)
            if write:
                result.snapshots.append(write_fields(out, mesh, s.fields, target))
                for x in manifest.slice_locations:
                    result.snapshots.append(write_fslice(out, mesh, s.f, x, target))

    if cfg.scheme in MODIFIED_ENERGY_SCHEMES and manifest.t_final > 0:
        state = prime(mesh, state, _next_dt(mesh, state, cfg, manifest.t_final), cfg)
    result.records.append(rec(state))
    snapshot(state)

    def on_step(s: State) -> None:
        result.state = s
        last = manifest.t_final - s.t <= 1e-12 * max(1.0, manifest.t_final)
        if s.step % manifest.cadence == 0 or last:
            result.records.append(rec(s))
            r = result.records[-1]
            log.info("step %d t=%.4f TE=%.15e B3=%.3e", r.step, r.t, r.total_energy, r.B3_energy)
        snapshot(s)

    try:
        result.state = integrate(mesh, state, cfg, manifest.t_final, on_step)
    except (BlowUpError, SolverFailure, np.linalg.LinAlgError) as exc:
        result.failed = True
        result.error = str(exc)
    if write:
        write_diagnostics(out, result.records)
        if result.failed:
            (out / "FAILED").write_text(result.error + "\n", encoding="utf-8")
    return result


# ---------------------------------------------------------------- time reversal
def reverse_state(state: State) -> State:
    """(f(x, v), E, B) -> (f(x, -v), E, -B); staggered copies are dropped."""
    em = state.fields
    return State(reflect_velocity(state.f), EMField(em.e1.copy(), em.e2.copy(), -em.b3), state.t, state.step)


def reversal_errors(
    manifest: RunManifest,
    n: int,
    dt: float,
    T: float,
) -> dict[str, float]:
    """Run to T, reverse, run T more, and measure L2 distance to the reversed initial data."""
    mesh = manifest.build_mesh(n)
    if not mesh.is_velocity_symmetric():
        raise ValueError("reversal study needs a velocity mesh symmetric about zero")
    _, s0 = initial_state(manifest, mesh)
    steps = max(1, int(round(T / dt)))
    h = T / steps
    cfg = _fixed_dt_config(manifest.scheme, h)
    s = s0
    for _ in range(steps):
        s = advance(mesh, s, h, cfg)
    s = reverse_state(s)
    for _ in range(steps):
        s = advance(mesh, s, h, cfg)
    # exact reversed initial data: f0(x, -v), E = 0, B3 = -b sin(k0 x)
    p = manifest.params
    em = s.fields
    zero = lambda x: np.zeros_like(x)  # noqa: E731
    return {
        "f": diag.distribution_l2_error(mesh, s.f, lambda x, v1, v2: weibel_distribution(p, -v1, -v2)),
        "E1": diag.field_l2_error(mesh, em.e1, zero),
        "E2": diag.field_l2_error(mesh, em.e2, zero),
        "B3": diag.field_l2_error(mesh, em.b3, lambda x: -p.b * np.sin(p.k0 * x)),
    }


def _fixed_dt_config(cfg: SchemeConfig, dt: float) -> SchemeConfig:
    return SchemeConfig(
        scheme=cfg.scheme,
        vlasov_flux=cfg.vlasov_flux,
        maxwell_flux=cfg.maxwell_flux,
        dt=dt,
        eps_tol=cfg.eps_tol,
        krylov=cfg.krylov,
        newton_max_iter=cfg.newton_max_iter,
        linear_solver=cfg.linear_solver,
    )


def reversal_time_steps(manifest: RunManifest, meshes, T: float) -> list[float]:
    """Step size per mesh.

    Explicit schemes: CFL step on the coarsest mesh, then shrunk like
    h^((k+1)/2) so second-order time error keeps pace with the spatial error.
    Implicit schemes: the configured dt on the coarsest mesh, scaled like h.
    """
    meshes = list(meshes)
    n0 = min(meshes)
    cfg = manifest.scheme
    k = manifest.k
    if cfg.dt is not None:
        base, power = cfg.dt, 1.0
    else:
        coarse = manifest.build_mesh(n0)
        _, s0 = initial_state(manifest, coarse)
        base = cfl_time_step(coarse, s0.fields, cfg.cfl_for(k))
        power = 0.5 * (k + 1)
    return [min(base * (n0 / n) ** power, T) for n in meshes]


@dataclass
class ConvergenceRow:
    mesh: int
    field: str
    l2_error: float
    order: float | None


def reversal_accuracy_study(
    manifest: RunManifest,
    meshes,
    T: float | None = None,
    dts=None,
) -> list[ConvergenceRow]:
    """Errors and observed orders for f, E1, E2, B3 over a list of N^3 meshes."""
    meshes = [int(n) for n in meshes]
    if len(meshes) < 2:
        raise ValueError("need at least two meshes")
    T = manifest.t_final if T is None else T
    if not T > 0:
        raise ValueError("reversal time must be positive")
    dts = reversal_time_steps(manifest, meshes, T) if dts is None else list(dts)
    errs = []
    for n, dt in zip(meshes, dts):
        errs.append(reversal_errors(manifest, n, dt, T))
        log.info("mesh %d^3 dt=%.4g f error %.4e", n, dt, errs[-1]["f"])
    rows: list[ConvergenceRow] = []
    for name in ("f", "E1", "E2", "B3"):
        for idx, n in enumerate(meshes):
            order = None
            if idx > 0:
                e_prev, e_cur = errs[idx - 1][name], errs[idx][name]
                if e_prev > 0 and e_cur > 0:
                    order = math.log(e_prev / e_cur) / math.log(n / meshes[idx - 1])
            rows.append(ConvergenceRow(n, name, errs[idx][name], order))
    return rows


def write_convergence(out_dir: Path, rows: list[ConvergenceRow]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "convergence.csv"
    write_rows(path, ("mesh", "field", "l2_error", "order"), ((r.mesh, r.field, r.l2_error, r.order) for r in rows))
    return path


def observed_order(errors, sizes) -> list[float]:
    """Pairwise log(e_i/e_{i+1}) / log(s_{i+1}/s_i)."""
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(sizes[i + 1] / sizes[i])
        for i in range(len(errors) - 1)
    ]


__all__ = [
    "WeibelParams",
    "PRESETS",
    "DEFAULT_SNAPSHOT_TIMES",
    "DEFAULT_SLICE_LOCATIONS",
    "weibel_distribution",
    "weibel_initial_state",
    "ConfigError",
    "RunManifest",
    "parse_config",
    "load_config",
    "RunResult",
    "initial_state",
    "integrate",
    "run_simulation",
    "reverse_state",
    "reversal_errors",
    "reversal_time_steps",
    "ConvergenceRow",
    "reversal_accuracy_study",
    "write_convergence",
    "observed_order",
    "f_slice",
]
