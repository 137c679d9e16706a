"""Command line entry point: ``vmdg run|accuracy|presets|version``.

Exit codes: 0 on success, 1 for a bad configuration, 2 for a numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .harness import (
    ACCURACY_VBOX,
    PRESETS,
    ConfigError,
    load_config,
    reversal_accuracy_study,
    run_simulation,
    write_convergence,
)
from .integrators_unsplit import BlowUpError, SolverFailure

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as a numerical failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _mesh_list(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if len(sizes) < 2 or any(n < 1 for n in sizes):
        raise argparse.ArgumentTypeError("need at least two positive mesh sizes")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vmdg", description="1D2V Vlasov-Maxwell DG solver")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate one configuration and write CSV output")
    run.add_argument("config", type=Path)
    run.add_argument("--out-dir", type=Path, help="override out_dir from the config")

    acc = sub.add_parser("accuracy", help="time-reversal convergence study over N^3 meshes")
    acc.add_argument("config", type=Path)
    acc.add_argument("--meshes", type=_mesh_list, default=[16, 32, 64])
    acc.add_argument("--time", type=float, default=5.0, help="reversal time T (default 5)")
    acc.add_argument("--out-dir", type=Path)

    sub.add_parser("presets", help="list the built-in initial conditions")
    sub.add_parser("version", help="print the package version")
    return parser


def _cmd_run(args) -> int:
    manifest = load_config(args.config)
    if args.out_dir is not None:
        manifest = _with_out_dir(manifest, args.out_dir)
    result = run_simulation(manifest)
    last = result.records[-1]
    print(
        f"t={last.t:.6g} steps={last.step} particle_number={last.particle_number:.17g} "
        f"total_energy={last.total_energy:.17g} -> {manifest.out_dir}"
    )
    if result.failed:
        print(f"numerical failure: {result.error}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_accuracy(args) -> int:
    manifest = load_config(args.config, default_vbox=ACCURACY_VBOX)
    if args.out_dir is not None:
        manifest = _with_out_dir(manifest, args.out_dir)
    rows = reversal_accuracy_study(manifest, args.meshes, T=args.time)
    path = write_convergence(Path(manifest.out_dir), rows)
    print(f"{'mesh':>6} {'field':>5} {'l2_error':>14} {'order':>7}")
    for r in rows:
        order = "" if r.order is None else f"{r.order:7.3f}"
        print(f"{r.mesh:>6} {r.field:>5} {r.l2_error:14.6e} {order:>7}")
    print(f"-> {path}")
    return EXIT_OK


def _with_out_dir(manifest, out_dir: Path):
    return replace(manifest, out_dir=str(out_dir))


def _cmd_presets(_args) -> int:
    for name, p in PRESETS.items():
        print(f"{name}: beta={p.beta} b={p.b} delta={p.delta:.6g} v01={p.v01} v02={p.v02} k0={p.k0}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "presets":
        return _cmd_presets(args)
    handler = _cmd_run if args.command == "run" else _cmd_accuracy
    try:
        return handler(args)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, SolverFailure, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
