"""Command-line interface.

Subcommands: run, particles, kinetic, sweep, fit.  Flags mirror config
keys and override values read with --config.  Exit codes: 0 completed,
2 blow-up or floor trigger, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import output, report, runner
from .config import ConfigError, read_sections, validate_sections
from .diagnostics import fit_decay_rate

__all__ = ["main"]

_RUN_KEYS = ("dim", "n", "t_end", "cfl", "dt", "formulation", "scenario",
             "amplitude", "kernel", "sigma", "sobolev_s", "seed",
             "record_stride", "state_stride", "fit_window")
_PARTICLE_KEYS = ("n_agents", "eps", "seeds", "moments_n")
_SWEEP_KEYS = ("key", "values")


def _add_common(sub):
    sub.add_argument("--config", help="configuration file (INI-style)")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip figure rendering")
    for key in _RUN_KEYS:
        sub.add_argument(f"--{key.replace('_', '-')}", dest=f"run_{key}")
    for key in _PARTICLE_KEYS:
        sub.add_argument(f"--{key.replace('_', '-')}", dest=f"particles_{key}")


def _build_parser():
    parser = argparse.ArgumentParser(prog="euleralign",
                                     description="Euler-alignment laboratory")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, desc in (("run", "fluid (or pressureless) run"),
                       ("particles", "alignment ODE ensemble run"),
                       ("kinetic", "Langevin particle sweep over eps"),
                       ("sweep", "concurrent fluid parameter sweep")):
        sub = subs.add_parser(name, help=desc)
        _add_common(sub)
        if name == "run":
            sub.add_argument("--mode", choices=("fluid", "pressureless"),
                             default=None)
        if name == "sweep":
            sub.add_argument("--sweep-key", dest="sweep_key")
            sub.add_argument("--sweep-values", dest="sweep_values")
    fit = subs.add_parser("fit", help="fit a decay rate from records.csv")
    fit.add_argument("records", help="path to records.csv")
    fit.add_argument("--window", nargs=2, type=float, metavar=("T0", "T1"))
    fit.add_argument("--column", default="F")
    return parser


def _sections_from_args(args) -> dict:
    if args.config:
        sections = read_sections(Path(args.config).read_text(encoding="utf-8"))
    else:
        sections = {}
    sections.setdefault("run", {})
    if args.command == "run":
        sections["run"]["mode"] = args.mode or sections["run"].get("mode", "fluid")
    else:
        sections["run"]["mode"] = args.command
    for key in _RUN_KEYS:
        val = getattr(args, f"run_{key}", None)
        if val is not None:
            sections["run"][key] = val
    for key in _PARTICLE_KEYS:
        val = getattr(args, f"particles_{key}", None)
        if val is not None:
            sections.setdefault("particles", {})[key] = val
    if getattr(args, "sweep_key", None) is not None:
        sections.setdefault("sweep", {})["key"] = args.sweep_key
    if getattr(args, "sweep_values", None) is not None:
        sections.setdefault("sweep", {})["values"] = args.sweep_values
    if args.out:
        sections.setdefault("output", {})["dir"] = args.out
    if args.no_figures:
        sections.setdefault("output", {})["figures"] = "false"
    return sections


def _run_command(args) -> int:
    try:
        config = validate_sections(_sections_from_args(args))
    except ConfigError as err:
        for line in err.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 3
    result = runner.run(config)
    output.emit(result, config.output_dir)
    if config.figures:
        report.render(result, config.output_dir)
    termination = getattr(getattr(result, "trajectory", result), "termination",
                          "completed")
    if hasattr(result, "fluid_termination"):
        termination = result.fluid_termination
    print(f"{config.mode}: {termination} -> {config.output_dir}")
    return 0 if termination == "completed" else 2


def _fit_command(args) -> int:
    path = Path(args.records)
    if not path.exists():
        print(f"config error: no such file {path}", file=sys.stderr)
        return 3
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows or args.column not in rows[0]:
        print(f"config error: column {args.column!r} not in {path}", file=sys.stderr)
        return 3
    times = [float(r["t"]) for r in rows]
    values = [float(r[args.column]) for r in rows]
    window = tuple(args.window) if args.window else (min(2.0, 0.5 * times[-1]),
                                                     times[-1])
    try:
        c_hat, r2 = fit_decay_rate(times, values, window)
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 3
    print(f"c_hat = {c_hat:.17g}")
    print(f"r_squared = {r2:.17g}")
    print(f"window = [{window[0]:g}, {window[1]:g}]")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "fit":
        return _fit_command(args)
    return _run_command(args)


if __name__ == "__main__":
    sys.exit(main())
