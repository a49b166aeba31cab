"""Bit-stable CSV and JSON emission for every run mode.

CSV columns and formatting are frozen: floats carry 17 significant digits
so downstream fits reproduce exactly, and identical configs yield byte
identical files.
"""
from __future__ import annotations

import json
import subprocess
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, kernel_descriptor_text
from .runner import (FluidRunResult, KineticRunResult, ParticleRunResult,
                     SweepRunResult)

__all__ = ["emit", "records_header", "version_string"]


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"euleralign {__version__} ({out.stdout.strip()})"
    except OSError:
        pass
    return f"euleralign {__version__}"


def records_header(dim: int) -> str:
    mc = "mcx" if dim == 1 else "mcx,mcy"
    return (f"t,mass,{mc},E,F,D,kinetic_entropy,rel_entropy,"
            "E_sigma,D_sigma,min_rho,max_speed,hs_norm")


def _records_csv(trajectory, config: RunConfig) -> str:
    primary = config.sigmas[0] if config.sigmas else None
    lines = [records_header(config.dim)]
    for rec in trajectory.records:
        cells = [rec.t, rec.mass, *rec.m_c, rec.E, rec.F, rec.D,
                 rec.kinetic_entropy, rec.rel_entropy,
                 rec.e_sigma.get(primary, 0.0) if primary is not None else 0.0,
                 rec.d_sigma.get(primary, 0.0) if primary is not None else 0.0,
                 rec.min_rho, rec.max_speed, rec.hs_norm]
        lines.append(",".join(_fmt(c) for c in cells))
    return "\n".join(lines) + "\n"


def _config_echo(config: RunConfig) -> dict:
    echo = {
        "mode": config.mode, "dim": config.dim, "n": config.n,
        "t_end": config.t_end, "cfl": config.cfl, "dt": config.dt,
        "formulation": config.formulation, "scenario": config.scenario,
        "amplitude": config.amplitude,
        "kernel": kernel_descriptor_text(config.kernel),
        "sigma": list(config.sigmas), "sobolev_s": config.sobolev_s,
        "seed": config.seed, "record_stride": config.record_stride,
        "state_stride": config.state_stride,
        "fit_window": list(config.effective_fit_window()),
        "output_dir": config.output_dir,
    }
    if config.mode in ("particles", "kinetic"):
        echo.update(n_agents=config.n_agents, seeds=list(config.effective_seeds()))
    if config.mode == "kinetic":
        echo.update(eps=list(config.eps_list), moments_n=config.moments_n)
    if config.mode == "sweep":
        echo.update(sweep_key=config.sweep_key,
                    sweep_values=list(config.sweep_values))
    if config.expressions:
        echo["initial"] = dict(config.expressions)
    return echo


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _write_json(path: Path, payload: dict):
    _write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _emit_fluid(result: FluidRunResult, outdir: Path):
    traj = result.trajectory
    _write(outdir / "records.csv", _records_csv(traj, result.config))
    summary = {
        "termination": traj.termination,
        "message": traj.message,
        "dt": traj.dt,
        "n_steps": traj.n_steps,
        "restarts": traj.restarts,
        "decay_fit": result.fit,
        "sigma_results": result.sigma_results,
        **result.drifts,
        "config": _config_echo(result.config),
        "version": version_string(),
    }
    _write_json(outdir / "summary.json", summary)


def _ensemble_csv(ens) -> str:
    dim = ens.dim
    head = ["id"] + ["x", "y"][:dim] + ["vx", "vy"][:dim]
    lines = [",".join(head)]
    for i in range(ens.n):
        cells = [str(i)] + [_fmt(c) for c in ens.positions[i]] \
            + [_fmt(c) for c in ens.velocities[i]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _emit_particles(result: ParticleRunResult, outdir: Path):
    dim = result.config.dim
    head = "t,velocity_diameter," + ",".join(["mean_vx", "mean_vy"][:dim])
    lines = [head]
    for t, d, mv in zip(result.times, result.diameters, result.mean_velocity):
        lines.append(",".join([_fmt(t), _fmt(d)] + [_fmt(c) for c in mv]))
    _write(outdir / "particles_records.csv", "\n".join(lines) + "\n")
    for k, (t, ens) in enumerate(result.snapshots):
        _write(outdir / "ensembles" / f"ensemble_{k:06d}.csv", _ensemble_csv(ens))
    summary = {
        "termination": "completed",
        "psi_m": result.psi_m,
        "initial_diameter": float(result.diameters[0]),
        "final_diameter": float(result.diameters[-1]),
        "flocking_rate_fit": result.rate_fit,
        "config": _config_echo(result.config),
        "version": version_string(),
    }
    _write_json(outdir / "summary.json", summary)


def _emit_kinetic(result: KineticRunResult, outdir: Path):
    head = "eps,seed,t,velocity_gap,density_gap,total_gap,zero_density_cells"
    lines = [head]
    for row in result.rows:
        lines.append(",".join([_fmt(row["eps"]), str(row["seed"]), _fmt(row["t"]),
                               _fmt(row["velocity_gap"]), _fmt(row["density_gap"]),
                               _fmt(row["total_gap"]), str(row["zero_density_cells"])]))
    _write(outdir / "gaps.csv", "\n".join(lines) + "\n")
    eps_sorted = sorted(result.eps_means)
    means = [result.eps_means[e] for e in eps_sorted]
    summary = {
        "termination": result.fluid_termination,
        "eps_means": {_fmt(e): result.eps_means[e] for e in eps_sorted},
        "gap_nonincreasing_in_eps": all(a <= b for a, b in zip(means, means[1:])),
        "gap_ratio_smallest_to_largest": (means[0] / means[-1]
                                          if means and means[-1] > 0 else None),
        "zero_density_cells_total": sum(r["zero_density_cells"] for r in result.rows),
        "config": _config_echo(result.config),
        "version": version_string(),
    }
    _write_json(outdir / "summary.json", summary)


def _emit_sweep(result: SweepRunResult, outdir: Path):
    lines = ["param,value,termination,c_hat,r_squared,F_final"]
    for value, name, res in result.points:
        _emit_fluid(res, outdir / name)
        fit = res.fit or {}
        lines.append(",".join([
            result.config.sweep_key, _fmt(value), res.trajectory.termination,
            _fmt(fit.get("c_hat", float("nan"))),
            _fmt(fit.get("r_squared", float("nan"))),
            _fmt(res.trajectory.records[-1].F),
        ]))
    _write(outdir / "sweep.csv", "\n".join(lines) + "\n")
    _write_json(outdir / "summary.json", {
        "termination": "completed",
        "points": [name for _, name, _ in result.points],
        "config": _config_echo(result.config),
        "version": version_string(),
    })


def emit(result, output_dir) -> Path:
    """Write the delimited output and summary for any run result."""
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    if isinstance(result, FluidRunResult):
        _emit_fluid(result, outdir)
    elif isinstance(result, ParticleRunResult):
        _emit_particles(result, outdir)
    elif isinstance(result, KineticRunResult):
        _emit_kinetic(result, outdir)
    elif isinstance(result, SweepRunResult):
        _emit_sweep(result, outdir)
    else:
        raise TypeError(f"cannot emit {type(result).__name__}")
    return outdir
