"""Render run figures to files alongside the delimited output.

Everything draws through the Agg backend; nothing here opens a window.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .runner import (FluidRunResult, KineticRunResult, ParticleRunResult,
                     SweepRunResult)

__all__ = ["render"]

_DPI = 150


def _save(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def _fluid_figures(result: FluidRunResult, figdir: Path):
    traj = result.trajectory
    t = traj.times
    F = traj.series("F")
    E = traj.series("E")
    D = traj.series("D")

    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    ax = axes[0, 0]
    if np.all(F > 0):
        ax.semilogy(t, F, label="F")
        ax.semilogy(t, E, label="E", alpha=0.7)
    else:
        ax.plot(t, F, label="F")
        ax.plot(t, E, label="E", alpha=0.7)
    if result.fit:
        c, w = result.fit["c_hat"], result.fit["window"]
        tt = np.linspace(w[0], w[1], 50)
        f0 = np.interp(w[0], t, F)
        ax.semilogy(tt, f0 * np.exp(-c * (tt - w[0])), "k--",
                    label=f"fit rate {c:.3f}")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("fluctuation and energy")

    ax = axes[0, 1]
    ax.plot(t, D)
    ax.set_xlabel("t")
    ax.set_title("alignment dissipation D")

    ax = axes[1, 0]
    ax.plot(t, traj.series("kinetic_entropy"), label="kinetic entropy")
    ax.plot(t, traj.series("rel_entropy"), label="relative entropy")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)

    ax = axes[1, 1]
    ax.plot(t, traj.series("min_rho"), label="min rho")
    ax.plot(t, traj.series("max_speed"), label="max |u|")
    ax.plot(t, traj.series("hs_norm"), label="H^s norm")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    fig.suptitle(f"termination: {traj.termination}")
    fig.tight_layout()
    _save(fig, figdir / "functionals.png")

    final = traj.states[-1]
    grid = final.grid
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    if grid.dim == 1:
        x = grid.axis_nodes
        axes[0].plot(x, final.rho_values)
        axes[0].set_title(f"rho at t = {final.time:.2f}")
        axes[1].plot(x, final.velocity.values[0])
        axes[1].set_title("u")
        for ax in axes:
            ax.set_xlabel("x")
    else:
        im0 = axes[0].imshow(final.rho_values.T, origin="lower", extent=(0, 1, 0, 1))
        axes[0].set_title(f"rho at t = {final.time:.2f}")
        fig.colorbar(im0, ax=axes[0])
        speed = np.sqrt(np.sum(final.velocity.values**2, axis=0))
        im1 = axes[1].imshow(speed.T, origin="lower", extent=(0, 1, 0, 1))
        axes[1].set_title("|u|")
        fig.colorbar(im1, ax=axes[1])
    fig.tight_layout()
    _save(fig, figdir / "final_fields.png")


def _particle_figures(result: ParticleRunResult, figdir: Path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(result.times, result.diameters, label="velocity diameter")
    d0 = result.diameters[0]
    ax.semilogy(result.times, d0 * np.exp(-result.psi_m * result.times), "k--",
                label=f"d0 exp(-psi_m t), psi_m = {result.psi_m:g}")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.set_title("flocking: diameter contraction")
    _save(fig, figdir / "diameter.png")


def _kinetic_figures(result: KineticRunResult, figdir: Path):
    eps = sorted(result.eps_means)
    means = [result.eps_means[e] for e in eps]
    fig, ax = plt.subplots(figsize=(6, 4))
    for row in result.rows:
        ax.loglog(row["eps"], row["total_gap"], "o", color="tab:blue", alpha=0.4)
    ax.loglog(eps, means, "s-", color="tab:red", label="mean over seeds")
    guide = means[-1] * np.sqrt(np.array(eps) / eps[-1])
    ax.loglog(eps, guide, "k--", label="sqrt(eps) guide")
    ax.set_xlabel("eps")
    ax.set_ylabel("relative-entropy gap")
    ax.legend(fontsize=8)
    _save(fig, figdir / "gap_vs_eps.png")


def _sweep_figures(result: SweepRunResult, figdir: Path):
    values, rates = [], []
    for value, _, res in result.points:
        if res.fit:
            values.append(value)
            rates.append(res.fit["c_hat"])
    if not values:
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(values, rates, "o-")
    ax.set_xlabel(result.config.sweep_key)
    ax.set_ylabel("fitted decay rate")
    _save(fig, figdir / "sweep_rates.png")


def render(result, output_dir):
    """Write the figures for one run result under output_dir/figures/."""
    figdir = Path(output_dir) / "figures"
    if isinstance(result, FluidRunResult):
        _fluid_figures(result, figdir)
    elif isinstance(result, ParticleRunResult):
        _particle_figures(result, figdir)
    elif isinstance(result, KineticRunResult):
        _kinetic_figures(result, figdir)
    elif isinstance(result, SweepRunResult):
        _sweep_figures(result, figdir)
        for _, name, res in result.points:
            _fluid_figures(res, Path(output_dir) / name / "figures")
