"""Explicit SSP-RK3 time stepping with CFL control and trajectory records.

A run advances with one fixed dt chosen from the initial data (CFL 0.4 by
default, with a 1.5x allowance for velocity growth) so that records are
uniformly spaced for decay fitting.  If the per-step CFL guard trips
mid-run the whole run restarts from t = 0 with dt/2, up to three times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import DiagnosticsRecord, make_record
from .dynamics import (DENSITY_FLOOR, GRADIENT_BLOWUP, FluidState,
                       _rhs_conservative_arrays, _rhs_log_arrays, gradient_sup)
from .grid import Field, VectorField
from .kernels import Kernel

__all__ = ["CflViolation", "Trajectory", "ssp_rk3", "step", "integrate_fluid"]

DEFAULT_CFL = 0.4
VELOCITY_GROWTH_MARGIN = 1.5
MAX_RESTARTS = 3


class CflViolation(RuntimeError):
    """Step rejected: dt exceeds the stability bound."""

    def __init__(self, dt, required):
        super().__init__(f"dt={dt:.3e} violates the CFL bound; need dt <= {required:.3e}")
        self.dt = dt
        self.required = required


def ssp_rk3(y, dt, rhs):
    """One third-order strong-stability-preserving Runge-Kutta step."""
    y1 = y + dt * rhs(y)
    y2 = 0.75 * y + 0.25 * (y1 + dt * rhs(y1))
    return y / 3.0 + (2.0 / 3.0) * (y2 + dt * rhs(y2))


def _pack(state: FluidState) -> np.ndarray:
    dens = state.density.values
    if state.formulation == "conservative":
        # conservative runs advance the conserved pair (rho, rho u)
        mom = dens[None] * state.velocity.values
        return np.concatenate([dens[None], mom], axis=0)
    return np.concatenate([dens[None], state.velocity.values], axis=0)


def _unpack(y, formulation, grid, t) -> FluidState:
    dens = y[0]
    vel = y[1:]
    if formulation == "conservative":
        vel = vel / dens
    return FluidState(formulation, Field(grid, dens.copy()),
                      VectorField(grid, vel.copy()), time=t)


def _make_rhs(formulation, psi, grid, pressureless):
    if formulation == "log":
        def rhs(y):
            dh, du = _rhs_log_arrays(y[0], y[1:], psi, grid)
            return np.concatenate([dh[None], np.stack(du)], axis=0)
    else:
        def rhs(y):
            rho = y[0]
            u = y[1:] / rho
            drho, dmom = _rhs_conservative_arrays(rho, u, psi, grid,
                                                  pressure=not pressureless)
            return np.concatenate([drho[None], np.stack(dmom)], axis=0)
    return rhs


def _cfl_bound(dx, umax, psi_sup, cfl_constant):
    # "+1" is the isothermal sound speed; ||psi||_inf bounds the
    # alignment stiffness
    return cfl_constant * dx / (umax + 1.0 + psi_sup)


def _speed_max(y, formulation):
    vel = y[1:] / y[0] if formulation == "conservative" else y[1:]
    return float(np.sqrt(np.sum(vel**2, axis=0).max()))


def step(state: FluidState, psi: Kernel, dt: float,
         cfl_constant: float = DEFAULT_CFL, pressureless: bool = False) -> FluidState:
    """Advance one SSP-RK3 step; rejects dt beyond the CFL bound."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    required = _cfl_bound(state.grid.dx, state.speed_max, psi.sup, cfl_constant)
    if dt > required * (1.0 + 1e-9):
        raise CflViolation(dt, required)
    rhs = _make_rhs(state.formulation, psi, state.grid, pressureless)
    y = ssp_rk3(_pack(state), dt, rhs)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("non-finite state after step")
    return _unpack(y, state.formulation, state.grid, state.time + dt)


@dataclass
class Trajectory:
    """Recorded output of one run."""

    records: list
    states: list
    termination: str  # completed | blowup_trigger | density_floor
    dt: float
    n_steps: int
    restarts: int = 0
    message: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def _advance(state0, psi, t_end, dt, *, cfl_constant, pressureless,
             record_stride, state_stride, sigmas, sobolev_s):
    grid = state0.grid
    formulation = state0.formulation
    rhs = _make_rhs(formulation, psi, grid, pressureless)
    records = [make_record(state0, psi, sigmas, sobolev_s)]
    states = [state0]
    if t_end <= 0:
        return records, states, "completed", dt, 0, ""

    n_steps = math.ceil(t_end / dt - 1e-12)
    # round the step count up to a record boundary so records stay
    # uniformly spaced through the final time
    n_steps = record_stride * math.ceil(n_steps / record_stride)
    dt = t_end / n_steps

    y = _pack(state0)
    for i in range(1, n_steps + 1):
        umax = _speed_max(y, formulation)
        required = _cfl_bound(grid.dx, umax, psi.sup, cfl_constant)
        if dt > required * (1.0 + 1e-9):
            raise CflViolation(dt, required)
        y = ssp_rk3(y, dt, rhs)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"non-finite state at step {i}")
        if i % record_stride == 0 or i == n_steps:
            state = _unpack(y, formulation, grid, i * dt)
            min_rho = float(state.rho_values.min())
            if min_rho < DENSITY_FLOOR:
                return (records, states, "density_floor", dt, i,
                        f"min rho {min_rho:.3e} below floor at t={state.time:.4f}")
            if gradient_sup(state) > GRADIENT_BLOWUP:
                return (records, states, "blowup_trigger", dt, i,
                        f"||grad u||_inf exceeded {GRADIENT_BLOWUP} at t={state.time:.4f}")
            records.append(make_record(state, psi, sigmas, sobolev_s))
            if i % state_stride == 0 or i == n_steps:
                states.append(state)
    return records, states, "completed", dt, n_steps, ""


def integrate_fluid(state0: FluidState, psi: Kernel, t_end: float, *,
                    dt: float = None, cfl_constant: float = DEFAULT_CFL,
                    pressureless: bool = False, record_stride: int = 10,
                    state_stride: int = 100, sigmas=(0.05,),
                    sobolev_s: float = 3.0) -> Trajectory:
    """Run to t_end, recording diagnostics every record_stride steps.

    dt defaults to the CFL bound of the initial data with a 1.5x margin on
    velocity growth.  Deterministic: the same inputs always produce the
    same trajectory bit for bit.
    """
    if dt is None:
        dt = _cfl_bound(state0.grid.dx, VELOCITY_GROWTH_MARGIN * state0.speed_max,
                        psi.sup, cfl_constant)
    restarts = 0
    while True:
        try:
            records, states, termination, dt_eff, n_steps, msg = _advance(
                state0, psi, t_end, dt, cfl_constant=cfl_constant,
                pressureless=pressureless, record_stride=record_stride,
                state_stride=state_stride, sigmas=sigmas, sobolev_s=sobolev_s)
            return Trajectory(records, states, termination, dt_eff, n_steps,
                              restarts, msg)
        except CflViolation as err:
            restarts += 1
            if restarts > MAX_RESTARTS:
                state0_rec = make_record(state0, psi, sigmas, sobolev_s)
                return Trajectory([state0_rec], [state0], "blowup_trigger", dt, 0,
                                  restarts, f"CFL restarts exhausted: {err}")
            dt = dt / 2.0
