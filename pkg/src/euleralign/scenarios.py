"""Named initial-data recipes for fluid runs.

Exact formulas (amplitude a, coordinates on the unit torus):

small_perturbation (1D):  rho0 = 1 + a cos(2 pi x),  u0 = a sin(2 pi x)
small_perturbation (2D):  rho0 = 1 + a cos(2 pi x) cos(2 pi y)
                          u0 = a (sin(2 pi x) cos(2 pi y),
                                  cos(2 pi x) sin(2 pi y))
two_bump_density:         rho0 = 1 + a (G(x - 1/4) + G(x - 3/4) - mean),
                          u0 = 0; G a periodized Gaussian of width 0.08
                          (bump centers on the y = 1/2 line in 2D)
shear_velocity_2d:        rho0 = 1,  u0 = (a sin(2 pi y), 0)
expression:               rho0/u0x/u0y given as numpy expressions in x, y

All presets have unit mass up to quadrature round-off and m_c(0) = 0.
"""
from __future__ import annotations

import numpy as np

from .dynamics import FluidState, convert_formulation
from .grid import Field, PeriodicGrid, VectorField

__all__ = ["FLUID_SCENARIOS", "make_fluid_initial"]

FLUID_SCENARIOS = ("small_perturbation", "two_bump_density", "shear_velocity_2d",
                   "expression")

_BUMP_WIDTH = 0.08


def _periodized_gaussian(x, center, width):
    out = np.zeros_like(x)
    for image in range(-3, 4):
        out += np.exp(-((x - center + image) ** 2) / (2.0 * width**2))
    return out


def _small_perturbation(grid, a):
    if grid.dim == 1:
        (x,) = grid.nodes
        rho = 1.0 + a * np.cos(2 * np.pi * x)
        u = np.stack([a * np.sin(2 * np.pi * x)])
    else:
        x, y = grid.nodes
        rho = 1.0 + a * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
        u = np.stack([a * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
                      a * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)])
    return rho, u


def _two_bump_density(grid, a):
    if grid.dim == 1:
        (x,) = grid.nodes
        bumps = (_periodized_gaussian(x, 0.25, _BUMP_WIDTH)
                 + _periodized_gaussian(x, 0.75, _BUMP_WIDTH))
    else:
        x, y = grid.nodes
        wall = _periodized_gaussian(y, 0.5, _BUMP_WIDTH)
        bumps = (_periodized_gaussian(x, 0.25, _BUMP_WIDTH)
                 + _periodized_gaussian(x, 0.75, _BUMP_WIDTH)) * wall
    rho = 1.0 + a * (bumps - bumps.mean())
    u = np.zeros((grid.dim,) + grid.shape)
    return rho, u


def _shear_velocity_2d(grid, a):
    if grid.dim != 2:
        raise ValueError("shear_velocity_2d requires dim = 2")
    _, y = grid.nodes
    rho = np.ones(grid.shape)
    u = np.stack([a * np.sin(2 * np.pi * y), np.zeros(grid.shape)])
    return rho, u


def _eval_expression(expr, grid):
    names = {"np": np, "pi": np.pi, "sin": np.sin, "cos": np.cos,
             "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs,
             "x": grid.nodes[0]}
    if grid.dim == 2:
        names["y"] = grid.nodes[1]
    try:
        vals = eval(expr, {"__builtins__": {}}, names)  # noqa: S307 - user recipe
    except Exception as err:
        raise ValueError(f"initial-data expression {expr!r} failed: {err}") from err
    return np.broadcast_to(np.asarray(vals, dtype=float), grid.shape).copy()


def make_fluid_initial(scenario: str, grid: PeriodicGrid, amplitude: float = 0.05,
                       formulation: str = "conservative",
                       expressions: dict = None) -> FluidState:
    """Build the initial state for a named scenario (or expressions)."""
    if scenario == "small_perturbation":
        rho, u = _small_perturbation(grid, amplitude)
    elif scenario == "two_bump_density":
        rho, u = _two_bump_density(grid, amplitude)
    elif scenario == "shear_velocity_2d":
        rho, u = _shear_velocity_2d(grid, amplitude)
    elif scenario == "expression":
        if not expressions or "rho0" not in expressions:
            raise ValueError("expression scenario needs at least a rho0 expression")
        rho = _eval_expression(expressions["rho0"], grid)
        comps = [_eval_expression(expressions.get("u0x", "0*x"), grid)]
        if grid.dim == 2:
            comps.append(_eval_expression(expressions.get("u0y", "0*x"), grid))
        u = np.stack(comps)
    else:
        raise ValueError(f"unknown fluid scenario {scenario!r}")
    if rho.min() <= 0:
        raise ValueError(f"scenario {scenario!r} produced a nonpositive density")
    state = FluidState("conservative", Field(grid, rho), VectorField(grid, u))
    return convert_formulation(state, formulation)
