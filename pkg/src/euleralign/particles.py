"""Agent-based models: alignment ODEs and the kinetic Langevin scheme.

Two microscopic systems are integrated on the torus:

* the deterministic alignment ODE system
      dx_i/dt = v_i,
      dv_i/dt = (1/N) sum_j psi(x_i - x_j)(v_j - v_i),
  advanced with classical RK4 (``cs_step``); psi is evaluated from its
  analytic formula at minimal-image displacements, never interpolated;

* its kinetic regularization with strong local relaxation and diffusion,
      dx = v dt,
      dv = [F(x, v) - (v - u_eps(x))/eps] dt + sqrt(2/eps) dW,
  advanced with Euler-Maruyama (``langevin_step``).  u_eps is the local
  mean velocity extracted from the ensemble itself by cloud-in-cell
  deposition on a fluid grid.

Gaussian increments derive from (seed, step index), so runs are bit
reproducible regardless of how force evaluation is parallelized.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import FluidState
from .grid import Field, PeriodicGrid, VectorField
from .kernels import BumpKernel, ConstantKernel, CosineKernel, Kernel

__all__ = [
    "ParticleEnsemble",
    "cs_step",
    "velocity_diameter",
    "langevin_step",
    "moments",
    "relative_entropy_gap",
    "alignment_force",
    "counterflow_ensemble",
    "random_ensemble",
    "sample_from_fluid",
]

# below this fraction of the mean density the local velocity is set to 0
U_DENSITY_FLOOR = 1e-6
_DIRECT_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """Positions and velocities of N agents on [0,1)^d."""

    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0
    rng_seed: int = 0
    step_index: int = 0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float) % 1.0
        vel = np.asarray(self.velocities, dtype=float)
        if pos.ndim != 2 or vel.shape != pos.shape:
            raise ValueError("positions and velocities must both have shape (N, dim)")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise FloatingPointError("ensemble contains non-finite entries")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


def _cosine_products(x, a_coef=None):
    """Separable factors of prod_axes cos(2 pi dx_axis) at positions x.

    cos(2 pi (x - y)) = C(x)C(y) + S(x)S(y) per axis, so the axis product
    expands into 2^dim separable terms; returns the (2^dim, N) table."""
    n, dim = x.shape
    c = np.cos(2.0 * np.pi * x)
    s = np.sin(2.0 * np.pi * x)
    out = np.ones((1, n))
    for ax in range(dim):
        out = np.concatenate([out * c[:, ax], out * s[:, ax]], axis=0)
    return out


def _alignment_force_direct(positions, velocities, kern: Kernel):
    """Exact O(N^2) pairwise sum, chunked; the correctness reference."""
    n = positions.shape[0]
    force = np.empty_like(velocities)
    for start in range(0, n, _DIRECT_CHUNK):
        stop = min(start + _DIRECT_CHUNK, n)
        delta = positions[start:stop, None, :] - positions[None, :, :]
        w = kern.evaluate(delta)
        force[start:stop] = (w @ velocities) / n - velocities[start:stop] * (w.sum(axis=1) / n)[:, None]
    return force


def alignment_force(positions, velocities, kern: Kernel):
    """Mean-field force (1/N) sum_j psi(x_i - x_j)(v_j - v_i).

    Constant and cosine kernels use an exact separable expansion (O(N));
    other kernels fall back to the chunked O(N^2) sum.
    """
    n = positions.shape[0]
    spec = kern.spec
    if isinstance(spec, ConstantKernel):
        vbar = velocities.mean(axis=0)
        return spec.value * (vbar - velocities)
    if isinstance(spec, CosineKernel):
        phis = _cosine_products(positions)
        weighted_v = phis @ velocities              # (T, dim)
        weights = phis.sum(axis=1)                  # (T,)
        num = spec.a * velocities.sum(axis=0)[None, :] + spec.b * (phis.T @ weighted_v)
        den = spec.a * n + spec.b * (phis.T @ weights)
        return (num - velocities * den[:, None]) / n
    return _alignment_force_direct(positions, velocities, kern)


def cs_step(ens: ParticleEnsemble, psi: Kernel, dt: float) -> ParticleEnsemble:
    """One classical RK4 step of the alignment ODE system."""
    if dt > 0.1 / psi.sup * (1.0 + 1e-9):
        raise ValueError(f"dt={dt} too large; need dt <= 0.1/||psi||_inf = {0.1 / psi.sup}")
    x, v = ens.positions, ens.velocities

    def deriv(xs, vs):
        return vs, alignment_force(xs, vs, psi)

    k1x, k1v = deriv(x, v)
    k2x, k2v = deriv(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = deriv(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = deriv(x + dt * k3x, v + dt * k3v)
    x_new = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    v_new = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return ParticleEnsemble(x_new, v_new, ens.time + dt, ens.rng_seed, ens.step_index + 1)


def velocity_diameter(ens: ParticleEnsemble) -> float:
    """Largest pairwise velocity distance; its decay certifies flocking."""
    if ens.n < 2:
        raise ValueError("velocity diameter needs at least 2 agents")
    v = ens.velocities
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt(np.sum(diff**2, axis=-1)).max())


def _cic_weights(positions, grid: PeriodicGrid):
    """Cloud-in-cell corner indices and weights (partition of unity)."""
    n = grid.n
    scaled = positions / grid.dx
    base = np.floor(scaled).astype(int) % n
    frac = scaled - np.floor(scaled)
    dim = positions.shape[1]
    corners, weights = [], []
    for code in range(2**dim):
        offs = [(code >> ax) & 1 for ax in range(dim)]
        idx = tuple((base[:, ax] + offs[ax]) % n for ax in range(dim))
        w = np.ones(positions.shape[0])
        for ax in range(dim):
            w = w * (frac[:, ax] if offs[ax] else 1.0 - frac[:, ax])
        corners.append(idx)
        weights.append(w)
    return corners, weights


def moments(ens: ParticleEnsemble, grid: PeriodicGrid):
    """Cloud-in-cell density and local mean velocity on a grid.

    The density integrates to exactly 1 (each agent carries mass 1/N and
    the deposition weights sum to one).  Where the deposited density
    falls below the floor the velocity is set to 0.
    """
    if grid.dim != ens.dim:
        raise ValueError("grid and ensemble dimensions differ")
    if ens.n < grid.size // 4:
        warnings.warn(f"only {ens.n} agents for {grid.size} nodes; "
                      "moments will be noisy", stacklevel=2)
    corners, weights = _cic_weights(ens.positions, grid)
    count = np.zeros(grid.shape)
    mom = np.zeros((ens.dim,) + grid.shape)
    for idx, w in zip(corners, weights):
        np.add.at(count, idx, w)
        for ax in range(ens.dim):
            np.add.at(mom[ax], idx, w * ens.velocities[:, ax])
    rho = count / (ens.n * grid.cell_volume)
    ok = rho > U_DENSITY_FLOOR  # mean density is 1 by construction
    u = np.zeros_like(mom)
    for ax in range(ens.dim):
        u[ax] = np.where(ok, mom[ax] / np.where(ok, count, 1.0), 0.0)
    return Field(grid, rho), VectorField(grid, u)


def _gather(vector: VectorField, positions):
    """Multilinear interpolation of a grid vector field at particle positions."""
    corners, weights = _cic_weights(positions, vector.grid)
    out = np.zeros((positions.shape[0], vector.grid.dim))
    for idx, w in zip(corners, weights):
        for ax in range(vector.grid.dim):
            out[:, ax] += w * vector.values[ax][idx]
    return out


def langevin_step(ens: ParticleEnsemble, psi: Kernel, eps: float, dt: float,
                  fluid_grid: PeriodicGrid, noise: bool = True,
                  alignment: bool = True, u_field=None) -> ParticleEnsemble:
    """One Euler-Maruyama step of the kinetic particle scheme.

    ``u_field`` overrides the self-consistent local velocity (test hook):
    pass a VectorField, or 0 to freeze the relaxation target at rest.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    limit = min(0.1 * eps, 0.1 / psi.sup)
    if dt > limit * (1.0 + 1e-9):
        raise ValueError(f"dt={dt} too large for eps={eps}; need dt <= {limit}")
    x, v = ens.positions, ens.velocities
    drift = np.zeros_like(v)
    if alignment:
        drift += alignment_force(x, v, psi)
    if u_field is None:
        _, u_eps = moments(ens, fluid_grid)
        u_at = _gather(u_eps, x)
    elif isinstance(u_field, VectorField):
        u_at = _gather(u_field, x)
    else:
        u_at = np.zeros_like(v)
    drift -= (v - u_at) / eps
    v_new = v + dt * drift
    if noise:
        rng = np.random.default_rng([ens.rng_seed, ens.step_index])
        v_new = v_new + np.sqrt(2.0 * dt / eps) * rng.standard_normal(v.shape)
    x_new = (x + dt * v) % 1.0
    return ParticleEnsemble(x_new, v_new, ens.time + dt, ens.rng_seed, ens.step_index + 1)


def relative_entropy_gap(rho_eps: Field, u_eps: VectorField, fluid: FluidState):
    """Relative-entropy distance of particle moments to a fluid state.

    Returns (velocity_part, density_part):
        velocity_part = int rho_eps/2 |u_eps - u|^2 dx
        density_part  = int rho_eps ln(rho_eps/rho) - (rho_eps - rho) dx
    The density integrand takes its limit value rho where rho_eps = 0.
    """
    grid = rho_eps.grid
    if grid != u_eps.grid or grid != fluid.grid:
        raise ValueError("moments and fluid state must share a grid")
    rho = fluid.rho_values
    if rho.min() <= 0:
        raise ValueError("fluid density must be positive")
    re = rho_eps.values
    du2 = np.sum((u_eps.values - fluid.velocity.values) ** 2, axis=0)
    velocity_part = float((0.5 * re * du2).sum() * grid.cell_volume)
    empty = re <= 0
    safe = np.where(empty, 1.0, re)
    dens = np.where(empty, rho, safe * np.log(safe / rho) - (re - rho))
    density_part = float(dens.sum() * grid.cell_volume)
    return velocity_part, density_part


def counterflow_ensemble(n: int, dim: int = 1, speed: float = 1.0,
                         seed: int = 0) -> ParticleEnsemble:
    """Uniform positions; half the agents move +speed e1, half -speed e1."""
    rng = np.random.default_rng([seed, 0xC0F])
    pos = rng.uniform(0.0, 1.0, size=(n, dim))
    vel = np.zeros((n, dim))
    vel[: n // 2, 0] = speed
    vel[n // 2:, 0] = -speed
    return ParticleEnsemble(pos, vel, rng_seed=seed)


def random_ensemble(n: int, dim: int = 1, seed: int = 0,
                    v_scale: float = 1.0) -> ParticleEnsemble:
    """Uniform positions, Gaussian velocities of the given scale."""
    rng = np.random.default_rng([seed, 0xA11])
    pos = rng.uniform(0.0, 1.0, size=(n, dim))
    vel = v_scale * rng.standard_normal((n, dim))
    return ParticleEnsemble(pos, vel, rng_seed=seed)


def sample_from_fluid(state: FluidState, n: int, seed: int = 0,
                      thermal: bool = True) -> ParticleEnsemble:
    """Draw agents whose moments match a fluid state (well-prepared data).

    Positions follow the fluid density (inverse CDF in 1D, rejection in
    2D); velocities are the local fluid velocity plus, when ``thermal``,
    a unit-variance Gaussian matching the limiting velocity profile.
    """
    rng = np.random.default_rng([seed, 0xF1D])
    grid = state.grid
    rho = state.rho_values
    if grid.dim == 1:
        cdf = np.concatenate([[0.0], np.cumsum(rho) * grid.dx])
        cdf = cdf / cdf[-1]
        xs = np.concatenate([grid.axis_nodes, [1.0]])
        pos = np.interp(rng.uniform(0.0, 1.0, size=n), cdf, xs)[:, None]
    else:
        rho_max = rho.max()
        samples = []
        need = n
        while need > 0:
            cand = rng.uniform(0.0, 1.0, size=(2 * need + 16, 2))
            idx = np.floor(cand / grid.dx).astype(int) % grid.n
            accept = rng.uniform(0.0, rho_max, size=cand.shape[0]) < rho[idx[:, 0], idx[:, 1]]
            picked = cand[accept][:need]
            samples.append(picked)
            need -= picked.shape[0]
        pos = np.concatenate(samples, axis=0)
    vel = _gather(state.velocity, pos)
    if thermal:
        vel = vel + rng.standard_normal(vel.shape)
    return ParticleEnsemble(pos, vel, time=state.time, rng_seed=seed)
