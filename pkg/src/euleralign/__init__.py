"""Numerical laboratory for the isothermal Euler system with nonlocal
Cucker-Smale alignment on the periodic torus.

Library layers, lowest first: ``grid`` (spectral calculus), ``kernels``
(communication weights), ``dynamics`` (PDE right-hand sides),
``diagnostics`` (functionals and decay fitting), ``integrator`` (SSP-RK3
runs), ``particles`` (alignment ODEs and the kinetic Langevin scheme),
``scenarios``/``config``/``runner``/``output``/``report``/``cli``
(orchestration and emission).
"""

__version__ = "0.1.0"

from .grid import (Field, PeriodicGrid, VectorField, convolve, dealias,
                   integrate, make_grid, sobolev_norm, spectral_derivative,
                   subsample)
from .kernels import (BumpKernel, ConstantKernel, CosineKernel, Kernel,
                      build_kernel, kernel_from_samples)
from .dynamics import (FluidState, alignment_operator, convert_formulation,
                       rhs_conservative, rhs_log, rhs_pressureless)
from .diagnostics import (DiagnosticsRecord, bogovskii, conserved_quantities,
                          dissipation, entropy_equivalence_constants,
                          entropy_functionals, equivalence_scan,
                          fit_decay_rate, lyapunov_sigma, make_record)
from .integrator import CflViolation, Trajectory, integrate_fluid, ssp_rk3, step
from .particles import (ParticleEnsemble, cs_step, langevin_step, moments,
                        relative_entropy_gap, velocity_diameter)
from .scenarios import make_fluid_initial
from .config import ConfigError, RunConfig, parse_config, serialize_config
