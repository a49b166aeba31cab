"""Communication weights: even, strictly positive kernels on the torus.

Three presets are provided (constant, cosine, smooth bump), each with an
analytic point evaluation used by the particle integrators and a sampled
table used by the spectral convolutions.  Every built kernel carries a
certified positive lower bound ``psi_m`` that downstream estimates reuse
as the single authoritative value.

Kernels are immutable after construction and freely shared.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .grid import Field, PeriodicGrid, spectral_derivative

__all__ = [
    "ConstantKernel",
    "CosineKernel",
    "BumpKernel",
    "KernelSpec",
    "Kernel",
    "build_kernel",
    "kernel_from_samples",
]

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class ConstantKernel:
    """psi(x) = value, value > 0."""

    value: float

    def evaluate(self, delta: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(delta).shape[:-1], self.value)

    @property
    def analytic_min(self) -> float:
        return self.value


@dataclass(frozen=True)
class CosineKernel:
    """psi(x) = a + b * prod_axes cos(2 pi x_axis), requires a > |b|."""

    a: float
    b: float

    def evaluate(self, delta: np.ndarray) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        return self.a + self.b * np.prod(np.cos(2.0 * np.pi * delta), axis=-1)

    @property
    def analytic_min(self) -> float:
        return self.a - abs(self.b)


@dataclass(frozen=True)
class BumpKernel:
    """Positive base plus a periodized C-infinity bump of given width.

    psi(x) = base + amplitude * exp(1 - 1/(1 - (r/width)^2)) for the
    minimal-image radius r < width, and base elsewhere.  width <= 1/2
    keeps the bump inside one periodic cell, so the minimal image is the
    full periodization.
    """

    base: float
    amplitude: float
    width: float

    def evaluate(self, delta: np.ndarray) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        wrapped = delta - np.round(delta)
        r2 = np.sum(wrapped**2, axis=-1) / self.width**2
        inside = r2 < 1.0
        safe = np.where(inside, r2, 0.0)
        profile = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe)), 0.0)
        return self.base + self.amplitude * profile


KernelSpec = Union[ConstantKernel, CosineKernel, BumpKernel]


def _validate_spec(spec: KernelSpec):
    if isinstance(spec, ConstantKernel):
        if spec.value <= 0:
            raise ValueError("kernel not positive: constant value must be > 0")
    elif isinstance(spec, CosineKernel):
        if spec.a - abs(spec.b) <= 0:
            raise ValueError("kernel not positive: cosine requires a > |b| "
                             f"(minimum {spec.a - abs(spec.b)})")
    elif isinstance(spec, BumpKernel):
        if spec.base <= 0:
            raise ValueError("kernel not positive: bump base must be > 0")
        if spec.base + min(0.0, spec.amplitude) <= 0:
            raise ValueError("kernel not positive: clipped bump (base + amplitude <= 0)")
        if not 0.0 < spec.width <= 0.5:
            raise ValueError(f"bump width must lie in (0, 1/2], got {spec.width}")
    else:
        raise TypeError(f"unknown kernel descriptor {type(spec).__name__}")


def _negated_samples(values: np.ndarray) -> np.ndarray:
    """Samples at index -j (mod n) along every axis."""
    out = values
    for ax in range(values.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


class Kernel:
    """A sampled communication weight with its spectral table.

    Attributes
    ----------
    spec : the analytic descriptor, or None for raw sample tables
    samples : Field of values on the grid
    spectral : real transform coefficients (even symmetry makes them real)
    psi_m : certified positive lower bound
    sup : max of the samples (bounds alignment stiffness in CFL terms)
    lipschitz_bound : max |grad psi| over samples, informational
    """

    def __init__(self, spec, samples: Field, psi_m: float):
        raw = np.fft.fftn(samples.values)
        scale = max(np.abs(raw.real).max(), 1.0)
        if np.abs(raw.imag).max() > _SYMMETRY_TOL * scale:
            raise ValueError("kernel samples are not even: transform is not real")
        self.spec = spec
        self.samples = samples
        self.spectral = raw.real.copy()
        self.psi_m = float(psi_m)
        self.sup = float(samples.values.max())
        grads = [spectral_derivative(samples, ax).values for ax in range(samples.grid.dim)]
        self.lipschitz_bound = float(np.sqrt(sum(g**2 for g in grads)).max())
        # convolution multiplier with the quadrature weight folded in
        self._conv_hat = self.spectral * samples.grid.cell_volume

    @property
    def grid(self) -> PeriodicGrid:
        return self.samples.grid

    def conv(self, values: np.ndarray) -> np.ndarray:
        """(psi * f)(x) on sample arrays, via the cached transform."""
        return np.fft.ifftn(self._conv_hat * np.fft.fftn(values)).real

    def conv_spectrum(self, f_hat: np.ndarray) -> np.ndarray:
        """(psi * f)(x) given the transform of f."""
        return np.fft.ifftn(self._conv_hat * f_hat).real

    def evaluate(self, delta: np.ndarray) -> np.ndarray:
        """Analytic psi at displacement vectors (..., dim)."""
        if self.spec is None:
            raise ValueError("raw-sample kernels have no analytic evaluation")
        return self.spec.evaluate(delta)


def build_kernel(spec: KernelSpec, grid: PeriodicGrid) -> Kernel:
    """Sample and validate a kernel descriptor on a grid.

    psi_m is the analytic minimum when one is available (constant,
    cosine), otherwise the sampled grid minimum.
    """
    _validate_spec(spec)
    coords = np.stack(grid.nodes, axis=-1)
    samples = Field(grid, spec.evaluate(coords))
    sampled_min = float(samples.values.min())
    if sampled_min <= 0:
        raise ValueError(f"kernel not positive: sampled minimum {sampled_min} <= 0")
    asym = np.abs(samples.values - _negated_samples(samples.values)).max()
    if asym > _SYMMETRY_TOL * max(1.0, abs(samples.values).max()):
        raise ValueError(f"kernel samples not symmetric (max deviation {asym})")
    psi_m = getattr(spec, "analytic_min", None)
    if psi_m is None:
        psi_m = sampled_min
    return Kernel(spec, samples, psi_m)


def kernel_from_samples(samples: Field) -> Kernel:
    """Wrap a raw sample table; asymmetric or nonpositive tables are rejected."""
    vals = samples.values
    if vals.min() <= 0:
        raise ValueError(f"kernel not positive: sampled minimum {vals.min()} <= 0")
    asym = np.abs(vals - _negated_samples(vals)).max()
    if asym > _SYMMETRY_TOL * max(1.0, abs(vals).max()):
        raise ValueError(f"kernel samples not symmetric (max deviation {asym})")
    return Kernel(None, samples, float(vals.min()))
