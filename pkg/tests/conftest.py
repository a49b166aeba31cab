"""Shared fixtures and brute-force oracles for the test suite.

The oracles here are deliberately independent of the library's fast
paths: convolutions and alignment sums are direct O(N^2) quadratures,
derivatives come from finite differences, and expected values quoted in
the tests were computed by hand or with these references.
"""
import numpy as np
import pytest

from euleralign.grid import Field, VectorField, make_grid


def random_band_limited(grid, kmax, rng, amp=1.0, mean=0.0):
    """Real random field with modes only in |k| <= kmax per axis."""
    spec = np.zeros(grid.shape, dtype=complex)
    keep = np.abs(grid.wavenumbers) <= kmax
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        s = [1] * grid.dim
        s[ax] = grid.n
        mask = mask & keep.reshape(s)
    spec[mask] = rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())
    vals = np.fft.ifftn(spec).real
    peak = np.abs(vals).max()
    if peak > 0:
        vals *= amp / peak
    return Field(grid, vals + mean)


def random_positive_density(grid, kmax, rng, amp=0.3):
    """Band-limited density with unit mass and positive values."""
    f = random_band_limited(grid, kmax, rng, amp=amp)
    vals = 1.0 + f.values - f.values.mean()
    assert vals.min() > 0
    return Field(grid, vals / (vals.sum() * grid.cell_volume))


def direct_convolution(f: Field, g: Field) -> np.ndarray:
    """O(N^2) quadrature of the periodic convolution."""
    grid = f.grid
    n = grid.n
    if grid.dim == 1:
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        return grid.cell_volume * (f.values[idx] @ g.values)
    out = np.zeros(grid.shape)
    for j1 in range(n):
        for j2 in range(n):
            out += f.values[np.ix_((np.arange(n) - j1) % n, (np.arange(n) - j2) % n)] \
                * g.values[j1, j2]
    return grid.cell_volume * out


def direct_alignment(rho: Field, u: VectorField, psi_samples: np.ndarray) -> np.ndarray:
    """O(N^2) quadrature of int psi(x-y)(u(x)-u(y)) rho(y) dy, 1D only."""
    grid = rho.grid
    n = grid.n
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    w = psi_samples[idx]
    out = np.zeros((grid.dim, n))
    for a in range(grid.dim):
        ua = u.values[a]
        out[a] = grid.cell_volume * (
            ua * (w @ rho.values) - w @ (rho.values * ua))
    return out


def direct_dissipation(rho: Field, u: VectorField, psi_samples: np.ndarray) -> float:
    """O(N^2) double sum of the alignment dissipation, 1D only."""
    grid = rho.grid
    n = grid.n
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    w = psi_samples[idx]
    total = 0.0
    for a in range(grid.dim):
        du = u.values[a][:, None] - u.values[a][None, :]
        total += np.sum(w * du**2 * np.outer(rho.values, rho.values))
    return 0.5 * total * grid.cell_volume**2


@pytest.fixture
def grid1d():
    return make_grid(1, 64)


@pytest.fixture
def grid2d():
    return make_grid(2, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
