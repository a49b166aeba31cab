"""Conservation, entropy, and Lyapunov functionals plus decay-rate fitting.

Every monitored quantity is the nodal quadrature (spectral zero mode) of
its defining integral:

* mass and momentum  m_c = int rho u dx;
* total energy       E = int rho |u|^2 + int (rho - 1)^2;
* fluctuation        F = int rho |u - m_c|^2 + int (rho - 1)^2;
* alignment dissipation
      D = 1/2 iint psi(x-y) |u(x) - u(y)|^2 rho(x) rho(y) dx dy,
  evaluated through the convolution identity
      D = int rho |u|^2 (psi*rho) - int rho u . (psi*(rho u));
* kinetic entropy    1/2 int rho |u|^2 + int rho ln rho,  which obeys
      d/dt(kinetic entropy) + D = 0 along smooth solutions;
* relative entropy   int (rho ln rho + 1 - rho) >= 0;
* the sigma-corrected Lyapunov pair (E_sigma, D_sigma) built from the
  spectral Bogovskii operator, with d/dt E_sigma + D_sigma = 0 by
  construction (D_sigma is assembled term by term, not by differencing).

All evaluations are pure and safe to run concurrently across time slices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import FluidState, _alignment_arrays
from .grid import Field, VectorField, integrate, sobolev_norm
from .kernels import Kernel

__all__ = [
    "DiagnosticsRecord",
    "conserved_quantities",
    "dissipation",
    "entropy_functionals",
    "entropy_equivalence_constants",
    "relative_entropy_density",
    "entropy_quadratic_ratio",
    "rel_entropy_range_constants",
    "bogovskii",
    "lyapunov_sigma",
    "make_record",
    "equivalence_scan",
    "fit_decay_rate",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    """All monitored functionals at one time instant.

    ``e_sigma``/``d_sigma`` map each configured sigma to its corrected
    Lyapunov value and dissipation.
    """

    t: float
    mass: float
    m_c: np.ndarray
    E: float
    F: float
    D: float
    kinetic_entropy: float
    rel_entropy: float
    e_sigma: dict
    d_sigma: dict
    min_rho: float
    max_speed: float
    hs_norm: float


def _rho_u(state: FluidState):
    return state.rho_values, state.velocity.values


def conserved_quantities(state: FluidState):
    """(mass, m_c): both are conserved along smooth solutions."""
    rho, u = _rho_u(state)
    vol = state.grid.cell_volume
    mass = float(rho.sum() * vol)
    m_c = np.array([(rho * u[a]).sum() * vol for a in range(state.grid.dim)])
    return mass, m_c


def dissipation(state: FluidState, psi: Kernel) -> float:
    """Alignment dissipation D(t); nonnegative, clamped at round-off."""
    rho, u = _rho_u(state)
    vol = state.grid.cell_volume
    conv_rho = psi.conv(rho)
    speed2 = np.sum(u**2, axis=0)
    val = (rho * speed2 * conv_rho).sum()
    for a in range(state.grid.dim):
        val -= (rho * u[a] * psi.conv(rho * u[a])).sum()
    return max(float(val * vol), 0.0)


def relative_entropy_density(rho: np.ndarray) -> np.ndarray:
    """rho ln rho + 1 - rho pointwise, with the rho -> 0 limit value 1 - rho."""
    rho = np.asarray(rho, dtype=float)
    tiny = rho < 1e-12
    safe = np.where(tiny, 1.0, rho)
    return np.where(tiny, 1.0 - rho, safe * np.log(safe) + 1.0 - rho)


def entropy_quadratic_ratio(rho: np.ndarray) -> np.ndarray:
    """g(rho) = (rho ln rho + 1 - rho)/(rho - 1)^2; g(0) = 1, g(1) = 1/2.

    Continuous, positive, and decreasing on [0, inf); a short series
    handles the removable singularity at rho = 1.
    """
    rho = np.asarray(rho, dtype=float)
    e = rho - 1.0
    near_one = np.abs(e) < 1e-3
    es = np.where(near_one, e, 0.0)
    series = 0.5 - es / 6.0 + es**2 / 12.0 - es**3 / 20.0 + es**4 / 30.0
    denom = np.where(near_one, 1.0, e**2)
    closed = relative_entropy_density(rho) / denom
    return np.where(near_one, series, closed)


def rel_entropy_range_constants(rho_min: float, rho_max: float):
    """(c1, c2) with c1 (rho-1)^2 <= rho ln rho + 1 - rho <= c2 (rho-1)^2
    for rho in [rho_min, rho_max]; uses the monotonicity of g."""
    if rho_min < 0 or rho_max < rho_min:
        raise ValueError("need 0 <= rho_min <= rho_max")
    c1 = float(entropy_quadratic_ratio(np.array(rho_max)))
    c2 = float(entropy_quadratic_ratio(np.array(rho_min)))
    return c1, c2


def entropy_functionals(state: FluidState):
    """(kinetic_entropy, rel_entropy, E, F)."""
    rho, u = _rho_u(state)
    grid = state.grid
    vol = grid.cell_volume
    if state.formulation == "conservative" and rho.min() <= 0:
        raise ValueError("entropy functionals need rho > 0")
    # in log form rho ln rho = e^h * h without a round trip through exp/log
    if state.formulation == "log":
        rho_log_rho = rho * state.density.values
    else:
        rho_log_rho = rho * np.log(rho)
    speed2 = np.sum(u**2, axis=0)
    kinetic = float((0.5 * rho * speed2 + rho_log_rho).sum() * vol)
    rel = float(relative_entropy_density(rho).sum() * vol)
    dev2 = float(((rho - 1.0) ** 2).sum() * vol)
    E = float((rho * speed2).sum() * vol) + dev2
    _, m_c = conserved_quantities(state)
    umc2 = np.sum((u - m_c.reshape((-1,) + (1,) * grid.dim)) ** 2, axis=0)
    F = float((rho * umc2).sum() * vol) + dev2
    return kinetic, rel, E, F


def entropy_equivalence_constants(a: float, b: float):
    """Closed-form constants C(a), C(b) sandwiching int (ln f)^2 between
    multiples of int (f-1)^2 for a <= f <= b with 0 < a <= 1 <= b."""
    if not (0 < a <= 1 <= b):
        raise ValueError(f"need 0 < a <= 1 <= b, got a={a}, b={b}")

    def ratio_sq(x):
        if x == 1.0:
            return 1.0
        return (np.log(x) / (x - 1.0)) ** 2

    c_a = max(1.0, ratio_sq(a))
    c_b = min(1.0, ratio_sq(b))
    return float(c_a), float(c_b)


def bogovskii(f: Field, strict: bool = True) -> VectorField:
    """Solve div v = f, curl v = 0, int v = 0 spectrally.

    v_hat(k) = -i (2 pi k) f_hat(k) / |2 pi k|^2 for k != 0.  With
    ``strict`` the input must be mean-zero to 1e-10; otherwise the zero
    mode is dropped silently.  The discrete multiplier gives
    ||v||_{H^1} <= sqrt(1 + 1/(4 pi^2)) ||f||_{L^2}.
    """
    grid = f.grid
    mean = integrate(f)
    if strict and abs(mean) > 1e-10:
        raise ValueError(f"bogovskii requires a mean-zero input, got mean {mean}")
    f_hat = np.fft.fftn(f.values)
    f_hat.flat[0] = 0.0
    ks = grid.k_squared.copy()
    ks.flat[0] = 1.0
    comps = []
    for a in range(grid.dim):
        v_hat = -1j * grid.angular[a] * f_hat / ks
        comps.append(np.fft.ifftn(v_hat).real)
    return VectorField(grid, np.stack(comps))


def _sigma_pieces(state: FluidState, psi: Kernel):
    """Shared sigma-independent integrals of the corrected Lyapunov pair.

    Returns (E0, D0, corr, dsum) such that
        E_sigma = E0 - sigma * corr
        D_sigma = D0 + sigma * dsum
    with E0 the temporary Lyapunov function and D0 its dissipation; the
    pairing satisfies d/dt E_sigma + D_sigma = 0 along smooth solutions.
    """
    rho, u = _rho_u(state)
    grid = state.grid
    vol = grid.cell_volume
    dim = grid.dim
    fftn, ifftn = np.fft.fftn, np.fft.ifftn

    mass, m_c = conserved_quantities(state)
    mc_cols = m_c.reshape((-1,) + (1,) * dim)
    umc = u - mc_cols
    E0 = float((0.5 * rho * np.sum(umc**2, axis=0)).sum() * vol)
    E0 += float(relative_entropy_density(rho).sum() * vol)
    D0 = dissipation(state, psi)

    # the mass check upstream guarantees rho - 1 is mean-zero to 1e-8,
    # looser than bogovskii's strict gate; drop the zero mode explicitly
    B = bogovskii(Field(grid, rho - 1.0), strict=False).values
    corr = float((rho * np.sum(umc * B, axis=0)).sum() * vol)

    B_hats = [fftn(B[a]) for a in range(dim)]
    T1 = 0.0
    for a in range(dim):
        for b in range(dim):
            dBab = ifftn(grid.deriv1[b] * B_hats[a]).real
            T1 += ((rho * u[a] * u[b]) * dBab).sum()
    T1 = float(T1 * vol)
    T2 = float(((rho - 1.0) ** 2).sum() * vol)

    divmom = ifftn(sum(grid.deriv1[a] * fftn(rho * u[a]) for a in range(dim))).real
    B2 = bogovskii(Field(grid, divmom), strict=False).values
    T3 = float((rho * np.sum(umc * B2, axis=0)).sum() * vol)

    # d/dt (rho m_c) = -m_c div(rho u) thanks to momentum conservation
    mc_dot_B = sum(m_c[a] * B[a] for a in range(dim))
    T4 = float(-(divmom * mc_dot_B).sum() * vol)

    L = _alignment_arrays(rho, u, psi, grid, apply_dealias=False)
    T5 = float((rho * sum(B[a] * L[a] for a in range(dim))).sum() * vol)

    return E0, D0, corr, T1 + T2 - T3 - T4 - T5


def lyapunov_sigma(state: FluidState, psi: Kernel, sigma: float):
    """(E_sigma, D_sigma); at sigma = 0 this is exactly (E, D)."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    mass, _ = conserved_quantities(state)
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"lyapunov_sigma requires unit mass, got {mass}")
    E0, D0, corr, dsum = _sigma_pieces(state, psi)
    return E0 - sigma * corr, D0 + sigma * dsum


def make_record(state: FluidState, psi: Kernel, sigmas=(0.05,),
                sobolev_s: float = 3.0) -> DiagnosticsRecord:
    """Evaluate every monitored functional on one state."""
    rho, u = _rho_u(state)
    grid = state.grid
    mass, m_c = conserved_quantities(state)
    kinetic, rel, E, F = entropy_functionals(state)
    D = dissipation(state, psi)
    e_sig, d_sig = {}, {}
    if len(sigmas) > 0 and abs(mass - 1.0) <= 1e-8:
        E0, D0, corr, dsum = _sigma_pieces(state, psi)
        for s in sigmas:
            e_sig[float(s)] = E0 - s * corr
            d_sig[float(s)] = D0 + s * dsum
    h_field = Field(grid, state.h_values)
    hs = np.sqrt(sobolev_norm(h_field, sobolev_s) ** 2
                 + sobolev_norm(state.velocity, sobolev_s) ** 2)
    return DiagnosticsRecord(
        t=float(state.time),
        mass=mass,
        m_c=m_c,
        E=E,
        F=F,
        D=D,
        kinetic_entropy=kinetic,
        rel_entropy=rel,
        e_sigma=e_sig,
        d_sigma=d_sig,
        min_rho=float(rho.min()),
        max_speed=state.speed_max,
        hs_norm=float(hs),
    )


def _lookup_sigma(table: dict, sigma: float):
    for key, val in table.items():
        if abs(key - sigma) <= 1e-12:
            return val
    raise KeyError(f"sigma={sigma} not recorded; available: {sorted(table)}")


def equivalence_scan(trajectory, sigma: float):
    """Empirical sandwich constants (c3, c4, c5, c6) over a trajectory.

    c3 = min E_sigma/F, c4 = max E_sigma/F, c5 = min D_sigma/F,
    c6 = max D_sigma/F.  All four positive certifies the equivalence of
    the corrected pair with the fluctuation functional for this run and
    sigma.  Values may come out nonpositive for large sigma; that is
    reported, not an error.
    """
    records = getattr(trajectory, "records", trajectory)
    e_ratios, d_ratios = [], []
    for rec in records:
        if rec.F <= 0:
            raise ValueError(f"degenerate trajectory: F <= 0 at t={rec.t}")
        e_ratios.append(_lookup_sigma(rec.e_sigma, sigma) / rec.F)
        d_ratios.append(_lookup_sigma(rec.d_sigma, sigma) / rec.F)
    return (min(e_ratios), max(e_ratios), min(d_ratios), max(d_ratios))


def fit_decay_rate(times, values, window):
    """Least-squares exponential rate of a positive series.

    Fits ln(values) = intercept - c_hat * t over the window and returns
    (c_hat, r_squared).  A constant series returns (0.0, 0.0) since the
    fit explains nothing.  Requires at least 8 samples in the window and
    positive values throughout it.
    """
    t0, t1 = window
    if not t1 > t0:
        raise ValueError(f"empty window ({t0}, {t1})")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = (times >= t0) & (times <= t1)
    if sel.sum() < 8:
        raise ValueError(f"need at least 8 samples in window, got {int(sel.sum())}")
    t = times[sel]
    v = values[sel]
    if np.any(v <= 0):
        raise ValueError("decay fit requires positive values on the window")
    logv = np.log(v)
    sstot = float(np.sum((logv - logv.mean()) ** 2))
    if sstot == 0.0:
        return 0.0, 0.0
    slope, intercept = np.polyfit(t, logv, 1)
    ssres = float(np.sum((logv - (slope * t + intercept)) ** 2))
    r2 = 1.0 - ssres / sstot
    return float(-slope), float(r2)
