"""Right-hand sides, the alignment operator, and formulation conversion."""
import numpy as np
import pytest

from euleralign.dynamics import (FluidState, alignment_operator,
                                 convert_formulation, rhs_conservative,
                                 rhs_log, rhs_pressureless)
from euleralign.grid import Field, VectorField, integrate, make_grid
from euleralign.kernels import ConstantKernel, CosineKernel, build_kernel

from conftest import (direct_alignment, random_band_limited,
                      random_positive_density)


def _vec(grid, *comps):
    return VectorField(grid, np.stack(comps))


def _random_state(grid, rng, amp=0.3, formulation="conservative"):
    rho = random_positive_density(grid, 5, rng, amp=amp)
    comps = [random_band_limited(grid, 5, rng, amp=amp).values
             for _ in range(grid.dim)]
    state = FluidState("conservative", rho, _vec(grid, *comps))
    return convert_formulation(state, formulation)


class TestAlignmentOperator:
    def test_constant_velocity_gives_zero(self, grid1d, rng):
        rho = random_positive_density(grid1d, 6, rng)
        u = _vec(grid1d, np.full(64, 1.7))
        psi = build_kernel(CosineKernel(1.0, 0.5), grid1d)
        L = alignment_operator(rho, u, psi)
        assert np.abs(L.values).max() <= 1e-13

    def test_constant_kernel_reduction(self, grid1d, rng):
        # psi == 1 and unit mass: L = u - m_c exactly
        rho = random_positive_density(grid1d, 6, rng)
        u0 = random_band_limited(grid1d, 6, rng).values
        u = _vec(grid1d, u0)
        psi = build_kernel(ConstantKernel(1.0), grid1d)
        m_c = (rho.values * u0).sum() * grid1d.cell_volume
        L = alignment_operator(rho, u, psi)
        assert np.abs(L.values[0] - (u0 - m_c)).max() <= 1e-13

    def test_matches_direct_quadrature(self, grid1d, rng):
        psi = build_kernel(CosineKernel(1.0, 0.5), grid1d)
        for _ in range(3):
            rho = random_positive_density(grid1d, 8, rng)
            u = _vec(grid1d, random_band_limited(grid1d, 8, rng).values)
            L = alignment_operator(rho, u, psi)
            oracle = direct_alignment(rho, u, psi.samples.values)
            assert np.abs(L.values - oracle).max() <= 1e-12

    def test_matches_direct_quadrature_2d(self, grid2d, rng):
        psi = build_kernel(CosineKernel(1.0, 0.5), grid2d)
        rho = random_positive_density(grid2d, 3, rng)
        u = _vec(grid2d, random_band_limited(grid2d, 3, rng).values,
                 random_band_limited(grid2d, 3, rng).values)
        L = alignment_operator(rho, u, psi)
        n = grid2d.n
        # direct double sum over all node pairs
        oracle = np.zeros((2, n, n))
        coords = np.stack(grid2d.nodes, axis=-1)
        for a in range(2):
            for i1 in range(n):
                for i2 in range(n):
                    delta = coords[i1, i2] - coords.reshape(-1, 2)
                    w = psi.evaluate(delta)
                    du = u.values[a][i1, i2] - u.values[a].ravel()
                    oracle[a, i1, i2] = (w * du * rho.values.ravel()).sum() \
                        * grid2d.cell_volume
        assert np.abs(L.values - oracle).max() <= 1e-12


class TestConservativeRHS:
    def test_equilibrium(self, grid1d):
        state = FluidState("conservative", Field(grid1d, np.ones(64)),
                           _vec(grid1d, np.zeros(64)))
        psi = build_kernel(CosineKernel(1.0, 0.5), grid1d)
        drho, dmom = rhs_conservative(state, psi)
        assert np.abs(drho.values).max() <= 1e-14
        assert np.abs(dmom.values).max() <= 1e-14

    def test_galilean_steady_state(self, grid1d):
        state = FluidState("conservative", Field(grid1d, np.ones(64)),
                           _vec(grid1d, np.full(64, 0.8)))
        psi = build_kernel(CosineKernel(1.0, 0.5), grid1d)
        drho, dmom = rhs_conservative(state, psi)
        assert np.abs(drho.values).max() <= 1e-12
        assert np.abs(dmom.values).max() <= 1e-12

    def test_mass_flux_integral_zero(self, grid1d, rng):
        state = _random_state(grid1d, rng)
        psi = build_kernel(CosineKernel(1.0, 0.5), grid1d)
        drho, _ = rhs_conservative(state, psi)
        assert abs(integrate(drho)) <= 1e-12

    def test_momentum_flux_plus_alignment_integral_zero(self, grid1d, rng):
        state = _random_state(grid1d, rng)
        psi = build_kernel(CosineKernel(1.0, 0.5), grid1d)
        _, dmom = rhs_conservative(state, psi)
        assert np.abs(integrate(dmom)).max() <= 1e-10

    def test_cross_formulation_consistency(self, rng):
        grid = make_grid(1, 128)
        state_c = _random_state(grid, rng, amp=0.15)
        state_l = convert_formulation(state_c, "log")
        psi = build_kernel(CosineKernel(1.0, 0.5), grid)
        drho, dmom = rhs_conservative(state_c, psi)
        dh, du = rhs_log(state_l, psi)
        rho = state_c.density.values
        u = state_c.velocity.values[0]
        drho_log = rho * dh.values
        dmom_log = drho_log * u + rho * du.values[0]
        assert np.abs(drho.values - drho_log).max() <= 1e-8
        assert np.abs(dmom.values[0] - dmom_log).max() <= 1e-8

    def test_cross_formulation_2d(self, rng):
        # n = 64 keeps the exp/log spectral tails below the 2/3 cutoff
        grid = make_grid(2, 64)
        rho = random_positive_density(grid, 3, rng, amp=0.1)
        comps = [random_band_limited(grid, 3, rng, amp=0.1).values
                 for _ in range(2)]
        state_c = FluidState("conservative", rho, _vec(grid, *comps))
        state_l = convert_formulation(state_c, "log")
        psi = build_kernel(CosineKernel(1.0, 0.5), grid)
        drho, dmom = rhs_conservative(state_c, psi)
        dh, du = rhs_log(state_l, psi)
        rho = state_c.density.values
        drho_log = rho * dh.values
        assert np.abs(drho.values - drho_log).max() <= 1e-8
        for a in range(2):
            dmom_log = drho_log * state_c.velocity.values[a] + rho * du.values[a]
            assert np.abs(dmom.values[a] - dmom_log).max() <= 1e-8

    def test_rejects_log_state(self, grid1d):
        state = FluidState("log", Field(grid1d, np.zeros(64)),
                           _vec(grid1d, np.zeros(64)))
        psi = build_kernel(ConstantKernel(1.0), grid1d)
        with pytest.raises(ValueError):
            rhs_conservative(state, psi)


class TestLogRHS:
    def test_equilibrium(self, grid1d):
        state = FluidState("log", Field(grid1d, np.zeros(64)),
                           _vec(grid1d, np.zeros(64)))
        psi = build_kernel(CosineKernel(1.0, 0.5), grid1d)
        dh, du = rhs_log(state, psi)
        assert np.abs(dh.values).max() <= 1e-14
        assert np.abs(du.values).max() <= 1e-14

    def test_constant_kernel_identity(self, grid1d):
        # h == 0, psi == 1, u = eps sin(2 pi x):
        # du/dt = -u u' - (u - int u)
        eps = 0.05
        x = grid1d.axis_nodes
        u0 = eps * np.sin(2 * np.pi * x)
        state = FluidState("log", Field(grid1d, np.zeros(64)), _vec(grid1d, u0))
        psi = build_kernel(ConstantKernel(1.0), grid1d)
        dh, du = rhs_log(state, psi)
        expected_du = -u0 * eps * 2 * np.pi * np.cos(2 * np.pi * x) - u0
        assert np.abs(du.values[0] - expected_du).max() <= 1e-10
        assert np.abs(dh.values + eps * 2 * np.pi * np.cos(2 * np.pi * x)).max() <= 1e-10


class TestPressureless:
    def test_equilibrium(self, grid1d):
        state = FluidState("conservative", Field(grid1d, np.ones(64)),
                           _vec(grid1d, np.zeros(64)))
        psi = build_kernel(ConstantKernel(1.0), grid1d)
        drho, dmom = rhs_pressureless(state, psi)
        assert np.abs(drho.values).max() <= 1e-14
        assert np.abs(dmom.values).max() <= 1e-14

    def test_difference_is_exactly_pressure_gradient(self, grid1d, rng):
        state = _random_state(grid1d, rng)
        psi = build_kernel(CosineKernel(1.0, 0.5), grid1d)
        drho_c, dmom_c = rhs_conservative(state, psi)
        drho_p, dmom_p = rhs_pressureless(state, psi)
        assert np.abs(drho_c.values - drho_p.values).max() == 0.0
        rho_hat = np.fft.fftn(state.density.values)
        grad_rho = np.fft.ifftn(grid1d.deriv1[0] * rho_hat).real
        assert np.abs((dmom_c.values[0] - dmom_p.values[0]) + grad_rho).max() <= 1e-14

    def test_velocity_contracts_faster_than_density(self, rng):
        # psi == 1 pressureless run: u - m_c relaxes at unit rate while
        # the density is only advected
        from euleralign.integrator import integrate_fluid
        grid = make_grid(1, 64)
        x = grid.axis_nodes
        rho = Field(grid, 1.0 + 0.1 * np.cos(2 * np.pi * x))
        u = _vec(grid, 0.1 * np.sin(2 * np.pi * x))
        state = FluidState("conservative", rho, u)
        psi = build_kernel(ConstantKernel(1.0), grid)
        traj = integrate_fluid(state, psi, 2.0, pressureless=True, sigmas=())
        assert traj.termination == "completed"

        def parts(s):
            rh = s.rho_values
            uu = s.velocity.values[0]
            mc = (rh * uu).sum() * grid.cell_volume
            u_part = (rh * (uu - mc) ** 2).sum() * grid.cell_volume
            d_part = ((rh - 1.0) ** 2).sum() * grid.cell_volume
            return u_part, d_part

        u0p, d0p = parts(traj.states[0])
        u1p, d1p = parts(traj.states[-1])
        assert u1p <= u0p * np.exp(-2 * 2.0) * 1.5  # quadratic relaxes at rate ~2
        assert d1p >= 0.2 * d0p                     # density barely decays


class TestConvertFormulation:
    def test_identity_cases(self, grid1d):
        state = FluidState("conservative", Field(grid1d, np.ones(64)),
                           _vec(grid1d, np.zeros(64)))
        log = convert_formulation(state, "log")
        assert np.abs(log.density.values).max() == 0.0
        two = FluidState("conservative", Field(grid1d, np.full(64, 2.0)),
                         _vec(grid1d, np.zeros(64)))
        assert np.allclose(convert_formulation(two, "log").density.values, np.log(2.0))

    def test_round_trip(self, grid1d, rng):
        state = _random_state(grid1d, rng)
        back = convert_formulation(convert_formulation(state, "log"), "conservative")
        assert np.abs(back.density.values - state.density.values).max() <= 1e-14

    def test_same_target_is_noop(self, grid1d, rng):
        state = _random_state(grid1d, rng)
        assert convert_formulation(state, "conservative") is state

    def test_rejects_nonpositive_density(self, grid1d):
        with pytest.raises(ValueError):
            FluidState("conservative", Field(grid1d, np.zeros(64)),
                       _vec(grid1d, np.zeros(64)))
