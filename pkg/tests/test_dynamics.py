import numpy as np
import pytest

from conftest import stack
from covdyn import constitutive as con
from covdyn import dynamics as dyn
from covdyn import geometry as geo
from covdyn import kinematics as kin
from covdyn.errors import ChartExitError, UnstableStepError


def dirichlet(chart, grid):
    return con.from_lagrangian(con.dirichlet_lagrangian(chart), grid)


def standing_wave(n, dt, steps, amp=0.01):
    chart = geo.euclidean(1)
    grid = kin.BodyGrid(1, n)
    phi0 = grid.x + amp * np.sin(np.pi * grid.x)
    clamp = np.zeros(grid.shape, bool)
    clamp[[0, -1]] = True
    return dyn.simulate(phi0, np.zeros_like(phi0), dirichlet(chart, grid), None, grid, chart,
                        dt, steps, clamp=clamp)


class TestInteriorResidual:
    def test_geodesic_flow_zero_lagrangian(self, sphere):
        errs = []
        for n, dt in ((17, 0.02), (33, 0.01)):
            grid = kin.BodyGrid(1, n)
            x = grid.x[..., 0]
            y0, v0 = stack(1.2 + 0.2 * x, x), stack(0.3 + 0 * x, 1.0 + 0 * x)
            s = dt * np.arange(11)
            ys, _, _ = geo.jacobi_trajectory(sphere, y0, v0, np.zeros_like(y0), s, substeps=8)
            m = kin.Motion(sphere, grid, ys, dt)
            r = dyn.interior_residual(m, con.from_lagrangian(con.zero_lagrangian(), grid))
            errs.append(np.max(np.abs(r[2:-2])))
        assert errs[1] < 1e-3 and errs[0] / errs[1] > 3.5

    def test_wave_solution(self):
        errs = []
        for n, dt in ((33, 0.02), (65, 0.01)):
            grid = kin.BodyGrid(1, n)
            chart = geo.euclidean(1)
            m = kin.Motion.from_function(
                chart, grid,
                lambda t, x: (x[..., 0] + 0.1 * np.sin(np.pi * x[..., 0]) * np.cos(np.pi * t))[..., None],
                dt, 10)
            r = dyn.interior_residual(m, dirichlet(chart, grid))
            errs.append(np.max(np.abs(r[2:-2, 2:-2])))
        assert errs[1] < 5e-3 and errs[0] / errs[1] > 3.5

    def test_equator_harmonic(self, sphere):
        grid = kin.BodyGrid(1, 33)
        m = kin.Motion.stationary(sphere, grid, stack(np.pi / 2 + 0 * grid.x[..., 0], grid.x[..., 0]))
        assert np.max(np.abs(dyn.interior_residual(m, dirichlet(sphere, grid)))) < 1e-12

    @pytest.mark.parametrize("lag", ["dirichlet", "svk"])
    def test_translation_equivariance(self, rng, lag):
        chart = geo.euclidean(2)
        grid = kin.BodyGrid(2, 9)
        L = con.dirichlet_lagrangian(chart) if lag == "dirichlet" else \
            con.svk_incompatible_lagrangian(chart, lam=0.3, mu=1.0)
        cd = con.from_lagrangian(L, grid)
        m = kin.Motion.from_function(chart, grid, lambda t, x: stack(x[..., 0] + 0.1 * t * np.sin(x[..., 1]),
                                                        x[..., 1] + 0.1 * t * np.sin(x[..., 0])),
                                     0.1, 5)
        c = rng.normal(size=2)
        r0 = dyn.interior_residual(m, cd)
        r1 = dyn.interior_residual(m.with_values(m.values + c), cd)
        assert np.allclose(r0, r1, atol=1e-12)


class TestBoundaryResidual:
    def test_zero_density(self, grid1):
        m = kin.Motion.stationary(geo.euclidean(1), grid1, grid1.x)
        cd = con.from_lagrangian(con.zero_lagrangian(), grid1)
        assert np.all(dyn.boundary_residual(m, cd) == 0)

    def test_neumann_compatible(self):
        errs = []
        for n in (33, 65):
            grid = kin.BodyGrid(1, n)
            chart = geo.euclidean(1)
            phi = grid.x - np.sin(2 * np.pi * grid.x) / (2 * np.pi)
            m = kin.Motion.stationary(chart, grid, 2 * grid.x + phi)
            cd = dirichlet(chart, grid)
            ref = dyn.boundary_residual(kin.Motion.stationary(chart, grid, 2 * grid.x), cd)
            errs.append(np.max(np.abs(dyn.boundary_residual(m, cd) - ref)))
        assert errs[1] < 1e-2 and errs[0] / errs[1] > 3.5

    def test_traction_as_load(self):
        chart = geo.euclidean(1)
        grid = kin.BodyGrid(1, 17)
        phi = grid.x + 0.5 * grid.x ** 2
        load = con.LoadingDensity(surface=lambda x, y: np.where(x < 0.5, -1.0, 2.0))
        m = kin.Motion.stationary(chart, grid, phi)
        assert np.max(np.abs(dyn.boundary_residual(m, dirichlet(chart, grid), load))) < 1e-13

    def test_equilibrium_residual_single_slice(self, grid1):
        chart = geo.euclidean(1)
        res = dyn.equilibrium_residual(grid1.x, dirichlet(chart, grid1), None, grid1, chart)
        assert res.norm() == pytest.approx(1.0)
        assert np.max(np.abs(res.interior)) < 1e-13
        with pytest.raises(ValueError):
            dyn.equilibrium_residual(np.stack([grid1.x] * 3), dirichlet(chart, grid1), None, grid1)


class TestSimulate:
    def test_standing_wave_period_two(self):
        errs = []
        for n, dt, steps in ((17, 0.01, 200), (33, 0.005, 400)):
            m = standing_wave(n, dt, steps)
            errs.append(np.max(np.abs(m.values[-1] - m.values[0])) / 0.01)
        assert errs[1] < 2e-2
        assert errs[0] / errs[1] > 3.0

    def test_half_period_inverts(self):
        m = standing_wave(33, 0.005, 200)
        disp = m.values[-1] - m.grid.x
        assert np.allclose(disp, -0.01 * np.sin(np.pi * m.grid.x), atol=2e-4)

    def test_equilibrium_stays_put(self, sphere):
        grid = kin.BodyGrid(1, 17)
        phi = stack(np.pi / 2 + 0 * grid.x[..., 0], grid.x[..., 0])
        clamp = np.zeros(grid.shape, bool)
        clamp[[0, -1]] = True
        for scheme in ("leapfrog", "rk4"):
            m = dyn.simulate(phi, 0 * phi, dirichlet(sphere, grid), None, grid, sphere, 0.01, 20,
                             scheme=scheme, clamp=clamp)
            assert np.max(np.abs(m.values - phi)) < 1e-12

    def test_energy_drift_second_order(self):
        drifts = []
        for dt in (0.01, 0.005):
            m = standing_wave(33, dt, int(round(1.0 / dt)), amp=0.05)
            e = dyn.discrete_energy(m, con.dirichlet_lagrangian(geo.euclidean(1)))
            drifts.append(np.max(np.abs(e - e[0])))
        assert drifts[0] / drifts[1] > 3.0

    def test_unstable_step(self):
        with pytest.raises(UnstableStepError, match="unstable step") as info:
            standing_wave(65, 0.1, 500)
        assert info.value.index > 0

    def test_chart_exit(self):
        chart = geo.half_plane(floor=0.05)
        grid = kin.BodyGrid(1, 9)
        phi = stack(grid.x[..., 0], 0.5 + 0 * grid.x[..., 0])
        V = stack(0 * grid.x[..., 0], -3 + 0 * grid.x[..., 0])
        cd = con.from_lagrangian(con.zero_lagrangian(), grid)
        with pytest.raises(ChartExitError):
            dyn.simulate(phi, V, cd, None, grid, chart, 0.01, 200)

    def test_body_load_accelerates(self):
        chart = geo.euclidean(1)
        grid = kin.BodyGrid(1, 9)
        load = con.LoadingDensity(body=lambda x, y: np.ones_like(y))
        cd = con.from_lagrangian(con.zero_lagrangian(), grid)
        m = dyn.simulate(grid.x, 0 * grid.x, cd, load, grid, chart, 0.1, 10)
        assert np.allclose(m.values[-1] - grid.x, 0.5, atol=1e-12)
