import numpy as np
import pytest

from conftest import stack
from covdyn import acceptance as acc
from covdyn import constitutive as con
from covdyn import geometry as geo
from covdyn import kinematics as kin
from covdyn import linearize as lin
from covdyn import oracle
from covdyn.errors import ShootingError


def test_fit_slope_power_law():
    lv = [0.1, 0.05, 0.025]
    assert oracle.fit_slope(lv, [3 * h ** 2 for h in lv]) == pytest.approx(2.0, abs=1e-12)


class TestOracleConnection:
    @pytest.mark.parametrize("name", ["sphere", "half-plane"])
    def test_matches_closed_form(self, name):
        chart = geo.chart_from_name(name)
        y = np.array([0.9, 0.6])
        assert np.allclose(oracle.oracle_christoffel(chart, y), geo.christoffel(chart, y), atol=1e-9)

    def test_frame_transport_preserves_metric(self, sphere):
        y, v = np.array([1.0, 0.3]), np.array([0.4, 0.7])
        y1, P = oracle.exp_with_frame(sphere, y, v, steps=64)
        assert np.allclose(P.T @ sphere.G(y1) @ P, sphere.G(y), atol=1e-7)


class TestFdForceDerivative:
    def test_zero_direction(self):
        sc = acc.canonical_scenario("c")
        a, b = oracle.fd_force_derivative(sc.motion, np.zeros(sc.motion.values.shape), sc.cd)
        assert np.all(a == 0) and np.all(b == 0)

    def test_flat_linear_density_eps_independent(self, rng):
        grid = kin.BodyGrid(1, 17)
        chart = geo.euclidean(1)
        m = kin.Motion.from_function(chart, grid, lambda t, x: (x[..., 0] + 0.1 * t * x[..., 0])[..., None],
                                     0.05, 6)
        cd = con.from_lagrangian(con.dirichlet_lagrangian(chart), grid)
        w = oracle.smooth_field(rng, grid, m.times, 1)
        a = oracle.fd_force_derivative(m, w, cd, eps=0.1)[0]
        b = oracle.fd_force_derivative(m, w, cd, eps=0.001)[0]
        assert np.max(np.abs(a - b)) < 1e-9 * np.max(np.abs(a))

    def test_matches_linearization_on_sphere(self, rng):
        chart = geo.sphere()
        grid = kin.BodyGrid(1, 17)
        fn = lambda t, x: stack(np.pi / 2 + 0.3 * np.sin(np.pi * x[..., 0]) + 0.5 * t, 0.5 + x[..., 0] + 2 * t)
        m = kin.Motion.from_function(chart, grid, fn, 0.01, 6)
        cd = con.from_lagrangian(con.dirichlet_lagrangian(chart), grid)
        w = oracle.smooth_field(rng, grid, m.times, 2)
        fd = oracle.fd_force_derivative(m, w, cd, eps=0.005)[0][2:-2]
        got = lin.linear_part(lambda u: lin.apply_linearized(m, u, cd), w)[2:-2]
        assert np.max(np.abs(got - fd)) / np.max(np.abs(fd)) < 5e-3

    def test_sweep_slope_two_on_curved_target(self, rng):
        chart = geo.half_plane()
        grid = kin.BodyGrid(1, 17)
        fn = lambda t, x: stack(x[..., 0] + 1.5 * t, 1 + 0.3 * np.sin(np.pi * x[..., 0]) + 0.5 * t)
        m = kin.Motion.from_function(chart, grid, fn, 0.01, 6)
        cd = con.from_lagrangian(con.dirichlet_lagrangian(chart), grid)
        w = oracle.smooth_field(rng, grid, m.times, 2)
        sweep = oracle.fd_sweep(m, w, cd, (0.08, 0.04, 0.02, 0.01), valid=slice(2, -2))
        assert sweep.interior_slope == pytest.approx(2.0, abs=0.3)


class TestMetricity:
    def test_euclidean_roundoff(self):
        chart = geo.euclidean(2)
        grid, base = acc.metricity_base(chart)
        assert oracle.metricity_defect(chart, grid, base, samples=2).max_defect <= 1e-10

    def test_zero_variation(self, sphere):
        grid, base = acc.metricity_base(sphere)
        rep = oracle.metricity_defect(sphere, grid, base, samples=1, amplitude=0.0)
        assert rep.max_defect == 0.0

    def test_sphere_slope(self, sphere):
        grid, base = acc.metricity_base(sphere)
        rep = oracle.metricity_defect(sphere, grid, base, samples=1)
        assert rep.convergence_slope == pytest.approx(2.0, abs=0.3)
        assert "metricity[sphere]" in rep.line()


class TestJacobiScaling:
    def test_euclidean_roundoff(self):
        rep = oracle.jacobi_scaling_defect(geo.euclidean(2), [0.0, 0.0], [1.0, 0.5], [0.2, 1.0],
                                           levels=(0.1, 0.05, 0.025), check_step=0.01)
        assert rep.max_defect < 1e-13

    def test_unit_scale_is_exact(self, sphere):
        rep = oracle.jacobi_scaling_defect(sphere, [np.pi / 2, 0.0], [0.0, 1.0], [1.0, 0.0],
                                           levels=(0.1, 0.05, 0.025), check_step=0.01, ts=(1.0,))
        assert rep.max_defect == 0.0

    def test_sphere_fourth_order(self, sphere):
        rep = oracle.jacobi_scaling_defect(sphere, [np.pi / 2, 0.0], [0.0, 1.0], [1.0, 0.0],
                                           check_step=0.01)
        assert rep.convergence_slope == pytest.approx(4.0, abs=0.5)


class TestNormalCoordinates:
    def test_euclidean_exact(self):
        rep = oracle.normal_coordinate_jacobi_check(geo.euclidean(2), [0.1, 0.2], [1.0, 0.0], [0.3, 0.4])
        assert rep.max_defect < 1e-9

    def test_zero_field(self, sphere):
        rep = oracle.normal_coordinate_jacobi_check(sphere, [1.0, 0.0], [0.5, 0.5], [0.0, 0.0])
        assert rep.max_defect == 0.0

    def test_sphere_cubic(self, sphere):
        rep = oracle.normal_coordinate_jacobi_check(sphere, [1.0, 0.2], [0.6, 0.8], [0.8, -0.6])
        assert rep.max_defect < 1e-8
        assert rep.convergence_slope == pytest.approx(3.0, abs=0.5)

    def test_log_map_round_trip(self, half_plane):
        y, u = np.array([0.1, 1.0]), np.array([0.3, -0.2])
        p = geo.exp_map(half_plane, geo.GeodesicState(y, u), 128).y
        assert np.allclose(oracle.log_map(half_plane, y, p), u, atol=1e-9)

    def test_shooting_failure(self, sphere):
        y, u = np.array([1.0, 0.0]), np.array([0.9, 1.5])
        p = geo.exp_map(sphere, geo.GeodesicState(y, u), 128).y
        with pytest.raises(ShootingError, match="shooting"):
            oracle.log_map(sphere, y, p, max_iter=1)
