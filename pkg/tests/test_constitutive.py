import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import stack
from covdyn import constitutive as con
from covdyn import geometry as geo
from covdyn import kinematics as kin
from covdyn.errors import DomainError, NotTwiceDifferentiableError


def sample_jet(rng, m, d, n=4):
    x = rng.uniform(0, 1, (n, d))
    y = np.column_stack([rng.uniform(0.8, 2.0, n), rng.uniform(-1, 1, n)])[:, :m]
    A = rng.normal(size=(n, m, d))
    return x, y, A


def scalar_density(psi_fn, R_fn):
    """d = m = 1 density from scalar callables of x."""
    return con.ConstitutiveDensity(lambda x, y, A: psi_fn(x[..., 0])[..., None, None] + 0 * A,
                                   lambda x, y, A: R_fn(x[..., 0])[..., None] + 0 * y)


class TestFromLagrangian:
    def test_zero(self, rng, grid1):
        cd = con.from_lagrangian(con.zero_lagrangian(), grid1)
        x, y, A = sample_jet(rng, 2, 1)
        assert np.all(cd.psi(x, y, A) == 0) and np.all(cd.R(x, y, A) == 0)

    def test_dirichlet_flat(self, rng, grid1):
        cd = con.from_lagrangian(con.dirichlet_lagrangian(geo.euclidean(2)), grid1)
        x, y, A = sample_jet(rng, 2, 1)
        assert np.allclose(cd.psi(x, y, A), A, atol=1e-15)
        assert np.all(cd.R(x, y, A) == 0)

    def test_dirichlet_curved_force(self, rng, sphere, grid1):
        cd = con.from_lagrangian(con.dirichlet_lagrangian(sphere), grid1)
        x, y, A = sample_jet(rng, 2, 1)
        want = 0.5 * np.einsum("...jik,...ia,...ka->...j", sphere.dG(y), A, A)
        assert np.allclose(cd.R(x, y, A), want, atol=1e-12)
        assert np.allclose(cd.psi(x, y, A), sphere.G(y) @ A, atol=1e-14)

    def test_svk_stress_free_at_reference(self):
        chart = geo.euclidean(2)
        A0 = np.array([[1.2, 0.3], [-0.1, 0.9]])
        g0 = A0.T @ A0
        lag = con.svk_incompatible_lagrangian(chart, lambda x: np.broadcast_to(g0, np.shape(x)[:-1] + (2, 2)),
                                              lam=0.4, mu=1.1)
        grid = kin.BodyGrid(2, 9)
        cd = con.from_lagrangian(lag, grid)
        jt = kin.jet_of(grid.x @ A0.T, grid)
        S, R = con.eval_stress(cd, jt)
        assert np.max(np.abs(S)) < 1e-14 and np.max(np.abs(R)) < 1e-14

    @pytest.mark.parametrize("kind", ["dirichlet", "svk"])
    def test_second_derivative_symmetry(self, rng, half_plane, kind):
        grid = kin.BodyGrid(2, 9)
        lag = (con.dirichlet_lagrangian(half_plane) if kind == "dirichlet"
               else con.svk_incompatible_lagrangian(half_plane, lam=0.5, mu=1.0))
        cd = con.from_lagrangian(lag, grid)
        x, y, A = sample_jet(rng, 2, 2)
        P = cd.psi_A(x, y, A)
        assert np.allclose(P, np.einsum("...iakb->...kbia", P), atol=1e-12)

    def test_svk_closed_forms_match_differences(self, rng, sphere):
        lag = con.svk_incompatible_lagrangian(sphere, lambda x: np.eye(2) * (1 + 0.1 * x[..., :1, None]),
                                              lam=0.7, mu=1.3)
        x, y, A = sample_jet(rng, 2, 2)
        fd = con._jacobian(lag.dL_dA, (x, y, A), 2, 1e-5, 2)
        assert np.allclose(lag.d2L_dA2(x, y, A), fd, atol=1e-7)
        fdy = con._jacobian(lag.dL_dA, (x, y, A), 1, 1e-5, 1)
        assert np.allclose(lag.d2L_dAdy(x, y, A), fdy, atol=1e-7)
        fdL = con._jacobian(lag.L, (x, y, A), 2, 1e-5, 2)
        assert np.allclose(lag.dL_dA(x, y, A), fdL, atol=1e-7)


class TestEvalStress:
    def test_identity_dirichlet(self):
        grid = kin.BodyGrid(2, 9)
        cd = con.from_lagrangian(con.dirichlet_lagrangian(geo.euclidean(2)), grid)
        S, _ = con.eval_stress(cd, kin.jet_of(grid.x, grid))
        assert np.allclose(S, np.eye(2), atol=1e-13)

    def test_pure(self, grid1):
        cd = con.from_lagrangian(con.dirichlet_lagrangian(geo.sphere()), grid1)
        phi = stack(1 + 0.2 * grid1.x[..., 0], grid1.x[..., 0])
        a = con.eval_stress(cd, kin.jet_of(phi, grid1))
        b = con.eval_stress(cd, kin.jet_of(phi.copy(), grid1))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_domain_violation_names_point(self, grid1):
        cd = con.ConstitutiveDensity(lambda x, y, A: A, lambda x, y, A: 0 * y,
                                     domain=lambda x, y, A: y[..., 0] < 0.5, name="bounded")
        with pytest.raises(DomainError, match="grid point"):
            con.eval_stress(cd, kin.jet_of(grid1.x, grid1))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_reported(self, grid1):
        cd = con.ConstitutiveDensity(lambda x, y, A: np.log(y[..., None] - 0.5), lambda x, y, A: 0 * y)
        with pytest.raises(DomainError):
            con.eval_stress(cd, kin.jet_of(grid1.x, grid1))


class TestDivergence:
    def test_constant_stress(self, grid1):
        cd = scalar_density(lambda x: 2.0 + 0 * x, lambda x: 0 * x)
        assert np.allclose(con.stress_divergence(cd, kin.jet_of(grid1.x, grid1)), 0, atol=1e-13)

    def test_linear_stress(self, grid1):
        cd = scalar_density(lambda x: x, lambda x: 0 * x)
        assert np.allclose(con.stress_divergence(cd, kin.jet_of(grid1.x, grid1)), 1, atol=1e-12)

    def test_force_sign(self, grid1):
        cd = scalar_density(lambda x: 0 * x, lambda x: 3 + 0 * x)
        assert np.allclose(con.stress_divergence(cd, kin.jet_of(grid1.x, grid1)), -3, atol=1e-15)

    def test_composed_and_chain_agree(self, half_plane):
        errs = []
        for n in (17, 33, 65):
            grid = kin.BodyGrid(1, n)
            cd = con.from_lagrangian(con.dirichlet_lagrangian(half_plane), grid)
            x = grid.x[..., 0]
            jt = kin.jet_of(stack(x, 1 + 0.3 * np.sin(np.pi * x)), grid)
            errs.append(con.divergence_cross_check(cd, jt))
        assert errs[-1] < 1e-2
        assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3

    def test_not_twice_differentiable(self, rng):
        cd = con.ConstitutiveDensity(lambda x, y, A: A, lambda x, y, A: 0 * y, order=1)
        with pytest.raises(NotTwiceDifferentiableError):
            cd.second_partials(*sample_jet(rng, 1, 1))


class TestTraction:
    def test_zero_density(self, grid1):
        cd = con.from_lagrangian(con.zero_lagrangian(), grid1)
        assert np.all(con.traction(cd, kin.jet_of(grid1.x, grid1)) == 0)

    def test_flat_ends(self):
        errs = []
        for n in (33, 65):
            grid = kin.BodyGrid(1, n)
            cd = con.from_lagrangian(con.dirichlet_lagrangian(geo.euclidean(1)), grid)
            x = grid.x
            phi = x - np.sin(2 * np.pi * x) / (2 * np.pi)
            errs.append(np.max(np.abs(con.traction(cd, kin.jet_of(phi, grid)))))
        assert errs[1] < 1e-2 and errs[0] / errs[1] > 3.5

    def test_supported_only_on_boundary(self, grid1):
        cd = con.from_lagrangian(con.dirichlet_lagrangian(geo.euclidean(1)), grid1)
        t = con.traction(cd, kin.jet_of(grid1.x, grid1))
        assert np.all(t[1:-1] == 0) and t[0, 0] == pytest.approx(-1) and t[-1, 0] == pytest.approx(1)


class TestRepresentation:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2 ** 16))
    def test_second_order_on_random_fields(self, seed):
        from covdyn.oracle import smooth_field
        defects = []
        for n in (33, 65):
            grid = kin.BodyGrid(1, n)
            cd = con.from_lagrangian(con.dirichlet_lagrangian(geo.sphere()), grid)
            x = grid.x[..., 0]
            jt = kin.jet_of(stack(1.2 + 0.3 * np.sin(np.pi * x), 0.5 + x), grid)
            w = smooth_field(np.random.default_rng(seed), grid, [0.0, 1.0], 2)[0]
            defects.append(con.representation_defect(cd, jt, w))
        assert defects[1] <= 50 * grid.h ** 2
