"""Smooth constitutive densities, loadings and hyperelastic Lagrangians.

A density evaluates, at a jet (x, y, A), the stress components
``psi[..., i, alpha]`` (the coefficient of dw^i/dx^alpha) and the
configurational force ``R[..., j]`` (the coefficient of w^j).  Partial
derivatives use the layouts

=============  =============================  ==========================
name           meaning                        index order
=============  =============================  ==========================
``dpsi_dx``    d psi^alpha_j / d x^beta       ``[..., j, alpha, beta]``
``dpsi_dy``    d psi^alpha_j / d y^k          ``[..., j, alpha, k]``
``dpsi_dA``    d psi^alpha_j / d A^k_beta     ``[..., j, alpha, k, beta]``
``dR_dy``      d R_j / d y^i                  ``[..., j, i]``
``dR_dA``      d R_j / d A^i_delta            ``[..., j, i, delta]``
=============  =============================  ==========================

Any partial that is not supplied in closed form is replaced by second-order
central differences with step ``h_c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NotTwiceDifferentiableError
from .kinematics import BodyGrid, Jet1Field, divergence

Fn = Callable[..., np.ndarray]


def _jacobian(f, args, which, h, ntrail):
    """Central-difference derivative of ``f(*args)`` in ``args[which]``.

    The derivative directions are the trailing ``ntrail`` axes of the
    argument; they are appended to the output axes.
    """
    base = np.asarray(args[which], float)
    comps = base.shape[base.ndim - ntrail:]
    cols = []
    for idx in np.ndindex(*comps):
        e = np.zeros(comps)
        e[idx] = h
        plus = list(args)
        minus = list(args)
        plus[which] = base + e
        minus[which] = base - e
        cols.append((f(*plus) - f(*minus)) / (2 * h))
    out = np.stack(cols, axis=-1)
    return out.reshape(out.shape[:-1] + comps)


@dataclass(frozen=True, eq=False)
class ConstitutiveDensity:
    """psi and R as vectorized callables of (x, y, A) with optional partials.

    ``order`` is the number of derivatives the density supports; the
    linearization needs 2.  ``domain`` optionally returns a boolean mask of
    admissible jets.
    """

    psi: Fn
    R: Fn
    dpsi_dx: Optional[Fn] = None
    dpsi_dy: Optional[Fn] = None
    dpsi_dA: Optional[Fn] = None
    dR_dy: Optional[Fn] = None
    dR_dA: Optional[Fn] = None
    h_c: float = 1e-4
    order: int = 2
    domain: Optional[Fn] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def _first(self, closed, f, args, which, ntrail):
        if closed is not None:
            return closed(*args)
        return _jacobian(f, args, which, self.h_c, ntrail)

    def psi_x(self, x, y, A):
        return self._first(self.dpsi_dx, self.psi, (x, y, A), 0, 1)

    def psi_y(self, x, y, A):
        return self._first(self.dpsi_dy, self.psi, (x, y, A), 1, 1)

    def psi_A(self, x, y, A):
        return self._first(self.dpsi_dA, self.psi, (x, y, A), 2, 2)

    def R_y(self, x, y, A):
        return self._first(self.dR_dy, self.R, (x, y, A), 1, 1)

    def R_A(self, x, y, A):
        return self._first(self.dR_dA, self.R, (x, y, A), 2, 2)

    def second_partials(self, x, y, A):
        """Second partials of psi, differencing the first partials.

        Keys ``yx, yy, yA, Ax, Ay, AA`` hold d^2 psi^alpha_j with the
        first-partial index layout followed by the new direction, e.g.
        ``AA[..., j, alpha, i, delta, l, beta]``.
        """
        if self.order < 2:
            raise NotTwiceDifferentiableError()
        h = self.h_c
        args = (x, y, A)
        return {
            "yx": _jacobian(self.psi_y, args, 0, h, 1),
            "yy": _jacobian(self.psi_y, args, 1, h, 1),
            "yA": _jacobian(self.psi_y, args, 2, h, 2),
            "Ax": _jacobian(self.psi_A, args, 0, h, 1),
            "Ay": _jacobian(self.psi_A, args, 1, h, 1),
            "AA": _jacobian(self.psi_A, args, 2, h, 2),
        }


@dataclass(frozen=True, eq=False)
class HyperelasticLagrangian:
    """Lagrangian L(x, y, A) with optional closed-form partials.

    ``d2L_dA2[..., i, alpha, k, beta]`` and ``d2L_dAdy[..., i, alpha, k]``
    (d^2 L / dA^i_alpha dy^k) feed the density partials directly.
    """

    L: Fn
    dL_dy: Optional[Fn] = None
    dL_dA: Optional[Fn] = None
    d2L_dA2: Optional[Fn] = None
    d2L_dAdy: Optional[Fn] = None
    h_c: float = 1e-4
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def grad_y(self, x, y, A):
        if self.dL_dy is not None:
            return self.dL_dy(x, y, A)
        return _jacobian(self.L, (x, y, A), 1, self.h_c, 1)

    def grad_A(self, x, y, A):
        if self.dL_dA is not None:
            return self.dL_dA(x, y, A)
        return _jacobian(self.L, (x, y, A), 2, self.h_c, 2)


@dataclass(frozen=True, eq=False)
class LoadingDensity:
    """Body load b(x, y) per unit mass and surface load T(x, y) on the boundary."""

    body: Optional[Fn] = None
    surface: Optional[Fn] = None
    h_c: float = 1e-4

    def b(self, x, y):
        if self.body is None:
            return np.zeros(np.shape(y))
        return np.broadcast_to(self.body(x, y), np.shape(y)).astype(float)

    def T(self, x, y):
        if self.surface is None:
            return np.zeros(np.shape(y))
        return np.broadcast_to(self.surface(x, y), np.shape(y)).astype(float)

    def T_y(self, x, y):
        """d T_j / d y^k as ``[..., j, k]``."""
        if self.surface is None:
            return np.zeros(np.shape(y) + (np.shape(y)[-1],))
        return _jacobian(self.T, (x, y), 1, self.h_c, 1)

    @property
    def is_zero(self):
        return self.body is None and self.surface is None


def _rho(grid: BodyGrid):
    return lambda x: grid.rho_at(x)


def from_lagrangian(lag: HyperelasticLagrangian, grid: BodyGrid) -> ConstitutiveDensity:
    """psi^alpha_i = rho dL/dA^i_alpha and R_i = rho dL/dy^i."""
    rho = _rho(grid)

    def psi(x, y, A):
        return rho(x)[..., None, None] * lag.grad_A(x, y, A)

    def R(x, y, A):
        return rho(x)[..., None] * lag.grad_y(x, y, A)

    dpsi_dA = dpsi_dy = dR_dA = None
    if lag.d2L_dA2 is not None:
        def dpsi_dA(x, y, A):
            return rho(x)[..., None, None, None, None] * lag.d2L_dA2(x, y, A)
    if lag.d2L_dAdy is not None:
        def dpsi_dy(x, y, A):
            return rho(x)[..., None, None, None] * lag.d2L_dAdy(x, y, A)

        def dR_dA(x, y, A):
            # d^2L/dy^j dA^i_delta, reordered to [j, i, delta]
            return rho(x)[..., None, None, None] * np.moveaxis(lag.d2L_dAdy(x, y, A), -1, -3)

    return ConstitutiveDensity(psi, R, dpsi_dy=dpsi_dy, dpsi_dA=dpsi_dA, dR_dA=dR_dA,
                               h_c=lag.h_c, name=lag.name, params=dict(lag.params))


def fold_body_load(cd: ConstitutiveDensity, load: Optional[LoadingDensity],
                   grid: BodyGrid) -> ConstitutiveDensity:
    """Absorb the body load into the R-slot: R' = R - rho b."""
    if load is None or load.body is None:
        return cd
    rho = _rho(grid)

    def R(x, y, A):
        return cd.R(x, y, A) - rho(x)[..., None] * load.b(x, y)

    return replace(cd, R=R, dR_dy=None, name=f"{cd.name}+body-load")


# --------------------------------------------------------------------------
# catalog


def zero_lagrangian() -> HyperelasticLagrangian:
    def L(x, y, A):
        return np.zeros(A.shape[:-2])

    return HyperelasticLagrangian(
        L,
        dL_dy=lambda x, y, A: np.zeros(y.shape),
        dL_dA=lambda x, y, A: np.zeros(A.shape),
        d2L_dA2=lambda x, y, A: np.zeros(A.shape + A.shape[-2:]),
        d2L_dAdy=lambda x, y, A: np.zeros(A.shape + y.shape[-1:]),
        name="zero",
    )


def dirichlet_lagrangian(chart) -> HyperelasticLagrangian:
    """Harmonic-map energy L = 1/2 G_ij(y) A^i_alpha A^j_alpha."""

    def L(x, y, A):
        return 0.5 * np.einsum("...ia,...ij,...ja->...", A, chart.G(y), A)

    def dL_dA(x, y, A):
        return np.einsum("...ij,...ja->...ia", chart.G(y), A)

    def dL_dy(x, y, A):
        return 0.5 * np.einsum("...ia,...kij,...ja->...k", A, chart.dG(y), A)

    def d2L_dA2(x, y, A):
        G = chart.G(y)
        d = A.shape[-1]
        return np.einsum("...ik,ab->...iakb", G, np.eye(d))

    def d2L_dAdy(x, y, A):
        return np.einsum("...kij,...ja->...iak", chart.dG(y), A)

    return HyperelasticLagrangian(L, dL_dy, dL_dA, d2L_dA2, d2L_dAdy, name="dirichlet")


def _identity_metric(d):
    return lambda x: np.broadcast_to(np.eye(d), np.shape(x)[:-1] + (d, d))


def svk_incompatible_lagrangian(chart, g: Optional[Fn] = None, lam: float = 0.0,
                                mu: float = 1.0, d: Optional[int] = None) -> HyperelasticLagrangian:
    """Saint Venant-Kirchhoff energy relative to a reference metric g(x).

    With C = A^T G(y) A and E = (C - g)/2 measured by g,
    L = lam/2 (tr_g E)^2 + mu |E|_g^2.  The defaults lam=0, mu=1 give
    L = |C - g|^2 / 4.
    """
    gfun = g

    def parts(x, y, A):
        dd = A.shape[-1]
        gx = (gfun or _identity_metric(dd))(x)
        gi = np.linalg.inv(gx)
        G = chart.G(y)
        GA = G @ A
        E = 0.5 * (np.swapaxes(A, -1, -2) @ GA - gx)
        trE = np.einsum("...ab,...ba->...", gi, E)
        # dL/dC
        Sc = 0.5 * (lam * trE[..., None, None] * gi + 2 * mu * gi @ E @ gi)
        return gi, G, GA, E, trE, Sc

    def L(x, y, A):
        gi, _, _, E, trE, _ = parts(x, y, A)
        giE = gi @ E
        return 0.5 * lam * trE ** 2 + mu * np.einsum("...ab,...ba->...", giE, giE)

    def dL_dA(x, y, A):
        _, _, GA, _, _, Sc = parts(x, y, A)
        return 2 * GA @ Sc

    def dL_dy(x, y, A):
        _, _, _, _, _, Sc = parts(x, y, A)
        return np.einsum("...ab,...ia,...kij,...jb->...k", Sc, A, chart.dG(y), A)

    def d2L_dA2(x, y, A):
        gi, G, GA, _, _, Sc = parts(x, y, A)
        M = GA @ gi
        N = M @ np.swapaxes(GA, -1, -2)
        return (2 * np.einsum("...ik,...da->...iakd", G, Sc)
                + lam * np.einsum("...ia,...kd->...iakd", M, M)
                + mu * (np.einsum("...id,...ka->...iakd", M, M)
                        + np.einsum("...ik,...da->...iakd", N, gi)))

    def d2L_dAdy(x, y, A):
        gi, _, GA, _, _, Sc = parts(x, y, A)
        dG = chart.dG(y)
        dE = 0.5 * np.einsum("...ia,...kij,...jb->...kab", A, dG, A)
        trdE = np.einsum("...ab,...kba->...k", gi, dE)
        gi_ = gi[..., None, :, :]
        dSc = 0.5 * (lam * trdE[..., None, None] * gi_ + 2 * mu * gi_ @ dE @ gi_)
        return (2 * np.einsum("...kij,...jb,...ba->...iak", dG, A, Sc)
                + 2 * np.einsum("...ib,...kba->...iak", GA, dSc))

    return HyperelasticLagrangian(L, dL_dy, dL_dA, d2L_dA2, d2L_dAdy, name="svk-incompatible",
                                  params={"lam": lam, "mu": mu})


def grid_metric_field(values, grid_axes, method="cubic"):
    """Interpolate a reference metric sampled on a body grid.

    ``values`` has shape ``(*shape, d, d)``; the interpolant extrapolates
    smoothly so that difference stencils may step outside [0, 1]^d.
    """
    from scipy.interpolate import RegularGridInterpolator

    values = np.asarray(values, float)
    d = values.shape[-1]
    interp = RegularGridInterpolator(tuple(grid_axes), values.reshape(values.shape[:d] + (d * d,)),
                                     method=method, bounds_error=False, fill_value=None)

    def g(x):
        x = np.asarray(x, float)
        out = interp(x.reshape(-1, d))
        return out.reshape(x.shape[:-1] + (d, d))

    return g


LAGRANGIAN_CATALOG = ("zero", "dirichlet", "svk-incompatible")


def lagrangian_from_name(name: str, chart, **params) -> HyperelasticLagrangian:
    key = name.strip().lower()
    if key == "zero":
        return zero_lagrangian()
    if key == "dirichlet":
        return dirichlet_lagrangian(chart)
    if key in ("svk-incompatible", "svk"):
        return svk_incompatible_lagrangian(chart, **params)
    raise KeyError(f"unknown lagrangian {name!r}")


# --------------------------------------------------------------------------
# evaluation


def _lead(jet: Jet1Field):
    return jet.y.ndim - jet.grid.d - 1


def _check_finite(values, jet, what):
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0][: jet.y.ndim - 1]
        raise DomainError(what, jet.y[tuple(idx)])


def eval_stress(cd: ConstitutiveDensity, jet: Jet1Field):
    """Compose the density with the jet: returns ``(S, R)`` shaped like (A, y)."""
    if cd.domain is not None:
        ok = np.asarray(cd.domain(jet.x, jet.y, jet.A), bool)
        if not np.all(ok):
            raise DomainError(f"{cd.name} density", jet.y[~ok][0])
    S = np.asarray(cd.psi(jet.x, jet.y, jet.A), float)
    R = np.asarray(cd.R(jet.x, jet.y, jet.A), float)
    _check_finite(S, jet, f"{cd.name} stress")
    _check_finite(R, jet, f"{cd.name} configurational force")
    return S, R


def stress_divergence(cd: ConstitutiveDensity, jet: Jet1Field, path: str = "composed"):
    """(divS)_j = d/dx^alpha (psi^alpha_j o j^1 kappa) - R_j.

    ``path="composed"`` differences the composed stress field.
    ``path="chain"`` expands the total derivative with the density partials
    and second differences of the configuration.
    """
    S, R = eval_stress(cd, jet)
    if path == "composed":
        return divergence(S, jet.grid, _lead(jet)) - R
    if path == "chain":
        x, y, A = jet.x, jet.y, jet.A
        total = (np.einsum("...jaa->...j", cd.psi_x(x, y, A))
                 + np.einsum("...jal,...la->...j", cd.psi_y(x, y, A), A)
                 + np.einsum("...jalb,...lab->...j", cd.psi_A(x, y, A), jet.H))
        return total - R
    raise ValueError(f"unknown divergence path {path!r}")


def divergence_cross_check(cd: ConstitutiveDensity, jet: Jet1Field) -> float:
    """Max difference of the two divergence paths over all grid points."""
    a = stress_divergence(cd, jet, "composed")
    b = stress_divergence(cd, jet, "chain")
    return float(np.max(np.abs(a - b)))


def traction(cd: ConstitutiveDensity, jet: Jet1Field) -> np.ndarray:
    """(p S)_i = S^alpha_i n_alpha on the boundary, zero inside.

    ``n`` is the outward unit co-normal of the box; at edges and corners the
    co-normals of all incident faces are summed.
    """
    S, _ = eval_stress(cd, jet)
    return np.einsum("...ia,...a->...i", S, jet.grid.conormal)


def virtual_power(cd: ConstitutiveDensity, jet: Jet1Field, w) -> float:
    """Quadrature of psi(j^1 w) = psi^alpha_i dw^i/dx^alpha + R_i w^i over B."""
    from .kinematics import spatial_gradient

    S, R = eval_stress(cd, jet)
    Dw = spatial_gradient(np.asarray(w, float), jet.grid)
    return float(jet.grid.integrate(np.einsum("...ia,...ia->...", S, Dw)
                                    + np.einsum("...i,...i->...", R, w)))


def representation_defect(cd: ConstitutiveDensity, jet: Jet1Field, w) -> float:
    """|S(w) + int divS . w - int_dB (pS) . w| for one stationary slice."""
    S, _ = eval_stress(cd, jet)
    div = stress_divergence(cd, jet)
    w = np.asarray(w, float)
    bulk = jet.grid.integrate(np.einsum("...i,...i->...", div, w))
    flux = np.einsum("...ia,...i->...a", S, w)
    surface = jet.grid.boundary_integrate(flux)
    return float(abs(virtual_power(cd, jet, w) + bulk - surface))
