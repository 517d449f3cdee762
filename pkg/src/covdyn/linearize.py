"""Covariant linearization of the equations of motion.

For a virtual displacement w along kappa the linearized residual is the
affine map ``r + nabla_w r`` with ``(nabla_w r)_j = delta r_j[w] - w^i Gamma^k_ij r_k``.
Written out on the grid:

    L(w)_j = rho G_ij (A^i + D^2 w^i/dt^2 + R(w, V)V^i)
             - [A1_ij w^i + A2_ij^d dw^i/dx^d + A3_lj^ab d^2 w^l/dx^a dx^b
                + dpsi_k w^i Gamma^k_ij - dpsi_j]

where ``dpsi = -divS`` and A1, A2, A3 are the coordinate partials of divS
with respect to the 2-jet of the configuration.  The boundary rows
linearize ``T_j - psi^a_j n_a`` in the same covariant way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from . import geometry
from .constitutive import ConstitutiveDensity, LoadingDensity, fold_body_load, stress_divergence
from .dynamics import surface_term
from .errors import DegenerateLinearizationError
from .kinematics import (BodyGrid, Motion, acceleration, jet_of, second_covariant_time_derivative,
                         spatial_gradient, spatial_hessian, velocity)

COUPLINGS = ("affine", "product", "divS-sign")
CURVATURE_SLOTS = ("w", "dt_w")
BOUNDARY_FORMS = ("covariant", "flat")


@dataclass(frozen=True, eq=False)
class LinearizedCoefficients:
    """Coefficient fields of the linearized force at a configuration.

    ``A1[..., i, j]``, ``A2[..., i, j, delta]``, ``A3[..., l, j, alpha, beta]``;
    ``div_psi[..., j]`` is minus the stress divergence (body load folded in).
    Boundary ingredients: ``psi[..., j, alpha]``, ``psi_y[..., j, alpha, k]``,
    ``psi_A[..., j, alpha, k, beta]``, the surface load ``T`` and its
    derivative ``T_y[..., j, k]`` (zero off the boundary), and
    ``Gamma[..., k, i, j]``.
    """

    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    div_psi: np.ndarray
    Gamma: np.ndarray
    psi: np.ndarray
    psi_y: np.ndarray
    psi_A: np.ndarray
    T: np.ndarray
    T_y: np.ndarray
    grid: BodyGrid

    def boundary_gamma_coupling(self):
        """The array psi^a_i Gamma^i_lj n_a, indexed ``[..., j, l]``."""
        return np.einsum("...ia,...ilj,...a->...jl", self.psi, self.Gamma, self.grid.conormal)


def coefficient_fields(phi, cd: ConstitutiveDensity, chart, grid: BodyGrid,
                       load: Optional[LoadingDensity] = None) -> LinearizedCoefficients:
    """Evaluate A1, A2, A3 and the boundary ingredients on a configuration.

    ``phi`` may carry leading axes (e.g. time) before the body axes.
    """
    phi = np.asarray(phi, float)
    lead = phi.ndim - grid.d - 1
    cdl = fold_body_load(cd, load, grid)
    jt = jet_of(phi, grid, lead)
    x, y, A, H = jt.x, jt.y, jt.A, jt.H
    sp = cdl.second_partials(x, y, A)
    psi_y = cdl.psi_y(x, y, A)
    psi_A = cdl.psi_A(x, y, A)
    A1 = (np.einsum("...jaia->...ij", sp["yx"])
          + np.einsum("...jail,...la->...ij", sp["yy"], A)
          + np.einsum("...jailb,...lab->...ij", sp["yA"], H)
          - np.swapaxes(cdl.R_y(x, y, A), -1, -2))
    A2 = (np.einsum("...jaida->...ijd", sp["Ax"])
          + np.einsum("...jaidl,...la->...ijd", sp["Ay"], A)
          + np.einsum("...jdi->...ijd", psi_y)
          + np.einsum("...jaidlb,...lab->...ijd", sp["AA"], H)
          - np.einsum("...jid->...ijd", cdl.R_A(x, y, A)))
    A3 = np.einsum("...jalb->...ljab", psi_A)
    div_psi = -stress_divergence(cdl, jt)
    mask = grid.boundary[..., None]
    if load is not None and load.surface is not None:
        T = surface_term(jt, load)
        T_y = load.T_y(x, y) * mask[..., None]
    else:
        T = np.zeros(y.shape)
        T_y = np.zeros(y.shape + y.shape[-1:])
    # boundary rows use the unfolded density: the body load acts in the bulk only
    return LinearizedCoefficients(A1, A2, A3, div_psi, geometry.christoffel(chart, y),
                                  cd.psi(x, y, A), cd.psi_y(x, y, A), cd.psi_A(x, y, A),
                                  T, T_y, grid)


def inertial_linearization(motion: Motion, w, chart=None, slot: str = "w") -> np.ndarray:
    """D^2 w/dt^2 + R(w, V)V along every material world line.

    ``slot="dt_w"`` puts dw/dt in the curvature slot instead of w.
    """
    chart = motion.chart if chart is None else chart
    w = np.asarray(w, float)
    V = velocity(motion)
    R = geometry.curvature(chart, motion.values)
    if slot == "w":
        curv = geometry.curvature_action(R, w, V, V)
    elif slot == "dt_w":
        dw = geometry.central_difference(w, motion.dt)
        curv = geometry.curvature_action(R, V, dw, V)
    else:
        raise ValueError(f"unknown curvature slot {slot!r}")
    return second_covariant_time_derivative(motion, w) + curv


def force_linearized(co: LinearizedCoefficients, w, lead: int, coupling: str = "affine"):
    """The bracketed force term of the linearized residual (constant part included)."""
    grid = co.grid
    Dw = spatial_gradient(w, grid, lead)
    DDw = spatial_hessian(w, grid, lead)
    lin = (np.einsum("...ij,...i->...j", co.A1, w)
           + np.einsum("...ijd,...id->...j", co.A2, Dw)
           + np.einsum("...ljab,...lab->...j", co.A3, DDw))
    wGam = np.einsum("...i,...kij->...kj", w, co.Gamma)
    dp = co.div_psi
    if coupling == "affine":
        return lin + np.einsum("...k,...kj->...j", dp, wGam) - dp
    if coupling == "product":
        return lin + np.einsum("...k,...kj->...j", dp, wGam) - dp.sum(-1, keepdims=True) * dp
    if coupling == "divS-sign":
        return lin - np.einsum("...k,...kj->...j", dp, wGam) + dp
    raise ValueError(f"unknown coupling reading {coupling!r}")


def apply_linearized(motion: Motion, w, cd: ConstitutiveDensity, chart=None,
                     grid: Optional[BodyGrid] = None, t: Optional[int] = None,
                     load: Optional[LoadingDensity] = None, coupling: str = "affine",
                     curvature_slot: str = "w",
                     coefficients: Optional[LinearizedCoefficients] = None) -> np.ndarray:
    """Affine linearized interior residual at every (t, x), or at time index ``t``.

    The value at time index t depends on kappa and w in the slices t-2..t+2
    only; entries with 2 <= t <= T-2 use centered time stencils throughout.
    """
    chart = motion.chart if chart is None else chart
    grid = motion.grid if grid is None else grid
    w = np.asarray(w, float)
    if w.shape != motion.values.shape:
        raise ValueError("displacement field must match the motion grid")
    co = coefficients or coefficient_fields(motion.values, cd, chart, grid, load)
    G = chart.G(motion.values)
    inertial = acceleration(motion) + inertial_linearization(motion, w, chart, curvature_slot)
    lhs = grid.rho[..., None] * np.einsum("...ij,...i->...j", G, inertial)
    out = lhs - force_linearized(co, w, 1, coupling)
    return out if t is None else out[t]


def boundary_linearized_static(co: LinearizedCoefficients, w, lead: int,
                               form: str = "covariant") -> np.ndarray:
    grid = co.grid
    Dw = spatial_gradient(w, grid, lead)
    flux = (co.psi
            + np.einsum("...jak,...k->...ja", co.psi_y, w)
            + np.einsum("...jakb,...kb->...ja", co.psi_A, Dw))
    load = co.T + np.einsum("...jk,...k->...j", co.T_y, w)
    if form == "covariant":
        wGam = np.einsum("...l,...ilj->...ij", w, co.Gamma)
        flux = flux - np.einsum("...ia,...ij->...ja", co.psi, wGam)
        load = load - np.einsum("...i,...ij->...j", co.T, wGam)
    elif form != "flat":
        raise ValueError(f"unknown boundary form {form!r}")
    out = load - np.einsum("...ja,...a->...j", flux, grid.conormal)
    return out * grid.boundary[..., None]


def boundary_linearized(motion: Motion, w, cd: ConstitutiveDensity, chart=None,
                        grid: Optional[BodyGrid] = None, t: Optional[int] = None,
                        load: Optional[LoadingDensity] = None, form: str = "covariant",
                        coefficients: Optional[LinearizedCoefficients] = None) -> np.ndarray:
    """Affine linearization of T_j - psi^a_j n_a on I x dB (zero off the boundary)."""
    chart = motion.chart if chart is None else chart
    grid = motion.grid if grid is None else grid
    co = coefficients or coefficient_fields(motion.values, cd, chart, grid, load)
    out = boundary_linearized_static(co, np.asarray(w, float), 1, form)
    return out if t is None else out[t]


def linear_part(affine, w):
    """affine(w) - affine(0)."""
    return affine(w) - affine(np.zeros_like(w))


# --------------------------------------------------------------------------
# Newton iteration for equilibria


@dataclass
class NewtonStep:
    w: np.ndarray
    residual_norm: float
    solve_residual: float


class StaticSystem:
    """The linearized equilibrium system at a stationary configuration.

    Unknowns are w at every grid point.  Interior points carry the
    linearized bulk equation, boundary points the linearized traction
    condition, and clamped points the row w = 0.
    """

    def __init__(self, phi, cd, load, chart, grid: BodyGrid, clamp=None,
                 coupling: str = "affine", boundary_form: str = "covariant"):
        self.phi = np.asarray(phi, float)
        self.grid = grid
        self.chart = chart
        self.m = chart.dim
        self.clamp = np.zeros(grid.shape, bool) if clamp is None else np.asarray(clamp, bool)
        self.co = coefficient_fields(self.phi, cd, chart, grid, load)
        self.coupling = coupling
        self.boundary_form = boundary_form

    def rows(self, w):
        """Affine static residual rows at w (shape of phi)."""
        interior = -force_linearized(self.co, w, 0, self.coupling)
        bnd = boundary_linearized_static(self.co, w, 0, self.boundary_form)
        out = np.where(self.grid.boundary[..., None], bnd, interior)
        return np.where(self.clamp[..., None], w, out)

    def constant(self):
        return self.rows(np.zeros_like(self.phi))

    def matrix(self):
        """Assemble the linear part by probing with colored unit fields."""
        shape = self.phi.shape
        n = self.phi.size
        c0 = self.constant()
        period = 7
        idx = np.indices(self.grid.shape)
        color = sum(np.mod(idx[a], period) * period ** a for a in range(self.grid.d))
        flat_color = np.repeat(color.reshape(-1), self.m)
        comp = np.tile(np.arange(self.m), color.size)
        # each unknown couples to rows within reach < period / 2 along every axis
        pts = np.indices(self.grid.shape).reshape(self.grid.d, -1).T
        rows_i, cols_i, vals = [], [], []
        for c in range(period ** self.grid.d):
            for k in range(self.m):
                sel = (flat_color == c) & (comp == k)
                if not np.any(sel):
                    continue
                probe = np.zeros(n)
                probe[sel] = 1.0
                col = (self.rows(probe.reshape(shape)) - c0).reshape(-1)
                nz = np.nonzero(col)[0]
                # attribute each nonzero row to the nearest probed unknown
                owners = np.nonzero(sel)[0]
                row_pts = pts[nz // self.m]
                own_pts = pts[owners // self.m]
                dist = np.abs(row_pts[:, None, :] - own_pts[None, :, :]).max(-1)
                which = owners[np.argmin(dist, axis=1)]
                rows_i.append(nz)
                cols_i.append(which)
                vals.append(col[nz])
        rows_i = np.concatenate(rows_i) if rows_i else np.zeros(0, int)
        cols_i = np.concatenate(cols_i) if cols_i else np.zeros(0, int)
        vals = np.concatenate(vals) if vals else np.zeros(0)
        return scipy.sparse.csr_matrix((vals, (rows_i, cols_i)), shape=(n, n))

    def residual_norm(self):
        r = self.constant()
        return float(np.max(np.abs(r))) if r.size else 0.0


def _solve(M, rhs, dense_limit=2500):
    n = M.shape[0]
    if n <= dense_limit:
        D = M.toarray()
        s = scipy.linalg.svdvals(D)
        tol = max(s[0], 1.0) * n * 1e-13
        nullity = int(np.sum(s <= tol))
        if nullity:
            raise DegenerateLinearizationError(nullity, float(s[-1]))
        return scipy.linalg.solve(D, rhs)
    try:
        lu = scipy.sparse.linalg.splu(M.tocsc())
    except RuntimeError as exc:
        raise DegenerateLinearizationError(None, 0.0) from exc
    return lu.solve(rhs)


def newton_step(phi, cd: ConstitutiveDensity, load: Optional[LoadingDensity], chart,
                grid: BodyGrid, clamp=None, coupling: str = "affine",
                boundary_form: str = "covariant") -> NewtonStep:
    """Solve the linearized equilibrium system for w with L(w) = 0.

    The caller updates the configuration pointwise with the exponential
    map (see ``newton_update``).
    """
    system = StaticSystem(phi, cd, load, chart, grid, clamp, coupling, boundary_form)
    M = system.matrix()
    rhs = -system.constant().reshape(-1)
    w = _solve(M, rhs)
    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    solve_res = float(np.linalg.norm(M @ w - rhs)) / scale
    return NewtonStep(w.reshape(system.phi.shape), system.residual_norm(), solve_res)


def newton_update(chart, phi, w, steps: int = 32):
    """phi <- exp(phi, w) pointwise."""
    return geometry.exp_map(chart, geometry.GeodesicState(phi, w), steps).y


def newton_solve(phi, cd, load, chart, grid, clamp=None, iterations: int = 3, **kw):
    """Run Newton iterations; returns the final configuration and the residual history.

    ``history[k]`` is the max-norm of the static residual before step k, and
    the last entry is the residual after the final update.
    """
    history = []
    steps = []
    for _ in range(iterations):
        st = newton_step(phi, cd, load, chart, grid, clamp, **kw)
        history.append(st.residual_norm)
        steps.append(st)
        phi = newton_update(chart, phi, st.w)
    final = StaticSystem(phi, cd, load, chart, grid, clamp, **kw).residual_norm()
    history.append(final)
    return phi, history, steps
