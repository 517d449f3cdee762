"""Equations of motion: interior and boundary residuals, time integration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import geometry
from .constitutive import (ConstitutiveDensity, LoadingDensity, fold_body_load,
                           stress_divergence, traction)
from .errors import ChartExitError, UnstableStepError
from .kinematics import BodyGrid, Jet1Field, Motion, acceleration, jet_of

DEFAULT_BOUND = 1e6


@dataclass(frozen=True, eq=False)
class ResidualField:
    """Co-vector residuals: ``interior[..., j]`` on the grid, ``boundary`` zero off the boundary."""

    interior: np.ndarray
    boundary: np.ndarray

    def norm(self, valid=slice(None)):
        return max(float(np.max(np.abs(self.interior[valid]), initial=0.0)),
                   float(np.max(np.abs(self.boundary[valid]), initial=0.0)))


def _grid(motion, grid):
    return motion.grid if grid is None else grid


def interior_residual(motion: Motion, cd: ConstitutiveDensity,
                      load: Optional[LoadingDensity] = None,
                      grid: Optional[BodyGrid] = None) -> np.ndarray:
    """r_j = rho G_ij A^i - rho b_j - (divS)_j on every (t, x) grid point.

    Time stencils are one-sided at the first and last slices, so entries at
    interior times carry the full second-order accuracy.
    """
    grid = _grid(motion, grid)
    cdl = fold_body_load(cd, load, grid)
    G = motion.chart.G(motion.values)
    inertia = grid.rho[..., None] * np.einsum("...ij,...i->...j", G, acceleration(motion))
    return inertia - stress_divergence(cdl, jet_of(motion.values, grid, lead=1))


def surface_term(jet: Jet1Field, load: Optional[LoadingDensity]) -> np.ndarray:
    """Surface load on the boundary points, zero elsewhere."""
    if load is None or load.surface is None:
        return np.zeros(jet.y.shape)
    return load.T(jet.x, jet.y) * jet.grid.boundary[..., None]


def boundary_residual(motion: Motion, cd: ConstitutiveDensity,
                      load: Optional[LoadingDensity] = None,
                      grid: Optional[BodyGrid] = None) -> np.ndarray:
    """T_j - S^alpha_j n_alpha on I x dB, zero at interior points."""
    grid = _grid(motion, grid)
    j = jet_of(motion.values, grid, lead=1)
    return surface_term(j, load) - traction(cd, j)


def residual(motion, cd, load=None, grid=None) -> ResidualField:
    return ResidualField(interior_residual(motion, cd, load, grid),
                         boundary_residual(motion, cd, load, grid))


def equilibrium_residual(phi, cd: ConstitutiveDensity, load: Optional[LoadingDensity],
                         grid: BodyGrid, chart=None) -> ResidualField:
    """Static residual of one configuration: -rho b - divS inside, T - pS on dB."""
    phi = np.asarray(phi, float)
    if phi.ndim != grid.d + 1:
        raise ValueError("equilibrium residual expects a single time slice")
    if chart is not None:
        chart.require_inside(phi)
    j = jet_of(phi, grid)
    interior = -stress_divergence(fold_body_load(cd, load, grid), j)
    return ResidualField(interior, surface_term(j, load) - traction(cd, j))


# --------------------------------------------------------------------------
# time integration


def sbp_derivative(f, h, axis):
    """Summation-by-parts first difference: central inside, first-order one-sided ends."""
    return np.gradient(f, h, axis=axis, edge_order=1)


def weak_force(y, cd: ConstitutiveDensity, load: Optional[LoadingDensity],
               grid: BodyGrid) -> np.ndarray:
    """Nodal force co-vector of the weak form, divided by the nodal mass weight.

    Inside this is the divergence of the stress minus R; on the boundary the
    mismatch between surface load and traction is added with the inverse
    boundary quadrature weight, which imposes the traction condition weakly.
    """
    cdl = fold_body_load(cd, load, grid)
    h = grid.h
    A = np.stack([sbp_derivative(y, h, a) for a in range(grid.d)], axis=-1)
    x = grid.x
    S = cdl.psi(x, y, A)
    R = cdl.R(x, y, A)
    F = sum(sbp_derivative(S[..., a], h, a) for a in range(grid.d)) - R
    T = load.T(x, y) if load is not None and load.surface is not None else None
    for a in range(grid.d):
        for side, sign in ((0, -1.0), (-1, 1.0)):
            idx = [slice(None)] * grid.d
            idx[a] = side
            idx = tuple(idx)
            face = -sign * S[idx + (slice(None), a)]
            if T is not None:
                face = face + T[idx]
            F[idx] += face / (0.5 * h)
    return F


def _accel(y, v, cd, load, grid, chart, clamp):
    Gam = geometry.christoffel(chart, y)
    F = weak_force(y, cd, load, grid)
    Ginv = np.linalg.inv(chart.G(y))
    a = (np.einsum("...ij,...j->...i", Ginv, F) / grid.rho[..., None]
         - np.einsum("...ijk,...j,...k->...i", Gam, v, v))
    if clamp is not None:
        a[clamp] = 0.0
    return a


def simulate(phi0, V0, cd: ConstitutiveDensity, load: Optional[LoadingDensity],
             grid: BodyGrid, chart, dt: float, steps: int, scheme: str = "leapfrog",
             clamp=None, bound: float = DEFAULT_BOUND, check_embedding: bool = True) -> Motion:
    """Integrate the semi-discrete equations of motion from (phi0, V0).

    ``scheme`` is ``"leapfrog"`` (kick-drift-kick with a velocity predictor
    for the velocity-dependent Christoffel term) or ``"rk4"``.  ``clamp`` is
    an optional boolean mask of grid points held at ``phi0``.  Stability is
    the caller's responsibility: the step must respect the wave-speed CFL
    limit of the material.
    """
    y = np.array(phi0, float)
    v = np.array(np.broadcast_to(V0, y.shape), float)
    if y.shape != grid.shape + (chart.dim,):
        raise ValueError(f"initial configuration must have shape {grid.shape + (chart.dim,)}")
    if clamp is not None:
        clamp = np.asarray(clamp, bool)
        v[clamp] = 0.0
    chart.require_inside(y)

    def acc(yy, vv):
        return _accel(yy, vv, cd, load, grid, chart, clamp)

    ys = [y.copy()]
    vs = [v.copy()]
    a = acc(y, v)
    for n in range(1, steps + 1):
        if scheme == "leapfrog":
            vh = v + 0.5 * dt * a
            y = y + dt * vh
            _guard(y, vh, chart, n, dt, bound)
            a_pred = acc(y, vh)
            v_pred = vh + 0.5 * dt * a_pred
            a = acc(y, v_pred)
            v = vh + 0.5 * dt * a
        elif scheme == "rk4":
            k1y, k1v = v, a
            y2, v2 = y + 0.5 * dt * k1y, v + 0.5 * dt * k1v
            k2y, k2v = v2, acc(y2, v2)
            y3, v3 = y + 0.5 * dt * k2y, v + 0.5 * dt * k2v
            k3y, k3v = v3, acc(y3, v3)
            y4, v4 = y + dt * k3y, v + dt * k3v
            k4y, k4v = v4, acc(y4, v4)
            y = y + dt / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
            v = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
            _guard(y, v, chart, n, dt, bound)
            a = acc(y, v)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        _guard(y, v, chart, n, dt, bound)
        ys.append(y.copy())
        vs.append(v.copy())
    return Motion(chart, grid, np.stack(ys), dt, 0.0, np.stack(vs), check_embedding)


def _guard(y, v, chart, n, dt, bound):
    size = max(float(np.max(np.abs(y))), float(np.max(np.abs(v))))
    if not np.isfinite(size) or size > bound:
        raise UnstableStepError(n, size)
    inside = chart.contains(y)
    if not np.all(inside):
        raise ChartExitError(n * dt, y[~inside][0])


def discrete_energy(motion: Motion, lag, grid: Optional[BodyGrid] = None) -> np.ndarray:
    """Kinetic plus stored energy per time slice, using the simulator's velocity when present."""
    grid = _grid(motion, grid)
    V = motion.velocity if motion.velocity is not None else geometry.central_difference(
        motion.values, motion.dt)
    G = motion.chart.G(motion.values)
    kin = 0.5 * np.einsum("...i,...ij,...j->...", V, G, V) * grid.rho
    A = np.stack([sbp_derivative(motion.values, grid.h, 1 + a) for a in range(grid.d)], axis=-1)
    pot = lag.L(np.broadcast_to(grid.x, motion.values.shape[:-1] + (grid.d,)),
                motion.values, A) * grid.rho
    return grid.integrate(kin + pot, lead=1)
