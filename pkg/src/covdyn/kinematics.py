"""Discretized bodies, motions and their jets.

Array layout
------------
A body grid has ``shape == (n,) * d``.  A motion stores ``values`` with shape
``(T + 1, *shape, m)``; displacement fields (virtual displacements along a
motion) are plain arrays of the same shape whose last axis holds the
components w^i in the pulled-back coordinate frame.  Jet components are
``A[..., i, alpha] = d kappa^i / d x^alpha`` and second derivatives
``H[..., i, alpha, beta]``.

All first derivatives use second-order central differences inside and
second-order one-sided differences at the ends (``numpy.gradient`` with
``edge_order=2``); second derivatives compose two first derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import geometry
from .errors import ChartExitError, EmbeddingError
from .geometry import SpaceChart

EMBEDDING_TOL = 1e-8


def d1(f, h, axis):
    return geometry.central_difference(f, h, axis)


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class BodyGrid:
    """Uniform grid on the unit box [0, 1]^d with mass density rho.

    ``density`` is a constant or a vectorized callable ``x -> rho(x)`` taking
    ``x`` with shape ``(..., d)``.
    """

    d: int
    n: int
    density: Union[float, Callable] = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"unsupported body dimension d={self.d} (d must be 1 or 2)")
        if self.n < 5:
            raise ValueError(f"grid needs at least 5 points per axis, got {self.n}")
        axes = [np.linspace(0.0, 1.0, self.n)] * self.d
        x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        object.__setattr__(self, "x", x)
        rho = self.rho_at(x)
        if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
            raise ValueError("mass density must be positive on the grid")
        object.__setattr__(self, "rho", rho)

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def h(self):
        return 1.0 / (self.n - 1)

    def rho_at(self, x):
        x = np.asarray(x, float)
        if callable(self.density):
            return np.broadcast_to(np.asarray(self.density(x), float), x.shape[:-1]).copy()
        return np.full(x.shape[:-1], float(self.density))

    @property
    def boundary(self):
        mask = np.zeros(self.shape, bool)
        for a in range(self.d):
            idx = [slice(None)] * self.d
            idx[a] = 0
            mask[tuple(idx)] = True
            idx[a] = -1
            mask[tuple(idx)] = True
        return mask

    @property
    def conormal(self):
        """Sum of outward unit co-normals of the faces containing each point."""
        n = np.zeros(self.shape + (self.d,))
        for a in range(self.d):
            idx = [slice(None)] * self.d
            idx[a] = 0
            n[tuple(idx) + (a,)] -= 1.0
            idx[a] = -1
            n[tuple(idx) + (a,)] += 1.0
        return n

    def weights(self):
        w1 = trapezoid_weights(self.n, self.h)
        if self.d == 1:
            return w1
        return np.multiply.outer(w1, w1)

    def integrate(self, f, lead=0):
        """Trapezoid rule over B for ``f`` with shape ``(*lead, *shape)``."""
        w = self.weights()
        axes = tuple(range(lead, lead + self.d))
        return np.tensordot(f, w, axes=(axes, tuple(range(self.d))))

    def boundary_integrate(self, flux, lead=0):
        """Sum over faces of the trapezoid integral of ``flux[..., alpha] * n_alpha``.

        ``flux`` has shape ``(*lead, *shape, d)``; in one dimension the faces
        are the two end points with unit weight.
        """
        total = 0.0
        for a in range(self.d):
            for side, sign in ((0, -1.0), (-1, 1.0)):
                idx = [slice(None)] * lead + [slice(None)] * self.d
                idx[lead + a] = side
                face = flux[tuple(idx) + (a,)] * sign
                if self.d == 1:
                    total = total + face
                else:
                    w = trapezoid_weights(self.n, self.h)
                    total = total + np.tensordot(face, w, axes=([lead], [0]))
        return total


def spatial_gradient(f, grid: BodyGrid, lead=0):
    """Stack d/dx^alpha of ``f`` (body axes start at ``lead``) as a new last axis."""
    return np.stack([d1(f, grid.h, lead + a) for a in range(grid.d)], axis=-1)


def spatial_hessian(f, grid: BodyGrid, lead=0):
    """``H[..., alpha, beta]``: composed first differences in alpha then beta."""
    g = spatial_gradient(f, grid, lead)
    return np.stack([spatial_gradient(g[..., a], grid, lead) for a in range(grid.d)], axis=-2)


def divergence(P, grid: BodyGrid, lead=0):
    """sum_alpha d/dx^alpha P[..., alpha] for a field with trailing body index."""
    return sum(d1(P[..., a], grid.h, lead + a) for a in range(grid.d))


def embedding_margin(A):
    """Smallest singular value of the spatial Jacobian at every point."""
    return np.linalg.svd(A, compute_uv=False)[..., -1]


@dataclass(frozen=True, eq=False)
class Jet1Field:
    """Pointwise 1-jets (x, y, A) of a configuration, plus composed second derivatives."""

    x: np.ndarray
    y: np.ndarray
    A: np.ndarray
    H: np.ndarray
    grid: BodyGrid


def jet_of(values, grid: BodyGrid, lead=0) -> Jet1Field:
    values = np.asarray(values, float)
    x = np.broadcast_to(grid.x, values.shape[:lead] + grid.x.shape)
    A = spatial_gradient(values, grid, lead)
    H = spatial_hessian(values, grid, lead)
    return Jet1Field(x, values, A, H, grid)


@dataclass(frozen=True, eq=False)
class Motion:
    """Configuration kappa on a time x body grid, in chart coordinates of S.

    ``velocity`` optionally carries the integrator's own velocity state
    (``simulate`` fills it); kinematic quantities are always differenced from
    ``values``.
    """

    chart: SpaceChart
    grid: BodyGrid
    values: np.ndarray
    dt: float
    t0: float = 0.0
    velocity: Optional[np.ndarray] = None
    check: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, float)
        object.__setattr__(self, "values", v)
        expected = self.grid.shape + (self.chart.dim,)
        if v.ndim != self.grid.d + 2 or v.shape[1:] != expected:
            raise ValueError(f"motion values must have shape (T+1, {expected}), got {v.shape}")
        if v.shape[0] < 3:
            raise ValueError("a motion needs at least 3 time slices")
        if self.check:
            inside = self.chart.contains(v)
            if not np.all(inside):
                n = int(np.argwhere(~inside)[0][0])
                raise ChartExitError(self.t0 + n * self.dt, v[~inside][0])
            margin = embedding_margin(spatial_gradient(v, self.grid, 1))
            if np.any(margin < EMBEDDING_TOL):
                idx = np.argwhere(margin < EMBEDDING_TOL)[0]
                raise EmbeddingError(
                    f"configuration is not an embedding at time index {idx[0]}, "
                    f"grid index {tuple(idx[1:])}")

    @property
    def steps(self):
        return self.values.shape[0] - 1

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.values.shape[0])

    def with_values(self, values, check=True):
        return Motion(self.chart, self.grid, values, self.dt, self.t0, None, check)

    @classmethod
    def stationary(cls, chart, grid, phi, dt=1.0, steps=4):
        """Constant-in-time motion replicating one configuration."""
        phi = np.asarray(phi, float)
        return cls(chart, grid, np.broadcast_to(phi, (steps + 1,) + phi.shape).copy(), dt)

    @classmethod
    def from_function(cls, chart, grid, fn, dt, steps, t0=0.0):
        """Sample ``fn(t, x)`` (vectorized, returns ``(..., m)``) on the grid."""
        t = t0 + dt * np.arange(steps + 1)
        tt = t.reshape((-1,) + (1,) * (grid.d + 1))
        vals = fn(tt[..., 0], grid.x[None])
        vals = np.broadcast_to(vals, (steps + 1,) + grid.shape + (chart.dim,)).copy()
        return cls(chart, grid, vals, dt, t0)


def jet(motion: Motion, t: int) -> Jet1Field:
    if not -motion.values.shape[0] <= t < motion.values.shape[0]:
        raise IndexError(f"time index {t} out of range")
    return jet_of(motion.values[t], motion.grid)


def velocity(motion: Motion) -> np.ndarray:
    return d1(motion.values, motion.dt, 0)


def acceleration(motion: Motion) -> np.ndarray:
    """A^i = d^2 kappa^i/dt^2 + Gamma^i_{lk} dkappa^l/dt dkappa^k/dt."""
    V = velocity(motion)
    Gam = geometry.christoffel(motion.chart, motion.values)
    return d1(V, motion.dt, 0) + np.einsum("...ijk,...j,...k->...i", Gam, V, V)


def covariant_time_derivative(motion: Motion, w) -> np.ndarray:
    """Dw/dt along every material world line."""
    return geometry.covariant_derivative_along_path(motion.chart, motion.values, w, motion.dt)


def second_covariant_time_derivative(motion: Motion, w) -> np.ndarray:
    w = np.asarray(w, float)
    if motion.values.shape[0] < 6:
        raise ValueError("second covariant time derivative needs T >= 5")
    return covariant_time_derivative(motion, covariant_time_derivative(motion, w))


def pair(motion: Motion, u, w) -> float:
    """Trapezoid quadrature of the integral of G(u, w) rho dx dt over I x B."""
    u = np.asarray(u, float)
    w = np.asarray(w, float)
    if u.shape != motion.values.shape or w.shape != motion.values.shape:
        raise ValueError("fields must match the motion grid")
    G = motion.chart.G(motion.values)
    # symmetrized so that pair(u, w) == pair(w, u) holds bit for bit
    uGw = np.einsum("...i,...ij,...j->...", u, G, w)
    wGu = np.einsum("...i,...ij,...j->...", w, G, u)
    integrand = 0.5 * (uGw + wGu) * motion.grid.rho
    wt = trapezoid_weights(motion.values.shape[0], motion.dt)
    return float(np.tensordot(wt, motion.grid.integrate(integrand, lead=1), axes=1))


def momentum(motion: Motion, w) -> float:
    """P(w) = pair(V, w); the inertial force is represented by the acceleration."""
    return pair(motion, velocity(motion), w)
