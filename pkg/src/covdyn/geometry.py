"""Riemannian geometry of the space manifold in a single coordinate chart.

All kernels are vectorized: points ``y`` may carry arbitrary leading axes,
``y.shape == (..., m)``.  Index conventions:

* ``christoffel(...)[..., i, j, k]`` is Gamma^i_{jk};
* ``curvature(...)[..., i, j, k, l]`` is R^i_{jkl} with
  R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z and
  (R(d_k, d_l) d_j)^i = R^i_{jkl}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ChartExitError, DegenerateMetricError, StencilRoomError

MetricFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SpaceChart:
    """The space manifold S covered by one chart.

    ``metric(y)`` returns G_ij(y) with shape ``(..., m, m)``.
    ``metric_derivative(y)`` returns d_k G_ij with shape ``(..., m, m, m)``
    indexed ``[k, i, j]``; when omitted it is replaced by central differences
    of ``metric`` with step ``h_G``.
    """

    dim: int
    metric: MetricFn
    lower: np.ndarray
    upper: np.ndarray
    metric_derivative: Optional[MetricFn] = None
    h_G: float = 1e-5
    h_R: float = 1e-3
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lo = np.broadcast_to(np.asarray(self.lower, float), (self.dim,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, float), (self.dim,)).copy()
        if np.any(lo >= hi):
            raise ValueError("chart domain box is empty")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def G(self, y):
        return self.metric(np.asarray(y, float))

    def dG(self, y):
        y = np.asarray(y, float)
        if self.metric_derivative is not None:
            return self.metric_derivative(y)
        return central_metric_derivative(self.metric, y, self.h_G)

    def contains(self, y, margin=0.0):
        y = np.asarray(y, float)
        return np.all((y > self.lower + margin) & (y < self.upper - margin), axis=-1)

    def require_inside(self, y, parameter=0.0):
        inside = self.contains(y)
        if not np.all(inside):
            bad = np.asarray(y)[~inside][0] if np.ndim(inside) else np.asarray(y)
            raise ChartExitError(parameter, bad)

    def __repr__(self):
        return f"SpaceChart({self.name!r}, dim={self.dim})"


def central_metric_derivative(metric: MetricFn, y, h):
    """d_k G_ij by second-order central differences, indexed ``[..., k, i, j]``."""
    y = np.asarray(y, float)
    m = y.shape[-1]
    out = []
    for k in range(m):
        e = np.zeros(m)
        e[k] = h
        out.append((metric(y + e) - metric(y - e)) / (2 * h))
    return np.stack(out, axis=-3)


# --------------------------------------------------------------------------
# catalog


def euclidean(m: int, half_width: float = 1e6) -> SpaceChart:
    def metric(y):
        return np.broadcast_to(np.eye(m), y.shape[:-1] + (m, m)).copy()

    def dmetric(y):
        return np.zeros(y.shape[:-1] + (m, m, m))

    return SpaceChart(m, metric, -half_width, half_width, dmetric, name=f"euclidean:{m}",
                      params={"m": m})


def sphere(radius: float = 1.0, polar_margin: float = 1e-2, azimuth_range: float = 50.0) -> SpaceChart:
    """Round sphere in colatitude/longitude (theta, phi)."""
    r2 = radius * radius

    def metric(y):
        s = np.sin(y[..., 0])
        G = np.zeros(y.shape[:-1] + (2, 2))
        G[..., 0, 0] = r2
        G[..., 1, 1] = r2 * s * s
        return G

    def dmetric(y):
        th = y[..., 0]
        D = np.zeros(y.shape[:-1] + (2, 2, 2))
        D[..., 0, 1, 1] = r2 * 2 * np.sin(th) * np.cos(th)
        return D

    return SpaceChart(2, metric, [polar_margin, -azimuth_range],
                      [math.pi - polar_margin, azimuth_range], dmetric,
                      name="sphere", params={"radius": radius})


def half_plane(floor: float = 1e-3, width: float = 1e3) -> SpaceChart:
    """Poincare half-plane, G = I / y2^2 (sectional curvature -1)."""

    def metric(y):
        c = 1.0 / (y[..., 1] ** 2)
        G = np.zeros(y.shape[:-1] + (2, 2))
        G[..., 0, 0] = c
        G[..., 1, 1] = c
        return G

    def dmetric(y):
        c = -2.0 / (y[..., 1] ** 3)
        D = np.zeros(y.shape[:-1] + (2, 2, 2))
        D[..., 1, 0, 0] = c
        D[..., 1, 1, 1] = c
        return D

    return SpaceChart(2, metric, [-width, floor], [width, width], dmetric, name="half-plane")


def chart_from_name(name: str, **params) -> SpaceChart:
    """Resolve ``"euclidean:m"``, ``"sphere"`` or ``"half-plane"``."""
    key = name.strip().lower()
    if key.startswith("euclidean"):
        _, _, dim = key.partition(":")
        m = int(dim) if dim else int(params.pop("m", 2))
        return euclidean(m)
    if key == "sphere":
        return sphere(**params)
    if key in ("half-plane", "halfplane", "hyperbolic"):
        return half_plane(**params)
    raise KeyError(f"unknown manifold {name!r}")


CATALOG = ("euclidean:m", "sphere", "half-plane")


# --------------------------------------------------------------------------
# connection and curvature


def _inverse_metric(G, y):
    # Small dense blocks; a failed Cholesky flags indefinite or singular points.
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(G)
        bad = np.argwhere(eig.min(axis=-1) <= 0) if eig.ndim > 1 else None
        point = y if bad is None or len(bad) == 0 else y[tuple(bad[0])]
        raise DegenerateMetricError(point) from None
    return np.linalg.inv(G)


def christoffel(chart: SpaceChart, y) -> np.ndarray:
    """Levi-Civita symbols Gamma^i_{jk} = 1/2 g^{il}(d_j g_lk + d_k g_lj - d_l g_jk)."""
    y = np.asarray(y, float)
    ginv = _inverse_metric(chart.G(y), y)
    D = chart.dG(y)  # [a, b, c] = d_a g_bc
    T = (np.einsum("...jlk->...ljk", D) + np.einsum("...klj->...ljk", D) - D)
    return 0.5 * np.einsum("...il,...ljk->...ijk", ginv, T)


def christoffel_derivative(chart: SpaceChart, y, h=None) -> np.ndarray:
    """d_a Gamma^i_{jk} by fourth-order central differences, indexed ``[..., a, i, j, k]``."""
    y = np.asarray(y, float)
    h = chart.h_R if h is None else h
    inside = chart.contains(y, margin=2 * h)
    if not np.all(inside):
        bad = y[~inside][0] if np.ndim(inside) else y
        raise StencilRoomError(bad, h)
    m = y.shape[-1]
    out = []
    for a in range(m):
        e = np.zeros(m)
        e[a] = h
        out.append((8 * (christoffel(chart, y + e) - christoffel(chart, y - e))
                    - (christoffel(chart, y + 2 * e) - christoffel(chart, y - 2 * e))) / (12 * h))
    return np.stack(out, axis=-4)


def curvature(chart: SpaceChart, y, h=None) -> np.ndarray:
    """Riemann tensor R^i_{jkl} from differenced Christoffel symbols."""
    y = np.asarray(y, float)
    Gam = christoffel(chart, y)
    dGam = christoffel_derivative(chart, y, h)
    R = (np.einsum("...kilj->...ijkl", dGam) - np.einsum("...likj->...ijkl", dGam)
         + np.einsum("...ikp,...plj->...ijkl", Gam, Gam)
         - np.einsum("...ilp,...pkj->...ijkl", Gam, Gam))
    return R


def curvature_action(R, x, y, z) -> np.ndarray:
    """Components of R(x, y)z, i.e. R^i_{jkl} z^j x^k y^l."""
    return np.einsum("...ijkl,...j,...k,...l->...i", R, z, x, y)


def sectional_curvature(chart: SpaceChart, y, u, v) -> np.ndarray:
    R = curvature(chart, y)
    G = chart.G(y)
    Ruv = curvature_action(R, u, v, v)
    num = np.einsum("...i,...ij,...j->...", Ruv, G, u)
    guu = np.einsum("...i,...ij,...j->...", u, G, u)
    gvv = np.einsum("...i,...ij,...j->...", v, G, v)
    guv = np.einsum("...i,...ij,...j->...", u, G, v)
    return num / (guu * gvv - guv * guv)


# --------------------------------------------------------------------------
# geodesics and Jacobi fields


@dataclass(frozen=True, eq=False)
class GeodesicState:
    y: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, float))
        object.__setattr__(self, "v", np.asarray(self.v, float))


def _rk4(rhs, state, s_end, steps, check=None):
    h = s_end / steps
    for n in range(steps):
        k1 = rhs(state)
        k2 = rhs(tuple(a + 0.5 * h * b for a, b in zip(state, k1)))
        k3 = rhs(tuple(a + 0.5 * h * b for a, b in zip(state, k2)))
        k4 = rhs(tuple(a + h * b for a, b in zip(state, k3)))
        state = tuple(a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
                      for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4))
        if check is not None:
            check(state, (n + 1) * h)
    return state


def _step_count(length, steps, max_step):
    if max_step is not None:
        return max(1, int(math.ceil(abs(length) / max_step - 1e-12)))
    return max(1, int(steps))


def _exit_guard(chart):
    def check(state, s):
        y = state[0]
        inside = chart.contains(y)
        if not np.all(inside):
            bad = y[~inside][0] if np.ndim(inside) else y
            raise ChartExitError(s, bad)
    return check


def geodesic_rhs(chart):
    def rhs(state):
        y, v = state[0], state[1]
        Gam = christoffel(chart, y)
        return (v, -np.einsum("...ijk,...j,...k->...i", Gam, v, v))
    return rhs


def exp_map(chart: SpaceChart, state: GeodesicState, steps: int = 32) -> GeodesicState:
    """Integrate the geodesic equation over s in [0, 1] with classical RK4.

    Returns the endpoint position and velocity.  Raises ``ChartExitError``
    with the parameter at which the trajectory left the chart.
    """
    chart.require_inside(state.y)
    y, v = _rk4(geodesic_rhs(chart), (state.y, state.v), 1.0, steps, _exit_guard(chart))
    return GeodesicState(y, v)


def geodesic_trajectory(chart: SpaceChart, y, v, s_end=1.0, steps=64):
    """Sampled geodesic; returns parameters, positions and velocities."""
    y = np.asarray(y, float)
    v = np.asarray(v, float)
    chart.require_inside(y)
    rhs = geodesic_rhs(chart)
    guard = _exit_guard(chart)
    h = s_end / steps
    ys, vs = [y], [v]
    state = (y, v)
    for n in range(steps):
        state = _rk4(rhs, state, h, 1)
        guard(state, (n + 1) * h)
        ys.append(state[0])
        vs.append(state[1])
    return np.linspace(0.0, s_end, steps + 1), np.stack(ys), np.stack(vs)


def speed(chart: SpaceChart, y, v):
    return np.einsum("...i,...ij,...j->...", v, chart.G(y), v)


def _jacobi_rhs(chart):
    # J' = P - Gamma(u, J),  P' = -Gamma(u, P) - R(J, u)u  with P = DJ/ds.
    def rhs(state):
        y, u, J, P = state
        Gam = christoffel(chart, y)
        R = curvature(chart, y)
        dy = u
        du = -np.einsum("...ijk,...j,...k->...i", Gam, u, u)
        dJ = P - np.einsum("...ijk,...j,...k->...i", Gam, u, J)
        dP = -np.einsum("...ijk,...j,...k->...i", Gam, u, P) - curvature_action(R, J, u, u)
        return (dy, du, dJ, dP)
    return rhs


def jacobi_field(chart: SpaceChart, y, v, w, s: float = 1.0, steps: int = 64,
                 max_step: Optional[float] = None, covariant_derivative=False):
    """Jacobi field J along s -> exp(s v) with J(0) = 0 and DJ/ds(0) = w.

    Integrates D^2 J/ds^2 = -R(J, dgamma/ds) dgamma/ds jointly with the
    geodesic.  ``max_step`` fixes the integrator step size instead of the step
    count.  With ``covariant_derivative=True`` returns ``(J(s), DJ/ds(s))``.
    """
    y = np.asarray(y, float)
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    y, v, w = np.broadcast_arrays(y, v, w)
    chart.require_inside(y)
    n = _step_count(s, steps, max_step)
    J0 = np.zeros_like(w)
    _, _, J, P = _rk4(_jacobi_rhs(chart), (y, v, J0, w), s, n, _exit_guard(chart))
    return (J, P) if covariant_derivative else J


def jacobi_trajectory(chart: SpaceChart, y, v, w, s_values, substeps: int = 8):
    """Jacobi field sampled at increasing parameters ``s_values`` (first must be 0).

    Returns positions, velocities and J at each sample; ``substeps`` RK4 steps
    are taken between consecutive samples.
    """
    y = np.asarray(y, float)
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    s_values = np.asarray(s_values, float)
    rhs = _jacobi_rhs(chart)
    guard = _exit_guard(chart)
    state = (y, v, np.zeros_like(w), w)
    ys, vs, Js = [y], [v], [state[2]]
    for a, b in zip(s_values[:-1], s_values[1:]):
        state = _rk4(rhs, state, b - a, substeps)
        guard(state, b)
        ys.append(state[0])
        vs.append(state[1])
        Js.append(state[2])
    return np.stack(ys), np.stack(vs), np.stack(Js)


def parallel_transport(chart: SpaceChart, y, v, u, s: float = 1.0, steps: int = 64):
    """Transport ``u`` along s -> exp(s v); returns (y(s), dgamma/ds, u(s))."""
    def rhs(state):
        yy, vv, uu = state
        Gam = christoffel(chart, yy)
        return (vv, -np.einsum("...ijk,...j,...k->...i", Gam, vv, vv),
                -np.einsum("...ijk,...j,...k->...i", Gam, vv, uu))

    y, v, u = np.broadcast_arrays(*(np.asarray(a, float) for a in (y, v, u)))
    chart.require_inside(y)
    return _rk4(rhs, (y, v, u), s, steps, _exit_guard(chart))


def central_difference(f, h, axis=0):
    """Second-order first derivative along ``axis``: central inside, one-sided at the ends.

    Written in differences so that constant data gives exactly zero.
    """
    f = np.moveaxis(np.asarray(f, float), axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    out[0] = (4 * (f[1] - f[0]) - (f[2] - f[0])) / (2 * h)
    out[-1] = ((f[-3] - f[-1]) - 4 * (f[-2] - f[-1])) / (2 * h)
    return np.moveaxis(out, 0, axis)


def covariant_derivative_along_path(chart: SpaceChart, path, field, dt, t=None):
    """(Du/dt)^i = du^i/dt + Gamma^i_{jk}(y) dy^j/dt u^k on a uniform time grid.

    ``path`` and ``field`` have the time axis first.  Time derivatives are
    second-order central inside and second-order one-sided at both ends.
    Returns the whole time series, or the slice at index ``t``.
    """
    path = np.asarray(path, float)
    field = np.asarray(field, float)
    chart.require_inside(path)
    ydot = central_difference(path, dt)
    udot = central_difference(field, dt)
    Gam = christoffel(chart, path)
    out = udot + np.einsum("...ijk,...j,...k->...i", Gam, ydot, field)
    return out if t is None else out[t]
