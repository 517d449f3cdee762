"""Brute-force verifiers that share no numerics with the operations they test.

The oracle computes Christoffel symbols by its own differencing of the
metric and integrates geodesics, transported frames and coordinate
variational equations with its own RK4 loop.  The only shared pieces are the
chart's metric function and the residual being differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import geometry
from .dynamics import boundary_residual, interior_residual
from .errors import ShootingError
from .kinematics import BodyGrid, Motion, pair

ORACLE_H = 1e-5


@dataclass
class DefectReport:
    name: str
    samples: int
    max_defect: float
    convergence_slope: float
    levels: list = field(default_factory=list)
    defects: list = field(default_factory=list)

    def line(self):
        return f"{self.name} defect={self.max_defect:.3e} slope={self.convergence_slope:.3f}"


def fit_slope(levels, defects) -> float:
    """Least-squares slope of log(defect) against log(level)."""
    lv = np.log(np.asarray(levels, float))
    dv = np.log(np.maximum(np.asarray(defects, float), 1e-300))
    if len(lv) < 2:
        return float("nan")
    return float(np.polyfit(lv, dv, 1)[0])


# --------------------------------------------------------------------------
# independent connection and integrators


def oracle_christoffel(chart, y, h=ORACLE_H):
    """Gamma from central differences of the metric, solved against G (no inverse)."""
    y = np.asarray(y, float)
    m = y.shape[-1]
    dG = []
    for k in range(m):
        e = np.zeros(m)
        e[k] = h
        dG.append((chart.metric(y + e) - chart.metric(y - e)) / (2 * h))
    dG = np.stack(dG, axis=-3)  # [k, i, j] = d_k G_ij
    first_kind = 0.5 * (np.swapaxes(dG, -3, -2) + np.moveaxis(dG, -3, -1) - dG)  # [l, j, k]
    G = chart.metric(y)
    flat = first_kind.reshape(first_kind.shape[:-2] + (m * m,))
    sol = np.linalg.solve(G, flat)
    return sol.reshape(first_kind.shape)


def _rk4(rhs, state, steps):
    h = 1.0 / steps
    for _ in range(steps):
        k1 = rhs(state)
        k2 = rhs([a + 0.5 * h * b for a, b in zip(state, k1)])
        k3 = rhs([a + 0.5 * h * b for a, b in zip(state, k2)])
        k4 = rhs([a + h * b for a, b in zip(state, k3)])
        state = [a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4)]
    return state


def exp_with_frame(chart, y, v, steps=16):
    """exp_y(v) and the parallel transport P[..., :, i] of the coordinate basis."""
    y = np.asarray(y, float)
    v = np.asarray(v, float)
    m = y.shape[-1]
    P0 = np.broadcast_to(np.eye(m), y.shape + (m,)).copy()

    def rhs(s):
        yy, vv, P = s
        Gam = oracle_christoffel(chart, yy)
        return [vv, -np.einsum("...ijk,...j,...k->...i", Gam, vv, vv),
                -np.einsum("...ijk,...j,...kl->...il", Gam, vv, P)]

    y1, _, P1 = _rk4(rhs, [y, v, P0], steps)
    chart.require_inside(y1)
    return y1, P1


def exp_variation(chart, y, v, w, steps=32, h=1e-4, metric_step=ORACLE_H):
    """exp_y(v) and its coordinate derivative in v along w.

    Integrates the geodesic equation together with its variational equation;
    the derivative of Gamma is taken by central differences.  ``metric_step``
    is the differencing step of the metric inside the Christoffel symbols.
    """
    y = np.asarray(y, float)
    v, w = np.broadcast_arrays(np.asarray(v, float), np.asarray(w, float))
    m = y.shape[-1]

    def dgamma(yy):
        out = []
        for k in range(m):
            e = np.zeros(m)
            e[k] = h
            out.append((oracle_christoffel(chart, yy + e, metric_step)
                        - oracle_christoffel(chart, yy - e, metric_step)) / (2 * h))
        return np.stack(out, axis=-1)  # [i, j, k, l] = d_l Gamma^i_jk

    def rhs(s):
        yy, vv, dy, dv = s
        Gam = oracle_christoffel(chart, yy, metric_step)
        dGam = dgamma(yy)
        acc = -np.einsum("...ijk,...j,...k->...i", Gam, vv, vv)
        dacc = (-np.einsum("...ijkl,...j,...k,...l->...i", dGam, vv, vv, dy)
                - 2 * np.einsum("...ijk,...j,...k->...i", Gam, vv, dv))
        return [vv, acc, dv, dacc]

    y1, _, dy1, _ = _rk4(rhs, [y, v, np.zeros_like(w), w], steps)
    return y1, dy1


# --------------------------------------------------------------------------
# smooth random fields


def smooth_field(rng, grid: BodyGrid, times, m, modes=2, amplitude=1.0):
    """Random low-order Fourier field on I x B with ``m`` components."""
    x = grid.x
    t = np.asarray(times, float)
    out = np.zeros((len(t),) + grid.shape + (m,))
    span = max(t[-1] - t[0], 1e-12)
    tt = ((t - t[0]) / span).reshape((-1,) + (1,) * grid.d)
    for i in range(m):
        for _ in range(modes):
            k = np.concatenate([rng.integers(0, 3, size=1), rng.integers(1, 3, size=grid.d)])
            phase = rng.uniform(0, 2 * np.pi, size=grid.d + 1)
            c = rng.normal() / modes
            term = np.cos(np.pi * k[0] * tt + phase[0])
            for a in range(grid.d):
                term = term * np.cos(np.pi * k[a + 1] * x[..., a] + phase[a + 1])
            out[..., i] += c * term
    return amplitude * out


# --------------------------------------------------------------------------
# finite-difference linearization oracle


def perturbed_residuals(motion: Motion, w, cd, s, load=None, grid=None, transport=True,
                        steps=16):
    """Residuals at kappa_s = exp(kappa, s w), pulled back to the frame at kappa."""
    chart = motion.chart
    ys, P = exp_with_frame(chart, motion.values, s * np.asarray(w, float), steps)
    ms = Motion(chart, motion.grid, ys, motion.dt, motion.t0, check=False)
    r = interior_residual(ms, cd, load, grid)
    b = boundary_residual(ms, cd, load, grid)
    if transport:
        r = np.einsum("...j,...ji->...i", r, P)
        b = np.einsum("...j,...ji->...i", b, P)
    return r, b


def fd_force_derivative(motion: Motion, w, cd, chart=None, grid: Optional[BodyGrid] = None,
                        eps: float = 1e-2, load=None, transport: bool = True, steps: int = 16):
    """Central difference in s of the pulled-back residual along exp(kappa, s w).

    Returns ``(interior, boundary)`` fields shaped like the motion values.
    ``transport=False`` compares raw components at different base points.
    """
    if chart is not None and chart is not motion.chart:
        motion = Motion(chart, motion.grid, motion.values, motion.dt, motion.t0, check=False)
    w = np.asarray(w, float)
    if not np.any(w):
        z = np.zeros(motion.values.shape)
        return z, z.copy()
    rp, bp = perturbed_residuals(motion, w, cd, eps, load, grid, transport, steps)
    rm, bm = perturbed_residuals(motion, w, cd, -eps, load, grid, transport, steps)
    return (rp - rm) / (2 * eps), (bp - bm) / (2 * eps)


@dataclass
class SweepResult:
    eps: list
    interior: list
    boundary: list
    interior_slope: float
    boundary_slope: float
    interior_diffs: list
    boundary_diffs: list


def fd_sweep(motion, w, cd, eps_values: Sequence[float], load=None, valid=None, **kw):
    """FD derivatives over decreasing eps with self-difference slopes.

    The slope fits log |fd(eps_k) - fd(eps_k+1)| against log eps_k; a
    second-order difference quotient gives 2.
    """
    valid = slice(None) if valid is None else valid
    ints, bnds = [], []
    for e in eps_values:
        a, b = fd_force_derivative(motion, w, cd, eps=e, load=load, **kw)
        ints.append(a)
        bnds.append(b)
    di = [float(np.max(np.abs(ints[k][valid] - ints[k + 1][valid]))) for k in range(len(ints) - 1)]
    db = [float(np.max(np.abs(bnds[k][valid] - bnds[k + 1][valid]))) for k in range(len(bnds) - 1)]
    lv = list(eps_values[:-1])
    return SweepResult(list(eps_values), ints, bnds, fit_slope(lv, di), fit_slope(lv, db), di, db)


# --------------------------------------------------------------------------
# metricity


def transported_pairing(motion: Motion, eta, u, w, s, steps=32, metric_step=ORACLE_H):
    """pair over exp(kappa, s eta) of the fields carried by d exp (Jacobi fields at 1)."""
    chart = motion.chart
    ys, Ju = exp_variation(chart, motion.values, s * eta, u, steps, metric_step=metric_step)
    _, Jw = exp_variation(chart, motion.values, s * eta, w, steps, metric_step=metric_step)
    ms = Motion(chart, motion.grid, ys, motion.dt, motion.t0, check=False)
    return pair(ms, Ju, Jw)


def metricity_defect(chart, grid: BodyGrid, base: Motion, samples: int = 3,
                     levels=(0.1, 0.05, 0.025), seed: int = 0, amplitude: float = 0.3,
                     metric_step_ratio: float = 1.0,
                     name: Optional[str] = None) -> DefectReport:
    """|d/ds pair(kappa_s, J u, J w)| at s = 0 by central differences in s.

    The exact derivative vanishes.  Each level refines the s-step and the
    metric differencing step ``h_G = metric_step_ratio * level`` together, so
    the defect measures the metricity error of the discrete connection.  The
    reported defect at each level is the worst case over ``samples`` random
    smooth (eta, u, w).
    """
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(samples):
        fields.append(tuple(smooth_field(rng, grid, base.times, chart.dim, amplitude=amplitude)
                            for _ in range(3)))
    defects = []
    for eps in levels:
        worst = 0.0
        for eta, u, w in fields:
            if not np.any(eta):
                continue
            hg = metric_step_ratio * eps
            gp = transported_pairing(base, eta, u, w, eps, metric_step=hg)
            gm = transported_pairing(base, eta, u, w, -eps, metric_step=hg)
            worst = max(worst, abs(gp - gm) / (2 * eps))
        defects.append(worst)
    return DefectReport(name or f"metricity[{chart.name}]", samples, max(defects),
                        fit_slope(levels, defects), list(levels), defects)


# --------------------------------------------------------------------------
# Jacobi scaling and normal coordinates


def jacobi_scaling_defect(chart, y, v, w, levels=(0.1, 0.05, 0.025, 0.0125), check_step=1e-3,
                          ts=(0.3, 0.6, 1.0), ss=(0.5, 1.0)) -> DefectReport:
    """max over (t, s) of |J_{tv,w}(s) - J_{v,w/t}(ts)| at fixed integrator step sizes.

    The slope is fitted over ``levels``; ``max_defect`` is measured at
    ``check_step``.
    """
    y, v, w = (np.asarray(a, float) for a in (y, v, w))

    def defect(step):
        worst = 0.0
        for t in ts:
            for s in ss:
                a = geometry.jacobi_field(chart, y, t * v, w, s, max_step=step)
                b = geometry.jacobi_field(chart, y, v, w / t, t * s, max_step=step)
                worst = max(worst, float(np.max(np.abs(a - b))))
        return worst

    defects = [defect(h) for h in levels]
    final = defect(check_step)
    return DefectReport(f"jacobi-scaling[{chart.name}]", len(ts) * len(ss), final,
                        fit_slope(levels, defects), list(levels), defects)


def orthonormal_frame(chart, y):
    """Gram-Schmidt on the coordinate basis with respect to G(y); columns are the frame."""
    G = chart.G(y)
    m = G.shape[-1]
    E = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        for f in E:
            e = e - (f @ G @ e) * f
        E.append(e / np.sqrt(e @ G @ e))
    return np.stack(E, axis=-1)


def log_map(chart, y, p, tol=1e-13, max_iter=50, steps=64):
    """Solve exp_y(u) = p for u by Newton shooting with the variational Jacobian."""
    y = np.asarray(y, float)
    p = np.asarray(p, float)
    m = y.shape[-1]
    u = p - y
    for it in range(max_iter):
        end = exp_variation(chart, y, u, np.zeros(m), steps)[0]
        res = end - p
        if np.max(np.abs(res)) < tol:
            return u
        J = np.stack([exp_variation(chart, y, u, np.eye(m)[k], steps)[1] for k in range(m)], -1)
        u = u - np.linalg.solve(J, res)
    raise ShootingError(max_iter, float(np.max(np.abs(res))))


def normal_coordinate_jacobi_check(chart, y, v, w, ts=(0.2, 0.1, 0.05, 0.025),
                                   tau=1e-4, steps=256) -> DefectReport:
    """Compare J(t) with t w in normal coordinates centred at y.

    ``max_defect`` uses normal coordinates obtained by shooting (exact up to
    integrator and differencing error).  The slope uses second-order Taylor
    normal coordinates z = E^-1 (dy + Gamma(dy, dy)/2), whose error is cubic in t.
    """
    y, v, w = (np.asarray(a, float) for a in (y, v, w))
    E = orthonormal_frame(chart, y)
    Einv = np.linalg.inv(E)
    Gam = oracle_christoffel(chart, y)

    def taylor(p):
        dy = p - y
        return Einv @ (dy + 0.5 * np.einsum("ijk,j,k->i", Gam, dy, dy))

    def shoot(p):
        return Einv @ log_map(chart, y, p)

    exact, approx = [], []
    for t in ts:
        gamma = geometry.exp_map(chart, geometry.GeodesicState(y, t * v), steps).y
        J = geometry.jacobi_field(chart, y, v, w, t, steps)
        want = t * (Einv @ w)
        for coords, bucket in ((shoot, exact), (taylor, approx)):
            dz = (coords(gamma + tau * J) - coords(gamma - tau * J)) / (2 * tau)
            bucket.append(float(np.max(np.abs(dz - want))))
    return DefectReport(f"normal-coordinates[{chart.name}]", len(ts), max(exact),
                        fit_slope(ts, approx), list(ts), approx)
