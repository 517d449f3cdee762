"""Command-line front end.

Usage::

    covdyn MODE --scenario FILE [--out DIR] [--seed N] [--eps-sweep K] [--strict]

MODE is one of simulate, equilibrium, linearize, verify, geodesic.  Every run
writes ``report.txt`` (readable summary), ``report.tsv`` (one tab-separated
row per check: section, check, value, bound, kind, status) plus CSV field
dumps and PNG figures into DIR.

Field CSV layout: header row ``t, x1..xd, <components>``, one row per
(t, x) grid point, time slowest and the last body axis fastest.  Component
names are ``y1..ym`` for configurations, ``v1..vm`` for velocities, ``r1..rm``
for residual-type fields and ``A1_i_j``, ``A2_i_j_d``, ``A3_l_j_a_b``,
``div_psi_j`` for the linearized coefficients.

Exit codes: 0 pass, 1 defect failure (verify), 2 usage or scenario error,
3 runtime error (chart exit, blow-up, degenerate system, ...).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import acceptance as acc
from . import constitutive as con
from . import dynamics as dyn
from . import fieldio
from . import geometry as geo
from . import kinematics as kin
from . import linearize as lin
from . import oracle
from . import plotting
from .errors import CovdynError, ScenarioError
from .scenario import Scenario, parse_scenario

MODES = ("simulate", "equilibrium", "linearize", "verify", "geodesic")
EXIT_OK, EXIT_DEFECT, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
VERIFY_STEPS = 6


class Report:
    """Collects summary lines and check rows, then writes report.txt / report.tsv."""

    def __init__(self, mode, scenario: Scenario, seed):
        self.lines = [f"mode = {mode}", f"scenario = {scenario.source}",
                      f"manifold = {scenario.manifold}", f"body = d{scenario.d} N{scenario.N}",
                      f"lagrangian = {scenario.lagrangian}", f"seed = {seed}", ""]
        self.rows: List[List[str]] = []
        self.results: List[acc.CriterionResult] = []

    def kv(self, key, value):
        if isinstance(value, float):
            value = f"{value:.6e}"
        self.lines.append(f"{key} = {value}")
        self.rows.append(["info", key, str(value), "", "", ""])

    def add(self, result: acc.CriterionResult, strict: bool):
        self.results.append(result)
        self.lines.extend(result.lines(strict))
        for c in result.checks:
            enforced = strict or c.kind != "slope"
            status = c.line(enforced).split(f" {c.kind} ", 1)[1]
            self.rows.append([result.key, c.name, f"{c.value:.6e}", c.bound, c.kind, status])

    def write(self, out: Path):
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text("\n".join(self.lines) + "\n")
        with (out / "report.tsv").open("w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t")
            w.writerow(["section", "check", "value", "bound", "kind", "status"])
            w.writerows(self.rows)


def _names(prefix, m):
    return [f"{prefix}{i + 1}" for i in range(m)]


def _write_series(path, columns: dict):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(columns))
        for row in zip(*columns.values()):
            w.writerow([repr(float(v)) for v in row])


def _is_curved(chart):
    return not chart.name.startswith("euclidean")


def eps_levels(scenario: Scenario, eps_sweep: Optional[int]):
    if eps_sweep is None:
        return list(scenario.eps)
    if eps_sweep < 3:
        raise ScenarioError(f"--eps-sweep needs at least 3 levels, got {eps_sweep}")
    return [0.08 / 2 ** k for k in range(eps_sweep)]


# --------------------------------------------------------------------------
# modes


def run_simulate(sc: Scenario, out: Path, rep: Report, **_):
    chart, grid = sc.chart(), sc.grid()
    cd, load = sc.density(grid, chart), sc.loading()
    motion = dyn.simulate(sc.phi0(), sc.V0(), cd, load, grid, chart, sc.dt, sc.steps,
                          scheme=sc.scheme, clamp=sc.clamp_mask())
    fieldio.write_motion(out / "motion.csv", motion, _names("y", chart.dim))
    fieldio.write_field(out / "velocity.csv", motion.times, grid.x, motion.velocity,
                        _names("v", chart.dim))
    energy = dyn.discrete_energy(motion, sc.lagrangian_object(chart), grid)
    _write_series(out / "energy.csv", {"t": motion.times, "energy": energy})
    rep.kv("scheme", sc.scheme)
    rep.kv("steps", sc.steps)
    rep.kv("dt", sc.dt)
    rep.kv("final_time", float(motion.times[-1]))
    rep.kv("energy_initial", float(energy[0]))
    rep.kv("energy_max_rel_drift", float(np.max(np.abs(energy - energy[0]))
                                         / max(abs(energy[0]), 1e-300)))
    plotting.trajectory_plot(motion, out / "trajectory.png", title="configurations")
    plotting.series_plot({"energy": (motion.times, energy)}, out / "energy.png",
                         xlabel="t", ylabel="energy")
    return EXIT_OK


def run_equilibrium(sc: Scenario, out: Path, rep: Report, **_):
    chart, grid = sc.chart(), sc.grid()
    cd, load = sc.density(grid, chart), sc.loading()
    phi, hist, steps = lin.newton_solve(sc.phi0(), cd, load, chart, grid, sc.clamp_mask(),
                                        iterations=sc.newton_iterations)
    fieldio.write_field(out / "equilibrium.csv", [0.0], grid.x, phi[None], _names("y", chart.dim))
    fieldio.write_field(out / "newton_update.csv", [0.0], grid.x, steps[-1].w[None],
                        _names("w", chart.dim))
    _write_series(out / "newton.csv", {"iteration": range(len(hist)), "residual": hist})
    for k, h in enumerate(hist):
        rep.kv(f"residual[{k}]", float(h))
    for k, st in enumerate(steps):
        rep.kv(f"linear_solve_rel_residual[{k}]", float(st.solve_residual))
    plotting.series_plot({"static residual": (np.arange(len(hist)), hist)}, out / "newton.png",
                         xlabel="iteration", ylabel="max-norm residual", logy=True)
    return EXIT_OK


def _linearization_setup(sc: Scenario, seed: int, steps: int = VERIFY_STEPS):
    chart, grid = sc.chart(), sc.grid()
    cd, load = sc.density(grid, chart), sc.loading()
    motion = sc.motion(steps=max(steps, VERIFY_STEPS))
    rng = np.random.default_rng(seed)
    w = oracle.smooth_field(rng, grid, motion.times, chart.dim)
    label = f"{sc.manifold} d={sc.d} {sc.lagrangian}"
    return acc.LinearizationScenario("scenario", label, motion, cd, w, _is_curved(chart), load)


def _consistency(sc: Scenario, seed: int, eps, out: Path, rep: Report, strict: bool):
    lsc = _linearization_setup(sc, seed)
    data = acc.consistency_data(lsc, eps, readings=lsc.curved)
    res = acc.consistency_result("linearization", f"linearization consistency, {lsc.label}",
                                 lsc, data, boundary_slope=not lsc.curved)
    rep.add(res, strict)
    series = {"interior": (data.sweep.eps[:-1], data.sweep.interior_diffs),
              "boundary": (data.sweep.eps[:-1], data.sweep.boundary_diffs)}
    plotting.convergence_plot(series, out / "eps_sweep.png", xlabel="eps",
                              ylabel="|fd(eps) - fd(eps/2)|", reference_slopes=(2,),
                              title="oracle eps sweep")
    return lsc, data


def run_linearize(sc: Scenario, out: Path, rep: Report, seed=0, eps_sweep=None, strict=False):
    chart, grid = sc.chart(), sc.grid()
    cd, load = sc.density(grid, chart), sc.loading()
    co = lin.coefficient_fields(sc.phi0(), cd, chart, grid, load)
    m, d = chart.dim, grid.d
    parts, names = [], []
    for key, arr, shape in (("A1", co.A1, (m, m)), ("A2", co.A2, (m, m, d)),
                            ("A3", co.A3, (m, m, d, d)), ("div_psi", co.div_psi, (m,))):
        parts.append(arr.reshape(grid.shape + (-1,)))
        names += fieldio.tensor_component_names(key, shape)
    fieldio.write_field(out / "coefficients.csv", [0.0], grid.x,
                        np.concatenate(parts, axis=-1)[None], names)
    lsc, data = _consistency(sc, seed, eps_levels(sc, eps_sweep), out, rep, strict)
    linear = data.interior["implemented"] - data.constant
    fd = data.sweep.interior[-1]
    fieldio.write_field(out / "linearized.csv", lsc.motion.times, grid.x, linear, _names("r", m))
    fieldio.write_field(out / "fd_derivative.csv", lsc.motion.times, grid.x, fd, _names("r", m))
    if d == 1:
        mid = lsc.motion.values.shape[0] // 2
        plotting.field_comparison_plot(grid.x[..., 0], {"linearized": linear[mid], "fd": fd[mid]},
                                       out / "linearized_vs_fd.png",
                                       title=f"t = {lsc.motion.times[mid]:g}")
    return EXIT_OK


def run_geodesic(sc: Scenario, out: Path, rep: Report, **_):
    chart, grid = sc.chart(), sc.grid()
    s_end = sc.dt * sc.steps
    s, ys, vs = geo.geodesic_trajectory(chart, sc.phi0(), sc.V0(), s_end, sc.steps)
    fieldio.write_field(out / "geodesic.csv", s, grid.x, np.concatenate([ys, vs], axis=-1),
                        _names("y", chart.dim) + _names("v", chart.dim))
    sp = geo.speed(chart, ys, vs)
    rep.kv("parameter_end", float(s_end))
    rep.kv("steps", sc.steps)
    rep.kv("speed_max_drift", float(np.max(np.abs(sp - sp[0]))))
    motion = kin.Motion(chart, grid, ys, sc.dt, check=False)
    plotting.trajectory_plot(motion, out / "geodesic.png", title="pointwise geodesics")
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def _probe_vectors(sc: Scenario, chart):
    """A base point, a nonzero velocity and a second direction for the chart-level checks."""
    y = sc.phi0().reshape(-1, chart.dim)[0]
    v = sc.V0().reshape(-1, chart.dim)[0]
    if not np.any(v):
        v = np.eye(chart.dim)[-1]
    w = np.eye(chart.dim)[0] if chart.dim > 1 else np.ones(1)
    return y, v, w


def chart_checks(sc: Scenario, chart) -> acc.CriterionResult:
    res = acc.CriterionResult("chart", f"metricity and jacobi scaling on {chart.name}")
    grid, base = acc.metricity_base(chart)
    met = oracle.metricity_defect(chart, grid, base)
    y, v, w = _probe_vectors(sc, chart)
    jac = oracle.jacobi_scaling_defect(chart, y, v, w)
    if _is_curved(chart):
        res.checks.append(acc._ge("metricity-slope", met.convergence_slope, 1.5))
        res.checks.append(acc._ge("jacobi-scaling-slope", jac.convergence_slope, 3.5))
    else:
        res.checks.append(acc._le("metricity-defect", met.max_defect, 1e-10))
    res.checks.append(acc._le("jacobi-scaling-defect@1e-3", jac.max_defect, 1e-8))
    res.notes.append(met.line())
    res.notes.append(jac.line())
    res.data = {"metricity": met, "jacobi": jac}
    return res


def flat_checks(sc: Scenario, chart) -> Optional[acc.CriterionResult]:
    """Classical-elasticity reduction, when the scenario is a flat reduction case."""
    if _is_curved(chart) or sc.d != chart.dim:
        return None
    grid = sc.grid()
    res = acc.CriterionResult("flat", "flat reduction to classical linear elasticity")
    if sc.lagrangian == "svk-incompatible" and sc.g is None and sc.g_grid is None:
        cd = con.from_lagrangian(con.svk_incompatible_lagrangian(chart, lam=sc.lam, mu=sc.mu), grid)
        co = lin.coefficient_fields(grid.x, cd, chart, grid)
        want = acc.classical_elasticity(sc.lam, sc.mu, sc.d) * grid.rho[..., None, None, None, None]
        res.checks.append(acc._le("A3-vs-classical", np.max(np.abs(co.A3 - want)), 1e-10))
    elif sc.lagrangian == "dirichlet" and sc.d == 1 and np.all(grid.rho == 1.0):
        motion = kin.Motion.stationary(chart, grid, grid.x, dt=sc.dt, steps=8)
        cd = con.from_lagrangian(con.dirichlet_lagrangian(chart), grid)
        w = np.random.default_rng(6).normal(size=motion.values.shape)
        got = lin.linear_part(lambda u: lin.apply_linearized(motion, u, cd), w)
        want = (kin.d1(kin.d1(w, sc.dt, 0), sc.dt, 0)
                - kin.spatial_hessian(w, grid, 1)[..., 0, 0])
        res.checks.append(acc._le("wave-operator-rel",
                                  np.max(np.abs(got - want)) / np.max(np.abs(want)), 1e-13))
    else:
        return None
    return res


def representation_checks(sc: Scenario, chart, seed: int) -> acc.CriterionResult:
    levels = (17, 33, 65, 129) if sc.d == 1 else (17, 33, 65)
    defects, hs = [], []
    for n in levels:
        sn = dataclasses.replace(sc, N=n)
        grid = sn.grid()
        cd = sn.density(grid, chart)
        jt = kin.jet_of(sn.phi0(), grid)
        rng = np.random.default_rng(seed)
        defects.append(max(con.representation_defect(
            cd, jt, oracle.smooth_field(rng, grid, [0.0, 1.0], chart.dim)[0]) for _ in range(4)))
        hs.append(grid.h)
    res = acc.CriterionResult("representation", "integration-by-parts representation identity")
    slope = oracle.fit_slope(hs, defects)
    res.checks.append(acc._ge("representation-slope", slope, 1.8))
    res.checks.append(acc._le("representation-defect-over-h2", defects[-1] / hs[-1] ** 2, 1e3))
    res.notes.append("defects " + ", ".join(f"{d:.3e}" for d in defects))
    res.data = {"h": hs, "defects": defects}
    return res


def _acceptance_figures(results, out: Path):
    for r in results:
        if r.key.startswith("1(") and "interior_diffs" in r.data:
            tag = r.key[2]
            plotting.convergence_plot({"interior": (r.data["eps"][:-1], r.data["interior_diffs"]),
                                       "boundary": (r.data["eps"][:-1], r.data["boundary_diffs"])},
                                      out / f"criterion1{tag}_eps_sweep.png", xlabel="eps",
                                      reference_slopes=(2,), title=r.title)
        elif r.key == "2":
            plotting.convergence_plot({"jacobi operator": (r.data["levels"], r.data["defects"])},
                                      out / "criterion2.png", xlabel="dt", reference_slopes=(2,))
        elif r.key == "3":
            plotting.convergence_plot({k: (v.levels, v.defects) for k, v in r.data.items()
                                       if k in ("sphere", "half-plane")},
                                      out / "criterion3.png", xlabel="eps", reference_slopes=(2,))
        elif r.key == "4":
            rp = r.data["report"]
            plotting.convergence_plot({"jacobi scaling": (rp.levels, rp.defects)},
                                      out / "criterion4.png", xlabel="max step",
                                      reference_slopes=(4,))
        elif r.key == "7":
            plotting.convergence_plot(r.data, out / "criterion7.png", xlabel="h",
                                      reference_slopes=(2,))
        elif r.key == "8":
            h = r.data["history"]
            plotting.series_plot({"newton": (np.arange(len(h)), h)}, out / "criterion8.png",
                                 xlabel="iteration", ylabel="residual", logy=True)


def run_verify(sc: Scenario, out: Path, rep: Report, seed=0, eps_sweep=None, strict=False,
               suite=None):
    suite = suite or sc.suite
    rep.kv("suite", suite)
    rep.kv("strict", "yes" if strict else "no (slope checks reported, not enforced)")
    if suite == "acceptance":
        results = acc.run_all()
        for r in results:
            rep.add(r, strict)
        _acceptance_figures(results, out)
    else:
        chart = sc.chart()
        _consistency(sc, seed, eps_levels(sc, eps_sweep), out, rep, strict)
        cres = chart_checks(sc, chart)
        rep.add(cres, strict)
        plotting.convergence_plot({"metricity": (cres.data["metricity"].levels,
                                                 cres.data["metricity"].defects),
                                   "jacobi scaling": (cres.data["jacobi"].levels,
                                                      cres.data["jacobi"].defects)},
                                  out / "chart_checks.png", xlabel="level")
        fres = flat_checks(sc, chart)
        if fres is not None:
            rep.add(fres, strict)
        rres = representation_checks(sc, chart, seed)
        rep.add(rres, strict)
        plotting.convergence_plot({"representation": (rres.data["h"], rres.data["defects"])},
                                  out / "representation.png", xlabel="h", reference_slopes=(2,))
    ok = all(r.passed(strict) for r in rep.results)
    rep.lines.append("")
    rep.lines.append(f"verify {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_DEFECT


RUNNERS = {"simulate": run_simulate, "equilibrium": run_equilibrium, "linearize": run_linearize,
           "verify": run_verify, "geodesic": run_geodesic}


def run(scenario: Scenario, mode: str, out="out", seed: int = 0, eps_sweep: Optional[int] = None,
        strict: bool = False, suite: Optional[str] = None) -> int:
    """Execute one mode, write its artifacts into ``out`` and return the exit status."""
    if mode not in RUNNERS:
        raise ScenarioError(f"unknown mode {mode!r} (choose from {', '.join(MODES)})")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rep = Report(mode, scenario, seed)
    kw = {"seed": seed, "eps_sweep": eps_sweep, "strict": strict}
    if mode == "verify":
        kw["suite"] = suite
    status = RUNNERS[mode](scenario, out, rep, **kw)
    rep.write(out)
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="covdyn", description="Covariant continuum dynamics runs.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--scenario", required=True, help="scenario file (TOML or JSON)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=0, help="seed for random test fields")
    p.add_argument("--eps-sweep", type=int, default=None, metavar="K",
                   help="use K halving oracle step levels starting at 0.08")
    p.add_argument("--strict", action="store_true", help="enforce convergence-slope checks")
    p.add_argument("--suite", choices=("scenario", "acceptance"), default=None,
                   help="verify suite (default: from the scenario file)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        sc = parse_scenario(args.scenario)
    except ScenarioError as exc:
        for p in exc.problems:
            print(f"covdyn: scenario error: {p}", file=sys.stderr)
        return EXIT_USAGE
    try:
        status = run(sc, args.mode, args.out, args.seed, args.eps_sweep, args.strict, args.suite)
    except ScenarioError as exc:
        for p in exc.problems:
            print(f"covdyn {args.mode}: {sc.source}: {p}", file=sys.stderr)
        return EXIT_USAGE
    except (CovdynError, ValueError, FloatingPointError) as exc:
        print(f"covdyn {args.mode}: {sc.source}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"covdyn {args.mode}: wrote {Path(args.out) / 'report.txt'} (exit {status})")
    return status


if __name__ == "__main__":
    sys.exit(main())
