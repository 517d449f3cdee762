"""Scenario files: parsing, validation and construction of library objects.

A scenario is TOML (or JSON with the same structure)::

    [manifold]
    name = "sphere"              # "euclidean:m", "sphere" or "half-plane"

    [body]
    d = 1
    N = 33
    rho = "1"                    # number or expression in x

    [material]
    lagrangian = "dirichlet"     # "zero", "dirichlet", "svk-incompatible"
    lam = 0.0                    # svk only
    mu = 1.0
    g = [["1 + 0.1*x1"]]         # reference metric, d x d expressions ...
    # g_grid = [...]             # ... or nested grid values of shape (N,)*d + (d, d)

    [loading]
    body = ["0", "0"]            # expressions in x, y1..ym
    surface = ["0", "0"]

    [initial]
    phi = ["pi/2", "x"]          # expressions in x (and t for prescribed motions)
    V = ["0", "1"]
    clamp = ["x1-"]              # faces held fixed: x1-, x1+, x2-, x2+

    [time]
    dt = 0.01
    steps = 100
    scheme = "leapfrog"          # or "rk4"

    [newton]
    iterations = 3

    [verify]
    eps = [0.08, 0.04, 0.02, 0.01, 0.005]
    suite = "scenario"           # or "acceptance"
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import constitutive as con
from . import geometry as geo
from . import kinematics as kin
from .errors import ScenarioError

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTANTS = {"pi": math.pi}
BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
          ast.Div: operator.truediv, ast.Pow: operator.pow}
UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
FACES = ("x1-", "x1+", "x2-", "x2+")
DEFAULT_EPS = (0.08, 0.04, 0.02, 0.01, 0.005)


class Expression:
    """A closed-form scalar expression over a fixed set of variable names.

    Grammar: numbers, variables, ``pi``, ``sin``/``cos``/``exp`` calls and
    the operators ``+ - * / **``.  Anything else is rejected at parse time.
    """

    def __init__(self, text, variables):
        self.text = str(text)
        self.variables = tuple(variables)
        try:
            tree = ast.parse(self.text.strip(), mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        self._check(tree.body)
        self.tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ValueError(f"unsupported literal {node.value!r} in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in CONSTANTS:
                raise ValueError(f"unknown name {node.id!r} in {self.text!r}")
        elif isinstance(node, ast.BinOp) and type(node.op) in BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in UNOPS:
            self._check(node.operand)
        elif (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
              and node.func.id in FUNCTIONS and len(node.args) == 1 and not node.keywords):
            self._check(node.args[0])
        else:
            raise ValueError(f"unsupported syntax in {self.text!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            return BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return UNOPS[type(node.op)](self._eval(node.operand, env))
        return FUNCTIONS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, **env):
        return self._eval(self.tree, env)

    def uses(self, name):
        return any(isinstance(n, ast.Name) and n.id == name for n in ast.walk(self.tree))


def _x_env(x, d):
    env = {f"x{a + 1}": x[..., a] for a in range(d)}
    if d == 1:
        env["x"] = x[..., 0]
    return env


def _variables(d, m=0, time=False):
    names = [f"x{a + 1}" for a in range(d)] + (["x"] if d == 1 else [])
    names += [f"y{i + 1}" for i in range(m)]
    if time:
        names.append("t")
    return names


def vector_function(exprs: List[Expression], d, m_out):
    """Vectorized (t, x, y) -> array(..., m_out) from per-component expressions."""

    def fn(x, y=None, t=None):
        x = np.asarray(x, float)
        env = _x_env(x, d)
        if y is not None:
            env.update({f"y{i + 1}": y[..., i] for i in range(y.shape[-1])})
        if t is not None:
            env["t"] = t
        parts = [np.asarray(e(**env), float) for e in exprs]
        shape = np.broadcast_shapes(x.shape[:-1], *(p.shape for p in parts))
        return np.stack([np.broadcast_to(p, shape) for p in parts], axis=-1)

    return fn


@dataclass
class Scenario:
    source: str
    manifold: str
    manifold_params: dict
    d: int
    N: int
    rho: object
    lagrangian: str
    lam: float
    mu: float
    g: Optional[List[List[str]]]
    g_grid: Optional[list]
    body_load: Optional[List[str]]
    surface_load: Optional[List[str]]
    phi: List[str]
    V: List[str]
    clamp: List[str]
    dt: float
    steps: int
    scheme: str
    newton_iterations: int
    eps: List[float]
    suite: str
    raw: dict = field(default_factory=dict)

    # construction --------------------------------------------------------

    def chart(self):
        return geo.chart_from_name(self.manifold, **self.manifold_params)

    @property
    def m(self):
        return self.chart().dim

    def grid(self):
        rho = self.rho
        if isinstance(rho, str):
            e = Expression(rho, _variables(self.d))
            d = self.d
            return kin.BodyGrid(d, self.N, lambda x: e(**_x_env(x, d)))
        return kin.BodyGrid(self.d, self.N, float(rho))

    def reference_metric(self):
        d = self.d
        if self.g_grid is not None:
            values = np.asarray(self.g_grid, float)
            axes = [np.linspace(0, 1, values.shape[a]) for a in range(d)]
            return con.grid_metric_field(values, axes)
        if self.g is not None:
            exprs = [[Expression(s, _variables(d)) for s in row] for row in self.g]

            def g(x):
                env = _x_env(np.asarray(x, float), d)
                out = np.zeros(np.shape(x)[:-1] + (d, d))
                for a in range(d):
                    for b in range(d):
                        out[..., a, b] = exprs[a][b](**env)
                return out
            return g
        return None

    def lagrangian_object(self, chart=None):
        chart = chart or self.chart()
        if self.lagrangian == "svk-incompatible":
            return con.svk_incompatible_lagrangian(chart, self.reference_metric(), self.lam, self.mu)
        return con.lagrangian_from_name(self.lagrangian, chart)

    def density(self, grid=None, chart=None):
        grid = grid or self.grid()
        return con.from_lagrangian(self.lagrangian_object(chart), grid)

    def loading(self):
        if self.body_load is None and self.surface_load is None:
            return None
        m = self.m
        variables = _variables(self.d, m)

        def build(spec):
            if spec is None:
                return None
            fn = vector_function([Expression(s, variables) for s in spec], self.d, m)
            return lambda x, y: fn(x, y)

        return con.LoadingDensity(build(self.body_load), build(self.surface_load))

    def _initial(self, spec, t=None):
        grid = self.grid()
        fn = vector_function([Expression(s, _variables(self.d, time=True)) for s in spec],
                             self.d, len(spec))
        return fn(grid.x, t=0.0 if t is None else t)

    def phi0(self):
        return self._initial(self.phi)

    def V0(self):
        return self._initial(self.V)

    def is_prescribed_motion(self):
        return any(Expression(s, _variables(self.d, time=True)).uses("t") for s in self.phi)

    def motion(self, steps=None, dt=None):
        """kappa(t, x) from the phi expressions (stationary when they do not use t)."""
        chart = self.chart()
        grid = self.grid()
        steps = self.steps if steps is None else steps
        dt = self.dt if dt is None else dt
        fn = vector_function([Expression(s, _variables(self.d, time=True)) for s in self.phi],
                             self.d, chart.dim)
        t = dt * np.arange(steps + 1)
        vals = np.stack([fn(grid.x, t=float(tt)) for tt in t])
        return kin.Motion(chart, grid, vals, dt)

    def clamp_mask(self):
        if not self.clamp:
            return None
        grid = self.grid()
        mask = np.zeros(grid.shape, bool)
        for face in self.clamp:
            a = int(face[1]) - 1
            idx = [slice(None)] * grid.d
            idx[a] = 0 if face.endswith("-") else -1
            mask[tuple(idx)] = True
        return mask


def _load_text(path: Path):
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"parse error in {path} at line {exc.lineno}, column {exc.colno}: "
                                f"{exc.msg}") from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"parse error in {path}: {exc}") from None


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario; every problem found is reported at once."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    return scenario_from_dict(_load_text(path), str(path))


def scenario_from_dict(raw: dict, source: str = "<dict>") -> Scenario:
    problems: List[str] = []
    sec = {k: raw.get(k, {}) for k in ("manifold", "body", "material", "loading", "initial",
                                        "time", "newton", "verify")}
    for k, v in sec.items():
        if not isinstance(v, dict):
            problems.append(f"[{k}] must be a section")
            sec[k] = {}
    for k in raw:
        if k not in sec:
            problems.append(f"unknown section [{k}]")

    man = sec["manifold"]
    mname = str(man.get("name", ""))
    mparams = {k: v for k, v in man.items() if k != "name"}
    m = None
    try:
        m = geo.chart_from_name(mname, **mparams).dim
    except (KeyError, TypeError, ValueError):
        problems.append(f"manifold.name: unknown manifold {mname!r} "
                        f"(catalog: {', '.join(geo.CATALOG)})")

    body = sec["body"]
    d = body.get("d", 1)
    N = body.get("N", 33)
    if not isinstance(d, int) or d not in (1, 2):
        problems.append(f"body.d: unsupported body dimension {d!r} (d must be 1 or 2)")
        d = None
    if not isinstance(N, int) or N < 5:
        problems.append(f"body.N: need an integer >= 5, got {N!r}")
    if d is not None and m is not None and d > m:
        problems.append(f"dimension mismatch: body d={d} exceeds manifold m={m}")
    rho = body.get("rho", 1.0)

    mat = sec["material"]
    lagname = str(mat.get("lagrangian", "zero")).strip().lower()
    if lagname not in con.LAGRANGIAN_CATALOG:
        problems.append(f"material.lagrangian: unknown lagrangian {lagname!r} "
                        f"(catalog: {', '.join(con.LAGRANGIAN_CATALOG)})")

    init = sec["initial"]
    phi = init.get("phi")
    V = init.get("V", ["0"] * (m or 1))
    clamp = init.get("clamp", [])
    if phi is None:
        problems.append("initial.phi: missing")
        phi = []
    phi = [str(s) for s in (phi if isinstance(phi, list) else [phi])]
    V = [str(s) for s in (V if isinstance(V, list) else [V])]
    if m is not None:
        if len(phi) != m:
            problems.append(f"initial.phi: need {m} components, got {len(phi)}")
        if len(V) != m:
            problems.append(f"initial.V: need {m} components, got {len(V)}")
    for f in clamp:
        if f not in FACES or (d == 1 and f.startswith("x2")):
            problems.append(f"initial.clamp: unknown face {f!r}")

    tm = sec["time"]
    dt = tm.get("dt", 0.01)
    steps = tm.get("steps", 6)
    scheme = str(tm.get("scheme", "leapfrog"))
    if not isinstance(dt, (int, float)) or dt <= 0:
        problems.append(f"time.dt: must be positive, got {dt!r}")
    if not isinstance(steps, int) or steps < 1:
        problems.append(f"time.steps: must be a positive integer, got {steps!r}")
    if scheme not in ("leapfrog", "rk4"):
        problems.append(f"time.scheme: unknown scheme {scheme!r}")

    newton = sec["newton"]
    iterations = newton.get("iterations", 3)
    ver = sec["verify"]
    eps = ver.get("eps", list(DEFAULT_EPS))
    suite = str(ver.get("suite", "scenario"))
    if suite not in ("scenario", "acceptance"):
        problems.append(f"verify.suite: unknown suite {suite!r}")

    # expressions
    dd = d or 1
    mm = m or 1
    checks = [("body.rho", [rho] if isinstance(rho, str) else [], _variables(dd)),
              ("initial.phi", phi, _variables(dd, time=True)),
              ("initial.V", V, _variables(dd, time=True))]
    load = sec["loading"]
    for key in ("body", "surface"):
        spec = load.get(key)
        if spec is not None:
            spec = [str(s) for s in (spec if isinstance(spec, list) else [spec])]
            load[key] = spec
            if m is not None and len(spec) != m:
                problems.append(f"loading.{key}: need {m} components, got {len(spec)}")
            checks.append((f"loading.{key}", spec, _variables(dd, mm)))
    g = mat.get("g")
    if g is not None:
        if d is not None and (len(g) != d or any(len(r) != d for r in g)):
            problems.append(f"material.g: need a {d}x{d} array of expressions")
        else:
            checks.append(("material.g", [str(s) for r in g for s in r], _variables(dd)))
    for where, exprs, variables in checks:
        for s in exprs:
            try:
                Expression(s, variables)
            except ValueError as exc:
                problems.append(f"{where}: {exc}")

    if problems:
        raise ScenarioError(problems)
    return Scenario(source, mname, mparams, d, N, rho, lagname, float(mat.get("lam", 0.0)),
                    float(mat.get("mu", 1.0)), g, mat.get("g_grid"), load.get("body"),
                    load.get("surface"), phi, V, list(clamp), float(dt), int(steps), scheme,
                    int(iterations), [float(e) for e in eps], suite, raw)
