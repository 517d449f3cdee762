"""Covariant continuum dynamics of a body embedded in a Riemannian chart."""

from .constitutive import (ConstitutiveDensity, HyperelasticLagrangian, LoadingDensity,
                           from_lagrangian, lagrangian_from_name)
from .dynamics import equilibrium_residual, interior_residual, residual, simulate
from .errors import CovdynError
from .geometry import SpaceChart, chart_from_name, euclidean, exp_map, half_plane, sphere
from .kinematics import BodyGrid, Motion
from .linearize import apply_linearized, coefficient_fields, newton_solve, newton_step
from .oracle import DefectReport, fd_force_derivative
from .scenario import Scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "BodyGrid", "ConstitutiveDensity", "CovdynError", "DefectReport", "HyperelasticLagrangian",
    "LoadingDensity", "Motion", "Scenario", "SpaceChart", "apply_linearized", "chart_from_name",
    "coefficient_fields", "equilibrium_residual", "euclidean", "exp_map", "fd_force_derivative",
    "from_lagrangian", "half_plane", "interior_residual", "lagrangian_from_name",
    "newton_solve", "newton_step", "parse_scenario", "residual", "simulate", "sphere",
]
