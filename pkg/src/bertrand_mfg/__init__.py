"""Bertrand/Cournot mean field game solver with an a priori estimate audit."""

from .audit import AuditReport, audit_all
from .core import ConfigurationError, Discretization, Grid, ModelParams, build_grid
from .coupling import Solution, continuation_solve, picard_solve, uniqueness_experiment
from .kernels import BACKEND

__all__ = [
    "AuditReport",
    "BACKEND",
    "ConfigurationError",
    "Discretization",
    "Grid",
    "ModelParams",
    "Solution",
    "audit_all",
    "build_grid",
    "continuation_solve",
    "picard_solve",
    "uniqueness_experiment",
]
