"""Feasibility projection and shielding methods."""

from .constraints import ConstraintSet
from .projection import (ASSIGNMENTS, INFEASIBLE_DISTANCE, NoFeasibleActionError, ProjectionResult,
                         SlpConfig, project, safety_distance, solve_assignment)
from .qp import solve_box_hyperplane_qp
from .shield import METHODS, SafetyConfig, SafetyLayer, ShieldResult, shaped_tuples, shield

__all__ = ["ASSIGNMENTS", "ConstraintSet", "INFEASIBLE_DISTANCE", "NoFeasibleActionError", "ProjectionResult",
           "SlpConfig", "project", "safety_distance", "solve_assignment",
           "solve_box_hyperplane_qp", "METHODS", "SafetyConfig", "SafetyLayer", "ShieldResult",
           "shaped_tuples", "shield"]
