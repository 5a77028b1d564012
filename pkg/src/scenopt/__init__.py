"""Scenario programming under exogenous and decision-dependent uncertainty."""
__version__ = "0.1.0"

from ._kernels import BACKEND
from .posterior import (SupportReport, ViolationReport, confidence_trial, empirical_violation,
                        prune_and_resolve, support_scenarios)
from .program import (ConstraintTemplate, ConvexProgram, Mode, QuadRow, ScenarioProgram,
                      build_deterministic, epigraph_objective)
from .sizing import (BigCount, ChanceSpec, ScenarioCapError, binomial_tail, implied_dimension,
                     min_scenarios, pd_grid_count)
from .solver import Solution, SolverConfig, Status, active_rows, solve_convex, solve_lp
from .uncertainty import (AffineMap, Box, EndogenousSet, Polytope, ScenarioSet, fit_affine_map,
                          grid_samples, reformulate_enu, sample_uniform)
