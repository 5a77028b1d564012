"""A-posteriori checks: out-of-sample violation, support scenarios, pruning.

Also hosts ``confidence_trial``, a Monte Carlo harness that repeatedly draws
the prescribed number of scenarios for an analytic family, solves, and counts
how often the true violation probability of the scenario optimum exceeds
alpha.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .program import FIXED, ConstraintTemplate, ConvexProgram, ScenarioProgram, build_deterministic
from .sizing import ChanceSpec, min_scenarios
from .solver import Solution, SolverConfig, Status, solve_convex
from .uncertainty import ScenarioSet, derive_seed


class ProvenanceError(ValueError):
    pass


def default_fresh_count(alpha: float) -> int:
    """Fresh-sample size giving about ten expected violations at level alpha."""
    return max(math.ceil(10.0 / alpha), 1000)


@dataclass
class ViolationReport:
    alpha_hat: float
    trials: int
    violated: int
    per_row_rates: np.ndarray

    def to_dict(self):
        return {"alpha_hat": self.alpha_hat, "trials": self.trials, "violated": self.violated,
                "per_row_rates": [float(r) for r in self.per_row_rates]}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["alpha_hat"]), int(d["trials"]), int(d["violated"]),
                   np.asarray(d["per_row_rates"], dtype=float))


@dataclass
class SupportReport:
    """Scenarios owning at least one active row at the optimum.

    ``degenerate`` marks optima with more active rows than variables; there
    the count may legitimately exceed n (tied or duplicated scenarios) and
    ``note`` says so. ``basis_indices`` are the scenarios owning rows of the
    final simplex basis: a tie-broken support of at most n scenarios that
    alone reproduces the optimum. ``objective`` is kept for drift
    computations. Only the first four fields are serialized.
    """

    support_indices: list
    count: int
    n: int
    proposition_holds: bool
    degenerate: bool = False
    note: str = ""
    basis_indices: list = field(default_factory=list)
    objective: float = field(default=math.nan, repr=False)

    def to_dict(self):
        return {"support_indices": [int(i) for i in self.support_indices], "count": self.count,
                "n": self.n, "proposition_holds": self.proposition_holds}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["support_indices"]), int(d["count"]), int(d["n"]),
                   bool(d["proposition_holds"]))


def _split_fresh(template: ConstraintTemplate, fresh, fresh_enu):
    if isinstance(fresh, tuple):
        fresh, fresh_enu = fresh
    pts = fresh.points if isinstance(fresh, ScenarioSet) else np.atleast_2d(fresh)
    if fresh_enu is not None:
        V = fresh_enu.points if isinstance(fresh_enu, ScenarioSet) else np.atleast_2d(fresh_enu)
        return pts, V
    N = pts.shape[0]
    if template.I == pts.shape[1]:
        return pts, np.zeros((N, template.J))
    if template.I == 0 and template.J == pts.shape[1]:
        return np.zeros((N, 0)), pts
    raise ValueError(f"fresh scenarios have dimension {pts.shape[1]}; template expects "
                     f"I={template.I}, J={template.J}")


def empirical_violation(template: ConstraintTemplate, x_star, fresh, fresh_enu=None,
                        feas_tol: float = 1e-8) -> ViolationReport:
    """Fraction of fresh scenarios at which some template row exceeds feas_tol.

    ``fresh`` holds exogenous scenarios (or endogenous ones when the template
    has no exogenous inputs); pass ``fresh_enu`` or a ``(u, v)`` tuple for
    templates that take both.
    """
    U, V = _split_fresh(template, fresh, fresh_enu)
    N = U.shape[0]
    if N == 0:
        return ViolationReport(0.0, 0, 0, np.zeros(template.rows_per_scenario))
    res = template.residuals(x_star, U, V)
    bad = res > feas_tol
    violated = int(bad.any(axis=1).sum())
    return ViolationReport(violated / N, N, violated, bad.sum(axis=0) / N)


def support_scenarios(prog: ConvexProgram, sol: Solution, n: int | None = None) -> SupportReport:
    """Map the active rows of an optimal solution to scenario indices.

    ``n`` defaults to the program's support dimension, or its variable count.
    """
    if sol.status is not Status.OPTIMAL:
        raise ValueError(f"support needs an optimal solution, got {sol.status.value}")
    prov = prog.provenance
    if prov is None or prov.shape[0] != prog.n_rows:
        raise ProvenanceError("program carries no row provenance")
    if n is None:
        n = prog.dim_hint if prog.dim_hint is not None else prog.n
    rows = np.asarray(sorted(sol.active_rows), dtype=np.int64)
    scen = prov[rows, 0] if rows.size else np.zeros(0, dtype=np.int64)
    support = sorted(set(int(s) for s in scen if s != FIXED))
    basis = sorted(set(int(prov[r, 0]) for r in sol.basis_rows if prov[r, 0] != FIXED))
    count = len(support)
    degenerate = rows.size > prog.n
    note = ""
    if degenerate:
        note = (f"{rows.size} active rows for {prog.n} variables; tied or duplicated "
                f"scenarios may all be reported")
    return SupportReport(support, count, int(n), count <= n, degenerate, note, basis,
                         float(sol.objective))


def _empty_template(t: ConstraintTemplate) -> ConstraintTemplate:
    return ConstraintTemplate(np.zeros((0, t.n)), np.zeros(0), I=0, J=0)


def prune_and_resolve(sp: ScenarioProgram, report: SupportReport, cfg: SolverConfig | None = None):
    """Re-solve with only the support scenarios; return (solution, |objective drift|)."""
    cfg = cfg or SolverConfig()
    if report.support_indices:
        pruned = sp.restricted(report.support_indices)
    else:
        pruned = replace(sp, template=_empty_template(sp.template), exo_scenarios=None,
                         enu_scenarios=None, mode="Plain", mapping=None)
    sol = solve_convex(build_deterministic(pruned), cfg)
    drift = abs(sol.objective - report.objective) if sol.optimal else math.inf
    return sol, float(drift)


# analytic families for confidence_trial

class MaxUniform1D:
    """min x s.t. x >= u, u ~ U[0, 1]; violation probability of x is 1 - x."""

    n = 1

    def sample(self, count, rng):
        return rng.uniform(0.0, 1.0, size=(count, 1))

    def program(self, U):
        tmpl = ConstraintTemplate([[-1.0]], [0.0], Fu=[[1.0]])
        return ScenarioProgram([1.0], tmpl, ScenarioSet(U))

    def violation(self, x):
        return float(1.0 - min(max(x[0], 0.0), 1.0))


class MaxUniform2D:
    """min x1 + x2 s.t. x >= u componentwise, u ~ U[0, 1]^2; violation is 1 - x1 x2."""

    n = 2

    def sample(self, count, rng):
        return rng.uniform(0.0, 1.0, size=(count, 2))

    def program(self, U):
        tmpl = ConstraintTemplate(-np.eye(2), np.zeros(2), Fu=np.eye(2))
        return ScenarioProgram([1.0, 1.0], tmpl, ScenarioSet(U))

    def violation(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return float(1.0 - x[0] * x[1])


FAMILIES = {"max-uniform-1d": MaxUniform1D, "max-uniform-2d": MaxUniform2D}


@dataclass
class TrialResult:
    exceed_fraction: float
    exceedances: int
    trials: int
    N: int
    violations: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"exceed_fraction": self.exceed_fraction, "exceedances": self.exceedances,
                "trials": self.trials, "N": self.N}


def _one_trial(args):
    generator, N, seed, cfg = args
    rng = np.random.default_rng(seed)
    sp = generator.program(generator.sample(N, rng))
    sol = solve_convex(build_deterministic(sp), cfg)
    if not sol.optimal:
        raise RuntimeError(f"trial with seed {seed} ended {sol.status.value}")
    return generator.violation(sol.x)


def confidence_trial(spec: ChanceSpec, generator="max-uniform-1d", trials: int = 200,
                     seed: int = 0, workers: int | None = None,
                     cfg: SolverConfig | None = None) -> TrialResult:
    """Fraction of trials whose scenario optimum violates with probability > alpha.

    Each trial draws ``min_scenarios(spec)`` scenarios with seed
    ``seed + i``; the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be a positive integer")
    if isinstance(generator, str):
        generator = FAMILIES[generator]()
    cfg = cfg or SolverConfig()
    N = min_scenarios(spec)
    jobs = [(generator, N, derive_seed(seed, i), cfg) for i in range(trials)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            viol = list(pool.map(_one_trial, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        viol = [_one_trial(j) for j in jobs]
    viol = np.asarray(viol)
    exceed = int((viol > spec.alpha).sum())
    return TrialResult(exceed / trials, exceed, trials, N, viol)
