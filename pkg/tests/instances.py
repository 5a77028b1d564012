"""Seeded random problem generators shared by tests."""
import numpy as np

from scenopt.program import ConstraintTemplate, ScenarioProgram
from scenopt.uncertainty import ScenarioSet


def random_scenario_lp(seed, n=None, N=None, I=2, box=10.0):
    """Feasible, bounded scenario LP with coefficients affine in u ~ U[0,1]^I.

    Row per scenario: ``(g + sum_k u_k G_k) . x <= 1 + 0.1 sum_k u_k``; x = 0 is
    strictly feasible and the fixed box ``|x_i| <= box`` bounds the program.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9)) if n is None else n
    N = int(rng.integers(5, 201)) if N is None else N
    g = rng.normal(size=(1, n))
    Fxu = rng.normal(size=(I, 1, n))
    tmpl = ConstraintTemplate(g, [1.0], Fu=-0.1 * np.ones((1, I)), Fxu=Fxu)
    U = rng.uniform(0, 1, size=(N, I))
    fixed_A = np.vstack([np.eye(n), -np.eye(n)])
    fixed_b = np.full(2 * n, box)
    return ScenarioProgram(rng.normal(size=n), tmpl, ScenarioSet(U),
                           fixed_A=fixed_A, fixed_b=fixed_b)
