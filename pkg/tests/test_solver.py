import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog as highs

from oracles import random_bounded_lp, vertex_enumeration
from scenopt import _kernels
from scenopt.program import ConvexProgram, QuadRow
from scenopt.solver import SolverConfig, Status, active_rows, linprog, solve_convex, solve_lp

BACKENDS = sorted(_kernels.backends())


def _highs(c, A, b):
    r = highs(c, A_ub=A, b_ub=b, bounds=[(None, None)] * len(c), method="highs")
    return r


@pytest.mark.parametrize("backend", BACKENDS)
def test_random_lps_match_highs(backend):
    rng = np.random.default_rng(3)
    cfg = SolverConfig(backend=backend)
    for _ in range(40):
        n = int(rng.integers(2, 12))
        m = int(rng.integers(n, 80))
        c, A, b = random_bounded_lp(rng, n, m)
        sol = linprog(c, A, b, cfg)
        ref = _highs(c, A, b)
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
        assert sol.max_violation <= 1e-8


def test_vertex_enumeration_small(rng):
    for _ in range(20):
        n = int(rng.integers(1, 4))
        c, A, b = random_bounded_lp(rng, n, int(rng.integers(1, 6)))
        ref, _ = vertex_enumeration(c, A, b)
        assert linprog(c, A, b).objective == pytest.approx(ref, abs=1e-8)


def test_duals_certify_optimality(rng):
    c, A, b = random_bounded_lp(rng, 5, 30)
    sol = linprog(c, A, b)
    y = sol.duals
    assert np.all(y >= -1e-10)
    # stationarity c + A'y = 0 and strong duality
    np.testing.assert_allclose(c + A.T @ y, 0, atol=1e-9)
    assert -b @ y == pytest.approx(sol.objective, abs=1e-9)


def test_basis_rows_reproduce_optimum(rng):
    c, A, b = random_bounded_lp(rng, 4, 40)
    sol = linprog(c, A, b)
    rows = list(sol.basis_rows)
    assert len(rows) <= 4
    sub = linprog(c, A[rows], b[rows])
    assert sub.objective == pytest.approx(sol.objective, abs=1e-9)


def test_infeasible():
    A = np.array([[1.0], [-1.0]])
    b = np.array([-1.0, -1.0])  # x <= -1 and x >= 1
    assert linprog([1.0], A, b).status is Status.INFEASIBLE


def test_unbounded_has_ray():
    A = np.array([[-1.0, 0.0]])
    sol = linprog([1.0, 1.0], A, [0.0])
    assert sol.status is Status.UNBOUNDED
    assert sol.ray is not None
    d = sol.ray
    assert np.array([1.0, 1.0]) @ d < 0
    assert np.all(A @ d <= 1e-12)


def test_no_rows_zero_cost():
    sol = linprog([0.0, 0.0], np.zeros((0, 2)), np.zeros(0))
    assert sol.status is Status.OPTIMAL and sol.objective == 0.0


def test_zero_row_with_negative_rhs_infeasible():
    A = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert linprog([1.0, 0.0], A, [-1.0, 1.0]).status is Status.INFEASIBLE


def test_degenerate_cycling_example():
    # Beale's example in inequality form; Dantzig pricing without anti-cycling loops here
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0],
                  [0.5, -90.0, -0.02, 3.0],
                  [0.0, 0.0, 1.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    A = np.vstack([A, -np.eye(4)])
    b = np.concatenate([b, np.zeros(4)])
    sol = linprog(c, A, b)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(-0.05, abs=1e-10)


def test_iteration_limit():
    rng = np.random.default_rng(0)
    c, A, b = random_bounded_lp(rng, 8, 60)
    sol = linprog(c, A, b, SolverConfig(max_pivots=2))
    assert sol.status is Status.ITER_LIMIT


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(feas_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(max_cuts=0)
    with pytest.raises(ValueError):
        linprog([1.0], [[1.0]], [1.0], SolverConfig(backend="fortran"))


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_backends_agree_bitwise_on_status_and_closely_on_value():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        c, A, b = random_bounded_lp(rng, n, int(rng.integers(n, 60)))
        s1 = linprog(c, A, b, SolverConfig(backend="python"))
        s2 = linprog(c, A, b, SolverConfig(backend="cython"))
        assert s1.status == s2.status
        assert s1.objective == pytest.approx(s2.objective, abs=1e-10)
        assert s1.basis_rows == s2.basis_rows


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 6), m=st.integers(0, 30))
def test_property_optimal_is_feasible_and_beats_samples(seed, n, m):
    rng = np.random.default_rng(seed)
    c, A, b = random_bounded_lp(rng, n, m)
    sol = linprog(c, A, b)
    assert sol.status is Status.OPTIMAL
    assert np.all(A @ sol.x <= b + 1e-8)
    # any feasible point from the box corner search must not beat the optimum
    pts = rng.uniform(-10, 10, size=(200, n))
    feas = pts[np.all(pts @ A.T <= b, axis=1)]
    if feas.size:
        assert np.min(feas @ c) >= sol.objective - 1e-8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), extra=st.integers(1, 20))
def test_property_adding_rows_never_improves(seed, extra):
    rng = np.random.default_rng(seed)
    c, A, b = random_bounded_lp(rng, 3, 10)
    base = linprog(c, A, b).objective
    A2 = np.vstack([A, rng.normal(size=(extra, 3))])
    b2 = np.concatenate([b, rng.uniform(0.5, 3.0, size=extra) + np.abs(A2[-extra:]).sum(1)])
    sol = linprog(c, A2, b2)
    assert sol.objective >= base - 1e-9


def test_active_rows_consistent(rng):
    c, A, b = random_bounded_lp(rng, 3, 20)
    prog = ConvexProgram(3, c, A, b)
    sol = solve_lp(prog)
    act = active_rows(prog, sol.x, 1e-7)
    assert set(sol.basis_rows) <= set(act)
    with pytest.raises(ValueError):
        active_rows(prog, np.zeros(2), 1e-7)


def test_solve_lp_rejects_quadratic():
    prog = ConvexProgram(1, [1.0], np.zeros((0, 1)), [], quad=(QuadRow([[1.0]], [0.0], -1.0),))
    with pytest.raises(ValueError):
        solve_lp(prog)


# closed-form convex quadratic instances

def test_quad_interval():
    # (x - 6)^2 <= 4 -> x in [4, 8]
    q = QuadRow([[1.0]], [-12.0], 32.0)
    sol = solve_convex(ConvexProgram(1, [1.0], np.zeros((0, 1)), [], quad=(q,)))
    assert sol.optimal
    assert sol.objective == pytest.approx(4.0, abs=1e-4)


def test_quad_parabola():
    # min y s.t. y >= x^2 - x + 0.75, minimum 0.5 at x = 0.5
    q = QuadRow([[1.0, 0.0], [0.0, 0.0]], [-1.0, -1.0], 0.75)
    sol = solve_convex(ConvexProgram(2, [0.0, 1.0], np.zeros((0, 2)), [], quad=(q,)))
    assert sol.objective == pytest.approx(0.5, abs=1e-4)
    assert sol.x[0] == pytest.approx(0.5, abs=1e-2)


def test_quad_disk():
    q = QuadRow(np.eye(2), [0.0, 0.0], -1.0)
    sol = solve_convex(ConvexProgram(2, [1.0, 1.0], np.zeros((0, 2)), [], quad=(q,)))
    assert sol.objective == pytest.approx(-math.sqrt(2), abs=1e-4)
    assert sol.cuts >= 1
    assert sol.max_violation <= 1e-6


def test_quad_infeasible():
    q1 = QuadRow([[1.0]], [0.0], -1.0)  # |x| <= 1
    A = np.array([[-1.0]])
    sol = solve_convex(ConvexProgram(1, [1.0], A, [-2.0], quad=(q1,)))
    assert sol.status is Status.INFEASIBLE


def test_quadrow_rejects_nonconvex():
    with pytest.raises(ValueError):
        QuadRow([[-1.0]], [0.0])
    with pytest.raises(ValueError):
        QuadRow(np.eye(2), [0.0])
