import warnings

import numpy as np
import pytest

from scenopt.sizing import pd_grid_count
from scenopt.uncertainty import (AffineMap, Box, EmptySetError, EndogenousSet, GridCapError,
                                 Polytope, RankDeficiencyWarning, RejectionEfficiencyError,
                                 ScenarioSet, SingularMapError, Source, UnboundedSetError,
                                 fit_affine_map, grid_samples, reformulate_enu, sample_uniform)

TRIANGLE = (np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
            np.array([0.0, 0.0, 1.0, 1.0, 1.0]))


def test_box_sampling_deterministic():
    box = Box([0.0], [1.0])
    a = sample_uniform(box, 3, seed=42)
    b = sample_uniform(box, 3, seed=42)
    assert len(a) == 3
    np.testing.assert_array_equal(a.points, b.points)
    assert a.check(box)
    assert a.source is Source.RANDOM_UNIFORM and a.seed == 42


def test_triangle_rejection():
    tri = Polytope(*TRIANGLE)
    np.testing.assert_allclose(tri.bounding_box.lower, [0, 0], atol=1e-12)
    np.testing.assert_allclose(tri.bounding_box.upper, [1, 1], atol=1e-12)
    s = sample_uniform(tri, 1000, seed=1)
    assert np.all(s.points.sum(axis=1) <= 1 + 1e-9)
    assert s.check(tri)
    # acceptance from the unit square is the area ratio 1/2
    cand = np.random.default_rng(5).uniform(0, 1, size=(200_000, 2))
    assert tri.contains(cand).mean() == pytest.approx(0.5, abs=0.005)
    # uniform law: each coordinate has marginal density 2(1 - u), mean 1/3
    big = sample_uniform(tri, 20_000, seed=2)
    np.testing.assert_allclose(big.points.mean(axis=0), [1 / 3, 1 / 3], atol=0.01)


def test_polytope_errors():
    with pytest.raises(EmptySetError):
        Polytope([[1.0], [-1.0]], [0.0, -1.0])  # u <= 0 and u >= 1
    with pytest.raises(UnboundedSetError):
        Polytope([[1.0]], [1.0])
    with pytest.raises(EmptySetError):
        Box([1.0], [0.0])
    with pytest.raises(UnboundedSetError):
        Box([0.0], [np.inf])


def test_degenerate_polytope_rejected():
    # thin sliver inside a unit box: acceptance far below 1e-4
    G = [[1.0, 1.0], [-1.0, -1.0], [1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0]]
    g0 = [1.0, -1.0 + 1e-7, 1.0, 0.0, 1.0, 0.0]
    with pytest.raises(RejectionEfficiencyError):
        sample_uniform(Polytope(G, g0), 10, seed=0)


def test_grid_samples():
    g = grid_samples([(0.0, 1.0)], 5)
    np.testing.assert_allclose(g.points[:, 0], [0, 0.25, 0.5, 0.75, 1.0])
    assert g.source is Source.PD_GRID
    assert len(grid_samples([(0.0, 1.0)] * 4, 5)) == 625
    mid = grid_samples([(2.0, 4.0)], 1)
    assert mid.points[0, 0] == 3.0
    for m, b in [(1, 3), (3, 4), (5, 2)]:
        assert len(grid_samples([(0, 1)] * m, b)) == pd_grid_count(b, m).exact


def test_grid_cap_reports_count():
    with pytest.raises(GridCapError) as err:
        grid_samples([(0.0, 1.0)] * 42, 5, cap=10**6)
    count = err.value.count
    assert float(count) == pytest.approx(5.0**42, rel=1e-12)


def test_csv_roundtrip(tmp_path):
    s = sample_uniform(Box([0, -1], [1, 1]), 7, seed=9, names=("a", "b"))
    back = ScenarioSet.from_csv(s.to_csv(tmp_path / "s.csv"))
    np.testing.assert_array_equal(back.points, s.points)
    assert back.names == ("a", "b") and back.seed == 9 and back.source is s.source
    assert ScenarioSet.from_csv(tmp_path / "s.csv").points.shape == (7, 2)


def test_reformulate_hand_example():
    # V(x) = {|v - 0.5x| <= 1}, v = 2x  ->  |0.75 v| <= 1
    env = EndogenousSet([[1.0], [-1.0]], [[-0.5], [0.5]], [1.0, 1.0])
    vp = reformulate_enu(env, AffineMap([[2.0]], [0.0]))
    np.testing.assert_allclose(vp.bounding_box.lower, [-4 / 3], atol=1e-9)
    np.testing.assert_allclose(vp.bounding_box.upper, [4 / 3], atol=1e-9)


def test_reformulate_decoupled_set_is_unchanged():
    G, g0 = TRIANGLE
    env = EndogenousSet(G, np.zeros((5, 2)), g0)
    vp = reformulate_enu(env, AffineMap([[2.0, 1.0], [0.0, 3.0]], [1.0, -1.0]))
    np.testing.assert_allclose(vp.G, G)
    np.testing.assert_allclose(vp.g0, g0)


def test_reformulate_collapse_is_unbounded():
    env = EndogenousSet([[1.0], [-1.0]], [[-1.0], [1.0]], [0.2, 0.2])
    with pytest.raises(UnboundedSetError):
        reformulate_enu(env, AffineMap([[1.0]], [0.0]))


def test_reformulate_empty_and_singular():
    env = EndogenousSet([[1.0], [-1.0]], [[0.0], [0.0]], [-1.0, 0.0])
    with pytest.raises(EmptySetError):
        reformulate_enu(env, AffineMap([[1.0]], [0.0]))
    env2 = EndogenousSet(np.eye(2), np.eye(2), np.ones(2))
    with pytest.raises(SingularMapError):
        reformulate_enu(env2, AffineMap([[1.0, 1.0], [1.0, 1.0]], [0.0, 0.0]))
    with pytest.raises(SingularMapError):
        reformulate_enu(env2, AffineMap(np.eye(2), np.zeros(2)), K=np.zeros((2, 2)))


def reformulation_membership(rng, J=3):
    """Random invertible instance; checks v in V' iff v in V(h^-1(v)) on 1000 points."""
    Gv = rng.normal(size=(2 * J + 2, J))
    Gx = 0.3 * rng.normal(size=(2 * J + 2, J))
    box = np.vstack([np.eye(J), -np.eye(J)])
    Gv = np.vstack([Gv, box])
    Gx = np.vstack([Gx, np.zeros((2 * J, J))])
    g0 = np.concatenate([rng.uniform(1, 2, size=2 * J + 2), np.full(2 * J, 3.0)])
    env = EndogenousSet(Gv, Gx, g0)
    h = AffineMap(rng.normal(size=(J, J)) + 3 * np.eye(J), rng.normal(size=J))
    vp = reformulate_enu(env, h)
    pts = rng.uniform(-3.5, 3.5, size=(1000, J))
    mine = vp.contains(pts)
    ref = np.array([env.contains(v, h.inverse(v)) for v in pts])
    return mine, ref


def test_reformulation_membership_property(rng):
    for _ in range(5):
        mine, ref = reformulation_membership(rng)
        np.testing.assert_array_equal(mine, ref)


def test_fit_exact():
    xs = np.linspace(-2, 5, 10)
    fit = fit_affine_map([(x, 3 * x + 1) for x in xs])
    assert fit.map.A[0, 0] == pytest.approx(3.0, abs=1e-9)
    assert fit.map.b[0] == pytest.approx(1.0, abs=1e-9)
    assert fit.rms <= 1e-9 and not fit.ridge


def test_fit_noisy_matches_normal_equations():
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 1, size=1000)
    v = 3 * x + 1 + rng.normal(0, 0.01, size=1000)
    fit = fit_affine_map(X=x, V=v)
    D = np.column_stack([x, np.ones_like(x)])
    coef = np.linalg.solve(D.T @ D, D.T @ v)
    assert fit.map.A[0, 0] == pytest.approx(coef[0], abs=1e-10)
    assert fit.map.b[0] == pytest.approx(coef[1], abs=1e-10)
    assert abs(fit.map.A[0, 0] - 3) <= 0.01 and abs(fit.map.b[0] - 1) <= 0.01


def test_fit_multivariate_noiseless(rng):
    A = rng.normal(size=(2, 3))
    b = rng.normal(size=2)
    X = rng.normal(size=(20, 3))
    fit = fit_affine_map(X=X, V=X @ A.T + b)
    np.testing.assert_allclose(fit.map.A, A, atol=1e-8)
    np.testing.assert_allclose(fit.map.b, b, atol=1e-8)


def test_fit_rank_deficient_warns():
    with pytest.warns(RankDeficiencyWarning):
        fit = fit_affine_map([(1.0, 2.0), (1.0, 2.0)])
    assert fit.ridge
    with pytest.raises(ValueError):
        fit_affine_map([(1.0, 2.0)])


def test_affine_map_helpers():
    h = AffineMap([[2.0, 0.0], [0.0, 4.0]], [1.0, 1.0])
    np.testing.assert_allclose(h.inverse(h([3.0, -1.0])), [3.0, -1.0])
    p = h.padded(2)
    assert p.n == 4
    np.testing.assert_allclose(p([3.0, -1.0, 9.0, 9.0]), h([3.0, -1.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not AffineMap([[1.0, 2.0]], [0.0]).is_invertible()
