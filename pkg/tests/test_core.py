import numpy as np
import pytest

from qeq.core import (
    AffineClamp,
    Builtin,
    ConstantMap,
    ConvexRegion,
    DimensionMismatch,
    ExplosionGuard,
    InclusionViolated,
    MovingBox,
    Numerics,
    ProblemInstance,
    Quadratic,
    co_sampler,
    contains,
    evaluate_map,
    glue_maps,
    grid_points,
    project,
    restrict_to_ball,
)
from qeq.reductions import AffineOperator, qvi_to_qep

INF = np.inf
I = ConvexRegion.interval


def halfplane_box():
    # [0,1]^2 ∩ {x + y <= 1}
    return ConvexRegion(np.zeros(2), np.ones(2), np.array([[1.0, 1.0]]), np.array([1.0]))


def brute_projection(R, p, h=1e-3):
    G = grid_points(R, h, 2.0)
    return G[np.argmin(np.linalg.norm(G - p, axis=1))]


class TestContains:
    def test_half_line(self):
        assert contains(I(1, INF), [7.0])

    def test_ball(self):
        assert not contains(ConvexRegion.closed_ball(2.0, n=2), [3.0, 0.0])

    def test_halfspace_boundary(self):
        R = ConvexRegion(-INF * np.ones(2), INF * np.ones(2), np.array([[1.0, 1.0]]), np.array([1.0]))
        assert contains(R, [0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            contains(I(0, 1), [0.0, 0.0])


class TestProject:
    def test_clamp(self):
        assert project(I(1, INF), [-3.0]) == pytest.approx([1.0])

    def test_ball_radial(self):
        q = project(ConvexRegion.closed_ball(2.0, n=2), [2.0, 2.0])
        assert q == pytest.approx([np.sqrt(2), np.sqrt(2)], abs=1e-9)

    def test_box_halfspace_matches_brute_force(self):
        R = halfplane_box()
        expected = brute_projection(R, np.array([1.0, 1.0]))
        assert expected == pytest.approx([0.5, 0.5], abs=1e-3)
        assert project(R, [1.0, 1.0]) == pytest.approx(expected, abs=1e-3)

    def test_box_ball_exact(self):
        R = ConvexRegion.box([0, 0], [INF, INF]).with_ball(1.0)
        assert project(R, [3.0, -1.0]) == pytest.approx([1.0, 0.0], abs=1e-9)


class TestGridPoints:
    def test_unit_interval(self):
        assert grid_points(I(0, 1), 0.5, 10).ravel().tolist() == [0.0, 0.5, 1.0]

    def test_half_line(self):
        assert grid_points(I(1, INF), 1.0, 2.5).ravel().tolist() == [1.0, 2.0]

    def test_disc(self):
        G = grid_points(ConvexRegion.closed_ball(1.0, n=2), 1.0, 2.0)
        assert {tuple(p) for p in G} == {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}

    def test_lexicographic(self):
        G = grid_points(ConvexRegion.box([0, 0], [1, 1]), 0.5, 5)
        assert [tuple(p) for p in G] == sorted(tuple(p) for p in G)

    def test_guard(self):
        with pytest.raises(ExplosionGuard):
            grid_points(ConvexRegion.whole(2), 1e-3, 1e3)


class TestMaps:
    def test_constant_half_line(self):
        V = evaluate_map(ConstantMap(I(1, INF), 1), [7.0])
        assert V.lo[0] == 1.0 and np.isinf(V.hi[0])

    def test_moving_box(self):
        K = MovingBox(AffineClamp([[0.5]], [0.0], [0.0], [1.0]), AffineClamp([[0.5]], [1.0], [1.0], [2.0]))
        V = evaluate_map(K, [1.0])
        assert (V.lo[0], V.hi[0]) == (0.5, 1.5)

    def test_restrict_half_line(self):
        K = restrict_to_ball(ConstantMap(I(1, INF), 1), 2.0)
        for x in (-5.0, 0.0, 3.0):
            V = evaluate_map(K, [x])
            assert V.contains([1.0]) and V.contains([2.0]) and not V.contains([2.01])
            assert not V.contains([0.99])

    def test_restrict_superset_ball(self):
        K = restrict_to_ball(ConstantMap(I(-1, 1), 1), 5.0)
        G = grid_points(evaluate_map(K, [0.3]), 0.25, 10)
        assert G.ravel().tolist() == grid_points(I(-1, 1), 0.25, 10).ravel().tolist()

    def test_restrict_empty(self):
        K = restrict_to_ball(ConstantMap(I(1, INF), 1), 0.5)
        assert all(evaluate_map(K, [x]).is_empty() for x in (-1.0, 0.0, 4.0))

    def test_glued(self):
        A = I(-INF, 0, open=True)
        J = glue_maps(A, ConstantMap(I(0, 0), 1), ConstantMap(I(0, 1), 1))
        assert evaluate_map(J, [-0.5]).same_as(I(0, 0))
        assert evaluate_map(J, [0.0]).same_as(I(0, 1))
        assert evaluate_map(J, [0.7]).same_as(I(0, 1))

    def test_glue_inclusion_violation(self):
        with pytest.raises(InclusionViolated):
            glue_maps(I(-1, 0), ConstantMap(I(0, 2), 1), ConstantMap(I(0, 1), 1))


class TestCoSampler:
    def test_singleton(self):
        Q = co_sampler([[3.0, -1.0]], 7, seed=1)
        assert np.allclose(Q, [3.0, -1.0])

    def test_midpoint(self):
        P = np.array([[0.0], [2.0]])
        assert (np.array([0.5, 0.5]) @ P)[0] == 1.0

    def test_hull_bound_and_weights(self):
        P = np.array([[0.0, 1.0], [2.0, -1.0], [1.0, 3.0]])
        Q, W = co_sampler(P, 50, seed=3, return_weights=True)
        assert np.all(Q >= P.min(axis=0) - 1e-12) and np.all(Q <= P.max(axis=0) + 1e-12)
        assert np.allclose(W.sum(axis=1), 1.0) and np.all(W >= 0)
        assert np.abs(W @ P - Q).max() <= 1e-12

    def test_deterministic(self):
        P = np.eye(3)
        assert np.array_equal(co_sampler(P, 5, seed=9), co_sampler(P, 5, seed=9))


class TestBifunctions:
    def test_quadratic(self):
        f = Quadratic.zeros(1, P=[[-1.0]], Q=[[1.0]])
        assert f([1.0], [2.0]) == pytest.approx(3.0)

    def test_factor_vanishes(self):
        f = Quadratic.zeros(1, P=[[-1.0]], R=[[1.0]], c=[1.0], d=[-1.0])
        assert all(f([1.0], [y]) == pytest.approx(0.0) for y in (-3.0, 0.0, 2.5))

    def test_f_T_singleton(self):
        f = qvi_to_qep(AffineOperator(([[1.0]],), ([-2.0],)))
        assert f([1.0], [2.0]) == pytest.approx(-1.0)

    def test_quadratic_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(0)
        f = Quadratic(*(rng.normal(size=(2, 2)) for _ in range(3)), rng.normal(size=2), rng.normal(size=2), 0.3)
        x, y = rng.normal(size=2), rng.normal(size=2)
        assert f.grad_y(x, y) == pytest.approx(f._fd(x, y, 1), abs=1e-5)
        assert f.grad_x(x, y) == pytest.approx(f._fd(x, y, 0), abs=1e-5)

    def test_builtins(self):
        assert Builtin("one", 1)([0.0], [5.0]) == 1.0
        assert Builtin("zero", 2)([0.0, 1.0], [5.0, 2.0]) == 0.0


def test_instance_validation():
    with pytest.raises(DimensionMismatch):
        ProblemInstance(2, I(0, 1), ConstantMap(I(0, 1), 1), Builtin("zero", 1), "QEP", Numerics()).validate()
