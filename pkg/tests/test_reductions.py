import numpy as np
import pytest

from qeq import catalog
from qeq.core import AffineClamp, ConstantMap, ConvexRegion, MovingBox, Numerics
from qeq.properties import reevaluate
from qeq.reductions import (
    AffineOperator,
    EmptyConstraint,
    Game,
    QuadraticCost,
    StepOperator,
    best_response,
    check_gnep_equilibrium,
    check_operator_properly_quasi_monotone,
    check_operator_upper_sign_continuous,
    check_qvi_solution,
    gnep_instance,
    gnep_solve,
    nikaido_isoda,
    product_map,
    qvi_to_qep,
)
from qeq.solver import check_qep_solution

INF = np.inf
I = ConvexRegion.interval
ZERO_OP = AffineOperator(([[0.0]],), ([0.0],))


class TestFT:
    def test_singleton(self):
        assert qvi_to_qep(AffineOperator(([[1.0]],), ([-2.0],)))([1.0], [2.0]) == pytest.approx(-1.0)

    def test_diagonal(self):
        f = catalog.load("qvi-2d").f
        X = np.random.default_rng(0).normal(size=(50, 2))
        assert np.all(f(X, X) == 0.0)

    def test_vertex_max(self):
        T = AffineOperator(([[1.0]], [[2.0]]), ([0.0], [0.0]))
        assert qvi_to_qep(T)([1.0], [3.0]) == pytest.approx(4.0)


class TestQviCheck:
    def test_e4_solution(self):
        c = check_qvi_solution(catalog.load("e4-qvi"), [2.0])
        assert c and c.x_star == pytest.approx([0.0])

    def test_e4_non_solution(self):
        c = check_qvi_solution(catalog.load("e4-qvi"), [0.0])
        assert not c and c.feasible
        assert c.value < 0

    def test_infeasible(self):
        c = check_qvi_solution(catalog.load("e4-qvi"), [5.0])
        assert not c and not c.feasible

    def test_interval_needs_a_mixture(self):
        # T(0.75) = [−0.25, 0.25]; y ranges on both sides of x, so only x* = 0 works,
        # and 0 is the midpoint of the two vertices rather than a vertex
        c = check_qvi_solution(catalog.load("qvi-interval"), [0.75])
        assert c and c.x_star == pytest.approx([0.0])


class TestOperatorChecks:
    def test_zero_pqm(self):
        assert check_operator_properly_quasi_monotone(ZERO_OP, I(-2, 2)).passed

    def test_identity_pqm(self):
        T = AffineOperator(([[1.0]],), ([0.0],))
        assert check_operator_properly_quasi_monotone(T, ConvexRegion.whole(1)).passed

    def test_constant_direction_recorded(self):
        T = AffineOperator(([[0.0]],), ([1.0],))
        v = check_operator_properly_quasi_monotone(T, I(-2, 2))
        # ⟨1, x − x_i⟩ ≤ 0 for the smallest x_i of any simplex containing x
        assert v.passed

    def test_affine_upper_sign(self):
        T = AffineOperator(([[1.0]],), ([-2.0],))
        assert check_operator_upper_sign_continuous(T, I(-3, 3)).passed

    def test_zero_upper_sign(self):
        assert check_operator_upper_sign_continuous(ZERO_OP, I(-3, 3)).passed

    def test_step_upper_sign(self):
        T = StepOperator()
        v = check_operator_upper_sign_continuous(T, I(-1, 1))
        assert not v.passed and reevaluate(v, T)


def e5_game():
    return catalog.load("e5-gnep").payload


class TestNikaidoIsoda:
    def test_e5_value(self):
        assert nikaido_isoda(e5_game())([0.0, 0.0], [1.0, 1.0]) == pytest.approx(2.0)

    def test_own_block_free(self):
        th1 = QuadraticCost([[0.0, 0.0], [0.0, 1.0]], [0.0, 3.0])
        th2 = QuadraticCost([[2.0, 0.0], [0.0, 0.0]], [1.0, 0.0])
        K = ConstantMap(I(-1, 1), 1)
        f = nikaido_isoda(Game(((0,), (1,)), (th1, th2), (I(-1, 1), I(-1, 1)), (K, K)))
        rng = np.random.default_rng(1)
        X, Y = rng.normal(size=(40, 2)), rng.normal(size=(40, 2))
        assert np.allclose(f(X, Y), 0.0)

    def test_diagonal(self):
        f = nikaido_isoda(e5_game())
        X = np.random.default_rng(2).normal(size=(40, 2))
        assert np.all(f(X, X) == 0.0)


class TestProductMap:
    def test_e5_origin(self):
        V = product_map(e5_game()).evaluate(np.zeros(2))
        assert V.lo.tolist() == [0.0, 0.0] and V.hi.tolist() == [1.0, 1.0]

    def test_e5_ones(self):
        V = product_map(e5_game()).evaluate(np.ones(2))
        assert V.lo.tolist() == [0.0, 0.0] and V.hi.tolist() == [0.5, 0.5]

    def test_constant(self):
        game = catalog.load("gnep-coercive").payload
        for x in ([0.0, 0.0], [3.0, -1.0]):
            V = product_map(game).evaluate(np.array(x))
            assert V.lo.tolist() == [0.0, 0.0] and V.hi.tolist() == [2.0, 2.0]

    def test_block_round_trip(self):
        game = e5_game()
        x = np.array([0.3, -0.7])
        assert np.array_equal(game.assemble(game.split(x)), x)


class TestBestResponse:
    def test_boundary_argmin(self):
        th1 = QuadraticCost([[1.0, 0.0], [0.0, 0.0]], [-1.0, 0.0])
        game = Game(((0,), (1,)), (th1, th1), (I(0, INF), I(0, INF)),
                    (MovingBox(AffineClamp.constant(0.0, 1), AffineClamp([[-0.5]], [1.0], [0.0], [1.0])),) * 2)
        br = best_response(game, 0, [0.0, 1.0])
        assert br.points.ravel().tolist() == [0.5]

    def test_e5_zero(self):
        assert best_response(e5_game(), 0, [0.0, 0.0]).points.ravel().tolist() == [0.0]

    def test_strictly_convex_singleton(self):
        game = catalog.load("gnep-coercive").payload
        br = best_response(game, 1, [0.3, 0.0])
        assert len(br.points) == 1

    def test_empty(self):
        K = MovingBox(AffineClamp.constant(1.0, 1), AffineClamp.constant(0.0, 1))
        th = QuadraticCost(np.eye(2), [0.0, 0.0])
        game = Game(((0,), (1,)), (th, th), (I(0, 1), I(0, 1)), (K, K))
        with pytest.raises(EmptyConstraint):
            best_response(game, 0, [0.0, 0.0])


class TestEquilibrium:
    def test_e5_origin(self):
        assert check_gnep_equilibrium(e5_game(), [0.0, 0.0])

    def test_e5_half(self):
        c = check_gnep_equilibrium(e5_game(), [0.5, 0.5])
        assert not c
        assert c.players[0]["best_point"] == pytest.approx([0.25])

    def test_infeasible(self):
        c = check_gnep_equilibrium(e5_game(), [3.0, 0.0])
        assert not c and not c.players[0]["feasible"]

    def test_matches_reduced_problem(self):
        inst = catalog.load("gnep-coercive")
        for x in ([0.4, 0.4], [0.0, 0.0], [1.0, 0.2]):
            assert bool(check_gnep_equilibrium(inst.payload, x)) == bool(check_qep_solution(inst, x))


class TestGnepSolve:
    def test_e5(self):
        rep = gnep_solve(catalog.load("e5-gnep"))
        assert rep.solutions.tolist() == [[0.0, 0.0]]
        assert all(c["ok"] for c in rep.extras["equilibrium_checks"])
        assert rep.hypothesis.verdicts["own_block_convex"].passed

    def test_routes_agree(self):
        inst = catalog.load("e5-gnep")
        a = gnep_solve(inst, "case2").solutions
        b = gnep_solve(inst, "lassonde").solutions
        assert a.tolist() == b.tolist()

    def test_flat_game(self):
        th = QuadraticCost(np.zeros((2, 2)), [0.0, 0.0])
        K = ConstantMap(I(0, 0.2), 1)
        game = Game(((0,), (1,)), (th, th), (I(0, INF), I(0, INF)), (K, K))
        rep = gnep_solve(gnep_instance(game, Numerics(rho=1.0, grid_h=0.05)))
        box = {(a, b) for a in np.arange(5) * 0.05 for b in np.arange(5) * 0.05}
        found = {tuple(p) for p in np.round(rep.solutions, 9)}
        assert {tuple(np.round(p, 9)) for p in box} <= found
        # the grid tolerance h admits lattice neighbours one step outside the box
        assert np.all(rep.solutions <= 0.2 + 0.05 + 1e-12)
        assert all(c["ok"] for c in rep.extras["equilibrium_checks"])

    def test_needs_game(self):
        with pytest.raises(ValueError):
            gnep_solve(catalog.load("e3-moving"))
