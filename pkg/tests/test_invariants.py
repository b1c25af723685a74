"""Property-based tests of the structural invariants."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qeq import catalog
from qeq.coercivity import cond2_scan
from qeq.core import (
    AffineClamp,
    ConstantMap,
    ConvexRegion,
    GluedMap,
    MovingBox,
    Quadratic,
    co_sampler,
    grid_points,
    restrict_to_ball,
)
from qeq.properties import (
    PROPERTY_CHECKS,
    check_properly_quasi_monotone,
    check_pseudo_monotone,
    check_quasi_monotone,
    check_quasiconvex_y,
    check_upper_sign,
    falsify_closed_graph,
    falsify_lsc,
    reevaluate,
)
from qeq.reductions import AffineOperator, qvi_to_qep
from qeq.solver import check_mqep_solution, fixed_point_set, oracle_enumerate, restricted_instance

I = ConvexRegion.interval
coef = st.floats(-2, 2, allow_nan=False).map(lambda v: round(v, 3))
FAST = settings(max_examples=25, deadline=None)


def quadratic_1d(draw_coefs):
    P, Q, R, c, d, e = draw_coefs
    return Quadratic(np.array([[P]]), np.array([[Q]]), np.array([[R]]), np.array([c]), np.array([d]), e)


quadratics = st.tuples(coef, coef, coef, coef, coef, coef).map(quadratic_1d)
points2 = st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=2).map(np.array)


def regions():
    lo = st.floats(-3, 0.5, allow_nan=False).map(lambda v: round(v, 2))
    width = st.floats(0.5, 3, allow_nan=False).map(lambda v: round(v, 2))
    return st.tuples(lo, width, lo, width).map(
        lambda t: ConvexRegion.box([t[0], t[2]], [t[0] + t[1], t[2] + t[3]]))


# ---------------------------------------------------------------- core


@FAST
@given(regions(), points2)
def test_projection_is_feasible_and_nearest(R, p):
    q = R.project(p)
    assert R.contains(q)
    G = grid_points(R, 0.25, 20)
    assert np.linalg.norm(q - p) <= np.linalg.norm(G - p, axis=1).min() + 1e-9


@FAST
@given(regions(), st.floats(0.5, 3), points2)
def test_projection_onto_box_ball(R, r, p):
    S = R.with_ball(r)
    if S.is_empty():
        return
    q = S.project(p)
    assert S.contains(q)
    G = grid_points(S, 0.1, 20)
    if len(G):
        assert np.linalg.norm(q - p) <= np.linalg.norm(G - p, axis=1).min() + 1e-9


@FAST
@given(regions(), st.sampled_from([0.5, 0.25]), st.floats(0.5, 4))
def test_grid_monotone(R, h, bound):
    coarse = {tuple(p) for p in grid_points(R, h, bound)}
    assert coarse <= {tuple(p) for p in grid_points(R, h / 2, bound)}
    assert coarse <= {tuple(p) for p in grid_points(R, h, bound + 1)}


@FAST
@given(st.floats(0.2, 2), st.floats(0.2, 2), st.floats(-3, 3))
def test_ball_restriction_monotone(r1, dr, x):
    K = MovingBox(AffineClamp([[0.5]], [-1.0], [-3.0], [3.0]), AffineClamp([[0.5]], [1.0], [-2.0], [4.0]))
    small, big = restrict_to_ball(K, r1).evaluate([x]), restrict_to_ball(K, r1 + dr).evaluate([x])
    for y in grid_points(small, 0.05, 10):
        assert big.contains(y)


@FAST
@given(st.floats(-2, 2), st.floats(-3, 3))
def test_glued_exact(a, x):
    A = I(-np.inf, a, open=True)
    S, T = ConstantMap(I(0, 0), 1), ConstantMap(I(0, 1), 1)
    V = GluedMap(A, S, T).evaluate([x])
    assert V.same_as(I(0, 0) if x < a else I(0, 1))


@FAST
@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 10_000))
def test_hull_certificate(k, m, seed):
    P = np.random.default_rng(seed).normal(size=(k, 3))
    Q, W = co_sampler(P, m, seed, return_weights=True)
    assert np.all(W >= 0) and np.allclose(W.sum(axis=1), 1)
    assert np.abs(W @ P - Q).max() <= 1e-12


# ---------------------------------------------------------------- properties


@FAST
@given(quadratics, st.integers(0, 100))
def test_witnesses_reevaluate(f, seed):
    R = I(-2, 2)
    for name, check in PROPERTY_CHECKS.items():
        v = check(f, R, budget=400, seed=seed)
        assert v.passed or reevaluate(v, f), name


@FAST
@given(st.floats(-1, 1), st.floats(0.1, 2), st.integers(0, 100))
def test_map_witnesses_reevaluate(a, jump, seed):
    K = GluedMap(I(-np.inf, a, open=True), ConstantMap(I(0, 0), 1), ConstantMap(I(0, jump), 1))
    R = I(-2, 2)
    for v in (falsify_lsc(K, R, seed=seed), falsify_closed_graph(K, R, seed=seed)):
        assert v.passed or reevaluate(v, K)


@FAST
@given(quadratics, st.integers(0, 100))
def test_pseudo_pass_implies_quasi_pass(f, seed):
    R = I(-2, 2)
    if check_pseudo_monotone(f, R, budget=500, seed=seed).passed:
        assert check_quasi_monotone(f, R, budget=500, seed=seed).passed


@FAST
@given(st.floats(0.01, 3), coef, st.integers(0, 100))
def test_convex_potential_family_passes(a, b, seed):
    # f(x, y) = g(y) − g(x), g(s) = a s² + b s
    f = Quadratic.zeros(1, P=[[-a]], Q=[[a]], c=[-b], d=[b])
    R = I(-2, 2)
    for check in (check_pseudo_monotone, check_properly_quasi_monotone, check_quasi_monotone,
                  check_upper_sign, check_quasiconvex_y):
        assert check(f, R, budget=2000, seed=seed).passed, check.__name__


@FAST
@given(quadratics, st.integers(0, 50))
def test_pqm_and_upper_sign_force_vanishing_diagonal(f, seed):
    R = I(-2, 2)
    if (check_properly_quasi_monotone(f, R, budget=500, seed=seed).passed
            and check_upper_sign(f, R, budget=500, seed=seed).passed):
        X = grid_points(R, 0.1, 10)
        assert np.abs(f(X, X)).max() <= 1e-9


# ---------------------------------------------------------------- coercivity


@pytest.mark.parametrize("name,z", [("e2-even", 0.0), ("e2-extended", 0.0)])
def test_pseudo_monotone_solution_scan(name, z):
    inst = catalog.load(name)
    assert check_pseudo_monotone(inst.f, inst.C.with_ball(10)).passed
    h = inst.numerics.grid_h
    for x, y in cond2_scan(inst, [z], 5.0):
        if np.linalg.norm(x) > abs(z) + h:
            assert y is not None


@pytest.mark.parametrize("name", ["e2-even", "e3-moving"])
def test_minty_solution_is_its_own_witness(name):
    inst = catalog.load(name)
    rho = inst.numerics.rho
    h = inst.numerics.grid_h
    R = inst.C.with_ball(rho)
    assert check_upper_sign(inst.f, R).passed
    sub = restricted_instance(inst, rho)
    minty = [x for x in fixed_point_set(sub.K, R, h).points if check_mqep_solution(sub, x, tol=1e-9)]
    assert minty
    for z in minty:
        X = grid_points(inst.K.evaluate(z), h, rho)
        far = X[np.linalg.norm(X, axis=1) > np.linalg.norm(z) + h]
        assert np.all(inst.f(z, far) >= -1e-9)


# ---------------------------------------------------------------- solver and reductions


@FAST
@given(st.sampled_from([0.5, 1.0, 1.5, 2.5]))
def test_fixed_points_of_restriction(rho):
    inst = catalog.load("e3-moving")
    a = fixed_point_set(restricted_instance(inst, rho).K, inst.C.with_ball(rho), 0.01).points
    b = fixed_point_set(inst.K, I(0, 3), 0.01).points
    assert {tuple(p) for p in a} == {tuple(p) for p in b if abs(p[0]) <= rho + 1e-12}


@FAST
@given(st.integers(0, 10_000))
def test_nikaido_isoda_diagonal(seed):
    f = catalog.load("gnep-coercive").f
    X = np.random.default_rng(seed).uniform(-5, 5, size=(30, 2))
    assert np.all(f(X, X) == 0.0)


@FAST
@given(st.integers(0, 10_000), st.floats(0, 5))
def test_f_T_positively_homogeneous(seed, s):
    rng = np.random.default_rng(seed)
    T = AffineOperator(tuple(rng.normal(size=(2, 2)) for _ in range(3)), tuple(rng.normal(size=2) for _ in range(3)))
    f = qvi_to_qep(T)
    x, y = rng.normal(size=2), rng.normal(size=2)
    assert f(x, x + s * (y - x)) == pytest.approx(s * f(x, y), abs=1e-9)


def test_oracle_on_zero_is_fixed_point_set():
    inst = catalog.load("ctrl-zero")
    a = oracle_enumerate(inst, I(-1, 1), 0.05)
    b = fixed_point_set(inst.K, I(-1, 1), 0.05, tol=1e-6).points
    assert np.array_equal(a, b)
