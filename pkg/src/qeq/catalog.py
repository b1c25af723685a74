"""Built-in instances: worked examples and negative controls."""
from __future__ import annotations

import numpy as np

from .core import (
    AffineClamp,
    Builtin,
    ConstantMap,
    ConvexRegion,
    GluedMap,
    MovingBox,
    Numerics,
    ProblemInstance,
    Quadratic,
)
from .reductions import AffineOperator, Game, QuadraticCost, gnep_instance, qvi_instance

INF = np.inf
I = ConvexRegion.interval


def _const(region, n):
    return ConstantMap(region, n)


def _qep(name, C, K, f, **num):
    return ProblemInstance(C.dim, C, K, f, "QEP", Numerics(**num), name)


def tz_counterexample():
    # C = [0, ∞), K ≡ [1, ∞), f(x, y) = y − x
    f = Quadratic.zeros(1, c=[-1.0], d=[1.0])
    return _qep("tz-counterexample", I(0, INF), _const(I(1, INF), 1), f, rho=2.0)


def e2_even():
    f = Quadratic.zeros(1, P=[[-1.0]], Q=[[1.0]])
    return _qep("e2-even", I(-1, 1), _const(I(-1, 1), 1), f, rho=2.0)


def e2_extended():
    f = Quadratic.zeros(1, P=[[-1.0]], Q=[[1.0]])
    R = ConvexRegion.whole(1)
    return _qep("e2-extended", R, _const(R, 1), f, rho=1.0, probe_radius=10.0)


def e3_moving():
    # K(x) = [clamp(x/2, 0, 1), clamp(x/2 + 1, 1, 2)], f(x, y) = (x − 1)(y − x)
    K = MovingBox(AffineClamp([[0.5]], [0.0], [0.0], [1.0]),
                  AffineClamp([[0.5]], [1.0], [1.0], [2.0]))
    f = Quadratic.zeros(1, P=[[-1.0]], R=[[1.0]], c=[1.0], d=[-1.0])
    return _qep("e3-moving", I(0, INF), K, f, rho=3.0)


def quad_2d():
    f = Quadratic.zeros(2, P=-np.eye(2), Q=np.eye(2))
    box = ConvexRegion.box([-1, -1], [1, 1])
    return _qep("quad-2d", box, _const(box, 2), f, rho=2.0, grid_h=0.05)


def e4_qvi():
    # T(x) = {x − 2}, K(x) = [0, clamp(1 + x/2, 1, 3)]
    T = AffineOperator(([[1.0]],), ([-2.0],))
    K = MovingBox(AffineClamp.constant(0.0, 1), AffineClamp([[0.5]], [1.0], [1.0], [3.0]))
    return qvi_instance(T, I(0, INF), K, Numerics(rho=4.0), "e4-qvi")


def qvi_interval():
    # T(x) = co{x − 1, x − 0.5}, K ≡ [0, 2]; solution set [0.5, 1]
    T = AffineOperator(([[1.0]], [[1.0]]), ([-1.0], [-0.5]))
    return qvi_instance(T, I(0, 2), _const(I(0, 2), 1), Numerics(rho=3.0), "qvi-interval")


def qvi_2d():
    # T(x) = {x − (1, 0.5)}, K(x) = ∏ [0, clamp(1 + x_i/2, 1, 2)]
    T = AffineOperator((np.eye(2),), ([-1.0, -0.5],))
    K = MovingBox(AffineClamp.constant([0.0, 0.0], 2),
                  AffineClamp(0.5 * np.eye(2), [1.0, 1.0], [1.0, 1.0], [2.0, 2.0]))
    box = ConvexRegion.box([0, 0], [INF, INF])
    return qvi_instance(T, box, K, Numerics(rho=3.0, grid_h=0.05), "qvi-2d")


def _player_box(slope):
    # K_ν(x^{−ν}) = [0, clamp(1 + slope·x^{−ν}, 0, 1)]
    return MovingBox(AffineClamp.constant(0.0, 1), AffineClamp([[slope]], [1.0], [0.0], [1.0]))


def e5_gnep():
    th1 = QuadraticCost([[1.0, -1.0], [0.0, 0.0]], [0.0, 0.0])
    th2 = QuadraticCost([[0.0, -1.0], [0.0, 1.0]], [0.0, 0.0])
    game = Game(((0,), (1,)), (th1, th2), (I(0, INF), I(0, INF)),
                (_player_box(-0.5), _player_box(-0.5)))
    return gnep_instance(game, Numerics(rho=3.0, grid_h=0.05), "e5-gnep")


def gnep_coercive():
    # θ_ν = (x^ν)² − x^ν + x¹x²/2, K_ν ≡ [0, 2]; equilibrium (0.4, 0.4)
    th1 = QuadraticCost([[1.0, 0.5], [0.0, 0.0]], [-1.0, 0.0])
    th2 = QuadraticCost([[0.0, 0.5], [0.0, 1.0]], [0.0, -1.0])
    K = ConstantMap(I(0, 2), 1)
    game = Game(((0,), (1,)), (th1, th2), (I(0, INF), I(0, INF)), (K, K))
    return gnep_instance(game, Numerics(rho=2.0, grid_h=0.05), "gnep-coercive")


def ctrl_zero():
    return _qep("ctrl-zero", I(-1, 1), _const(I(-1, 1), 1), Builtin("zero", 1), rho=2.0)


def ctrl_one():
    return _qep("ctrl-one", I(-1, 1), _const(I(-1, 1), 1), Builtin("one", 1), rho=2.0)


def ctrl_far_penalty():
    # f(x, y) = −max(|y| − 3, 0): zero on B̄_3, negative beyond
    C = I(0, INF)
    return _qep("ctrl-far-penalty", C, _const(C, 1), Builtin("far_penalty", 1, {"r0": 3.0}), rho=2.0)


def ctrl_open_values():
    return _qep("ctrl-open-values", I(-1, 2), _const(I(0, 1, open=True), 1), Builtin("zero", 1),
                rho=2.0)


def ctrl_jump():
    # K(x) = {0} for x < 0 and [0, 1] for x ≥ 0: closed graph, not lower semi-continuous
    K = GluedMap(I(-INF, 0, open=True), _const(I(0, 0), 1), _const(I(0, 1), 1))
    f = Quadratic.zeros(1, c=[-1.0], d=[1.0])
    return _qep("ctrl-jump", I(-1, 1), K, f, rho=2.0)


def ctrl_pseudo_not_pqm():
    # f(x, y) = x² − y²: pseudo-monotone on [−1, 1] but not properly quasi-monotone
    f = Quadratic.zeros(1, P=[[1.0]], Q=[[-1.0]])
    return _qep("ctrl-pseudo-not-pqm", I(-1, 1), _const(I(-1, 1), 1), f, rho=2.0)


CATALOG = {
    "tz-counterexample": (tz_counterexample, "C=[0,inf), K(x)=[1,inf), f=y-x: box coercivity fails, ball condition holds"),
    "e2-even": (e2_even, "C=K=[-1,1], f=y^2-x^2; solution {0}"),
    "e2-extended": (e2_extended, "C=K=R, f=y^2-x^2; solution {0}"),
    "e3-moving": (e3_moving, "clamped moving interval, f=(x-1)(y-x); solution {1}"),
    "quad-2d": (quad_2d, "C=K=[-1,1]^2, f=|y|^2-|x|^2; solution {(0,0)}"),
    "e4-qvi": (e4_qvi, "QVI T(x)={x-2}, K(x)=[0,clamp(1+x/2,1,3)]; solution {2}"),
    "qvi-interval": (qvi_interval, "QVI T(x)=co{x-1,x-0.5}, K=[0,2]; solution [0.5,1]"),
    "qvi-2d": (qvi_2d, "QVI T(x)={x-(1,0.5)} on a moving box; solution {(1,0.5)}"),
    "e5-gnep": (e5_gnep, "two-player game with rival-dependent boxes; equilibrium (0,0)"),
    "gnep-coercive": (gnep_coercive, "two-player game on constant boxes; equilibrium (0.4,0.4)"),
    "ctrl-zero": (ctrl_zero, "f=0: every fixed point solves"),
    "ctrl-one": (ctrl_one, "f=1: not properly quasi-monotone, does not vanish on the diagonal"),
    "ctrl-far-penalty": (ctrl_far_penalty, "f<0 only outside B_3: restricted solutions do not lift"),
    "ctrl-open-values": (ctrl_open_values, "K=(0,1) open: graph not closed"),
    "ctrl-jump": (ctrl_jump, "K jumps at 0: closed graph, not lower semi-continuous"),
    "ctrl-pseudo-not-pqm": (ctrl_pseudo_not_pqm, "f=x^2-y^2: pseudo-monotone, not properly quasi-monotone"),
}


def names() -> list:
    return list(CATALOG)


def load(name: str) -> ProblemInstance:
    try:
        builder, _ = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog instance {name!r}") from None
    return builder()


def describe(name: str) -> str:
    return CATALOG[name][1]
