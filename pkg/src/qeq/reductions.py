"""Quasi-variational inequalities and generalized Nash games as
quasi-equilibrium problems.

A polytope-valued operator T gives f_T(x, y) = max_j ⟨v_j(x), y − x⟩ over
its vertices; a game with quadratic costs gives the Nikaidô–Isoda function
and the product constraint map. Native checkers (vertex LP for QVIs, exact
best responses for games) are kept independent of the QEP route so the two
can be compared.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .core import (
    Bifunction,
    ConvexRegion,
    DimensionMismatch,
    FinitePointsMap,
    Numerics,
    ProblemInstance,
    ProductMap,
    QEQError,
    as_point,
)
from .properties import (
    PREMISE,
    VIOLATION,
    PropertyVerdict,
    _fail,
    _index_tuples,
    _jsonable,
    _pass,
    sample_grid,
    segment_ts,
)
from .solver import SolutionCheck, _candidates, check_qep_solution, solve


class EmptyConstraint(QEQError):
    """A player's constraint set is empty at the given rival strategies."""


# --------------------------------------------------------------------------
# polytope-valued operators


class PolytopeOperator:
    """T(x) = co{v_j(x)}; subclasses provide batched vertices."""

    dim: int

    def vertices_batch(self, X) -> np.ndarray:
        """Vertices for X of shape (..., n): array (..., J, n)."""
        raise NotImplementedError

    def vertices(self, x) -> np.ndarray:
        return self.vertices_batch(as_point(x, self.dim))


@dataclass(frozen=True, eq=False)
class AffineOperator(PolytopeOperator):
    """Vertices M_j x + q_j."""

    M: tuple
    q: tuple

    def __post_init__(self):
        pts = FinitePointsMap(self.M, self.q)
        if pts.dim_in != pts.dim_out:
            raise DimensionMismatch("operator must map R^n to R^n")
        object.__setattr__(self, "M", pts.M)
        object.__setattr__(self, "q", pts.q)

    @property
    def dim(self):
        return self.M[0].shape[0]

    def vertices_batch(self, X):
        X = np.asarray(X, dtype=float)
        return np.stack([X @ M.T + q for M, q in zip(self.M, self.q)], axis=-2)

    def as_map(self) -> FinitePointsMap:
        return FinitePointsMap(self.M, self.q)


@dataclass(frozen=True, eq=False)
class StepOperator(PolytopeOperator):
    """T(x) = {low} if x_0 ≤ 0 else {high}: a discontinuous singleton field."""

    low: float = -1.0
    high: float = 1.0
    dim: int = 1

    def vertices_batch(self, X):
        X = np.asarray(X, dtype=float)
        v = np.where(X[..., :1] <= 0, self.low, self.high)
        return np.broadcast_to(v, X.shape)[..., None, :].copy()


OPERATOR_BUILTINS = {"step": StepOperator}


@dataclass(frozen=True, eq=False)
class QviDerived(Bifunction):
    """f_T(x, y) = max over vertices v of T(x) of ⟨v, y − x⟩."""

    T: PolytopeOperator

    @property
    def dim(self):
        return self.T.dim

    def _inner(self, x, y):
        X, Y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        V = self.T.vertices_batch(X)
        return V, np.einsum("...jn,...n->...j", V, Y - X), X, Y

    def __call__(self, x, y):
        return self._inner(x, y)[1].max(axis=-1)

    def grad_y(self, x, y):
        V, vals, _, _ = self._inner(x, y)
        j = vals.argmax(axis=-1)
        return np.take_along_axis(V, j[..., None, None], axis=-2)[..., 0, :]

    def grad_x(self, x, y):
        if not isinstance(self.T, AffineOperator):
            return self._fd(x, y, wrt=0)
        V, vals, X, Y = self._inner(x, y)
        j = vals.argmax(axis=-1)
        Ms = np.stack(self.T.M)[j]
        v = np.take_along_axis(V, j[..., None, None], axis=-2)[..., 0, :]
        return np.einsum("...ab,...a->...b", Ms, Y - X) - v


def qvi_to_qep(T: PolytopeOperator) -> QviDerived:
    return QviDerived(T)


def qvi_instance(T: PolytopeOperator, C: ConvexRegion, K, numerics: Numerics = Numerics(),
                 name: str = "") -> ProblemInstance:
    return ProblemInstance(T.dim, C, K, QviDerived(T), "QVI", numerics, name, T)


@dataclass
class QviCheck:
    ok: bool
    feasible: bool
    dist: float
    x_star: Optional[np.ndarray] = None
    value: Optional[float] = None
    y: Optional[np.ndarray] = None

    def __bool__(self):
        return self.ok


def check_qvi_solution(inst: ProblemInstance, x0, window: Optional[ConvexRegion] = None,
                       tol: Optional[float] = None, feas_tol: Optional[float] = None,
                       h: Optional[float] = None) -> QviCheck:
    """x0 ∈ K(x0) and some x* ∈ T(x0) has ⟨x*, y − x0⟩ ≥ −tol on K(x0) ∩ window.

    x* is searched over vertices, pairwise midpoints, then by a linear program
    over the vertex weights against the same y candidates.
    """
    T = inst.payload
    x0 = as_point(x0, inst.n)
    tol = inst.numerics.tol_sol if tol is None else tol
    feas_tol = tol if feas_tol is None else feas_tol
    h = h or inst.numerics.grid_h
    V = inst.K.evaluate(x0)
    d = V.distance(x0)
    if d > feas_tol:
        return QviCheck(False, False, float(d))
    bound = inst.numerics.probe() if window is None else window.sup_norm()
    W = V if window is None else V.intersect(window)
    vert = T.vertices(x0)
    if W.is_empty():
        return QviCheck(True, True, float(d), vert[0], None)
    Y = _candidates(W, x0, h, bound)
    if not len(Y):
        return QviCheck(True, True, float(d), vert[0], None)
    D = Y - x0
    stars = [v for v in vert]
    stars += [(a + b) / 2 for i, a in enumerate(vert) for b in vert[i + 1:]]
    best = None
    for s in stars:
        vals = D @ s
        k = int(np.argmin(vals))
        if best is None or vals[k] > best[1]:
            best = (s, float(vals[k]), Y[k])
        if vals[k] >= -tol:
            return QviCheck(True, True, float(d), s, float(vals[k]), Y[k])
    J = len(vert)
    if J > 1:
        # maximise s subject to s ≤ ⟨Σ λ_j v_j, y − x0⟩ for all y, λ in the simplex
        G = D @ vert.T
        c = np.zeros(J + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-G, np.ones((len(Y), 1))])
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(Y)),
                      A_eq=np.hstack([np.ones((1, J)), [[0.0]]]), b_eq=[1.0],
                      bounds=[(0, None)] * J + [(None, None)], method="highs")
        if res.success:
            s = res.x[:J] @ vert
            vals = D @ s
            k = int(np.argmin(vals))
            if vals[k] > best[1]:
                best = (s, float(vals[k]), Y[k])
    s, val, y = best
    return QviCheck(val >= -tol, True, float(d), s, val, y)


def check_operator_properly_quasi_monotone(T: PolytopeOperator, R, m_max: int = 4,
                                           budget: int = 10_000, seed: int = 0, h: float = 0.1,
                                           probe_radius: float = 10.0) -> PropertyVerdict:
    """For sampled simplices and hull points x, some i has ⟨v, x − x_i⟩ ≤ 0 for all vertices v of T(x_i)."""
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    G = sample_grid(R, h, probe_radius)
    rng = np.random.default_rng(seed)
    used = 0
    per_m = max(1, budget // (m_max - 1))
    for m in range(1, m_max + 1):
        if m == 1:
            P, Wt = G[:, None, :], np.ones((len(G), 1))
        else:
            P = G[rng.integers(0, len(G), size=(per_m, m))]
            Wt = rng.dirichlet(np.ones(m), size=per_m)
        X = np.einsum("sm,smn->sn", Wt, P)
        V = T.vertices_batch(P)                              # (S, m, J, n)
        sup = np.einsum("smjn,smn->smj", V, X[:, None, :] - P).max(axis=-1)
        used += len(X)
        bad = sup.min(axis=1) > VIOLATION
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            return _fail("operator_properly_quasi_monotone",
                         _jsonable({"points": P[k], "x": X[k], "weights": Wt[k]}), used)
    return _pass("operator_properly_quasi_monotone", used)


def check_operator_upper_sign_continuous(T: PolytopeOperator, R, budget: int = 10_000,
                                         t_grid: int = 9, seed: int = 0, h: float = 0.1,
                                         probe_radius: float = 10.0) -> PropertyVerdict:
    """(∀t: min over T(x_t) of ⟨v, y−x⟩ ≥ 0) ⇒ max over T(x) of ⟨v, y−x⟩ ≥ 0, x_t = tx + (1−t)y."""
    G = sample_grid(R, h, probe_radius)
    rng = np.random.default_rng(seed)
    idx = _index_tuples(rng, len(G), 2, budget)
    X, Y = G[idx[:, 0]], G[idx[:, 1]]
    ts = segment_ts(t_grid)
    Xt = ts[None, :, None] * X[:, None, :] + (1 - ts)[None, :, None] * Y[:, None, :]
    D = Y - X
    inf_t = np.einsum("stjn,sn->stj", T.vertices_batch(Xt), D).min(axis=-1)
    premise = np.all(inf_t >= -PREMISE, axis=1)
    sup = np.einsum("sjn,sn->sj", T.vertices_batch(X), D).max(axis=-1)
    bad = premise & (sup < -VIOLATION)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        return _fail("operator_upper_sign_continuous",
                     _jsonable({"x": X[k], "y": Y[k], "sup": sup[k], "t_grid": t_grid}), len(X))
    return _pass("operator_upper_sign_continuous", len(X))


# --------------------------------------------------------------------------
# games


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    """θ(x) = xᵀAx + bᵀx + c on the flat strategy vector."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float).reshape(b.size, b.size))
        object.__setattr__(self, "c", float(self.c))

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        return np.einsum("...i,ij,...j->...", X, self.A, X) + X @ self.b + self.c

    def grad(self, X):
        return np.asarray(X, dtype=float) @ (self.A + self.A.T) + self.b


@dataclass(frozen=True, eq=False)
class Game:
    blocks: tuple
    costs_: tuple
    C_sets: tuple
    K_maps: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(int(i) for i in b) for b in self.blocks))
        for name in ("costs_", "C_sets", "K_maps"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        p = len(self.blocks)
        if not (len(self.costs_) == len(self.C_sets) == len(self.K_maps) == p):
            raise DimensionMismatch("one cost, strategy set and constraint map per player")
        ProductMap(self.K_maps, self.blocks)  # validates the partition and map dimensions
        for th in self.costs_:
            if th.b.size != self.n:
                raise DimensionMismatch("costs live on the flat strategy vector")
        for C, blk in zip(self.C_sets, self.blocks):
            if C.dim != len(blk):
                raise DimensionMismatch("strategy set dimension must match its block")

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def p(self) -> int:
        return len(self.blocks)

    def complement(self, nu: int) -> np.ndarray:
        own = set(self.blocks[nu])
        return np.array([i for i in range(self.n) if i not in own], dtype=int)

    def split(self, x) -> list:
        x = as_point(x, self.n)
        return [x[list(b)] for b in self.blocks]

    def assemble(self, parts) -> np.ndarray:
        x = np.empty(self.n)
        for blk, part in zip(self.blocks, parts):
            x[list(blk)] = np.atleast_1d(part)
        return x

    def with_block(self, X, nu: int, Y):
        """(y^ν, x^{−ν}) for broadcastable X and block values Y."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        shape = np.broadcast_shapes(X.shape[:-1], Y.shape[:-1]) + (self.n,)
        Z = np.broadcast_to(X, shape).copy()
        Z[..., list(self.blocks[nu])] = np.broadcast_to(Y, shape[:-1] + (len(self.blocks[nu]),))
        return Z

    def costs(self, X) -> np.ndarray:
        return np.stack([th(X) for th in self.costs_], axis=-1)

    def unilateral_costs(self, x, Y) -> np.ndarray:
        """θ_ν(y^ν, x^{−ν}) for each row of Y (flat points), shape (m, p)."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        cols = []
        for nu, th in enumerate(self.costs_):
            Z = self.with_block(x, nu, Y[:, list(self.blocks[nu])])
            cols.append(th(Z))
        return np.stack(cols, axis=-1)

    def strategy_set(self) -> ConvexRegion:
        n = self.n
        lo, hi = np.empty(n), np.empty(n)
        rows, rhs = [], []
        for C, blk in zip(self.C_sets, self.blocks):
            lo[list(blk)], hi[list(blk)] = C.lo, C.hi
            for a, beta in zip(C.A, C.b):
                row = np.zeros(n)
                row[list(blk)] = a
                rows.append(row)
                rhs.append(beta)
        return ConvexRegion(lo, hi, np.array(rows) if rows else None,
                            np.array(rhs) if rows else None)

    def own_hessians(self) -> list:
        out = []
        for th, blk in zip(self.costs_, self.blocks):
            H = th.A + th.A.T
            out.append(H[np.ix_(list(blk), list(blk))])
        return out


@dataclass(frozen=True, eq=False)
class NikaidoIsoda(Bifunction):
    """f(x, y) = Σ_ν θ_ν(y^ν, x^{−ν}) − θ_ν(x)."""

    game: Game

    @property
    def dim(self):
        return self.game.n

    def __call__(self, x, y):
        g = self.game
        total = 0.0
        for nu, th in enumerate(g.costs_):
            Z = g.with_block(x, nu, np.asarray(y, dtype=float)[..., list(g.blocks[nu])])
            total = total + th(Z) - th(np.asarray(x, dtype=float))
        return total

    def grad_y(self, x, y):
        g = self.game
        X, Y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.zeros(X.shape)
        for nu, th in enumerate(g.costs_):
            blk = list(g.blocks[nu])
            out[..., blk] = th.grad(g.with_block(X, nu, Y[..., blk]))[..., blk]
        return out

    def grad_x(self, x, y):
        g = self.game
        X, Y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.zeros(X.shape)
        for nu, th in enumerate(g.costs_):
            blk = list(g.blocks[nu])
            gz = th.grad(g.with_block(X, nu, Y[..., blk]))
            gz[..., blk] = 0.0
            out += gz - th.grad(X)
        return out


def nikaido_isoda(game: Game) -> NikaidoIsoda:
    return NikaidoIsoda(game)


def product_map(game: Game) -> ProductMap:
    return ProductMap(game.K_maps, game.blocks)


def gnep_instance(game: Game, numerics: Numerics = Numerics(), name: str = "") -> ProblemInstance:
    return ProblemInstance(game.n, game.strategy_set(), product_map(game), nikaido_isoda(game),
                           "GNEP", numerics, name, game)


@dataclass
class BestResponse:
    points: np.ndarray
    value: float


def _coordinate_descent(th, game, nu, x, V, z, sweeps=100):
    """Closed-form coordinate minimisation of θ_ν over a box in the own block."""
    blk = list(game.blocks[nu])
    H = th.A + th.A.T
    z = z.copy()
    for _ in range(sweeps):
        prev = z.copy()
        for i, gi in enumerate(blk):
            full = game.with_block(x, nu, z)
            g = th.grad(full)[gi]
            curv = H[gi, gi]
            lo, hi = V.lo[i], V.hi[i]
            if curv > 1e-14:
                z[i] = np.clip(z[i] - g / curv, lo, hi)
            else:
                ends = [e for e in (lo, hi) if np.isfinite(e)]
                if ends:
                    trial = [game.with_block(x, nu, np.where(np.arange(len(z)) == i, e, z)) for e in ends]
                    vals = [th(t) for t in trial]
                    k = int(np.argmin(vals))
                    if vals[k] < th(full):
                        z[i] = ends[k]
        if np.max(np.abs(z - prev)) < 1e-13:
            break
    return z


def best_response(game: Game, nu: int, x, h: float = 0.01, tol: float = 1e-6,
                  bound: float = 10.0) -> BestResponse:
    """Grid argmin of θ_ν(·, x^{−ν}) over K_ν(x^{−ν}) ∩ B̄_bound, plus a polished minimiser.

    ``x`` is the flat strategy vector; its own block is ignored.
    """
    x = as_point(x, game.n)
    th = game.costs_[nu]
    V = game.K_maps[nu].evaluate(x[game.complement(nu)])
    if V.is_empty():
        raise EmptyConstraint(f"K_{nu}(x^-nu) is empty")
    Z = _candidates(V, x[list(game.blocks[nu])], h, bound)
    if not len(Z):
        Z = V.project(np.zeros(V.dim))[None]
    vals = th(game.with_block(x, nu, Z))
    k = int(np.argmin(vals))
    if not V.A.shape[0] and V.ball is None:
        z = _coordinate_descent(th, game, nu, x, V, Z[k])
        zv = float(th(game.with_block(x, nu, z)))
        if zv < vals[k]:
            Z, vals = np.vstack([Z, z]), np.append(vals, zv)
    best = float(vals.min())
    keep = vals <= best + tol
    return BestResponse(np.unique(np.round(Z[keep], 12), axis=0), best)


@dataclass
class GnepCheck:
    ok: bool
    players: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def check_gnep_equilibrium(game: Game, xhat, h: float = 0.01, tol: float = 1e-6,
                           feas_tol: Optional[float] = None, bound: float = 10.0) -> GnepCheck:
    """Per player: x̂^ν ∈ K_ν(x̂^{−ν}) (feas_tol) and θ_ν(x̂) ≤ best-response value + tol."""
    xhat = as_point(xhat, game.n)
    feas_tol = tol if feas_tol is None else feas_tol
    out, ok = [], True
    for nu, th in enumerate(game.costs_):
        V = game.K_maps[nu].evaluate(xhat[game.complement(nu)])
        d = V.distance(xhat[list(game.blocks[nu])])
        if d > feas_tol:
            out.append({"player": nu, "feasible": False, "dist": float(d)})
            ok = False
            continue
        br = best_response(game, nu, xhat, h=h, tol=tol, bound=bound)
        gap = float(th(xhat)) - br.value
        good = gap <= tol
        ok = ok and good
        out.append({"player": nu, "feasible": True, "dist": float(d), "gap": gap,
                    "best_value": br.value, "best_point": br.points[0].tolist()})
    return GnepCheck(ok, out)


def own_convexity(game: Game) -> PropertyVerdict:
    """Own-block Hessians positive semidefinite (eigenvalues ≥ −1e-9)."""
    for nu, H in enumerate(game.own_hessians()):
        lam = float(np.linalg.eigvalsh(H).min())
        if lam < -VIOLATION:
            return PropertyVerdict("own_block_convex", False, {"player": nu, "min_eigenvalue": lam}, nu + 1)
    v = PropertyVerdict("own_block_convex", True, None, game.p)
    v.certified = True
    v.note = "exact eigenvalue check of quadratic costs"
    return v


def gnep_solve(inst: ProblemInstance, variant: str = "case2", rho: Optional[float] = None,
               h: Optional[float] = None, tol: Optional[float] = None, seed: int = 0,
               budget: int = 10_000):
    """Solve via the Nikaidô–Isoda reduction and re-validate each point as an equilibrium."""
    if inst.kind != "GNEP":
        raise ValueError("gnep_solve needs a GNEP instance")
    game = inst.payload
    report = solve(inst, variant, rho=rho, h=h, tol=tol, seed=seed, budget=budget)
    if report.hypothesis is not None:
        report.hypothesis.verdicts["own_block_convex"] = own_convexity(game)
    h = report.numerics["grid_h"]
    tol = report.numerics["tol_sol"]
    bound = 2 * report.rho if report.rho else 10.0
    checks = [check_gnep_equilibrium(game, x, h=h, tol=tol, feas_tol=h + tol, bound=bound)
              for x in report.solutions]
    report.extras["equilibrium_checks"] = [{"x": x.tolist(), "ok": c.ok, "players": c.players}
                                           for x, c in zip(report.solutions, checks)]
    return report
