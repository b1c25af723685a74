"""Geometric primitives: convex regions, parametric set-valued maps, bifunctions.

Everything here is immutable after construction. Points are 1-D float arrays;
batched points are ``(m, n)`` arrays with one point per row.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

TOL_FEAS = 1e-12
TOL_PROJ = 1e-9
MAX_PROJ_ITER = 10_000
GRID_LIMIT = 10**7


class QEQError(Exception):
    pass


class DimensionMismatch(QEQError, ValueError):
    pass


class EmptyRegion(QEQError):
    pass


class NonConvergence(QEQError):
    pass


class ExplosionGuard(QEQError):
    pass


class InclusionViolated(QEQError):
    def __init__(self, x, message="S(x) is not contained in T(x)"):
        super().__init__(f"{message} at x={np.asarray(x).tolist()}")
        self.x = np.asarray(x, dtype=float)


def as_point(p, n: Optional[int] = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if n is not None and p.shape[-1] != n:
        raise DimensionMismatch(f"expected dimension {n}, got {p.shape[-1]}")
    return p


def _key(*arrays) -> tuple:
    return tuple(np.ascontiguousarray(a, dtype=float).tobytes() for a in arrays)


# --------------------------------------------------------------------------
# convex regions


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True, eq=False)
class ConvexRegion:
    """Box ∩ halfspaces {a·x ≤ b} ∩ at most one closed ball.

    ``open=True`` makes the box bounds strict; halfspaces and the ball are
    always closed.
    """

    lo: np.ndarray
    hi: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    ball: Optional[Ball] = None
    open: bool = False

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("box bounds must be vectors of equal length")
        n = lo.size
        A = np.zeros((0, n)) if self.A is None else np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.zeros(0) if self.b is None else np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[1] != n or A.shape[0] != b.size:
            raise DimensionMismatch("halfspace data does not match region dimension")
        if self.ball is not None and np.asarray(self.ball.center).size != n:
            raise DimensionMismatch("ball center does not match region dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if self.ball is not None:
            object.__setattr__(
                self, "ball", Ball(as_point(self.ball.center, n), float(self.ball.radius))
            )

    # constructors -------------------------------------------------------
    @classmethod
    def box(cls, lo, hi, open=False) -> "ConvexRegion":
        return cls(lo, hi, open=open)

    @classmethod
    def interval(cls, a, b, open=False) -> "ConvexRegion":
        return cls([a], [b], open=open)

    @classmethod
    def whole(cls, n: int) -> "ConvexRegion":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @classmethod
    def closed_ball(cls, radius, center=None, n=None) -> "ConvexRegion":
        if center is None:
            center = np.zeros(n)
        center = as_point(center)
        return cls(np.full(center.size, -np.inf), np.full(center.size, np.inf),
                   ball=Ball(center, radius))

    # basic queries ------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.lo.size

    def key(self) -> tuple:
        ball = () if self.ball is None else _key(self.ball.center, [self.ball.radius])
        return _key(self.lo, self.hi, self.A, self.b) + ball + (self.open,)

    def same_as(self, other: "ConvexRegion") -> bool:
        return self.key() == other.key()

    def contains(self, p):
        """Membership up to TOL_FEAS on each constraint residual. Accepts (n,) or (m, n)."""
        P = np.asarray(p, dtype=float)
        if P.shape[-1] != self.dim:
            raise DimensionMismatch(f"point of dim {P.shape[-1]} vs region dim {self.dim}")
        single = P.ndim == 1
        P = np.atleast_2d(P)
        if self.open:
            ok = np.all((P > self.lo) & (P < self.hi), axis=1)
        else:
            ok = np.all((P >= self.lo - TOL_FEAS) & (P <= self.hi + TOL_FEAS), axis=1)
        if self.A.shape[0]:
            ok &= np.all(P @ self.A.T - self.b <= TOL_FEAS, axis=1)
        if self.ball is not None:
            ok &= np.linalg.norm(P - self.ball.center, axis=1) <= self.ball.radius + TOL_FEAS
        return bool(ok[0]) if single else ok

    def intersect(self, other: "ConvexRegion") -> "ConvexRegion":
        if other.dim != self.dim:
            raise DimensionMismatch("cannot intersect regions of different dimension")
        ball = self.ball
        if other.ball is not None:
            if ball is None:
                ball = other.ball
            elif np.allclose(ball.center, other.ball.center, atol=0.0):
                ball = Ball(ball.center, min(ball.radius, other.ball.radius))
            else:
                raise ValueError("regions support at most one ball")
        return ConvexRegion(
            np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi),
            np.vstack([self.A, other.A]), np.concatenate([self.b, other.b]),
            ball, self.open or other.open,
        )

    def with_ball(self, rho: float) -> "ConvexRegion":
        """self ∩ B̄_rho (closed ball centred at the origin)."""
        return self.intersect(ConvexRegion.closed_ball(rho, n=self.dim))

    # geometry -----------------------------------------------------------
    @cached_property
    def _interval(self):
        """Exact [a, b] for one-dimensional regions (None when empty)."""
        a, b = self.lo[0], self.hi[0]
        for (coef,), rhs in zip(self.A, self.b):
            if coef > 0:
                b = min(b, rhs / coef)
            elif coef < 0:
                a = max(a, rhs / coef)
            elif rhs < -TOL_FEAS:
                return None
        if self.ball is not None:
            c, r = self.ball.center[0], self.ball.radius
            a, b = max(a, c - r), min(b, c + r)
        if a > b + TOL_FEAS or (self.open and a >= b):
            return None
        return a, b

    @cached_property
    def _polyhedron_feasible(self) -> bool:
        if np.any(self.lo > self.hi + TOL_FEAS):
            return False
        if not self.A.shape[0]:
            return True
        bounds = [(None if np.isinf(l) else l, None if np.isinf(h) else h)
                  for l, h in zip(self.lo, self.hi)]
        res = linprog(np.zeros(self.dim), A_ub=self.A, b_ub=self.b + 1e-12,
                      bounds=bounds, method="highs")
        return res.status != 2

    @cached_property
    def empty(self) -> bool:
        if self.dim == 1:
            return self._interval is None
        if self.open and np.any(self.lo >= self.hi):
            return True
        if not self._polyhedron_feasible:
            return True
        if self.ball is None:
            return False
        poly = ConvexRegion(self.lo, self.hi, self.A, self.b)
        q = poly.project(self.ball.center)
        return np.linalg.norm(q - self.ball.center) > self.ball.radius + TOL_PROJ

    def is_empty(self) -> bool:
        return self.empty

    def _projectors(self):
        ops = [lambda x: np.clip(x, self.lo, self.hi)]
        for a, beta in zip(self.A, self.b):
            nrm2 = float(a @ a)
            if nrm2 == 0.0:
                continue
            ops.append(lambda x, a=a, beta=beta, nrm2=nrm2:
                       x - max(0.0, (a @ x - beta) / nrm2) * a)
        if self.ball is not None:
            c, r = self.ball.center, self.ball.radius

            def to_ball(x, c=c, r=r):
                d = x - c
                nd = np.linalg.norm(d)
                return x if nd <= r else c + d * (r / nd)
            ops.append(to_ball)
        return ops

    def _residual(self, x) -> float:
        res = max(0.0, float(np.max(self.lo - x)), float(np.max(x - self.hi)))
        if self.A.shape[0]:
            res = max(res, float(np.max(self.A @ x - self.b)))
        if self.ball is not None:
            res = max(res, float(np.linalg.norm(x - self.ball.center) - self.ball.radius))
        return res

    def project(self, p) -> np.ndarray:
        """Euclidean projection (onto the closure when ``open``)."""
        p = as_point(p, self.dim)
        if self.empty:
            raise EmptyRegion("projection onto an empty region")
        if self.dim == 1:
            a, b = self._interval
            return np.array([min(max(p[0], a), b)])
        if not self.A.shape[0] and self.ball is None:
            return np.clip(p, self.lo, self.hi)
        if not self.A.shape[0] and np.all(np.isinf(self.lo)) and np.all(np.isinf(self.hi)):
            return self._projectors()[-1](p)
        if not self.A.shape[0]:
            return self._project_box_ball(p)
        ops = self._projectors()
        # Dykstra's alternating projection
        x = p.copy()
        incs = [np.zeros_like(p) for _ in ops]
        for _ in range(MAX_PROJ_ITER):
            x_prev = x
            for k, op in enumerate(ops):
                y = op(x + incs[k])
                incs[k] = x + incs[k] - y
                x = y
            if np.linalg.norm(x - x_prev) <= 1e-14 * (1.0 + np.linalg.norm(x)):
                break
        else:
            if self._residual(x) > TOL_PROJ:
                raise NonConvergence("Dykstra projection did not converge")
        for _ in range(100):
            if self.contains(x):
                break
            for op in ops[1:] + ops[:1]:
                x = op(x)
        if self._residual(x) > TOL_PROJ:
            raise NonConvergence("projection residual above tolerance")
        return x

    def _project_box_ball(self, p) -> np.ndarray:
        # KKT: y(λ) = clip((p + λc)/(1 + λ), lo, hi); ‖y(λ) − c‖ is non-increasing in λ
        c, r = self.ball.center, self.ball.radius
        y = lambda lam: np.clip((p + lam * c) / (1.0 + lam), self.lo, self.hi)
        if np.linalg.norm(y(0.0) - c) <= r:
            return y(0.0)
        lo, hi = 0.0, 1.0
        while np.linalg.norm(y(hi) - c) > r:
            hi *= 2.0
            if hi > 1e15:
                raise NonConvergence("box-ball projection multiplier diverged")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.linalg.norm(y(mid) - c) > r:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * (1.0 + hi):
                break
        return y(hi)

    def distance(self, p) -> float:
        if self.empty:
            return np.inf
        p = as_point(p, self.dim)
        return float(np.linalg.norm(self.project(p) - p))

    def bounding_box(self):
        """Finite-or-infinite box enclosing the region."""
        lo, hi = self.lo.copy(), self.hi.copy()
        if self.ball is not None:
            lo = np.maximum(lo, self.ball.center - self.ball.radius)
            hi = np.minimum(hi, self.ball.center + self.ball.radius)
        if self.A.shape[0] and not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            bounds = [(None if np.isinf(l) else l, None if np.isinf(h) else h)
                      for l, h in zip(lo, hi)]
            for i in range(self.dim):
                for sign in (1.0, -1.0):
                    if (sign > 0 and np.isfinite(lo[i])) or (sign < 0 and np.isfinite(hi[i])):
                        continue
                    c = np.zeros(self.dim)
                    c[i] = sign
                    res = linprog(c, A_ub=self.A, b_ub=self.b, bounds=bounds, method="highs")
                    if res.status == 0:
                        if sign > 0:
                            lo[i] = res.fun
                        else:
                            hi[i] = -res.fun
        return lo, hi

    def is_bounded(self) -> bool:
        lo, hi = self.bounding_box()
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    def sup_norm(self) -> float:
        """Upper bound on max ‖x‖ over the region (inf when unbounded)."""
        lo, hi = self.bounding_box()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            return np.inf
        far = np.maximum(np.abs(lo), np.abs(hi))
        return float(np.linalg.norm(far))

    def extreme_candidates(self, bound: float) -> np.ndarray:
        """Corners of the bounding box of region ∩ B̄_bound, projected into it."""
        if self.empty:
            return np.zeros((0, self.dim))
        win = self.with_ball(bound) if self.ball is None else self
        if win.empty:
            return np.zeros((0, self.dim))
        lo, hi = win.bounding_box()
        lo = np.maximum(lo, -bound)
        hi = np.minimum(hi, bound)
        corners = np.array(list(itertools.product(*zip(lo, hi))), dtype=float)
        out = [win.project(c) for c in corners]
        return np.unique(np.round(np.array(out), 12), axis=0)

    def grid_points(self, h: float, bound: float) -> np.ndarray:
        return grid_points(self, h, bound)


# --------------------------------------------------------------------------
# finite point sets (image of FinitePointsMap)


@dataclass(frozen=True, eq=False)
class PointSet:
    """A finite set of points; same query surface as ConvexRegion."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    def is_empty(self) -> bool:
        return self.empty

    def key(self) -> tuple:
        return _key(self.points)

    def contains(self, p):
        P = np.atleast_2d(np.asarray(p, dtype=float))
        d = np.linalg.norm(P[:, None, :] - self.points[None, :, :], axis=2)
        ok = np.any(d <= TOL_FEAS, axis=1)
        return bool(ok[0]) if np.asarray(p).ndim == 1 else ok

    def project(self, p) -> np.ndarray:
        if self.empty:
            raise EmptyRegion("projection onto an empty point set")
        p = as_point(p, self.dim)
        return self.points[np.argmin(np.linalg.norm(self.points - p, axis=1))].copy()

    def _project_box_ball(self, p) -> np.ndarray:
        # KKT: y(λ) = clip((p + λc)/(1 + λ), lo, hi); ‖y(λ) − c‖ is non-increasing in λ
        c, r = self.ball.center, self.ball.radius
        y = lambda lam: np.clip((p + lam * c) / (1.0 + lam), self.lo, self.hi)
        if np.linalg.norm(y(0.0) - c) <= r:
            return y(0.0)
        lo, hi = 0.0, 1.0
        while np.linalg.norm(y(hi) - c) > r:
            hi *= 2.0
            if hi > 1e15:
                raise NonConvergence("box-ball projection multiplier diverged")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.linalg.norm(y(mid) - c) > r:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * (1.0 + hi):
                break
        return y(hi)

    def distance(self, p) -> float:
        if self.empty:
            return np.inf
        p = as_point(p, self.dim)
        return float(np.min(np.linalg.norm(self.points - p, axis=1)))

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.points, axis=1))) if not self.empty else 0.0

    def grid_points(self, h: float, bound: float) -> np.ndarray:
        keep = np.linalg.norm(self.points, axis=1) <= bound + TOL_FEAS
        return self.points[keep]

    def extreme_candidates(self, bound: float) -> np.ndarray:
        return self.grid_points(0.0, bound)


def grid_points(R, h: float, bound: float) -> np.ndarray:
    """Lattice points h·Z^n inside R ∩ B̄_bound, lexicographically ordered."""
    if not h > 0 or not bound > 0:
        raise ValueError("grid spacing and bound must be positive")
    if isinstance(R, PointSet):
        return R.grid_points(h, bound)
    n = R.dim
    if R.empty:
        return np.zeros((0, n))
    lo = np.maximum(R.lo, -bound)
    hi = np.minimum(R.hi, bound)
    if R.ball is not None:
        lo = np.maximum(lo, R.ball.center - R.ball.radius)
        hi = np.minimum(hi, R.ball.center + R.ball.radius)
    k_lo = np.ceil(lo / h - 1e-9).astype(np.int64)
    k_hi = np.floor(hi / h + 1e-9).astype(np.int64)
    counts = np.maximum(k_hi - k_lo + 1, 0)
    total = int(np.prod(counts.astype(float)))
    if np.prod(counts.astype(float)) > GRID_LIMIT:
        raise ExplosionGuard(f"candidate lattice has {np.prod(counts.astype(float)):.3g} points")
    if total == 0:
        return np.zeros((0, n))
    axes = [np.arange(a, b + 1) for a, b in zip(k_lo, k_hi)]
    K = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    P = np.round(K * float(h), 12)
    keep = R.contains(P) & (np.linalg.norm(P, axis=1) <= bound + TOL_FEAS)
    return P[keep]


def contains(R, p) -> bool:
    return R.contains(as_point(p))


def project(R, p) -> np.ndarray:
    return R.project(p)


def distance(R, p) -> float:
    return R.distance(p)


def region_subset(A, B, h: float = 0.1, bound: float = 100.0):
    """Grid-level check of A ⊆ B for convex B. Returns (ok, witness)."""
    if A.empty:
        return True, None
    if isinstance(A, ConvexRegion) and not A.is_bounded() and B.sup_norm() < np.inf:
        # an unbounded A escapes any bounded B; witness is a far point of A
        lo, hi = A.bounding_box()
        direction = np.where(np.isinf(hi), 1.0, np.where(np.isinf(lo), -1.0, 0.0))
        return False, A.project(direction * 10.0 * (B.sup_norm() + 1.0))
    pts = np.vstack([A.extreme_candidates(bound), grid_points(A, h, bound)])
    inside = B.contains(pts) if len(pts) else np.zeros(0, dtype=bool)
    if np.all(inside):
        return True, None
    return False, pts[np.argmin(inside)]


# --------------------------------------------------------------------------
# set-valued maps


class SetValuedMap:
    dim_in: int
    dim_out: int

    def evaluate(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.evaluate(x)


@dataclass(frozen=True, eq=False)
class ConstantMap(SetValuedMap):
    region: ConvexRegion
    dim_in: int = None

    def __post_init__(self):
        if self.dim_in is None:
            object.__setattr__(self, "dim_in", self.region.dim)

    @property
    def dim_out(self):
        return self.region.dim

    def evaluate(self, x):
        as_point(x, self.dim_in)
        return self.region


@dataclass(frozen=True, eq=False)
class AffineClamp:
    """Per-coordinate bound clamp(A x + b, c, d)."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        A = np.asarray(self.A, dtype=float).reshape(b.size, -1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", np.broadcast_to(np.asarray(self.c, dtype=float), b.shape).copy())
        object.__setattr__(self, "d", np.broadcast_to(np.asarray(self.d, dtype=float), b.shape).copy())

    @classmethod
    def constant(cls, value, dim_in: int):
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.zeros((v.size, dim_in)), v, np.full(v.size, -np.inf), np.full(v.size, np.inf))

    def __call__(self, x):
        with np.errstate(invalid="ignore"):
            raw = self.A @ x if self.A.shape[1] else np.zeros(self.b.size)
        return np.clip(raw + self.b, self.c, self.d)

    def lipschitz(self) -> float:
        return float(np.max(np.linalg.norm(self.A, axis=1))) if self.A.size else 0.0


@dataclass(frozen=True, eq=False)
class MovingBox(SetValuedMap):
    """x ↦ box [lo(x), hi(x)] with clamped-affine bounds."""

    lo: AffineClamp
    hi: AffineClamp

    @property
    def dim_in(self):
        return self.lo.A.shape[1]

    @property
    def dim_out(self):
        return self.lo.b.size

    def evaluate(self, x):
        x = as_point(x, self.dim_in)
        return ConvexRegion.box(self.lo(x), self.hi(x))

    def validate(self, xs) -> None:
        for x in np.atleast_2d(xs):
            if np.any(self.lo(x) > self.hi(x) + TOL_FEAS):
                raise ValueError(f"MovingBox has lo > hi at x={x.tolist()}")

    def lipschitz(self) -> float:
        return max(self.lo.lipschitz(), self.hi.lipschitz())


@dataclass(frozen=True, eq=False)
class BallRestricted(SetValuedMap):
    inner: SetValuedMap
    rho: float

    @property
    def dim_in(self):
        return self.inner.dim_in

    @property
    def dim_out(self):
        return self.inner.dim_out

    def evaluate(self, x):
        return self.inner.evaluate(x).with_ball(self.rho)


@dataclass(frozen=True, eq=False)
class ProductMap(SetValuedMap):
    """K(x) = ∏ K_ν(x^{-ν}); ``blocks[ν]`` lists the flat indices of player ν."""

    maps: tuple
    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "blocks", tuple(tuple(int(i) for i in b) for b in self.blocks))
        idx = sorted(i for b in self.blocks for i in b)
        if idx != list(range(len(idx))):
            raise ValueError("blocks must partition 0..n-1")
        for m, blk in zip(self.maps, self.blocks):
            if m.dim_out != len(blk) or m.dim_in != len(idx) - len(blk):
                raise DimensionMismatch("player map dimensions do not match block partition")

    @property
    def dim_in(self):
        return sum(len(b) for b in self.blocks)

    dim_out = dim_in

    def complement(self, nu: int) -> np.ndarray:
        own = set(self.blocks[nu])
        return np.array([i for i in range(self.dim_in) if i not in own], dtype=int)

    def evaluate(self, x):
        x = as_point(x, self.dim_in)
        n = self.dim_in
        lo, hi = np.empty(n), np.empty(n)
        rows, rhs = [], []
        opened = False
        for nu, (m, blk) in enumerate(zip(self.maps, self.blocks)):
            r = m.evaluate(x[self.complement(nu)])
            if r.ball is not None:
                raise ValueError("player values with balls cannot be assembled")
            blk = list(blk)
            lo[blk], hi[blk] = r.lo, r.hi
            for a, beta in zip(r.A, r.b):
                row = np.zeros(n)
                row[blk] = a
                rows.append(row)
                rhs.append(beta)
            opened = opened or r.open
        A = np.array(rows) if rows else None
        return ConvexRegion(lo, hi, A, np.array(rhs) if rows else None, open=opened)


@dataclass(frozen=True, eq=False)
class GluedMap(SetValuedMap):
    """J(x) = S(x) on A, T(x) elsewhere."""

    A: ConvexRegion
    inner: SetValuedMap
    outer: SetValuedMap

    @property
    def dim_in(self):
        return self.outer.dim_in

    @property
    def dim_out(self):
        return self.outer.dim_out

    def evaluate(self, x):
        x = as_point(x, self.dim_in)
        return self.inner.evaluate(x) if self.A.contains(x) else self.outer.evaluate(x)


@dataclass(frozen=True, eq=False)
class FinitePointsMap(SetValuedMap):
    """x ↦ {M_j x + q_j}; convexify only through co_sampler."""

    M: tuple
    q: tuple

    def __post_init__(self):
        M = tuple(np.atleast_2d(np.asarray(m, dtype=float)) for m in self.M)
        q = tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in self.q)
        if not M or len(M) != len(q):
            raise ValueError("need at least one affine map")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "q", q)

    @property
    def dim_in(self):
        return self.M[0].shape[1]

    @property
    def dim_out(self):
        return self.M[0].shape[0]

    def vertices(self, x) -> np.ndarray:
        """Vertex values, shape (J, ..., n) for x of shape (..., n_in)."""
        x = np.asarray(x, dtype=float)
        return np.stack([x @ M.T + q for M, q in zip(self.M, self.q)])

    def evaluate(self, x):
        return PointSet(self.vertices(as_point(x, self.dim_in)))


def evaluate_map(K: SetValuedMap, x):
    return K.evaluate(as_point(x))


def restrict_to_ball(K: SetValuedMap, rho: float) -> BallRestricted:
    if not rho > 0:
        raise ValueError("rho must be positive")
    return BallRestricted(K, float(rho))


def glue_maps(A: ConvexRegion, S: SetValuedMap, T: SetValuedMap,
              h: float = 0.1, bound: float = 10.0) -> GluedMap:
    """Glue S on A with T elsewhere; checks S(x) ⊆ T(x) on a grid sample of A."""
    for x in grid_points(A, h, bound):
        ok, _ = region_subset(S.evaluate(x), T.evaluate(x), h=h, bound=bound)
        if not ok:
            raise InclusionViolated(x)
    return GluedMap(A, S, T)


def co_sampler(pts, m: int, seed: int, return_weights: bool = False):
    """m seeded uniform-simplex convex combinations of ``pts``."""
    P = np.atleast_2d(np.asarray(pts, dtype=float))
    if P.shape[0] == 0:
        raise ValueError("co_sampler needs at least one point")
    rng = np.random.default_rng(seed)
    W = rng.dirichlet(np.ones(P.shape[0]), size=m)
    Q = W @ P
    return (Q, W) if return_weights else Q


# --------------------------------------------------------------------------
# bifunctions


class Bifunction:
    """f(x, y), vectorised: x and y may be (n,) or broadcastable (..., n)."""

    dim: int

    def __call__(self, x, y):
        raise NotImplementedError

    def _fd(self, x, y, wrt: int, eps: float = 1e-7):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        base = y if wrt == 1 else x
        g = np.zeros(np.broadcast_shapes(x.shape, y.shape))
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = eps
            if wrt == 1:
                g[..., i] = (self(x, base + e) - self(x, base - e)) / (2 * eps)
            else:
                g[..., i] = (self(base + e, y) - self(base - e, y)) / (2 * eps)
        return g

    def grad_y(self, x, y):
        return self._fd(x, y, wrt=1)

    def grad_x(self, x, y):
        return self._fd(x, y, wrt=0)


def _quad(X, M, Y):
    return np.einsum("...i,ij,...j->...", X, M, Y)


@dataclass(frozen=True, eq=False)
class Quadratic(Bifunction):
    """f(x,y) = xᵀPx + yᵀQy + xᵀRy + cᵀx + dᵀy + e."""

    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: float = 0.0

    def __post_init__(self):
        n = np.atleast_1d(np.asarray(self.c)).size
        for name in ("P", "Q", "R"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(n, n))
        for name in ("c", "d"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(n))
        object.__setattr__(self, "e", float(self.e))

    @classmethod
    def zeros(cls, n: int, **kw) -> "Quadratic":
        parts = dict(P=np.zeros((n, n)), Q=np.zeros((n, n)), R=np.zeros((n, n)),
                     c=np.zeros(n), d=np.zeros(n), e=0.0)
        parts.update(kw)
        return cls(**parts)

    @property
    def dim(self):
        return self.c.size

    def __call__(self, x, y):
        X = np.asarray(x, dtype=float)
        Y = np.asarray(y, dtype=float)
        return (_quad(X, self.P, X) + _quad(Y, self.Q, Y) + _quad(X, self.R, Y)
                + X @ self.c + Y @ self.d + self.e)

    def grad_y(self, x, y):
        X = np.asarray(x, dtype=float)
        Y = np.asarray(y, dtype=float)
        return Y @ (self.Q + self.Q.T) + X @ self.R + self.d

    def grad_x(self, x, y):
        X = np.asarray(x, dtype=float)
        Y = np.asarray(y, dtype=float)
        return X @ (self.P + self.P.T) + Y @ self.R.T + self.c


def _norm(Y):
    return np.linalg.norm(np.asarray(Y, dtype=float), axis=-1)


def _bf_zero(x, y, p):
    return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]))


def _bf_one(x, y, p):
    return _bf_zero(x, y, p) + 1.0


def _bf_clamp_norm(x, y, p):
    # h(y) = min(‖y‖, cap), independent of x
    return np.minimum(_norm(y), p.get("cap", 1.0)) + _bf_zero(x, y, p)


def _bf_far_penalty(x, y, p):
    # zero on B̄_r0, negative beyond it
    return -np.maximum(_norm(y) - p.get("r0", 3.0), 0.0) + _bf_zero(x, y, p)


BUILTIN_BIFUNCTIONS: dict[str, Callable] = {
    "zero": _bf_zero,
    "one": _bf_one,
    "clamp_norm": _bf_clamp_norm,
    "far_penalty": _bf_far_penalty,
}


@dataclass(frozen=True, eq=False)
class Builtin(Bifunction):
    name: str
    dim: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in BUILTIN_BIFUNCTIONS:
            raise ValueError(f"unknown builtin bifunction {self.name!r}")

    def __call__(self, x, y):
        return BUILTIN_BIFUNCTIONS[self.name](np.asarray(x, dtype=float),
                                              np.asarray(y, dtype=float), self.params)


def eval_bifunction(f: Bifunction, x, y) -> float:
    x = as_point(x, f.dim)
    y = as_point(y, f.dim)
    return float(f(x, y))


# --------------------------------------------------------------------------
# problem instances


@dataclass(frozen=True)
class Numerics:
    grid_h: float = 0.01
    tol_feas: float = TOL_FEAS
    tol_sol: float = 1e-6
    probe_radius: Optional[float] = None
    rho: Optional[float] = None
    seed: int = 0

    def probe(self, rho: Optional[float] = None) -> float:
        """Probe window radius: explicit value, else 4ρ, never below 2ρ."""
        rho = rho if rho is not None else self.rho
        if self.probe_radius is not None:
            return max(self.probe_radius, 2 * rho) if rho else self.probe_radius
        return 4 * rho if rho else 10.0


KINDS = ("QEP", "QVI", "GNEP")


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    n: int
    C: ConvexRegion
    K: SetValuedMap
    f: Bifunction
    kind: str = "QEP"
    numerics: Numerics = field(default_factory=Numerics)
    name: str = ""
    payload: object = None  # PolytopeOperator (QVI) or Game (GNEP)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.C.dim != self.n or self.K.dim_in != self.n or self.K.dim_out != self.n:
            raise DimensionMismatch("C, K must live in R^n")
        if self.f.dim != self.n:
            raise DimensionMismatch("bifunction dimension must equal n")
        if self.kind in ("QVI", "GNEP") and self.payload is None:
            raise ValueError(f"{self.kind} instance needs its operator/game payload")

    def validate(self, h: Optional[float] = None, bound: Optional[float] = None) -> None:
        """Probe-grid checks of MovingBox ordering and glued inclusions."""
        bound = bound or self.numerics.probe()
        h = h or max(self.numerics.grid_h, bound / 50.0)
        xs = grid_points(self.C, h, bound)
        for m, proj in _moving_boxes(self.K):
            m.validate(xs if proj is None else xs[:, proj])
        for g in _glued(self.K):
            glue_maps(g.A, g.inner, g.outer, h=h, bound=bound)

    def with_numerics(self, **kw) -> "ProblemInstance":
        from dataclasses import replace
        return replace(self, numerics=replace(self.numerics, **kw))


def _moving_boxes(K, proj=None):
    if isinstance(K, MovingBox):
        yield K, proj
    elif isinstance(K, BallRestricted):
        yield from _moving_boxes(K.inner, proj)
    elif isinstance(K, GluedMap):
        yield from _moving_boxes(K.inner, proj)
        yield from _moving_boxes(K.outer, proj)
    elif isinstance(K, ProductMap):
        for nu, m in enumerate(K.maps):
            yield from _moving_boxes(m, K.complement(nu))


def _glued(K):
    if isinstance(K, GluedMap):
        yield K
        yield from _glued(K.inner)
        yield from _glued(K.outer)
    elif isinstance(K, BallRestricted):
        yield from _glued(K.inner)
