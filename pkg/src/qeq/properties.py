"""Budgeted checkers for generalized convexity/monotonicity and grid falsifiers
for set-valued continuity.

Every universally quantified definition becomes a sampler: ``passed=True``
only means no counterexample was found within budget. A failure always
carries a witness that :func:`reevaluate` confirms.
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import Bifunction, ConvexRegion, PointSet, TOL_FEAS, grid_points

VIOLATION = 1e-9
PREMISE = 1e-12
T_GRID = tuple(np.round(np.arange(1, 10) / 10.0, 12))
LSC_SCALES = 20
NOTE_PASS = "no counterexample within budget (non-certifying)"
NOTE_FAIL = "counterexample found"


@dataclass
class PropertyVerdict:
    property: str
    passed: bool
    witness: Optional[dict] = None
    samples_used: int = 0
    certified: bool = False
    note: Optional[str] = None
    details: Optional[dict] = None

    def __post_init__(self):
        if self.note is None:
            self.note = NOTE_PASS if self.passed else NOTE_FAIL

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _fail(name, witness, used, note=NOTE_FAIL) -> PropertyVerdict:
    return PropertyVerdict(name, False, _jsonable(witness), int(used), False, note)


def _pass(name, used, note=None) -> PropertyVerdict:
    v = PropertyVerdict(name, True, None, int(used))
    if note:
        v.note = note
    return v


# --------------------------------------------------------------------------
# sampling


def sample_grid(R, h: float = 0.1, probe_radius: float = 10.0, max_points: int = 4000) -> np.ndarray:
    """Probe grid of R ∩ B̄_probe, coarsened by doubling h until small enough."""
    while True:
        lo = np.maximum(R.lo, -probe_radius) if isinstance(R, ConvexRegion) else None
        if lo is not None:
            hi = np.minimum(R.hi, probe_radius)
            est = np.prod(np.maximum(np.floor((hi - lo) / h) + 1, 1))
            if est > 50 * max_points:
                h *= 2
                continue
        G = grid_points(R, h, probe_radius)
        if len(G) <= max_points:
            return G
        h *= 2


def _index_tuples(rng, size: int, arity: int, budget: int) -> np.ndarray:
    """All index tuples when they fit in budget, else ``budget`` random ones."""
    total = size**arity
    if total <= budget:
        return np.array(list(itertools.product(range(size), repeat=arity)), dtype=int).reshape(-1, arity)
    return rng.integers(0, size, size=(budget, arity))


def _lexmin(rows: np.ndarray) -> int:
    """Index of the lexicographically smallest row."""
    order = np.lexsort(rows.T[::-1])
    return int(order[0])


def _points(f: Bifunction, R, h, probe_radius):
    G = sample_grid(R, h, probe_radius)
    if len(G) == 0:
        raise ValueError("sampling region has no grid points")
    return G


# --------------------------------------------------------------------------
# generalized convexity in the second argument


def _segment_samples(f, R, budget, seed, h, probe_radius):
    G = _points(f, R, h, probe_radius)
    rng = np.random.default_rng(seed)
    per_t = max(1, budget // len(T_GRID))
    idx = _index_tuples(rng, len(G), 3, per_t)
    X, Y1, Y2 = G[idx[:, 0]], G[idx[:, 1]], G[idx[:, 2]]
    T = np.repeat(np.array(T_GRID), len(idx))[:, None]
    X, Y1, Y2 = (np.tile(a, (len(T_GRID), 1)) for a in (X, Y1, Y2))
    M = T * Y1 + (1 - T) * Y2
    return X, Y1, Y2, T[:, 0], f(X, M), f(X, Y1), f(X, Y2)


def _segment_witness(X, Y1, Y2, T, mid, v1, v2, bad, kind):
    rows = np.hstack([X[bad], Y1[bad], Y2[bad], T[bad][:, None]])
    k = np.flatnonzero(bad)[_lexmin(rows)]
    return dict(kind=kind, x=X[k], y1=Y1[k], y2=Y2[k], t=T[k],
                f_mid=mid[k], f_y1=v1[k], f_y2=v2[k])


def check_quasiconvex_y(f: Bifunction, R, budget: int = 10_000, seed: int = 0,
                        h: float = 0.1, probe_radius: float = 10.0) -> PropertyVerdict:
    if budget <= 0:
        raise ValueError("budget must be positive")
    X, Y1, Y2, T, mid, v1, v2 = _segment_samples(f, R, budget, seed, h, probe_radius)
    bad = mid > np.maximum(v1, v2) + VIOLATION
    if bad.any():
        return _fail("quasiconvex_y", _segment_witness(X, Y1, Y2, T, mid, v1, v2, bad, "quasiconvex"), len(T))
    return _pass("quasiconvex_y", len(T))


def check_semistrict_quasiconvex_y(f: Bifunction, R, budget: int = 10_000, seed: int = 0,
                                   h: float = 0.1, probe_radius: float = 10.0) -> PropertyVerdict:
    if budget <= 0:
        raise ValueError("budget must be positive")
    X, Y1, Y2, T, mid, v1, v2 = _segment_samples(f, R, budget, seed, h, probe_radius)
    top = np.maximum(v1, v2)
    bad = mid > top + VIOLATION
    kind = "quasiconvex"
    if not bad.any():
        bad = (np.abs(v1 - v2) > VIOLATION) & (mid >= top - PREMISE)
        kind = "strict"
    if bad.any():
        return _fail("semistrict_quasiconvex_y",
                     _segment_witness(X, Y1, Y2, T, mid, v1, v2, bad, kind), len(T))
    return _pass("semistrict_quasiconvex_y", len(T))


# --------------------------------------------------------------------------
# generalized monotonicity


def _pairs(f, R, budget, seed, h, probe_radius, diagonal=False):
    G = _points(f, R, h, probe_radius)
    rng = np.random.default_rng(seed)
    idx = _index_tuples(rng, len(G), 2, budget)
    if diagonal:
        d = np.repeat(np.arange(len(G)), 2).reshape(-1, 2)
        idx = np.vstack([d, idx])
    return G[idx[:, 0]], G[idx[:, 1]]


def _pair_witness(X, Y, bad, **values):
    rows = np.hstack([X[bad], Y[bad]])
    k = np.flatnonzero(bad)[_lexmin(rows)]
    return dict(x=X[k], y=Y[k], **{name: v[k] for name, v in values.items()})


def check_pseudo_monotone(f: Bifunction, R, budget: int = 10_000, seed: int = 0,
                          h: float = 0.1, probe_radius: float = 10.0) -> PropertyVerdict:
    X, Y = _pairs(f, R, budget, seed, h, probe_radius)
    fxy, fyx = f(X, Y), f(Y, X)
    bad = (fxy >= -PREMISE) & (fyx > VIOLATION)
    if bad.any():
        return _fail("pseudo_monotone", _pair_witness(X, Y, bad, f_xy=fxy, f_yx=fyx), len(X))
    return _pass("pseudo_monotone", len(X))


def check_quasi_monotone(f: Bifunction, R, budget: int = 10_000, seed: int = 0,
                         h: float = 0.1, probe_radius: float = 10.0) -> PropertyVerdict:
    X, Y = _pairs(f, R, budget, seed, h, probe_radius)
    fxy, fyx = f(X, Y), f(Y, X)
    bad = (fxy > VIOLATION) & (fyx > VIOLATION)
    if bad.any():
        return _fail("quasi_monotone", _pair_witness(X, Y, bad, f_xy=fxy, f_yx=fyx), len(X))
    return _pass("quasi_monotone", len(X))


def _simplex_samples(R, m_max, budget, seed, h, probe_radius):
    """Yield (vertices (S, m, n), hull points (S, n), weights (S, m)) per m, diagonal first."""
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    G = sample_grid(R, h, probe_radius)
    rng = np.random.default_rng(seed)
    yield G[:, None, :], G.copy(), np.ones((len(G), 1))
    per_m = max(1, budget // (m_max - 1))
    for m in range(2, m_max + 1):
        idx = rng.integers(0, len(G), size=(per_m, m))
        W = rng.dirichlet(np.ones(m), size=per_m)
        V = G[idx]
        yield V, np.einsum("sm,smn->sn", W, V), W


def check_properly_quasi_monotone(f: Bifunction, R, m_max: int = 4, budget: int = 10_000,
                                  seed: int = 0, h: float = 0.1,
                                  probe_radius: float = 10.0) -> PropertyVerdict:
    used = 0
    for V, Xh, W in _simplex_samples(R, m_max, budget, seed, h, probe_radius):
        vals = f(V, Xh[:, None, :])
        low = vals.min(axis=1)
        used += len(Xh)
        bad = low > VIOLATION
        if bad.any():
            rows = np.hstack([V[bad].reshape(bad.sum(), -1), Xh[bad]])
            k = np.flatnonzero(bad)[_lexmin(rows)]
            return _fail("properly_quasi_monotone",
                         dict(points=V[k], x=Xh[k], weights=W[k], values=vals[k]), used)
    return _pass("properly_quasi_monotone", used)


def segment_ts(t_grid: int) -> np.ndarray:
    """Interior t-grid k/(T+1) plus 1 − 10^-k, k = 2..12, accumulating at t = 1.

    Without the accumulating tail a continuous field can satisfy the premise on the
    coarse grid while violating it between the last grid point and x.
    """
    return np.concatenate([np.arange(1, t_grid + 1) / (t_grid + 1.0), 1.0 - 10.0 ** -np.arange(2, 13)])


def check_upper_sign(f: Bifunction, R, budget: int = 10_000, t_grid: int = 9, seed: int = 0,
                     h: float = 0.1, probe_radius: float = 10.0) -> PropertyVerdict:
    X, Y = _pairs(f, R, budget, seed, h, probe_radius, diagonal=True)
    ts = segment_ts(t_grid)
    Xt = ts[None, :, None] * X[:, None, :] + (1 - ts)[None, :, None] * Y[:, None, :]
    premise = np.all(f(Xt, X[:, None, :]) <= PREMISE, axis=1)
    fxy = f(X, Y)
    bad = premise & (fxy < -VIOLATION)
    if bad.any():
        w = _pair_witness(X, Y, bad, f_xy=fxy)
        w["t_grid"] = t_grid
        return _fail("upper_sign", w, len(X))
    return _pass("upper_sign", len(X))


# --------------------------------------------------------------------------
# set-valued continuity falsifiers


def _offsets(n: int) -> np.ndarray:
    rng = range(-2, 3)
    offs = [np.array(o, dtype=float) for o in itertools.product(rng, repeat=n)]
    return np.array([o for o in offs if 0 < np.linalg.norm(o) <= 2.0])


def _distances(V, Y: np.ndarray) -> np.ndarray:
    if V.is_empty():
        return np.full(len(Y), np.inf)
    if isinstance(V, PointSet):
        D = Y[:, None, :] - V.points[None]
        return np.sqrt(np.min(np.einsum("ijk,ijk->ij", D, D), axis=1))
    if not V.A.shape[0] and V.ball is None:
        return np.linalg.norm(Y - np.clip(Y, V.lo, V.hi), axis=1)
    return np.array([V.distance(y) for y in Y])


def _y_samples(V, h, probe_radius, rng, count):
    ext = V.extreme_candidates(probe_radius)
    G = V.grid_points(h, probe_radius)
    if len(G) > count:
        G = G[np.sort(rng.choice(len(G), size=count, replace=False))]
    Y = np.vstack([ext, G]) if len(ext) else G
    return np.unique(np.round(Y, 12), axis=0) if len(Y) else Y


def _subsample(G, max_points, rng):
    if len(G) > max_points:
        G = G[np.sort(rng.choice(len(G), size=max_points, replace=False))]
    return G


def falsify_lsc(K, R, h: float = 0.05, kappa: float = 10.0, seed: int = 0,
                probe_radius: float = 10.0, max_points: int = 300, y_samples: int = 4,
                domain: Optional[Callable] = None, points: Optional[np.ndarray] = None,
                name: str = "lsc") -> PropertyVerdict:
    """Grid falsifier for lower semi-continuity.

    For each probe x0 and sampled y0 ∈ K(x0), approach x0 along each lattice
    neighbour direction e. A failure needs dist(y0, K(x0+δe)) > κδ + h at the
    three finest scales δ = ‖offset‖·h·2^-k, k = 18..20, i.e. a jump that
    does not close as x → x0.
    """
    rng = np.random.default_rng(seed)
    in_domain = domain or (lambda x: bool(R.contains(x)))
    X0 = points if points is not None else _subsample(sample_grid(R, h, probe_radius), max_points, rng)
    dirs = _offsets(R.dim if points is None else X0.shape[1])
    used = 0
    for x0 in X0:
        V0 = K.evaluate(x0)
        if V0.is_empty():
            continue
        Y0 = _y_samples(V0, h, probe_radius, rng, y_samples)
        if not len(Y0):
            continue
        for off in dirs:
            e = off / np.linalg.norm(off)
            deltas = np.linalg.norm(off) * h * 2.0 ** -np.arange(LSC_SCALES, LSC_SCALES - 3, -1)
            alive = np.ones(len(Y0), dtype=bool)
            for delta in deltas:
                x = x0 + delta * e
                if not in_domain(x):
                    alive[:] = False
                    break
                used += len(Y0)
                d = _distances(K.evaluate(x), Y0)
                alive &= d > kappa * delta + h
                if not alive.any():
                    break
            if alive.any():
                j = int(np.argmax(np.where(alive, d, -np.inf)))
                return _fail(name, dict(x0=x0, y0=Y0[j], direction=e, delta=deltas[0],
                                        distance=d[j], kappa=kappa, h=h), used)
    return _pass(name, used)


def falsify_closed_graph(K, R, h: float = 0.05, seed: int = 0, probe_radius: float = 10.0,
                         max_points: int = 300, delta: float = 1e-7,
                         name: str = "closed_graph") -> PropertyVerdict:
    """Grid falsifier for closedness of the graph of K.

    Two refutations: (a) a value K(x̄) that misses one of its own closure
    points; (b) limit points ȳ of K(x̄+δe) as δ → 0 staying farther than h from
    K(x̄) at three successive scales.
    """
    rng = np.random.default_rng(seed)
    X0 = _subsample(sample_grid(R, h, probe_radius), max_points, rng)
    dirs = _offsets(R.dim)
    used = 0
    for xb in X0:
        V = K.evaluate(xb)
        if not V.is_empty() and isinstance(V, ConvexRegion):
            lo, hi = V.bounding_box()
            lo = np.where(np.isfinite(lo), lo - 1.0, -probe_radius)
            hi = np.where(np.isfinite(hi), hi + 1.0, probe_radius)
            probes = np.array(list(itertools.product(*zip(lo, hi))))
            for p in probes:
                used += 1
                yb = V.project(p)
                if np.linalg.norm(yb) <= probe_radius and not V.contains(yb):
                    return _fail(name, dict(kind="value_not_closed", x=xb, y=yb), used)
        for off in dirs:
            e = off / np.linalg.norm(off)
            far = None
            for k in range(3):
                x = xb + delta * 2.0**-k * e
                if not R.contains(x):
                    far = None
                    break
                Vx = K.evaluate(x)
                if Vx.is_empty():
                    far = None
                    break
                used += 1
                Yl = Vx.extreme_candidates(probe_radius)
                if not len(Yl):
                    far = None
                    break
                d = _distances(V, Yl)
                mask = (d > h) if far is None else (far & (d > h))
                if not mask.any():
                    far = None
                    break
                far = mask
            if far is not None and far.any():
                j = int(np.flatnonzero(far)[0])
                return _fail(name, dict(kind="graph_limit", x=xb, direction=e, delta=delta,
                                        y=Yl[j]), used)
    return _pass(name, used)


def falsify_usc_first_arg(f: Bifunction, R, h: float = 0.1, seed: int = 0,
                          probe_radius: float = 10.0, max_points: int = 200,
                          delta: float = 1e-6, margin: float = 1e-4) -> PropertyVerdict:
    """Refutes upper semi-continuity of x ↦ f(x, y) via persistent upward jumps."""
    rng = np.random.default_rng(seed)
    G = sample_grid(R, h, probe_radius)
    X0 = _subsample(G, max_points, rng)
    Y = _subsample(G, 20, rng)
    dirs = _offsets(R.dim)
    used = 0
    for xb in X0:
        base = f(xb, Y)
        for off in dirs:
            e = off / np.linalg.norm(off)
            up = np.ones(len(Y), dtype=bool)
            for s in (delta, delta / 10):
                x = xb + s * e
                if not R.contains(x):
                    up[:] = False
                    break
                used += len(Y)
                up &= f(x, Y) > base + margin
            if up.any():
                j = int(np.flatnonzero(up)[0])
                return _fail("usc_first_arg", dict(x=xb, y=Y[j], direction=e, delta=delta / 10), used)
    return _pass("usc_first_arg", used)


# --------------------------------------------------------------------------
# witness re-evaluation


def reevaluate(verdict: PropertyVerdict, obj) -> bool:
    """True iff the failure witness still evaluates as a violation (tolerance 1e-9)."""
    if verdict.passed:
        return False
    w = {k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in verdict.witness.items()}
    name = verdict.property
    if name in ("quasiconvex_y", "semistrict_quasiconvex_y"):
        f = obj
        mid = f(w["x"], w["t"] * w["y1"] + (1 - w["t"]) * w["y2"])
        v1, v2 = f(w["x"], w["y1"]), f(w["x"], w["y2"])
        if w["kind"] == "quasiconvex":
            return bool(mid > max(v1, v2) + VIOLATION)
        return bool(abs(v1 - v2) > VIOLATION and mid >= max(v1, v2) - PREMISE)
    if name == "pseudo_monotone":
        return bool(obj(w["x"], w["y"]) >= -PREMISE and obj(w["y"], w["x"]) > VIOLATION)
    if name == "quasi_monotone":
        return bool(obj(w["x"], w["y"]) > VIOLATION and obj(w["y"], w["x"]) > VIOLATION)
    if name == "properly_quasi_monotone":
        pts = np.atleast_2d(w["points"])
        hull = np.asarray(w["weights"]) @ pts
        return bool(np.allclose(hull, w["x"], atol=1e-12)
                    and min(obj(p, w["x"]) for p in pts) > VIOLATION)
    if name == "upper_sign":
        x, y = w["x"], w["y"]
        prem = all(obj(t * x + (1 - t) * y, x) <= PREMISE for t in segment_ts(int(w["t_grid"])))
        return bool(prem and obj(x, y) < -VIOLATION)
    if name == "operator_properly_quasi_monotone":
        pts = np.atleast_2d(w["points"])
        hull = np.asarray(w["weights"]) @ pts
        sups = [np.max(obj.vertices(p) @ (w["x"] - p)) for p in pts]
        return bool(np.allclose(hull, w["x"], atol=1e-12) and min(sups) > VIOLATION)
    if name == "operator_upper_sign_continuous":
        x, y = w["x"], w["y"]
        prem = all(np.min(obj.vertices(t * x + (1 - t) * y) @ (y - x)) >= -PREMISE
                   for t in segment_ts(int(w["t_grid"])))
        return bool(prem and np.max(obj.vertices(x) @ (y - x)) < -VIOLATION)
    if name.startswith("lsc"):
        x = w["x0"] + w["delta"] * w["direction"]
        d = _distances(obj.evaluate(x), np.atleast_2d(w["y0"]))[0]
        return bool(d > w["kappa"] * w["delta"] + w["h"])
    if name == "closed_graph":
        V = obj.evaluate(w["x"])
        if w["kind"] == "value_not_closed":
            return bool(V.distance(w["y"]) <= TOL_FEAS and not V.contains(w["y"]))
        return bool(V.distance(w["y"]) > 0.0)
    if name == "usc_first_arg":
        x, y = w["x"], w["y"]
        return bool(obj(x + w["delta"] * w["direction"], y) > obj(x, y))
    raise ValueError(f"no re-evaluation rule for {name!r}")


PROPERTY_CHECKS = {
    "quasiconvex_y": check_quasiconvex_y,
    "semistrict_quasiconvex_y": check_semistrict_quasiconvex_y,
    "pseudo_monotone": check_pseudo_monotone,
    "quasi_monotone": check_quasi_monotone,
    "properly_quasi_monotone": check_properly_quasi_monotone,
    "upper_sign": check_upper_sign,
}
