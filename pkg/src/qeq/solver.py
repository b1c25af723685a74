"""Grid solver for quasi-equilibrium problems restricted to a ball.

Pipeline: coercive radius → hypothesis falsifiers → fixed points of the
ball-restricted map → equilibrium filter → lifting check on a wider ball.
``oracle_enumerate`` is an independent brute-force double loop kept free of
every shortcut used by the solver.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .core import (
    ConvexRegion,
    FinitePointsMap,
    PointSet,
    ProblemInstance,
    QEQError,
    grid_points,
    restrict_to_ball,
)
from .properties import (
    PREMISE,
    VIOLATION,
    PropertyVerdict,
    _jsonable,
    check_properly_quasi_monotone,
    check_quasiconvex_y,
    check_semistrict_quasiconvex_y,
    check_upper_sign,
    falsify_closed_graph,
    falsify_lsc,
    falsify_usc_first_arg,
    sample_grid,
)

POLISH_STEPS = 20
MODES = {"case1": "thm34_case1", "case2": "thm34_case2", "lassonde": "lassonde", "oracle": "oracle"}


class EmptyFixedPointSet(QEQError):
    """No grid-consistent fixed point of the restricted map was found."""


@dataclass
class FixedPointSet:
    points: np.ndarray
    h: float
    tol: float
    polished: np.ndarray = None

    def __len__(self):
        return len(self.points)


@dataclass
class SolutionCheck:
    ok: bool
    feasible: bool
    dist: float
    y: Optional[np.ndarray] = None
    value: Optional[float] = None

    def __bool__(self):
        return self.ok


# --------------------------------------------------------------------------
# fixed points


def fixed_point_set(K, region: ConvexRegion, h: float, tol: float = 1e-9) -> FixedPointSet:
    """Grid points x of ``region`` with dist(x, K(x)) ≤ h + tol."""
    if not region.is_bounded():
        raise ValueError("fixed_point_set needs a bounded region")
    n = region.dim
    G = grid_points(region, h, region.sup_norm())
    keep, polished = [], []
    for x in G:
        V = K.evaluate(x)
        if V.is_empty() or V.distance(x) > h + tol:
            continue
        keep.append(x)
        p = V.project(x)
        Vp = K.evaluate(p) if region.contains(p) else None
        ok = Vp is not None and not Vp.is_empty() and Vp.distance(p) <= h + tol
        polished.append(p if ok else x)
    pts = np.array(keep).reshape(-1, n)
    return FixedPointSet(pts, h, tol, np.array(polished).reshape(-1, n))


# --------------------------------------------------------------------------
# solution checks


def _candidates(V, x0, h, bound):
    if isinstance(V, PointSet):
        P = V.points[np.linalg.norm(V.points, axis=1) <= bound + 1e-12]
        return P
    parts = [V.grid_points(h, bound), V.extreme_candidates(bound)]
    p = V.project(x0)
    if np.linalg.norm(p) <= bound + 1e-9:
        parts.append(p[None])
    parts = [q for q in parts if len(q)]
    return np.vstack(parts) if parts else np.zeros((0, V.dim))


def _polish(phi, grad, project, y, steps=POLISH_STEPS):
    """Projected descent with backtracking on phi from y."""
    val = float(phi(y))
    for _ in range(steps):
        g = grad(y)
        if not np.all(np.isfinite(g)) or np.linalg.norm(g) == 0:
            break
        s, moved = 1.0, False
        for _ in range(30):
            cand = project(y - s * g)
            v = float(phi(cand))
            if v < val - 1e-15:
                y, val, moved = cand, v, True
                break
            s *= 0.5
        if not moved:
            break
    return y, val


def _window_bound(inst, window):
    if window is None:
        return inst.numerics.probe(), None
    return window.sup_norm(), window


def _extreme_over_values(inst, x0, window, h, sign, settled=None):
    """min over y ∈ K(x0) ∩ window of sign·g(y), g = f(x0,·) (sign=+1) or f(·,x0) (sign=-1).

    Polishing is skipped once the grid value is already below ``settled``.
    """
    f = inst.f
    V = inst.K.evaluate(x0)
    bound, win = _window_bound(inst, window)
    W = V if win is None or isinstance(V, PointSet) else V.intersect(win)
    if W.is_empty():
        return None, None
    Y = _candidates(W, x0, h, bound)
    if not len(Y):
        return None, None
    if sign > 0:
        phi = lambda y: f(x0, y)
        grad = lambda y: f.grad_y(x0, y)
    else:
        phi = lambda y: -f(y, x0)
        grad = lambda y: -f.grad_x(y, x0)
    vals = phi(Y)
    k = int(np.argmin(vals))
    y, v = Y[k], float(vals[k])
    if isinstance(W, ConvexRegion) and (settled is None or v >= settled):
        y, v = _polish(phi, grad, W.project, y)
    return y, v


def check_qep_solution(inst: ProblemInstance, x0, window: Optional[ConvexRegion] = None,
                       tol: Optional[float] = None, feas_tol: Optional[float] = None,
                       h: Optional[float] = None) -> SolutionCheck:
    """x0 ∈ K(x0) (to feas_tol) and f(x0, y) ≥ −tol on K(x0) ∩ window."""
    x0 = np.asarray(x0, dtype=float).reshape(inst.n)
    tol = inst.numerics.tol_sol if tol is None else tol
    feas_tol = tol if feas_tol is None else feas_tol
    h = h or inst.numerics.grid_h
    V = inst.K.evaluate(x0)
    d = V.distance(x0)
    if d > feas_tol:
        return SolutionCheck(False, False, float(d))
    y, v = _extreme_over_values(inst, x0, window, h, +1, settled=-tol)
    if y is None:
        return SolutionCheck(True, True, float(d))
    return SolutionCheck(v >= -tol, True, float(d), y, v)


def check_mqep_solution(inst: ProblemInstance, x0, window: Optional[ConvexRegion] = None,
                        tol: Optional[float] = None, feas_tol: Optional[float] = None,
                        h: Optional[float] = None) -> SolutionCheck:
    """x0 ∈ K(x0) and f(y, x0) ≤ tol on K(x0) ∩ window."""
    x0 = np.asarray(x0, dtype=float).reshape(inst.n)
    tol = inst.numerics.tol_sol if tol is None else tol
    feas_tol = tol if feas_tol is None else feas_tol
    h = h or inst.numerics.grid_h
    V = inst.K.evaluate(x0)
    d = V.distance(x0)
    if d > feas_tol:
        return SolutionCheck(False, False, float(d))
    y, v = _extreme_over_values(inst, x0, window, h, -1, settled=-tol)
    if y is None:
        return SolutionCheck(True, True, float(d))
    return SolutionCheck(-v <= tol, True, float(d), y, -v)


# --------------------------------------------------------------------------
# restricted solve and oracle


def restricted_instance(inst: ProblemInstance, rho: float) -> ProblemInstance:
    return replace(inst, K=restrict_to_ball(inst.K, rho), numerics=replace(inst.numerics, rho=rho))


def solve_restricted(inst: ProblemInstance, rho: float, h: Optional[float] = None,
                     tol: Optional[float] = None) -> np.ndarray:
    """Grid solutions of the problem with K replaced by K ∩ B̄_ρ on C ∩ B̄_ρ."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    h = h or inst.numerics.grid_h
    tol = inst.numerics.tol_sol if tol is None else tol
    sub = restricted_instance(inst, rho)
    fps = fixed_point_set(sub.K, inst.C.with_ball(rho), h)
    if not len(fps):
        raise EmptyFixedPointSet(f"no grid fixed point of K_rho for rho={rho}")
    window = ConvexRegion.closed_ball(2 * rho, n=inst.n)
    sols = [x for x in fps.points
            if check_qep_solution(sub, x, window, tol=tol, feas_tol=h + tol, h=h)]
    return np.array(sols).reshape(-1, inst.n)


def oracle_enumerate(inst: ProblemInstance, region: ConvexRegion, h: Optional[float] = None,
                     tol: Optional[float] = None) -> np.ndarray:
    """Brute force: grid x with dist(x, K(x)) ≤ h+tol and f(x, y) ≥ −tol on grid(K(x) ∩ region)."""
    if not region.is_bounded():
        raise ValueError("oracle needs a bounded region")
    h = h or inst.numerics.grid_h
    tol = inst.numerics.tol_sol if tol is None else tol
    bound = region.sup_norm()
    out = []
    for x in grid_points(region, h, bound):
        V = inst.K.evaluate(x)
        if V.is_empty() or V.distance(x) > h + tol:
            continue
        if isinstance(V, PointSet):
            Y = V.points[region.contains(V.points)]
        else:
            Y = grid_points(V.intersect(region), h, bound)
        if len(Y) == 0 or np.all(inst.f(x, Y) >= -tol):
            out.append(x)
    return np.array(out).reshape(-1, inst.n)


# --------------------------------------------------------------------------
# hypothesis verification


@dataclass
class HypothesisReport:
    variant: str
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for k, v in self.verdicts.items() if not k.endswith(":sufficient"))

    def refuted(self) -> list:
        return [k for k, v in self.verdicts.items() if not v.passed and not k.endswith(":sufficient")]

    def to_dict(self) -> dict:
        return {"variant": self.variant, "passed": self.passed,
                "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()}}


class _SampledMap:
    """Grid approximation of {y ∈ K(x) ∩ B̄_bound : keep(x, y)} as point sets."""

    def __init__(self, K, keep, h, bound):
        self.K, self.keep, self.h, self.bound = K, keep, h, bound

    def evaluate(self, x):
        V = self.K.evaluate(x)
        if V.is_empty():
            return PointSet(np.zeros((0, len(x))))
        Y = V.grid_points(self.h, self.bound)
        ext = V.extreme_candidates(self.bound)
        if len(ext):
            Y = np.vstack([Y, ext]) if len(Y) else ext
        if not len(Y):
            return PointSet(np.zeros((0, len(x))))
        return PointSet(Y[self.keep(x, Y)])


def _probe_h(region, bound, target=400):
    vol = np.prod(np.minimum(region.hi, bound) - np.maximum(region.lo, -bound))
    return float(max(0.01, (vol / target) ** (1.0 / region.dim)))


def _fixed_points_for_probes(inst, bound, h):
    region = inst.C.with_ball(bound)
    return fixed_point_set(inst.K, region, h, tol=1e-9).points


def _values_nonempty(inst, bound, h):
    for x in sample_grid(inst.C, h, bound, max_points=500):
        if inst.K.evaluate(x).is_empty():
            return PropertyVerdict("nonempty_values", False, _jsonable({"x": x}), 1, False,
                                   "empty value found")
    v = PropertyVerdict("nonempty_values", True, None, 0)
    v.note = "probed on grid; convex values hold by construction (convex regions)"
    if isinstance(inst.K, FinitePointsMap):
        v = PropertyVerdict("nonempty_values", False, None, 0, False, "values are finite point sets")
    return v


def _fix_closed_probe(inst, bound, h, delta=1e-7):
    """Refutes closedness of fix(K): a clear non-fixed x̄ that is a limit of exact fixed points."""
    used = 0
    dirs = np.vstack([np.eye(inst.n), -np.eye(inst.n)])
    for xb in sample_grid(inst.C, h, bound, max_points=400):
        V = inst.K.evaluate(xb)
        if not V.is_empty() and V.distance(xb) <= h:
            continue
        for e in dirs:
            hits = 0
            for k in range(3):
                x = xb + delta * 2.0**-k * e
                used += 1
                if not inst.C.contains(x):
                    break
                Vx = inst.K.evaluate(x)
                if Vx.is_empty() or Vx.distance(x) > 1e-9:
                    break
                hits += 1
            if hits == 3:
                return PropertyVerdict("fix_closed", False,
                                       _jsonable({"x": xb, "direction": e, "delta": delta}), used)
    return PropertyVerdict("fix_closed", True, None, used)


def _diagonal_probe(f, points, name, rule):
    if not len(points):
        return PropertyVerdict(name, True, None, 0, False, "no sampled points")
    vals = f(points, points)
    bad = ~rule(vals)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        return PropertyVerdict(name, False, _jsonable({"x": points[k], "f_xx": vals[k]}), len(points))
    return PropertyVerdict(name, True, None, len(points))


def _raw_implication(inst, fixed, bound, h, budget, seed):
    """Samples (f(x,y) ≤ 0 ∧ f(x,z) < 0) ⇒ f(x, ty+(1−t)z) < 0 over x ∈ fix(K)."""
    rng = np.random.default_rng(seed)
    used = 0
    ts = np.arange(1, 10) / 10.0
    xs = fixed if len(fixed) <= 50 else fixed[np.sort(rng.choice(len(fixed), 50, replace=False))]
    per = max(1, budget // max(1, len(xs)))
    for x in xs:
        V = inst.K.evaluate(x)
        Y = sample_grid(V, h, bound, max_points=400) if isinstance(V, ConvexRegion) else V.points
        if not len(Y):
            continue
        idx = rng.integers(0, len(Y), size=(per, 2))
        Y1, Z = Y[idx[:, 0]], Y[idx[:, 1]]
        fy, fz = inst.f(x, Y1), inst.f(x, Z)
        M = ts[:, None, None] * Y1[None] + (1 - ts)[:, None, None] * Z[None]
        mid = inst.f(x, M)
        used += mid.size
        bad = (fy <= PREMISE) & (fz < -VIOLATION) & (mid >= -PREMISE)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            return PropertyVerdict("implication:raw", False, _jsonable(
                {"x": x, "y": Y1[j], "z": Z[j], "t": ts[i], "f_mid": mid[i, j]}), used)
    return PropertyVerdict("implication:raw", True, None, used)


def _implication(inst, R, fixed, bound, h, budget, seed, out):
    suff = check_semistrict_quasiconvex_y(inst.f, R, budget=budget, seed=seed,
                                          probe_radius=bound)
    out["implication:sufficient"] = suff
    raw = suff if suff.passed else _raw_implication(inst, fixed, bound, h, budget, seed)
    out["implication"] = replace(raw, property="implication")
    if suff.passed:
        out["implication"].note = "implied by semi-strict quasiconvexity in y (sampled)"


def lift_hypotheses(inst: ProblemInstance, rho: float, budget: int = 10_000, seed: int = 0):
    """Sampled checks of the three lifting hypotheses."""
    bound = inst.numerics.probe(rho)
    h = _probe_h(inst.C, bound)
    R = inst.C.with_ball(bound)
    fixed = _fixed_points_for_probes(inst, bound, h)
    out = {}
    _implication(inst, R, fixed, bound, h, budget, seed, out)
    out["diagonal_zero_on_fix"] = _diagonal_probe(inst.f, fixed, "diagonal_zero_on_fix",
                                                  lambda v: np.abs(v) <= VIOLATION)
    out["convex_values"] = _values_nonempty(inst, bound, h)
    return out


def _d_openness(inst, rho, h):
    """Interior grid points of C ∩ B̄_ρ lying in D with every axis neighbour outside D."""
    region = inst.C.with_ball(rho)
    G = sample_grid(region, h, rho, max_points=600)
    step = h
    if len(G) > 1:
        diffs = np.abs(np.diff(G, axis=0))
        step = float(np.min(diffs[diffs > 1e-12])) if np.any(diffs > 1e-12) else h
    Kr = restrict_to_ball(inst.K, rho)

    def in_d(x):
        V = Kr.evaluate(x)
        if V.is_empty():
            return False
        Y = _candidates(V, x, step, rho)
        return bool(len(Y)) and float(np.min(inst.f(x, Y))) < -VIOLATION

    used = 0
    dirs = np.vstack([np.eye(inst.n), -np.eye(inst.n)]) * step
    for x in G:
        nbrs = x + dirs
        if not np.all(region.contains(nbrs)):
            continue
        used += 1
        if in_d(x) and not any(in_d(y) for y in nbrs):
            return PropertyVerdict("D_open", False, _jsonable({"x": x, "h": step}), used)
    v = PropertyVerdict("D_open", True, None, used)
    v.note = "boundary grid points ignored"
    return v


def verify_theorem_hypotheses(inst: ProblemInstance, variant: str, rho: float,
                              budget: int = 10_000, seed: int = 0) -> HypothesisReport:
    if variant not in ("case1", "case2", "lassonde"):
        raise ValueError(f"unknown variant {variant!r}")
    f, K = inst.f, inst.K
    bound = inst.numerics.probe(rho)
    h = _probe_h(inst.C, bound)
    R = inst.C.with_ball(bound)
    fixed = _fixed_points_for_probes(inst, bound, h)
    v = {}
    v["nonempty_convex_values"] = _values_nonempty(inst, bound, h)
    if variant in ("case1", "case2"):
        v["K_lsc"] = falsify_lsc(K, R, h=h, seed=seed, probe_radius=bound, name="K_lsc")
        v["fix_closed"] = _fix_closed_probe(inst, bound, h)
        _implication(inst, R, fixed, bound, h, budget, seed, v)
    rng = np.random.default_rng(seed)
    fix_probe = fixed if len(fixed) <= 150 else fixed[np.sort(rng.choice(len(fixed), 150, replace=False))]
    on_fix = lambda x: bool(inst.C.contains(x)) and not K.evaluate(x).is_empty() \
        and K.evaluate(x).distance(x) <= 1e-9
    if variant == "case1":
        v["properly_quasi_monotone"] = check_properly_quasi_monotone(f, R, budget=budget, seed=seed,
                                                                     probe_radius=bound)
        v["upper_sign"] = check_upper_sign(f, R, budget=budget, seed=seed, probe_radius=bound)
        G = _SampledMap(K, lambda x, Y: f(Y, x) > VIOLATION, h, rho)
        v["G_lsc"] = falsify_lsc(G, R, h=h, seed=seed, domain=on_fix, points=fix_probe, name="G_lsc")
    elif variant == "case2":
        v["diagonal_nonnegative_on_fix"] = _diagonal_probe(
            f, fixed, "diagonal_nonnegative_on_fix", lambda val: val >= -VIOLATION)
        Rmap = _SampledMap(K, lambda x, Y: f(x, Y) < -VIOLATION, h, bound)
        v["R_lsc"] = falsify_lsc(Rmap, R, h=h, seed=seed, domain=on_fix, points=fix_probe, name="R_lsc")
        v["R_convex"] = _r_convex(inst, fix_probe, Rmap, seed)
    else:
        Cr = inst.C.with_ball(rho)
        v["K_closed"] = falsify_closed_graph(K, R, h=h, seed=seed, probe_radius=bound, name="K_closed")
        v["usc_first_arg"] = falsify_usc_first_arg(f, Cr, h=_probe_h(Cr, rho), seed=seed,
                                                   probe_radius=rho)
        v["quasiconvex_y"] = check_quasiconvex_y(f, R, budget=budget, seed=seed, probe_radius=bound)
        v["D_open"] = _d_openness(inst, rho, _probe_h(Cr, rho))
        diag = sample_grid(R, h, bound, max_points=2000)
        v["diagonal_zero"] = _diagonal_probe(f, diag, "diagonal_zero", lambda val: np.abs(val) <= VIOLATION)
        _implication(inst, R, fixed, bound, h, budget, seed, v)
    return HypothesisReport(variant, v)


def _r_convex(inst, fixed, Rmap, seed):
    rng = np.random.default_rng(seed)
    ts = np.arange(1, 10) / 10.0
    used = 0
    for x in fixed:
        Y = Rmap.evaluate(x).points
        if len(Y) < 2:
            continue
        idx = rng.integers(0, len(Y), size=(50, 2))
        M = ts[:, None, None] * Y[idx[:, 0]][None] + (1 - ts)[:, None, None] * Y[idx[:, 1]][None]
        M = M.reshape(-1, inst.n)
        used += len(M)
        V = inst.K.evaluate(x)
        bad = (inst.f(x, M) >= -PREMISE) | ~np.asarray(V.contains(M), dtype=bool)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            return PropertyVerdict("R_convex", False, _jsonable({"x": x, "mid": M[k]}), used)
    return PropertyVerdict("R_convex", True, None, used)


# --------------------------------------------------------------------------
# lifting and the full pipeline


@dataclass
class LiftReport:
    x0: np.ndarray
    status: str
    radius: Optional[float] = None
    witness: Optional[dict] = None
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable({"x0": self.x0, "status": self.status, "radius": self.radius,
                          "witness": self.witness,
                          "checks": {k: v.to_dict() for k, v in self.checks.items()}})


def lift_solution(inst: ProblemInstance, x0, rho: float, verify_factor: float = 2.0,
                  tol: Optional[float] = None, checks: Optional[dict] = None,
                  ucc_passed: bool = False, h: Optional[float] = None,
                  seed: int = 0) -> LiftReport:
    x0 = np.asarray(x0, dtype=float).reshape(inst.n)
    tol = inst.numerics.tol_sol if tol is None else tol
    h = h or inst.numerics.grid_h
    checks = lift_hypotheses(inst, rho, seed=seed) if checks is None else checks
    radius = verify_factor * rho
    window = ConvexRegion.closed_ball(radius, n=inst.n)
    y, v = _extreme_over_values(inst, x0, window, h, +1)
    if y is not None and v < -tol:
        return LiftReport(x0, "refuted", radius, _jsonable({"y": y, "value": v}), checks)
    ok = all(c.passed for k, c in checks.items() if not k.endswith(":sufficient"))
    status = "certified_by_theorem" if ok and ucc_passed else "verified_on_ball"
    return LiftReport(x0, status, radius, None, checks)


@dataclass
class SolveReport:
    solutions: np.ndarray
    mode: str
    rho: Optional[float]
    hypothesis: Optional[HypothesisReport]
    lift: list
    numerics: dict
    ucc: Optional[dict] = None
    note: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable({
            "solutions": self.solutions, "mode": self.mode, "rho": self.rho,
            "hypothesis": self.hypothesis.to_dict() if self.hypothesis else None,
            "lift": [r.to_dict() for r in self.lift], "numerics": self.numerics,
            "ucc": self.ucc, "note": self.note, "extras": self.extras,
        })


def solve(inst: ProblemInstance, variant: str = "case2", rho: Optional[float] = None,
          h: Optional[float] = None, tol: Optional[float] = None, seed: int = 0,
          budget: int = 10_000, rho_max: float = 64.0) -> SolveReport:
    from .coercivity import find_coercive_radius, ucc_verify

    if variant not in MODES:
        raise ValueError(f"unknown variant {variant!r}")
    h = h or inst.numerics.grid_h
    tol = inst.numerics.tol_sol if tol is None else tol
    numerics = {**asdict(inst.numerics), "grid_h": h, "tol_sol": tol, "seed": seed}
    rho = rho if rho is not None else inst.numerics.rho
    ucc = None
    if rho is None:
        rho = find_coercive_radius(inst, rho_max=rho_max, seed=seed)
        if rho is None:
            return SolveReport(np.zeros((0, inst.n)), MODES[variant], None, None, [], numerics,
                               None, "no coercive radius found up to rho_max")
    report = ucc_verify(inst, rho, seed=seed)
    ucc = report.to_dict()
    if variant == "oracle":
        region = inst.C.with_ball(rho)
        sols = oracle_enumerate(restricted_instance(inst, rho), region, h, tol)
        return SolveReport(sols, "oracle", rho, None, [], numerics, ucc)
    hyp = verify_theorem_hypotheses(inst, variant, rho, budget=budget, seed=seed)
    try:
        sols = solve_restricted(inst, rho, h, tol)
    except EmptyFixedPointSet as exc:
        return SolveReport(np.zeros((0, inst.n)), MODES[variant], rho, hyp, [], numerics, ucc, str(exc))
    checks = lift_hypotheses(inst, rho, budget=budget, seed=seed)
    lifts = [lift_solution(inst, x, rho, tol=tol, checks=checks, ucc_passed=report.passed, h=h)
             for x in sols]
    note = "" if hyp.passed else "hypotheses refuted: existence not guaranteed"
    return SolveReport(sols, MODES[variant], rho, hyp, lifts, numerics, ucc, note)
