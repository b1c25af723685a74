"""Uniform coerciveness checks, coercive-radius search and the box-based
coercivity comparison.

Condition 1: K(w) meets the open ball B_ρ for every w ∈ C (probed on a grid of
C ∩ B̄_probe plus seeded far samples). Condition 2: for every fixed point z,
points x ∈ K(z) with ρ_z < ‖x‖ ≤ ρ have an inward witness y ∈ K(z),
‖y‖ < ‖x‖, with a non-positive witness value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import ConvexRegion, PointSet, ProblemInstance, region_subset
from .properties import VIOLATION, PropertyVerdict, _jsonable, sample_grid
from .solver import fixed_point_set

NORM_MARGIN = 1e-12
FAR_SAMPLES = 100


@dataclass
class UCCReport:
    rho: float
    cond1: dict
    cond2: list
    probe_radius: float
    grid_h: float
    witness: str = "qep"

    @property
    def passed(self) -> bool:
        return self.cond1["passed"] and all(c["passed"] for c in self.cond2)

    def to_dict(self) -> dict:
        return _jsonable({"rho": self.rho, "passed": self.passed, "cond1": self.cond1,
                          "cond2": self.cond2, "probe_radius": self.probe_radius,
                          "grid_h": self.grid_h, "witness": self.witness})


# --------------------------------------------------------------------------
# witness predicates: mask over candidate y's for a fixed x


def qep_witness(inst: ProblemInstance) -> Callable:
    return lambda x, Y: inst.f(x, Y) <= VIOLATION


def qvi_witness(inst: ProblemInstance) -> Callable:
    op = inst.payload

    def fn(x, Y):
        V = op.vertices(x)
        return np.max((Y - x) @ V.T, axis=1) <= VIOLATION
    return fn


def gnep_witness(inst: ProblemInstance) -> Callable:
    game = inst.payload

    def fn(x, Y):
        return np.all(game.unilateral_costs(x, Y) <= game.costs(x) + VIOLATION, axis=1)
    return fn


WITNESSES = {"qep": qep_witness, "qvi": qvi_witness, "gnep": gnep_witness}


# --------------------------------------------------------------------------
# condition 1


def _far_samples(C, probe, seed):
    rng = np.random.default_rng(seed)
    D = rng.normal(size=(FAR_SAMPLES, C.dim))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    r = rng.uniform(probe, 10 * probe, size=(FAR_SAMPLES, 1))
    return np.array([C.project(p) for p in D * r])


def _cond1(inst, rho, probe, seed):
    G = sample_grid(inst.C, inst.numerics.grid_h, probe, max_points=2000)
    W = np.vstack([G, _far_samples(inst.C, probe, seed)])
    zero = np.zeros(inst.n)
    for i, w in enumerate(W):
        V = inst.K.evaluate(w)
        if V.is_empty() or V.distance(zero) >= rho - NORM_MARGIN:
            return {"passed": False, "witness": w, "label": "probed", "samples": i + 1,
                    "source": "grid" if i < len(G) else "far"}
    return {"passed": True, "witness": None, "label": "probed", "samples": len(W)}


# --------------------------------------------------------------------------
# condition 2


def _scan(V, rho, h, witness_fn, x_of):
    """Scan x ∈ grid(V ∩ B̄_ρ) by decreasing norm; returns rows (x, y or None)."""
    X = V.grid_points(h, rho) if not isinstance(V, PointSet) else V.points
    X = X[np.linalg.norm(X, axis=1) <= rho + 1e-12]
    Y = V.grid_points(h, rho) if not isinstance(V, PointSet) else V.points
    if not len(X):
        return []
    nx = np.linalg.norm(X, axis=1)
    X = X[np.lexsort(np.vstack([X.T[::-1], -nx]))]
    nx = np.linalg.norm(X, axis=1)
    ny = np.linalg.norm(Y, axis=1)
    order = np.lexsort(np.vstack([Y.T[::-1], ny]))
    Y, ny = Y[order], ny[order]
    rows = []
    for x, r in zip(X, nx):
        cand = Y[ny < r - NORM_MARGIN]
        y = None
        if len(cand):
            ok = witness_fn(x_of(x), cand)
            if ok.any():
                y = cand[int(np.argmax(ok))]
        rows.append((x, y))
    return rows


def cond2_scan(inst: ProblemInstance, z, rho: float, h: Optional[float] = None,
               witness: str = "qep") -> list:
    """Per grid x ∈ K(z) ∩ B̄_ρ (decreasing norm): the first inward witness y, or None."""
    h = h or inst.numerics.grid_h
    z = np.asarray(z, dtype=float).reshape(inst.n)
    fn = WITNESSES[witness](inst)
    return _scan(inst.K.evaluate(z), rho, h, fn, lambda x: x)


def _cond2_entry(z, V, rho, h, fn):
    if V.is_empty():
        return {"z": z, "passed": False, "vacuous": False, "rho_z": None, "violations": [],
                "note": "empty value at fixed point"}
    if V.sup_norm() < rho - NORM_MARGIN:
        return {"z": z, "passed": True, "vacuous": True, "rho_z": None, "violations": []}
    rows = _scan(V, rho, h, fn, lambda x: x)
    free = [x for x, y in rows if y is None]
    if not free:
        return {"z": z, "passed": True, "vacuous": True, "rho_z": None, "violations": []}
    rho_z = float(max(np.linalg.norm(x) for x in free)) + h
    violations = [x for x in free if np.linalg.norm(x) + h >= rho]
    return {"z": z, "passed": rho_z < rho, "vacuous": False, "rho_z": rho_z,
            "violations": violations}


def _ucc(inst, rho, witness, seed, h):
    if rho <= 0:
        raise ValueError("rho must be positive")
    h = h or inst.numerics.grid_h
    probe = inst.numerics.probe(rho)
    c1 = _cond1(inst, rho, probe, seed)
    fn = WITNESSES[witness](inst)
    fps = fixed_point_set(inst.K, inst.C.with_ball(rho), h)
    cache = {}
    cond2 = []
    for z in fps.points:
        V = inst.K.evaluate(z)
        # the scan depends on z only through K(z)
        key = V.key()
        if key not in cache:
            cache[key] = _cond2_entry(z, V, rho, h, fn)
        cond2.append(dict(cache[key], z=z))
    return UCCReport(rho, c1, cond2, probe, h, witness)


def ucc_verify(inst: ProblemInstance, rho: float, budget: int = 10_000, seed: int = 0,
               h: Optional[float] = None) -> UCCReport:
    return _ucc(inst, rho, "qep", seed, h)


def qvi_ucc_verify(inst: ProblemInstance, rho: float, budget: int = 10_000, seed: int = 0,
                   h: Optional[float] = None) -> UCCReport:
    if inst.kind != "QVI":
        raise ValueError("qvi_ucc_verify needs a QVI instance")
    return _ucc(inst, rho, "qvi", seed, h)


def gnep_coercivity_verify(inst: ProblemInstance, rho: float, budget: int = 10_000, seed: int = 0,
                           h: Optional[float] = None) -> UCCReport:
    if inst.kind != "GNEP":
        raise ValueError("gnep_coercivity_verify needs a GNEP instance")
    return _ucc(inst, rho, "gnep", seed, h)


def find_coercive_radius(inst: ProblemInstance, rho_max: float = 64.0, budget: int = 10_000,
                         seed: int = 0, rho0: float = 1.0, verify: Callable = ucc_verify):
    """Smallest ρ0·2^k ≤ rho_max passing the check, else None."""
    if rho_max <= 0:
        raise ValueError("rho_max must be positive")
    rho = rho0
    while rho <= rho_max:
        if verify(inst, rho, budget=budget, seed=seed).passed:
            return rho
        rho *= 2
    return None


# --------------------------------------------------------------------------
# box-based coercivity (compact Z, W ⊆ Z)


def default_candidates(inst: ProblemInstance, count: int = 20) -> list:
    out = []
    for k in range(count):
        M = 2.0**k
        Z = inst.C.intersect(ConvexRegion.box(-M * np.ones(inst.n), M * np.ones(inst.n)))
        out.append((Z, Z.with_ball(M / 2)))
    return out


def _candidate(inst, Z, W, points):
    if Z.is_empty() or W.is_empty():
        return {"passed": False, "failed": "empty Z or W"}
    if not Z.is_bounded():
        raise ValueError("candidate Z must be bounded")
    bound = Z.sup_norm()
    h = max(bound / points, 1e-3)
    for w in sample_grid(W, h, bound, max_points=points):
        ok, y = region_subset(inst.K.evaluate(w), Z, h=h, bound=bound)
        if not ok:
            return {"passed": False, "failed": "K(W) not inside Z", "x": w, "y": y}
    Xz = sample_grid(Z, h, bound, max_points=points)
    for x in Xz:
        if inst.K.evaluate(x).intersect(Z).is_empty():
            return {"passed": False, "failed": "K(x) misses Z", "x": x}
    for x in Xz:
        if W.contains(x):
            continue
        V = inst.K.evaluate(x).intersect(Z)
        Y = np.vstack([q for q in (V.grid_points(h, bound), V.extreme_candidates(bound)) if len(q)])
        if not np.any(inst.f(x, Y) < -VIOLATION):
            return {"passed": False, "failed": "no descent point outside W", "x": x}
    return {"passed": True, "failed": None}


def tz_coercivity_check(inst: ProblemInstance, candidates: Optional[list] = None,
                        budget: int = 10_000, seed: int = 0, points: int = 60) -> PropertyVerdict:
    """Passes iff some candidate (Z, W) meets the three grid conditions."""
    candidates = default_candidates(inst) if candidates is None else candidates
    outcomes = []
    for i, (Z, W) in enumerate(candidates):
        res = _candidate(inst, Z, W, points)
        res["index"] = i
        res["Z_box"] = list(map(list, Z.bounding_box())) if not Z.is_empty() else None
        outcomes.append(res)
        if res["passed"]:
            v = PropertyVerdict("tz_coercivity", True, None, len(outcomes), False,
                                "closedness of the solution-level set unverified")
            v.details = _jsonable({"candidates": outcomes})
            return v
    first = outcomes[0] if outcomes else {}
    v = PropertyVerdict("tz_coercivity", False, _jsonable(first), len(outcomes), False,
                        "every candidate failed; closedness condition unverified")
    v.details = _jsonable({"candidates": outcomes})
    return v
