"""JSON instance files and report documents."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from datetime import datetime, timezone
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .core import (
    AffineClamp,
    Ball,
    BallRestricted,
    Builtin,
    ConstantMap,
    ConvexRegion,
    GluedMap,
    MovingBox,
    Numerics,
    ProblemInstance,
    Quadratic,
)
from .reductions import (
    OPERATOR_BUILTINS,
    AffineOperator,
    Game,
    QuadraticCost,
    StepOperator,
    gnep_instance,
    qvi_instance,
)

SCHEMA_VERSION = 1


class InstanceError(ValueError):
    """Instance document failed schema validation or could not be built."""


def load_schema() -> dict:
    return json.loads(resources.files("qeq").joinpath("schema/instance.json").read_text())


_VALIDATOR = None


def validate(doc: dict) -> None:
    global _VALIDATOR
    if _VALIDATOR is None:
        _VALIDATOR = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise InstanceError(f"schema violation at {where}: {e.message}")


# --------------------------------------------------------------------------
# numbers


def _num(v) -> float:
    return {"inf": np.inf, "-inf": -np.inf}.get(v, v) if isinstance(v, str) else float(v)


def _vec(vs) -> np.ndarray:
    return np.array([_num(v) for v in vs], dtype=float)


def _out(v):
    v = float(v)
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return v


def _outvec(a) -> list:
    return [_out(v) for v in np.ravel(a)]


def _mat(a) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(a)]


# --------------------------------------------------------------------------
# parse


def _region(d) -> ConvexRegion:
    hs = d.get("halfspaces", [])
    A = np.array([h["a"] for h in hs], dtype=float) if hs else None
    b = np.array([h["b"] for h in hs], dtype=float) if hs else None
    ball = d.get("ball")
    ball = Ball(np.array(ball["center"], dtype=float), float(ball["radius"])) if ball else None
    return ConvexRegion(_vec(d["lo"]), _vec(d["hi"]), A, b, ball, bool(d.get("open", False)))


def _clamp(d) -> AffineClamp:
    b = np.array(d["b"], dtype=float)
    A = np.array(d["A"], dtype=float).reshape(b.size, -1)
    return AffineClamp(A, b, _vec(d["c"]), _vec(d["d"]))


def _map(d):
    t = d["type"]
    if t == "constant":
        return ConstantMap(_region(d["region"]), int(d["dim_in"]))
    if t == "moving_box":
        return MovingBox(_clamp(d["lo"]), _clamp(d["hi"]))
    if t == "ball_restricted":
        return BallRestricted(_map(d["inner"]), float(d["rho"]))
    if t == "glued":
        return GluedMap(_region(d["A"]), _map(d["inner"]), _map(d["outer"]))
    raise InstanceError(f"unknown map type {t!r}")


def _numerics(d) -> Numerics:
    return Numerics(**(d or {}))


def from_dict(doc: dict) -> ProblemInstance:
    validate(doc)
    try:
        return _build(doc)
    except InstanceError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise InstanceError(f"invalid instance: {exc}") from exc


def _build(doc):
    kind, n, f = doc["kind"], int(doc["n"]), doc["f"]
    num = _numerics(doc.get("numerics"))
    name = doc.get("name", "")
    if kind == "GNEP":
        players = f["players"]
        game = Game(tuple(tuple(b) for b in f["blocks"]),
                    tuple(QuadraticCost(np.array(p["cost"]["A"], dtype=float), p["cost"]["b"], p["cost"]["c"])
                          for p in players),
                    tuple(_region(p["C"]) for p in players),
                    tuple(_map(p["K"]) for p in players))
        if game.n != n:
            raise InstanceError("n does not match the game blocks")
        return gnep_instance(game, num, name)
    C, K = _region(doc["C"]), _map(doc["K"])
    if kind == "QVI":
        if f["type"] == "operator":
            T = AffineOperator(tuple(np.array(M, dtype=float) for M in f["M"]), tuple(f["q"]))
        else:
            T = OPERATOR_BUILTINS[f["name"]](**f["params"])
        return qvi_instance(T, C, K, num, name)
    if f["type"] == "quadratic":
        bf = Quadratic(*(np.array(f[k], dtype=float) for k in ("P", "Q", "R", "c", "d")), f["e"])
    else:
        bf = Builtin(f["name"], n, dict(f["params"]))
    return ProblemInstance(n, C, K, bf, "QEP", num, name)


def parse(text: str) -> ProblemInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InstanceError("instance document must be a JSON object")
    return from_dict(doc)


def load(path) -> ProblemInstance:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# --------------------------------------------------------------------------
# serialize


def region_to_dict(R: ConvexRegion) -> dict:
    d = {"lo": _outvec(R.lo), "hi": _outvec(R.hi),
         "halfspaces": [{"a": [float(v) for v in a], "b": float(b)} for a, b in zip(R.A, R.b)],
         "ball": None if R.ball is None else {"center": [float(v) for v in R.ball.center],
                                               "radius": float(R.ball.radius)},
         "open": bool(R.open)}
    return d


def _clamp_to_dict(c: AffineClamp) -> dict:
    return {"A": _mat(c.A) if c.A.size else [[] for _ in c.b], "b": [float(v) for v in c.b],
            "c": _outvec(c.c), "d": _outvec(c.d)}


def map_to_dict(K) -> dict:
    if isinstance(K, ConstantMap):
        return {"type": "constant", "region": region_to_dict(K.region), "dim_in": int(K.dim_in)}
    if isinstance(K, MovingBox):
        return {"type": "moving_box", "lo": _clamp_to_dict(K.lo), "hi": _clamp_to_dict(K.hi)}
    if isinstance(K, BallRestricted):
        return {"type": "ball_restricted", "inner": map_to_dict(K.inner), "rho": float(K.rho)}
    if isinstance(K, GluedMap):
        return {"type": "glued", "A": region_to_dict(K.A), "inner": map_to_dict(K.inner),
                "outer": map_to_dict(K.outer)}
    raise InstanceError(f"map type {type(K).__name__} is not serializable")


def _f_to_dict(inst: ProblemInstance) -> dict:
    if inst.kind == "GNEP":
        g = inst.payload
        return {"type": "game", "blocks": [list(b) for b in g.blocks],
                "players": [{"cost": {"A": _mat(th.A), "b": [float(v) for v in th.b], "c": th.c},
                             "C": region_to_dict(C), "K": map_to_dict(K)}
                            for th, C, K in zip(g.costs_, g.C_sets, g.K_maps)]}
    if inst.kind == "QVI":
        T = inst.payload
        if isinstance(T, StepOperator):
            return {"type": "operator_builtin", "name": "step",
                    "params": {"low": float(T.low), "high": float(T.high)}}
        return {"type": "operator", "M": [_mat(M) for M in T.M], "q": [[float(v) for v in q] for q in T.q]}
    f = inst.f
    if isinstance(f, Quadratic):
        return {"type": "quadratic", "P": _mat(f.P), "Q": _mat(f.Q), "R": _mat(f.R),
                "c": [float(v) for v in f.c], "d": [float(v) for v in f.d], "e": float(f.e)}
    if isinstance(f, Builtin):
        return {"type": "builtin", "name": f.name, "params": {k: float(v) for k, v in f.params.items()}}
    raise InstanceError(f"bifunction type {type(f).__name__} is not serializable")


def to_dict(inst: ProblemInstance) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "kind": inst.kind, "name": inst.name, "n": inst.n,
           "f": _f_to_dict(inst), "numerics": asdict(inst.numerics)}
    if inst.kind != "GNEP":
        doc["C"] = region_to_dict(inst.C)
        doc["K"] = map_to_dict(inst.K)
    return doc


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def canonical(inst: ProblemInstance) -> str:
    return dumps(to_dict(inst))


def input_hash(inst: ProblemInstance) -> str:
    return hashlib.sha256(canonical(inst).encode()).hexdigest()


def clean(obj):
    """JSON-safe copy: numpy → python, ±inf → strings, nan → null."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return None
        return _out(v)
    return obj


def report(command: str, inst: ProblemInstance, payload: dict, args: dict) -> dict:
    return {"tool": "qeq", "version": __version__, "command": command,
            "instance": inst.name, "input_hash": input_hash(inst), "arguments": args,
            "timestamp": datetime.now(timezone.utc).isoformat(), "payload": payload}
