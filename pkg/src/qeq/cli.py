"""Command-line interface: catalog, solve, verify, coercivity, oracle.

Exit codes: 0 success, 1 input/schema/guard error, 2 no solutions found,
3 a hypothesis or property was refuted (the report is still written).
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog, serialization
from .coercivity import (
    find_coercive_radius,
    gnep_coercivity_verify,
    qvi_ucc_verify,
    tz_coercivity_check,
    ucc_verify,
)
from .core import QEQError
from .properties import PROPERTY_CHECKS, falsify_closed_graph, falsify_lsc
from .reductions import gnep_solve
from .solver import oracle_enumerate, solve

EXIT_OK, EXIT_ERROR, EXIT_NONE, EXIT_REFUTED = 0, 1, 2, 3
VERIFY_PROPERTIES = sorted(PROPERTY_CHECKS) + ["closed_graph", "lsc"]


class UsageError(Exception):
    pass


def load_instance(ref: str):
    """A path to an instance file, or a catalog name."""
    if Path(ref).is_file():
        return serialization.load(ref)
    if ref in catalog.CATALOG:
        return catalog.load(ref)
    raise UsageError(f"{ref!r} is neither an instance file nor a catalog name")


def _seed(args, inst=None) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QEQ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"QEQ_SEED must be an integer, got {env!r}") from None
    return inst.numerics.seed if inst is not None else 0


def _emit(doc: dict, out) -> None:
    text = serialization.dumps(doc)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _rho(args, inst) -> float:
    rho = args.rho if args.rho is not None else inst.numerics.rho
    if rho is None:
        raise UsageError("no --rho given and the instance has no default rho")
    if rho <= 0:
        raise UsageError("--rho must be positive")
    return float(rho)


# --------------------------------------------------------------------------
# commands


def cmd_catalog(args) -> int:
    if args.show:
        if args.show not in catalog.CATALOG:
            raise UsageError(f"unknown catalog instance {args.show!r}")
        _emit(serialization.to_dict(catalog.load(args.show)), args.out)
        return EXIT_OK
    rows = []
    for name in catalog.names():
        inst = catalog.load(name)
        rows.append({"name": name, "kind": inst.kind, "n": inst.n, "description": catalog.describe(name)})
    _emit({"tool": "qeq", "command": "catalog", "instances": rows}, args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    seed = _seed(args, inst)
    variant = args.variant
    kw = dict(rho=args.rho, h=args.grid_h, tol=args.tol, seed=seed, budget=args.budget)
    if inst.kind == "GNEP" and variant != "oracle":
        rep = gnep_solve(inst, variant, **kw)
    else:
        rep = solve(inst, variant, **kw)
    arguments = {"variant": variant, "rho": args.rho, "grid_h": args.grid_h, "tol": args.tol,
                 "seed": seed, "budget": args.budget}
    _emit(serialization.report("solve", inst, rep.to_dict(), arguments), args.out)
    if rep.hypothesis is not None and not rep.hypothesis.passed:
        return EXIT_REFUTED
    return EXIT_OK if len(rep.solutions) else EXIT_NONE


def cmd_verify(args) -> int:
    if args.property not in VERIFY_PROPERTIES:
        raise UsageError(f"unknown property {args.property!r}; choose from {', '.join(VERIFY_PROPERTIES)}")
    if args.budget <= 0:
        raise UsageError("--budget must be positive")
    inst = load_instance(args.instance)
    seed = _seed(args, inst)
    probe = inst.numerics.probe()
    R = inst.C.with_ball(probe)
    if args.property == "lsc":
        v = falsify_lsc(inst.K, R, seed=seed, probe_radius=probe)
    elif args.property == "closed_graph":
        v = falsify_closed_graph(inst.K, R, seed=seed, probe_radius=probe)
    elif args.property == "properly_quasi_monotone":
        v = PROPERTY_CHECKS[args.property](inst.f, R, m_max=args.m_max, budget=args.budget,
                                           seed=seed, probe_radius=probe)
    elif args.property == "upper_sign":
        v = PROPERTY_CHECKS[args.property](inst.f, R, budget=args.budget, t_grid=args.t_grid,
                                           seed=seed, probe_radius=probe)
    else:
        v = PROPERTY_CHECKS[args.property](inst.f, R, budget=args.budget, seed=seed,
                                           probe_radius=probe)
    arguments = {"property": args.property, "budget": args.budget, "seed": seed}
    _emit(serialization.report("verify", inst, v.to_dict(), arguments), args.out)
    return EXIT_OK if v.passed else EXIT_REFUTED


def cmd_coercivity(args) -> int:
    inst = load_instance(args.instance)
    seed = _seed(args, inst)
    payload = {}
    if args.search:
        rho = find_coercive_radius(inst, rho_max=args.rho_max, seed=seed)
        payload["search"] = {"rho_max": args.rho_max, "rho": rho}
        ok = rho is not None
    else:
        rho = _rho(args, inst)
        ok = True
    if rho is not None:
        rep = ucc_verify(inst, rho, seed=seed)
        payload["ucc"] = rep.to_dict()
        ok = ok and rep.passed
        if inst.kind == "QVI":
            payload["qvi_ucc"] = qvi_ucc_verify(inst, rho, seed=seed).to_dict()
        if inst.kind == "GNEP":
            payload["gnep_coercivity"] = gnep_coercivity_verify(inst, rho, seed=seed).to_dict()
    if args.tz:
        payload["tz"] = tz_coercivity_check(inst, seed=seed).to_dict()
    arguments = {"rho": args.rho, "search": args.search, "rho_max": args.rho_max, "tz": args.tz,
                 "seed": seed}
    _emit(serialization.report("coercivity", inst, payload, arguments), args.out)
    return EXIT_OK if ok else EXIT_REFUTED


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    radius = args.window_radius if args.window_radius is not None else inst.numerics.rho
    if radius is None or radius <= 0:
        raise UsageError("need a positive --window-radius")
    h = args.grid_h or inst.numerics.grid_h
    region = inst.C.with_ball(radius)
    sols = oracle_enumerate(inst, region, h, args.tol)
    payload = {"window_radius": radius, "grid_h": h, "solutions": np.round(sols, 12)}
    arguments = {"window_radius": args.window_radius, "grid_h": args.grid_h, "tol": args.tol}
    _emit(serialization.report("oracle", inst, payload, arguments), args.out)
    return EXIT_OK if len(sols) else EXIT_NONE


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qeq", description="Quasi-equilibrium existence toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", help="list built-in instances")
    c.add_argument("--show", metavar="NAME", help="print the instance file of one entry")
    c.add_argument("--out")
    c.set_defaults(func=cmd_catalog)

    s = sub.add_parser("solve", help="restricted solve, hypothesis checks and lifting")
    s.add_argument("instance")
    s.add_argument("--rho", type=float)
    s.add_argument("--grid-h", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--variant", default="case2")
    s.add_argument("--budget", type=int, default=10_000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run one property checker")
    v.add_argument("instance")
    v.add_argument("--property", required=True)
    v.add_argument("--budget", type=int, default=10_000)
    v.add_argument("--m-max", type=int, default=4)
    v.add_argument("--t-grid", type=int, default=9)
    v.add_argument("--seed", type=int)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    k = sub.add_parser("coercivity", help="uniform coerciveness check or radius search")
    k.add_argument("instance")
    grp = k.add_mutually_exclusive_group()
    grp.add_argument("--rho", type=float)
    grp.add_argument("--search", action="store_true")
    k.add_argument("--rho-max", type=float, default=64.0)
    k.add_argument("--tz", action="store_true", help="also run the compact-box candidate sweep")
    k.add_argument("--seed", type=int)
    k.add_argument("--out")
    k.set_defaults(func=cmd_coercivity)

    o = sub.add_parser("oracle", help="brute-force grid enumeration")
    o.add_argument("instance")
    o.add_argument("--window-radius", type=float)
    o.add_argument("--grid-h", type=float)
    o.add_argument("--tol", type=float)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "variant", "case2") not in ("case1", "case2", "lassonde", "oracle"):
        print(f"qeq: unknown variant {args.variant!r}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, serialization.InstanceError, OSError, QEQError, ValueError) as exc:
        print(f"qeq: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
