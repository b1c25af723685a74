#!/usr/bin/env python3
"""Solve every catalog instance and summarise solutions, hypothesis refutations and lifts."""
import argparse
import json
import time
from collections import Counter
from pathlib import Path

from qeq import catalog, serialization
from qeq.reductions import gnep_solve
from qeq.solver import solve


def run(name, variant, seed):
    inst = catalog.load(name)
    t0 = time.perf_counter()
    rep = (gnep_solve if inst.kind == "GNEP" else solve)(inst, variant, seed=seed)
    elapsed = time.perf_counter() - t0
    return {
        "instance": name,
        "kind": inst.kind,
        "variant": variant,
        "rho": rep.rho,
        "solutions": len(rep.solutions),
        "first": rep.solutions[0].tolist() if len(rep.solutions) else None,
        "refuted": rep.hypothesis.refuted() if rep.hypothesis else [],
        "lift": dict(Counter(r.status for r in rep.lift)),
        "seconds": round(elapsed, 2),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--variants", nargs="+", default=["case1", "case2", "lassonde"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, help="write the rows as JSON here")
    args = ap.parse_args(argv)

    rows = [run(name, v, args.seed) for name in catalog.names() for v in args.variants]
    for r in rows:
        print(f"{r['instance']:22s} {r['variant']:9s} rho={r['rho']!s:5s} n_sol={r['solutions']:<5d} "
              f"refuted={','.join(r['refuted']) or '-':40s} lift={r['lift']} {r['seconds']:.2f}s")
    if args.out:
        args.out.write_text(serialization.dumps(rows))


if __name__ == "__main__":
    main()
