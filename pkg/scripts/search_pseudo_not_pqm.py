#!/usr/bin/env python3
"""Search 1D quadratic bifunctions for one that is pseudo-monotone but not properly quasi-monotone.

Coefficients of f(x, y) = P x² + Q y² + R x y + c x + d y + e are drawn from a small
integer lattice; each candidate is screened with the sampled checkers on [-1, 1].
"""
import argparse
import itertools
import json

import numpy as np

from qeq.core import ConvexRegion, Quadratic
from qeq.properties import check_properly_quasi_monotone, check_pseudo_monotone, reevaluate


def candidates(span):
    vals = range(-span, span + 1)
    for P, Q, R, c, d in itertools.product(vals, repeat=5):
        yield Quadratic.zeros(1, P=[[P]], Q=[[Q]], R=[[R]], c=[c], d=[d]), (P, Q, R, c, d)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--span", type=int, default=1, help="coefficient range [-span, span]")
    ap.add_argument("--budget", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--limit", type=int, default=5, help="stop after this many hits")
    args = ap.parse_args(argv)

    R = ConvexRegion.interval(-1, 1)
    hits = []
    for f, coefs in candidates(args.span):
        if not check_pseudo_monotone(f, R, budget=args.budget, seed=args.seed).passed:
            continue
        v = check_properly_quasi_monotone(f, R, budget=args.budget, seed=args.seed)
        if v.passed or not reevaluate(v, f):
            continue
        hits.append({"P,Q,R,c,d": coefs, "witness": v.witness})
        if len(hits) >= args.limit:
            break
    print(json.dumps(hits, indent=2, default=lambda o: np.asarray(o).tolist()))
    return 0 if hits else 1


if __name__ == "__main__":
    raise SystemExit(main())
