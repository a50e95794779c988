"""Relative error of the jump-count and excursion-count local-time estimators on a few paths.

The jump count at resolution eps has Poisson noise of relative size about
eps^(alpha/2) / sqrt(L), which the last column shows for comparison.
"""

import argparse
import math

from perturbed_walks.analytics import (
    InsufficientResolutionError,
    excursion_count_local_time,
    jump_count_local_time,
)
from perturbed_walks.limit_process import build_limit_path
from perturbed_walks.sampling import RngStream


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--paths", type=int, default=5)
    ap.add_argument("--dt", type=float, default=2.0**-14)
    ap.add_argument("--delta", type=float, default=1e-4)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.04, 0.02, 0.01])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'path':>4} {'L(1)':>8} {'eps':>6} {'jump err':>9} {'exc err':>8} {'noise':>7}")
    for r in range(args.paths):
        p = build_limit_path(0.0, 1.0, args.dt, args.alpha, RngStream(args.seed, r), mode="jumps", delta=args.delta)
        L = float(p.L[-1])
        for e in args.eps:
            jump = jump_count_local_time(p, e)
            try:
                exc = f"{abs(excursion_count_local_time(p, e) - L) / L:8.3f}"
            except InsufficientResolutionError:
                exc = f"{'n/a':>8}"
            noise = e ** (args.alpha / 2) / math.sqrt(L)
            print(f"{r:>4} {L:8.4f} {e:6g} {abs(jump - L) / L:9.3f} {exc} {noise:7.3f}")


if __name__ == "__main__":
    main()
