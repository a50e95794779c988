"""Run a convergence config and print the median KS distance per (kind, v, t).

    python scripts/convergence_study.py configs/quick.json --threads 2
"""

import argparse
from collections import defaultdict

import numpy as np

from perturbed_walks.harness import ExperimentConfig, run_convergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", help="also write the report here")
    args = ap.parse_args()

    cfg = ExperimentConfig.from_json(args.config)
    rep = run_convergence_study(cfg, threads=args.threads)
    cells = defaultdict(list)
    for row in rep.rows:
        cells[(row["kind"], row["v"], row["t"])].append(row["ks"])
    print(f"{'kind':>6} {'v':>9} {'t':>5} {'median KS':>10}")
    for (kind, v, t), ks in sorted(cells.items()):
        print(f"{kind:>6} {v:>9g} {t:>5g} {np.median(ks):>10.4f}")
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.detail}")
    print(f"wall time {rep.meta['wall_time_s']}s")
    if args.out:
        rep.write(args.out, f"converge_seed{cfg.seed}")


if __name__ == "__main__":
    main()
