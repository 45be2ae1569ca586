#!/usr/bin/env python3
"""Convergence sweep on the default two-village instance.

Stabilizes the discrete system on a grid of n values and many seeds, solves
the continuum fixed point once, and writes per-run rows plus quantile
summaries as CSV.  Equivalent to `varw lln` but convenient to edit in place
for ad-hoc sweeps.
"""

import argparse
from pathlib import Path

from varw import LLNConfig, load_model, run_lln


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default=str(Path(__file__).parent.parent / "models/two_village.json"))
    ap.add_argument("--n", type=int, action="append", dest="n_values",
                    help="repeatable; default grid 1e3, 1e4, 1e5")
    ap.add_argument("--num-seeds", type=int, default=20)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--out", default="varw_out")
    args = ap.parse_args()

    params = load_model(args.model)
    n_values = args.n_values or [1000, 10000, 100000]
    seeds = [args.seed + k for k in range(args.num_seeds)]
    print(f"n grid: {n_values}")
    print(f"seeds: {seeds[0]}..{seeds[-1]} ({len(seeds)} runs per n)")
    report = run_lln(LLNConfig(params=params, n_values=n_values, seeds=seeds, tol=args.tol),
                     out_dir=args.out)
    for row in report.summary:
        print(f"n={row['n']:>7} {row['metric']:<9} median={row['median']:.3e} p90={row['p90']:.3e}")
    print(f"wrote {report.rows_path} and {report.summary_path}")


if __name__ == "__main__":
    main()
