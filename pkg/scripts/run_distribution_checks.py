#!/usr/bin/env python3
"""Single-loop distribution checks at desk scale.

Runs the concentration-bound experiment (deviation tail frequencies vs their
closed-form bounds) and the terminal-notice resampling test (two-sample
chi-square on the outflux), printing the reports and writing them to disk.
"""

import argparse

import numpy as np

from varw import (
    ConcentrationConfig,
    ModelParams,
    run_concentration,
    run_kappa_equivalence,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=2718)
    ap.add_argument("--out", default="varw_out")
    args = ap.parse_args()

    params = ModelParams(
        kernel=np.array([[0.5]]),
        sleep_rates=[1.0],
        init_sleepers=[0.2],
        init_actives=[0.5],
    )
    for a in (0.1, 0.2):
        report = run_concentration(
            ConcentrationConfig(params=params, n=200, M=np.array([100]), a=a,
                                trials=args.trials, seed=args.seed),
            out_path=f"{args.out}/concentration_a{a!r}.txt",
        )
        print(f"a={a}: freq_s={report.freq_s:.5f} bound_s={report.bound_s:.5f} "
              f"freq_phi={report.freq_phi:.5f} bound_phi={report.bound_phi:.5f} "
              f"violated={report.violated}")

    kappa_params = ModelParams(
        kernel=np.array([[0.5]]),
        sleep_rates=[1.0],
        init_sleepers=[0.3],
        init_actives=[0.5],
    )
    report = run_kappa_equivalence(kappa_params, 50, [20], trials=args.trials,
                                   seed=args.seed, out_path=f"{args.out}/kappa_test.txt")
    print(f"kappa test p-values: {report.p_values}")


if __name__ == "__main__":
    main()
