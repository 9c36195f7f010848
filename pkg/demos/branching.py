"""Equal superposition of two distant packets, hybrid versus mean-field.

The hybrid run picks one packet per trajectory and the classical particle
follows it; the mean-field run feels only the average position and stays
between the two outcomes.

    python demos/branching.py [-n 400]
"""

import argparse

import numpy as np

from hybridqc import run_ensemble, run_meanfield
from hybridqc.experiments import superposition_config


def histogram(values, lo, hi, bins=24, width=50):
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    scale = width / max(counts.max(), 1)
    for c, e in zip(counts, edges):
        print(f"{e:7.3f} | {'#' * int(round(c * scale))}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-n", type=int, default=400)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    cfg = superposition_config((1.0, 1.0), t_final=1.75)
    s = run_ensemble(cfg, args.n, args.seed)
    mf = run_meanfield(cfg.with_(mode="meanfield"))

    print(f"{args.n} trajectories, packets at x = -5 and +5, lambda = sigma = 1\n")
    for row in s.branch_table():
        print(f"  branch {row['branch']!s:>10}: {row['count']:5d}  ({row['frequency']:.3f})")
    print(f"\nmedian localization time: {s.to_dict()['localization_time']['median']:.3f}")
    print(f"mean-field X(T) = {mf.X[-1]:+.4f}\n")
    print("hybrid X(T) histogram:")
    histogram(s.final_X, s.final_X.min(), s.final_X.max())


if __name__ == "__main__":
    main()
