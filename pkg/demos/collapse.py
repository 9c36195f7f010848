"""One hybrid trajectory from a cat state, printed as a table.

Var(x) starts at about 25 (two packets 10 apart) and drops to roughly
1/2 once the measurement has picked a branch; continued measurement then
squeezes it slightly below the coherent-state value. The
record x_bar is <x> plus white noise; X follows the selected branch.

    python demos/collapse.py [--seed 7]
"""

import argparse

from hybridqc import run_trajectory
from hybridqc.experiments import superposition_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    cfg = superposition_config((1.0, 1.0), t_final=1.0, stride=50).with_(seed=args.seed)
    rec = run_trajectory(cfg)
    print(f"{'t':>6} {'<x>':>9} {'Var(x)':>9} {'X':>9} {'P':>9}")
    for i in range(len(rec)):
        print(f"{rec.t[i]:6.2f} {rec.x_expect[i]:9.4f} {rec.x_variance[i]:9.4f} "
              f"{rec.X[i]:9.4f} {rec.P[i]:9.4f}")


if __name__ == "__main__":
    main()
