"""Which SDE coefficient convention reproduces the discrete measurement chain?

A broad packet is measured with frozen classical position. The ensemble
mean of Var(x) is compared between the chain and the two conventions,
whose drift coefficients differ by a factor of two.

    python demos/conventions.py [-n 400]
"""

import argparse

from hybridqc.experiments import compare_conventions


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("-n", type=int, default=400)
    args = ap.parse_args()

    r = compare_conventions(n=args.n, n_broad=args.n)
    curves = r["variance_curves"]
    print(f"{'t':>5} {'chain':>8} {'cc':>8} {'pl':>8} {'free':>8}")
    for i in range(0, len(r["t"]), 10):
        print(f"{r['t'][i]:5.2f} {curves['chain'][i]:8.4f} {curves['chain_consistent'][i]:8.4f} "
              f"{curves['paper_literal'][i]:8.4f} {r['unmeasured_curve'][i]:8.4f}")
    print(f"\ndiscrimination at t={r['t_star']:.2f}: {r['discrimination']:.1f} standard errors")
    print(f"selected: {r['selected']}")
    for name, a in r["agreement"].items():
        print(f"  {name:>16}: <x>(1) mean z = {a['mean_z']:.2f}, variance z = {a['var_z']:.2f}")


if __name__ == "__main__":
    main()
