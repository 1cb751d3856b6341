"""Estimate how often a random affine image meets the open negative orthant.

Runs the (d, d1) cells of interest and compares each empirical rate with
the closed-form tail bound (e*d1/d)^(d+1) / 2^d1.
"""

import argparse
import time

from netpeel.verify import bound_to_csv, empirical_orthant_bound

CELLS = [(2, 10), (2, 20), (2, 30)]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="bound_experiment.csv")
    args = parser.parse_args()

    experiments = []
    for d, d1 in CELLS:
        t0 = time.perf_counter()
        exp = empirical_orthant_bound(d, d1, args.trials, seed=args.seed)
        dt = time.perf_counter() - t0
        experiments.append(exp)
        print(f"d={d} d1={d1}: {exp.hits}/{exp.trials} hits "
              f"(rate {exp.rate:.3e}) vs bound {exp.bound:.3e}  [{dt:.1f}s]")
    bound_to_csv(experiments, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
