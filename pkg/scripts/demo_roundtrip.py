"""Generate, extract, and verify one network at each depth, printing a trace."""

import argparse
import time

import numpy as np

from netpeel.extract2 import extract_two_layer
from netpeel.extract3 import extract_three_layer
from netpeel.oracle.generate import generate_three_layer, generate_two_layer
from netpeel.oracle.query import as_oracle
from netpeel.verify import functional_equivalence


def run_depth2(d: int, d1: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    net = generate_two_layer(d, d1, rng)
    oracle = as_oracle(net)
    t0 = time.perf_counter()
    found = extract_two_layer(oracle, d, 1e-4, d1 + 4)
    dt = time.perf_counter() - t0
    rep = functional_equivalence(net, found, 0.0, 10.0, seed=seed)
    print(f"depth 2, d={d}, d1={d1}: {len(found.neurons)} neurons, "
          f"{oracle.count} queries, {dt:.2f}s")
    print(f"  phases: {found.phase_queries}")
    print(f"  {rep.summary()}")


def run_depth3(d: int, d1: int, d2: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    net = generate_three_layer(d, d1, d2, rng)
    oracle = as_oracle(net)
    t0 = time.perf_counter()
    found = extract_three_layer(oracle, d, 1e-4)
    dt = time.perf_counter() - t0
    rep = functional_equivalence(net, found, -5.0, 5.0, seed=seed)
    print(f"depth 3, d={d}, d1={d1}, d2={d2}: {found.d1} first-layer rows, "
          f"width {len(found.top.neurons)}, {oracle.count} queries, {dt:.2f}s")
    print(f"  phases: {found.phase_queries}")
    print(f"  {rep.summary()}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    run_depth2(d=5, d1=8, seed=args.seed)
    run_depth3(d=4, d1=3, d2=9, seed=args.seed)


if __name__ == "__main__":
    main()
