"""Query-count sweep over doubling grids, with minimax constant fits.

Writes one CSV per depth and prints the fitted constant and worst ratio,
the numbers the complexity check in the test suite freezes.

The depth-2 grid is a full product over doublings of d, d1 and log(1/delta).
The depth-3 grid is a star: one base shape plus one cell per parameter with
that parameter doubled, which keeps each scaling direction isolated.
"""

import argparse

from netpeel.verify import bench_to_csv, fit_query_bound, query_complexity_bench

DEPTH2_SHAPES = [(2, d, d1, 0) for d in (4, 8) for d1 in (8, 16)]
DEPTH2_DELTAS = (1e-2, 1e-4, 1e-8)

DEPTH3_BASE = (3, 6, 3, 9)
DEPTH3_STAR = [DEPTH3_BASE, (3, 12, 3, 9), (3, 6, 6, 9), (3, 6, 3, 18)]
DEPTH3_DELTA = 1e-4
DEPTH3_DELTA_DOUBLED = 1e-8


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-prefix", default="bench")
    parser.add_argument("--seeds", type=int, default=2, help="seeds per cell")
    args = parser.parse_args()
    seeds = tuple(range(args.seeds))

    rows2 = query_complexity_bench(DEPTH2_SHAPES, deltas=DEPTH2_DELTAS, seeds=seeds)
    rows3 = query_complexity_bench(DEPTH3_STAR, deltas=(DEPTH3_DELTA,), seeds=seeds)
    rows3 += query_complexity_bench(
        [DEPTH3_BASE], deltas=(DEPTH3_DELTA_DOUBLED,), seeds=seeds)

    for depth, rows in ((2, rows2), (3, rows3)):
        path = f"{args.out_prefix}_depth{depth}.csv"
        bench_to_csv(rows, path)
        fit = fit_query_bound(rows, depth)
        n_ok = sum(r.ok for r in rows)
        print(f"depth {depth}: {n_ok}/{len(rows)} cells ok -> {path}")
        print(f"  queries ~ {fit.constant:.3f} * predictor, "
              f"worst ratio {fit.worst_ratio:.2f}")


if __name__ == "__main__":
    main()
