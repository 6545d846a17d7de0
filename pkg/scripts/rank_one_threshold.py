#!/usr/bin/env python3
"""Measure how the rank-one threshold scales with the off-diagonal slack.

For A = [[1 - slack, 0], [0, 1]]: the least n with A^n rank-one, next to
the coarse 1/slack heuristic, plus the mean strong-coupling time of the
iid pair {A, B} (B mirrors the slack onto the other queue). Writes
rank_one_threshold.csv.

Usage: python3 scripts/rank_one_threshold.py [--replications R] [--seed S] [--out FILE]
"""

import argparse
import csv
from fractions import Fraction

from maxplus.semiring import Matrix, Vector, EXACT
from maxplus.spectral import first_rank_one_power
from maxplus.stochastic import FiniteSupport, forward_coupling


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replications", type=int, default=40)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="rank_one_threshold.csv")
    args = ap.parse_args()

    slacks = [Fraction(1, d) for d in (2, 3, 4, 6, 8, 12, 16)]
    x0s = [Vector.make([0, 0], EXACT), Vector.make([0, 3], EXACT)]
    rows = []
    header = f"{'slack':>7} {'threshold n':>12} {'1/slack':>8} {'mean merge':>11}"
    print(header)
    print("-" * len(header))
    for eta in slacks:
        A = Matrix.make([[1 - eta, 0], [0, 1]], EXACT)
        B = Matrix.make([[1, 0], [0, 1 - eta]], EXACT)
        n = first_rank_one_power(A)
        D = FiniteSupport.make([A, B], ["1/2", "1/2"])
        rep = forward_coupling(
            D, x0s, horizon=4000, seed=args.seed, replications=args.replications
        )
        merges = [s.merge_time for s in rep.samples if s.merge_time is not None]
        mean_merge = sum(merges) / len(merges) if merges else float("nan")
        print(f"{str(eta):>7} {n:>12} {float(1 / eta):>8.1f} {mean_merge:>11.1f}")
        rows.append([str(eta), n, float(1 / eta), mean_merge, len(merges), args.replications])

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slack", "rank_one_power", "inverse_slack", "mean_merge_time", "merged", "replications"])
        w.writerows(rows)
    print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
