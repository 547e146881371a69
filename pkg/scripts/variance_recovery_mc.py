"""Monte Carlo study of four-block variance recovery over many seeds.

For every seed the script scans a log-spaced relative penalty grid and
reports (a) whether some grid value gives exactly three changepoints within
+-30 samples of the truth with refit variances within 0.5, and (b) the fewest
changepoints at which all three true changes are detected.

Usage: python3 scripts/variance_recovery_mc.py [--seeds 50] [--points 20]
"""
import argparse
import collections

import numpy as np

from l1seg.segmenter import extract_changepoints, refit_segments
from l1seg.synth import generate, scenario
from l1seg.variance import lambda_max_variance, solve_variance

TRUE_CPS = (250, 500, 750)
TRUE_VAR = (2.0, 1.0, 3.0, 1.0)


def analyse(y, grid):
    lmax = lambda_max_variance(y)
    exact, fewest = False, None
    for r in grid:
        sig, _ = solve_variance(y, r * lmax)
        seg = extract_changepoints(sig)
        cps = seg.changepoints
        if all(any(abs(c - t) <= 30 for c in cps) for t in TRUE_CPS):
            fewest = len(cps) if fewest is None else min(fewest, len(cps))
        if len(cps) == 3 and all(abs(c - t) <= 30 for c, t in zip(cps, TRUE_CPS)):
            refit = refit_segments(y, seg, "variance").segment_levels
            exact |= all(abs(v - t) <= 0.5 for v, t in zip(refit, TRUE_VAR))
    return exact, fewest


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--points", type=int, default=20)
    args = ap.parse_args()
    grid = np.geomspace(0.01, 1.0, args.points)
    sc = scenario("paper4")
    hits, counts = 0, collections.Counter()
    for seed in range(args.seeds):
        ok, fewest = analyse(generate("paper4", seed, sc), grid)
        hits += ok
        counts[fewest] += 1
    print(f"exact recovery: {hits}/{args.seeds} seeds")
    print("fewest changepoints detecting all three true changes:")
    for k in sorted(counts, key=lambda v: (v is None, v)):
        print(f"  {k}: {counts[k]}")


if __name__ == "__main__":
    main()
