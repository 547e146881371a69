"""Sweep the variance penalty on one four-block series and tabulate the segmentations.

Usage: python3 scripts/variance_sweep.py --seed 0 [--points 20] [--plot fig.csv]
"""
import argparse

import numpy as np

from l1seg.io import write_table
from l1seg.segmenter import extract_changepoints, refit_segments
from l1seg.synth import generate, scenario
from l1seg.variance import lambda_max_variance, solve_variance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--plot", help="write t, y, level, truth for the grid value closest to 3 changepoints")
    args = ap.parse_args()

    sc = scenario("paper4")
    y = generate("paper4", args.seed, sc)
    lmax = lambda_max_variance(y)
    print(f"lambda_max = {lmax:.4f}")
    print(f"{'rel':>8} {'#cp':>4}  changepoints / refit variances")
    best = None
    for r in np.geomspace(0.01, 1.0, args.points):
        sig, _ = solve_variance(y, r * lmax)
        seg = refit_segments(y, extract_changepoints(sig), "variance")
        cps = seg.changepoints
        shown = ", ".join(map(str, cps[:8])) + (" ..." if len(cps) > 8 else "")
        var = ", ".join(f"{v:.2f}" for v in seg.segment_levels[:9])
        print(f"{r:8.4f} {len(cps):4d}  [{shown}]  ({var})")
        if best is None or abs(len(cps) - 3) < abs(len(best[1].changepoints) - 3):
            best = (sig, seg)
    if args.plot:
        t = np.arange(1, y.shape[0] + 1)
        write_table(args.plot, ["t", "y", "level", "truth"], [t, y, best[0].levels, sc.variance])
        print(f"wrote {args.plot}")


if __name__ == "__main__":
    main()
