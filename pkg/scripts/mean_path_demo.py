"""Trace the mean-filter solution path on the step scenario.

Usage: python3 scripts/mean_path_demo.py [--seed 0]
"""
import argparse

import numpy as np

from l1seg.segmenter import extract_changepoints, refit_segments
from l1seg.synth import generate
from l1seg.tvdenoise import lambda_max_mean, solve_mean


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    y = generate("mean-steps", args.seed)
    lmax = lambda_max_mean(y)
    print(f"N = {y.shape[0]}, lambda_max = {lmax:.3f}, true changes after 100, 200, 300")
    for r in (1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01):
        m, rep = solve_mean(y, r * lmax)
        seg = refit_segments(y, extract_changepoints(m), "mean")
        levels = ", ".join(f"{v:.2f}" for v in seg.segment_levels[:6])
        print(f"rel {r:5.2f}: {len(seg.changepoints):3d} cps {list(seg.changepoints[:6])} "
              f"levels ({levels}) kkt {rep.kkt_residual:.1e}")


if __name__ == "__main__":
    main()
