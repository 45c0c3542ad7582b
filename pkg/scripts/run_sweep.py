#!/usr/bin/env python3
"""Branch census over a lambda grid for the reference family.

Shows where each constraint branch is populated and the sampled energy
levels, which is how a working lambda is located when the default choice
fails to converge.
"""

import argparse
import sys

import numpy as np

sys.path.insert(0, "src")

import doublephase as dp


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--samples", type=int, default=64)
    args = ap.parse_args()

    chart, metric = dp.build_torus(1, [64])
    P = dp.ProblemInstance(
        chart=chart,
        metric=metric,
        exponents=dp.ExponentField(p=chart.constant(3.0), q=chart.constant(2.0)),
        weight=dp.WeightField(mu=chart.constant(1.0)),
        lam=1.0,
        nonlinearity=dp.PowerNonlinearity(beta=4.0, amplitude=chart.constant(1.0)),
    )
    consts = dp.estimate_constants(P.exponents, P.weight, P.metric, trials=200, seed=args.seed)
    thr = dp.thresholds(P, consts)
    grid = np.geomspace(thr.lambda_star_star / 8.0, 2.0 * thr.lambda_star_star, args.points)
    cfg = dp.SolverConfig(seed=args.seed, multistart=8)
    rows = dp.sweep(P, grid, cfg, n_samples=args.samples)
    print(f"lambda** = {thr.lambda_star_star:.6g}")
    print(f"{'lambda':>10} {'theta+':>12} {'theta-':>12} {'n+':>4} {'n-':>4}")
    for row in rows:
        print(
            f"{row.lam:10.5f} {row.theta_plus_estimate:12.4g} "
            f"{row.theta_minus_estimate:12.4g} {row.n_plus_found:4d} {row.n_minus_found:4d}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
