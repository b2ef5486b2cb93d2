"""A 2-NN fit whose two nearest neighbours disagree, so the D_n prediction
lies outside the conformal set and the initialization cascade falls back
to the split midpoint, the grid or interpolation.
"""

import argparse
from collections import Counter

import numpy as np

from rootcp.core import ConformalConfig, Dataset, InitializationError
from rootcp.regressors import KNN
from rootcp.root import ModelProfile, conformal_interval, initialize


def conflicting_neighbours(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3, 3, 40)
    y = np.sin(x) + 0.1 * rng.normal(size=40)
    x[0], y[0] = 0.05, 0.0
    x[1], y[1] = -0.06, 4.0
    return Dataset(x[:, None], y, [0.0])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--alpha", type=float, default=0.1)
    args = ap.parse_args()

    cfg = ConformalConfig(alpha=args.alpha)
    stages = Counter()
    for seed in range(args.seeds):
        data = conflicting_neighbours(seed)
        prof = ModelProfile(KNN(2), data)
        try:
            stages[initialize(prof, data, cfg).stage] += 1
        except InitializationError:
            stages["failed"] += 1
    print("initialization stage counts:", dict(stages))

    data = conflicting_neighbours(0)
    prof = ModelProfile(KNN(2), data)
    z_hat = prof.point_estimate()
    print(f"seed 0: D_n prediction {z_hat:.3f} has typicalness {prof(z_hat):.3f}")
    iv = conformal_interval(KNN(2), data, cfg)
    print(f"seed 0: interval [{iv.lower:.4f}, {iv.upper:.4f}] from z0 = {iv.z0:.4f}, {iv.fits_used} fits")
    for w in iv.warnings:
        print("  warning:", w)


if __name__ == "__main__":
    main()
