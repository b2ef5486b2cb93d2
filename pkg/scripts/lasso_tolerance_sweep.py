"""Fit counts and interval lengths of rootCP with lasso as the solver tolerance varies.

The bisection cost depends only on the bracket width and eps, so the fit
count should stay flat while each fit gets more expensive.
"""

import argparse
import time

import numpy as np

from rootcp.bench import SyntheticSpec, generate_table
from rootcp.core import ConformalConfig
from rootcp.interp import interp_interval
from rootcp.regressors import Lasso
from rootcp.root import conformal_interval


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--p", type=int, default=50)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--instances", type=int, default=10)
    args = ap.parse_args()

    cfg = ConformalConfig(alpha=0.1)
    data = [generate_table(SyntheticSpec(n=args.n, p=args.p, seed=s)).holdout()[0] for s in range(args.instances)]
    print(f"{'tol_scale':>10}  {'method':>6}  {'fits':>6}  {'length':>8}  {'time (s)':>9}")
    for scale in (1e-2, 1e-4, 1e-6, 1e-8, 1e-10):
        reg = Lasso(args.lam, tol_scale=scale)
        for name, run in (("full", conformal_interval), ("interp", interp_interval)):
            fits, lengths, t0 = [], [], time.perf_counter()
            for d in data:
                iv = run(reg, d, cfg)
                fits.append(iv.fits_used)
                lengths.append(iv.length)
            dt = (time.perf_counter() - t0) / len(data)
            print(f"{scale:>10.0e}  {name:>6}  {np.mean(fits):>6.1f}  {np.mean(lengths):>8.4f}  {dt:>9.4f}")


if __name__ == "__main__":
    main()
