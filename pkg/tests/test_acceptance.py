"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -v``) or directly
(``python3 tests/test_acceptance.py``) for the summary lines alone.
"""

import math
import subprocess
import sys
import time
from functools import lru_cache

import numpy as np
from scipy import stats

from rootcp.bench import SyntheticSpec, generate_table, run_benchmark
from rootcp.core import ConformalConfig, rank_of_last, typicalness
from rootcp.interp import interp_interval
from rootcp.oracle import exact_ridge_set
from rootcp.regressors import Lasso, Ridge
from rootcp.root import conformal_interval
from rootcp.smooth import SmoothingConfig, smooth_conformal_interval

ALPHA = 0.1
LAM = 1.0
SPEC = SyntheticSpec(n=300, p=50, seed=0)
REPEATS = 100
FIT_CAP = 35


RESULTS = []


def report(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({name}): {detail}"
    RESULTS.append((number, line))
    print(line)
    return ok


def instance(seed):
    return generate_table(SyntheticSpec(n=300, p=50, seed=seed)).holdout()[0]


@lru_cache(maxsize=None)
def ridge_benchmark():
    t0 = time.perf_counter()
    rep = run_benchmark(["full", "split", "oracle"], SPEC, Ridge(LAM), ConformalConfig(alpha=ALPHA), repeats=REPEATS)
    return rep, time.perf_counter() - t0


def budget_violations(rep, method="full"):
    bad = []
    for r in rep.per_rep:
        if r.method != method:
            continue
        if r.error or r.fit_bound is None or r.fits > r.fit_bound or r.fits > FIT_CAP:
            bad.append((r.rep, r.fits, r.fit_bound, r.error))
    return bad


def test_1_coverage():
    t0 = time.perf_counter()
    rep = run_benchmark(["full"], SPEC, Ridge(LAM), ConformalConfig(alpha=ALPHA), repeats=REPEATS)
    elapsed = time.perf_counter() - t0
    cov = rep.summary["full"]["mean_coverage"]
    ok = 0.85 <= cov <= 0.97 and elapsed < 60 and rep.summary["full"]["failures"] == 0
    assert report(1, "coverage", ok, f"coverage {cov:.3f} in [0.85, 0.97], {elapsed:.2f} s < 60 s")


def test_2_oracle_equivalence():
    t0 = time.perf_counter()
    cfg = ConformalConfig(alpha=ALPHA, epsilon=1e-6)
    worst, used, seed = 0.0, 0, 0
    while used < 100:
        data = instance(1000 + seed)
        seed += 1
        ex = exact_ridge_set(data, LAM, ALPHA)
        if not ex.is_single_interval:
            continue
        used += 1
        iv = conformal_interval(Ridge(LAM), data, cfg)
        lo, hi = ex.intervals[0]
        worst = max(worst, abs(iv.lower - lo), abs(iv.upper - hi))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 120
    assert report(
        2, "oracle equivalence", ok,
        f"max endpoint error {worst:.2e} <= 1e-6 on {used} interval instances "
        f"({seed - used} non-interval skipped), {elapsed:.2f} s < 120 s",
    )


def test_3_fit_budget():
    rep, _ = ridge_benchmark()
    bad = budget_violations(rep)
    rows = [r for r in rep.per_rep if r.method == "full"]
    worst = max(r.fits for r in rows)
    slack = min(r.fit_bound - r.fits for r in rows)
    ok = not bad
    assert report(
        3, "fit budget", ok,
        f"{len(rows)} repetitions, max fits {worst} <= {FIT_CAP}, min headroom under the bisection bound {slack}"
        + (f", violations {bad[:3]}" if bad else ""),
    )


def test_4_interpolation_exactness():
    cfg = ConformalConfig(alpha=ALPHA)
    worst = 0.0
    for seed in range(50):
        data = instance(2000 + seed)
        lo, hi = exact_ridge_set(data, LAM, ALPHA).hull
        iv = interp_interval(Ridge(LAM), data, cfg, d=8)
        worst = max(worst, abs(iv.lower - lo), abs(iv.upper - hi))
    ok = worst <= 1e-8
    assert report(4, "interpolation exactness", ok, f"max endpoint error {worst:.2e} <= 1e-8 on 50 seeds")


def test_5_gap_nesting():
    cfg = ConformalConfig(alpha=ALPHA)
    failures = []
    for seed in range(100):
        data = instance(3000 + seed)
        lo, hi = exact_ridge_set(data, LAM, ALPHA).hull
        # the root searches locate each edge to within eps
        eps = cfg.resolve_epsilon(data)
        inner = smooth_conformal_interval(Ridge(LAM), data, cfg, SmoothingConfig(envelope="upper_ramp"))
        outer = smooth_conformal_interval(Ridge(LAM), data, cfg, SmoothingConfig(envelope="lower_ramp"))
        nested = (
            lo - eps <= inner.lower
            and inner.upper <= hi + eps
            and outer.lower <= lo + eps
            and hi - eps <= outer.upper
        )
        if not nested:
            failures.append(seed)
    ok = not failures
    assert report(
        5, "gap nesting", ok,
        f"upper-ramp within exact within lower-ramp on {100 - len(failures)}/100 seeds (tolerance eps)",
    )


def test_6_rank_validity():
    rng = np.random.default_rng(0)
    n, trials = 99, 10_000
    S = rng.random((trials, n + 1))
    pis = np.array([typicalness(row) for row in S])
    ranks = np.array([rank_of_last(row) for row in S])
    parts, ok = [], True
    for a in (0.05, 0.1, 0.5):
        p_hat = float(np.mean(pis < a))
        sigma = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / trials)
        ok &= p_hat <= a + 3 * sigma
        parts.append(f"P(pi<{a})={p_hat:.4f}")
    counts = np.bincount(ranks.astype(int) - 1, minlength=n + 1)
    pval = stats.chisquare(counts).pvalue
    ok &= pval > 0.01 and counts.size == n + 1
    assert report(6, "rank validity", ok, ", ".join(parts) + f", rank chi-square p={pval:.3f} > 0.01")


def test_7_baseline_ordering():
    rep, _ = ridge_benchmark()
    s = rep.summary
    split, full, oracle = (s[m]["mean_length"] for m in ("split", "full", "oracle"))
    ok = split >= full >= 0.98 * oracle
    assert report(
        7, "baseline ordering", ok,
        f"split {split:.4f} >= rootCP {full:.4f} >= 0.98 * oracle {0.98 * oracle:.4f} over {REPEATS} reps",
    )


def test_8_lasso_tight_tolerance():
    cfg = ConformalConfig(alpha=ALPHA)
    tight = run_benchmark(["full"], SPEC, Lasso(LAM, tol_scale=1e-6), cfg, repeats=REPEATS)
    loose = run_benchmark(["full"], SPEC, Lasso(LAM, tol_scale=1e-3), cfg, repeats=REPEATS)
    bad = budget_violations(tight)
    worst = max(r.fits for r in tight.per_rep)
    ok = not bad
    assert report(
        8, "lasso at tight tolerance", ok,
        f"tol 1e-6*||y||^2: max fits {worst}, mean {tight.summary['full']['mean_fits']:.1f} "
        f"(tol 1e-3*||y||^2: mean {loose.summary['full']['mean_fits']:.1f}), within budget on all {REPEATS} reps",
    )


def test_9_determinism(tmp_path):
    args = [
        sys.executable, "-m", "rootcp", "run", "--synthetic", "300,50,50,1.0", "--repeats", "10",
        "--seed", "7", "--method", "full,split,oracle,interp,smooth", "--model", "lasso",
    ]
    outs = []
    for tag in ("a", "b"):
        path = tmp_path / f"{tag}.json"
        subprocess.run(args + ["--out", str(path)], check=True, capture_output=True)
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    assert report(9, "determinism", ok, f"two CLI runs, {len(outs[0])} bytes each, identical={outs[0] == outs[1]}")


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_")):
        try:
            fn(Path(tempfile.mkdtemp())) if "tmp_path" in fn.__code__.co_varnames else fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
