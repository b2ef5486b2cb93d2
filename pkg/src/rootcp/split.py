"""Split (inductive) conformal prediction: one fit, one calibration quantile."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core import (
    ABSOLUTE,
    ConformalConfig,
    ConformalInterval,
    Dataset,
    InvalidInputError,
    ScoreFunction,
    empirical_quantile,
)


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.5
    shuffle_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise InvalidInputError("train_fraction must lie in (0, 1)")

    def sizes(self, n: int):
        m = int(math.floor(self.train_fraction * n))
        m = min(max(m, 1), n - 1)
        if m < 1 or n - m < 1:
            raise InvalidInputError(f"cannot split {n} observations")
        return m, n - m


def _score_radius(score_fn: ScoreFunction, q: float):
    """Offsets d with S(mu + d, mu) <= q, as (d_lo, d_hi)."""
    if math.isinf(q):
        return -math.inf, math.inf
    if score_fn.kind == "absolute":
        return -q, q
    if score_fn.kind == "squared":
        r = math.sqrt(q)
        return -r, r
    # linex is convex in d with its minimum 0 at d = 0, so {S <= q} is an interval
    if q <= 0:
        return 0.0, 0.0
    f = lambda d: float(score_fn(d, 0.0)) - q

    def bound(direction):
        step = 1.0
        while f(direction * step) < 0:
            step *= 2.0
        return optimize.brentq(f, 0.0, direction * step, xtol=1e-14)

    return bound(-1.0), bound(1.0)


def split_indices(n: int, split_cfg: SplitConfig):
    """(train, calibration) row indices after a seeded shuffle."""
    m, _ = split_cfg.sizes(n)
    perm = np.random.default_rng(split_cfg.shuffle_seed).permutation(n)
    return perm[:m], perm[m:]


def split_interval(
    regressor,
    data: Dataset,
    cfg: ConformalConfig = ConformalConfig(),
    split_cfg: SplitConfig = SplitConfig(),
    score_fn: ScoreFunction = ABSOLUTE,
) -> ConformalInterval:
    """[mu_tr(x_{n+1}) -+ Q] with Q the calibration-score quantile.

    Q is the ceil((m_cal + 1)(1 - alpha))-th smallest calibration score; a
    calibration set too small for the level yields an unbounded interval.
    """
    train, cal = split_indices(data.n, split_cfg)
    model = regressor.fit_xy(data.features[train], data.responses[train])
    cal_scores = score_fn(data.responses[cal], model.predict(data.features[cal]))
    q = empirical_quantile(cal_scores, 1.0 - cfg.alpha)
    center = float(model.predict(data.test_features))
    d_lo, d_hi = _score_radius(score_fn, q)
    iv = ConformalInterval(center + d_lo, center + d_hi, fits_used=1, method="split", z0=center)
    if math.isinf(q):
        iv.warnings.append(
            f"calibration set of {cal.size} points is too small for alpha={cfg.alpha}; interval is unbounded"
        )
    return iv
