"""Smoothed typicalness: the rank with its indicators replaced by phi_gamma.

Three envelopes are available. The sigmoid is the smooth surrogate; the two
ramps bracket the indicator 1[x <= 0] from below (``lower_ramp``) and above
(``upper_ramp``), so their conformal sets sandwich the exact one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    ABSOLUTE,
    ConformalConfig,
    ConformalInterval,
    Dataset,
    FitCounter,
    InvalidInputError,
    ScoreFunction,
)

ENVELOPES = ("sigmoid", "lower_ramp", "upper_ramp")


def _check(envelope, gamma):
    if envelope not in ENVELOPES:
        raise InvalidInputError(f"unknown envelope {envelope!r}")
    if not gamma > 0:
        raise InvalidInputError(f"gamma must be positive, got {gamma}")


def phi(envelope: str, gamma: float, x):
    """Non-increasing surrogate of 1[x <= 0]."""
    _check(envelope, gamma)
    x = np.asarray(x, dtype=float)
    gx = gamma * x
    if envelope == "sigmoid":
        # exp only ever sees a non-positive argument
        e = np.exp(-np.abs(gx))
        out = np.where(gx >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    elif envelope == "lower_ramp":
        out = np.clip(-gx, 0.0, 1.0)
    else:
        out = np.clip(1.0 - gx, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def phi_derivative(envelope: str, gamma: float, x):
    _check(envelope, gamma)
    x = np.asarray(x, dtype=float)
    if envelope == "sigmoid":
        f = phi("sigmoid", gamma, x)
        return -gamma * f * (1.0 - f)
    gx = gamma * x
    inside = (-gx > 0) & (-gx < 1) if envelope == "lower_ramp" else (gx > 0) & (gx < 1)
    return np.where(inside, -gamma, 0.0)


def delta(envelope: str, gamma: float) -> float:
    """sup_x (phi - 1[x <= 0])(x): the level inflation needed for coverage."""
    _check(envelope, gamma)
    return {"sigmoid": 0.5, "lower_ramp": 0.0, "upper_ramp": 1.0}[envelope]


@dataclass(frozen=True)
class SmoothingConfig:
    """How to smooth, and at which level to cut the smoothed profile.

    With ``scale="iqr"`` the effective gamma is ``gamma`` divided by the
    interquartile range of the residuals of a fit on the observed data, so
    gamma is unit-free. ``target_alpha`` overrides the level; otherwise
    ``calibrate=True`` uses alpha + delta and ``calibrate=False`` uses alpha.
    """

    gamma: float = 100.0
    envelope: str = "sigmoid"
    target_alpha: Optional[float] = None
    calibrate: bool = False
    scale: str = "iqr"
    value_tol: float = 1e-6

    def __post_init__(self):
        _check(self.envelope, self.gamma)
        if self.scale not in ("iqr", "none"):
            raise InvalidInputError("scale must be 'iqr' or 'none'")

    def level(self, alpha: float) -> float:
        if self.target_alpha is not None:
            level = self.target_alpha
            if self.calibrate and level - delta(self.envelope, self.gamma) < alpha:
                raise InvalidInputError(
                    f"target level {level} minus delta {delta(self.envelope, self.gamma)} is below alpha={alpha}"
                )
            return level
        if self.calibrate:
            return alpha + delta(self.envelope, self.gamma)
        return alpha


def smooth_rank(scores, smoothing: SmoothingConfig, gamma: Optional[float] = None) -> float:
    s = np.asarray(scores, dtype=float).ravel()
    g = smoothing.gamma if gamma is None else gamma
    return float(np.sum(phi(smoothing.envelope, g, s - s[-1])))


def smooth_rank_grad(scores, smoothing: SmoothingConfig, gamma: Optional[float] = None) -> float:
    """d smooth_rank / d (candidate score); the self term is constant."""
    s = np.asarray(scores, dtype=float).ravel()
    g = smoothing.gamma if gamma is None else gamma
    return float(-np.sum(phi_derivative(smoothing.envelope, g, s[:-1] - s[-1])))


def smooth_typicalness(scores, smoothing: SmoothingConfig, gamma: Optional[float] = None) -> float:
    s = np.asarray(scores, dtype=float).ravel()
    return 1.0 - smooth_rank(s, smoothing, gamma) / s.size


def calibrated_level(alpha: float, smoothing: SmoothingConfig) -> float:
    return smoothing.level(alpha)


def effective_gamma(smoothing: SmoothingConfig, residual_scores) -> float:
    if smoothing.scale == "none":
        return smoothing.gamma
    q75, q25 = np.percentile(np.asarray(residual_scores, dtype=float), [75, 25])
    iqr = float(q75 - q25)
    return smoothing.gamma / iqr if iqr > 0 else smoothing.gamma


def smooth_conformal_interval(
    regressor,
    data: Dataset,
    cfg: ConformalConfig = ConformalConfig(),
    smoothing: SmoothingConfig = SmoothingConfig(),
    score_fn: ScoreFunction = ABSOLUTE,
    *,
    split_hint: Optional[ConformalInterval] = None,
    interior_checks: int = 5,
) -> ConformalInterval:
    """Root search on z -> pi(z, gamma) at the smoothing level."""
    from .root import ModelProfile, run_root_search

    counter = FitCounter(limit=cfg.max_fits)
    profile = ModelProfile(regressor, data, score_fn, counter=counter)
    observed = profile.observed_model()
    gamma = effective_gamma(smoothing, score_fn(data.responses, observed.predict(data.features)))
    profile.statistic = lambda s: smooth_typicalness(s, smoothing, gamma)
    iv = run_root_search(
        profile,
        data,
        cfg,
        level=smoothing.level(cfg.alpha),
        split_hint=split_hint,
        # ramps have exact plateaus on the level grid, so only the sigmoid may stop on value
        value_tol=smoothing.value_tol if smoothing.envelope == "sigmoid" else 0.0,
        interior_checks=interior_checks,
        method="smooth",
    )
    iv.warnings.append(f"{smoothing.envelope} envelope, effective gamma {gamma:.6g}")
    return iv
