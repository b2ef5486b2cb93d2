"""Conformal sets from a piecewise-linear interpolation of the fit map.

A handful of query fits z_1 < ... < z_d (plus two outer anchors) define
mu~_z(x) by linear interpolation between knots and linear extrapolation
beyond the outermost ones. Every row is treated the same way, so the
interpolated model is still permutation-symmetric and the resulting set
keeps the coverage guarantee. Because mu~ is affine on each segment, the
level set is enumerated exactly with no further fits.
"""

from __future__ import annotations

import math
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
from .levelset import Cell, affine_cells, superlevel_intervals
from .regressors import fit


@dataclass(frozen=True)
class InterpolatedFitMap:
    """Knots (anchors included) and the fitted predictions at each knot.

    ``predictions[t, i]`` is mu_{knots[t]}(x_i) for the n+1 augmented rows.
    """

    knots: np.ndarray
    predictions: np.ndarray
    n_anchors: int = 2

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        P = np.asarray(self.predictions, dtype=float)
        if k.ndim != 1 or k.size < 2:
            raise InvalidInputError("need at least two knots")
        if np.any(np.diff(k) <= 0):
            raise InvalidInputError("knots must be strictly increasing")
        if P.shape[0] != k.size:
            raise InvalidInputError("one prediction row per knot is required")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "predictions", P)

    @property
    def query_points(self) -> np.ndarray:
        return self.knots[1:-1] if self.n_anchors else self.knots

    @property
    def query_predictions(self) -> np.ndarray:
        return self.predictions[1:-1] if self.n_anchors else self.predictions

    @property
    def z_min(self) -> float:
        return float(self.knots[0])

    @property
    def z_max(self) -> float:
        return float(self.knots[-1])

    @property
    def n_segments(self) -> int:
        return self.knots.size - 1

    def segment_coefficients(self, t: int):
        """(intercepts, slopes) of the affine piece between knots t and t+1."""
        z0, z1 = self.knots[t], self.knots[t + 1]
        P0, P1 = self.predictions[t], self.predictions[t + 1]
        slopes = (P1 - P0) / (z1 - z0)
        return P0 - slopes * z0, slopes

    def segment_bounds(self, t: int):
        lo = -math.inf if t == 0 else float(self.knots[t])
        hi = math.inf if t == self.n_segments - 1 else float(self.knots[t + 1])
        return lo, hi

    def predict_all(self, z: float) -> np.ndarray:
        hit = np.searchsorted(self.knots, z)
        if hit < self.knots.size and self.knots[hit] == z:
            return self.predictions[hit].copy()
        t = int(np.clip(np.searchsorted(self.knots, z, side="right") - 1, 0, self.n_segments - 1))
        a, b = self.segment_coefficients(t)
        return a + b * z

    @classmethod
    def from_points(cls, zs, predictions, n_anchors: int = 0) -> "InterpolatedFitMap":
        """Map through arbitrary probed points (duplicates dropped)."""
        zs = np.asarray(zs, dtype=float)
        order = np.argsort(zs, kind="stable")
        zs, P = zs[order], np.asarray(predictions, dtype=float)[order]
        keep = np.concatenate([[True], np.diff(zs) > 0])
        return cls(zs[keep], P[keep], n_anchors=n_anchors)


def build_interp_map(
    regressor,
    data: Dataset,
    bracket,
    d: int = 8,
    counter: Optional[FitCounter] = None,
) -> InterpolatedFitMap:
    """Fit at d evenly spaced points of ``bracket`` plus two outer anchors.

    Anchors sit one bracket width beyond the bracket, or at the observed
    response extremes if those are further out. Costs d + 2 fits.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidInputError(f"degenerate interpolation bracket [{lo}, {hi}]")
    if int(d) < 1:
        raise InvalidInputError("d must be a positive integer")
    queries = np.linspace(lo, hi, d) if d > 1 else np.array([0.5 * (lo + hi)])
    width = hi - lo
    z_min = min(float(data.responses.min()), lo - width)
    z_max = max(float(data.responses.max()), hi + width)
    knots = np.concatenate([[z_min], queries, [z_max]])
    X = data.augmented_features
    preds = []
    for z in knots:
        if counter is not None:
            counter.tick("interp")
        preds.append(fit(regressor, data, float(z)).predict(X))
    return InterpolatedFitMap(knots, np.vstack(preds), n_anchors=2)


def interp_predict(fit_map: InterpolatedFitMap, z: float, row: int) -> float:
    return float(fit_map.predict_all(z)[row])


def interp_cells(fit_map: InterpolatedFitMap, data: Dataset, score_fn=ABSOLUTE):
    cells = []
    for t in range(fit_map.n_segments):
        a, b = fit_map.segment_coefficients(t)
        lo, hi = fit_map.segment_bounds(t)
        cells.extend(affine_cells(data.responses, a, b, score_fn, lo, hi))
    return cells


def interp_typicalness(fit_map: InterpolatedFitMap, data: Dataset, z, score_fn=ABSOLUTE):
    """pi~(z) by direct evaluation; the slow path used for cross-checks."""
    from .core import typicalness

    preds = fit_map.predict_all(float(z))
    scores = score_fn(data.augmented_responses(float(z)), preds)
    return typicalness(scores)


def most_typical_point(fit_map: InterpolatedFitMap, data: Dataset, score_fn=ABSOLUTE):
    """Midpoint of the widest bounded cell attaining the largest pi~."""
    cells = [c for c in interp_cells(fit_map, data, score_fn) if math.isfinite(c.lo) and math.isfinite(c.hi)]
    if not cells:
        return None, 0.0
    best = max(c.value for c in cells)
    cell = max((c for c in cells if c.value == best), key=lambda c: c.hi - c.lo)
    return 0.5 * (cell.lo + cell.hi), best


def _merged(cells):
    # adjacent segments share a knot, so merge touching cells of equal value
    out: list[Cell] = []
    for c in cells:
        if out and out[-1].hi == c.lo and out[-1].value == c.value:
            out[-1] = Cell(out[-1].lo, c.hi, c.value)
        else:
            out.append(c)
    return out


def interp_level_set(fit_map, data, score_fn, alpha):
    return superlevel_intervals(_merged(interp_cells(fit_map, data, score_fn)), alpha)


def interp_conformal_interval(
    fit_map: InterpolatedFitMap,
    data: Dataset,
    score_fn: ScoreFunction = ABSOLUTE,
    cfg: ConformalConfig = ConformalConfig(),
) -> ConformalInterval:
    """Outer hull of {z : pi~(z) >= alpha}; interior gaps become warnings."""
    intervals = interp_level_set(fit_map, data, score_fn, cfg.alpha)
    fits = fit_map.knots.size
    if not intervals:
        return ConformalInterval.empty("interp", fits_used=fits)
    iv = ConformalInterval(intervals[0][0], intervals[-1][1], fits_used=fits, method="interp")
    for (_, gap_lo), (gap_hi, _) in zip(intervals[:-1], intervals[1:]):
        iv.warnings.append(f"interior gap ({gap_lo:.6g}, {gap_hi:.6g}) excluded from the set")
    if math.isinf(iv.lower) or math.isinf(iv.upper):
        iv.warnings.append("unbounded interpolated set")
    return iv


def interp_interval(
    regressor,
    data: Dataset,
    cfg: ConformalConfig = ConformalConfig(),
    d: int = 8,
    bracket=None,
    score_fn: ScoreFunction = ABSOLUTE,
    max_rebuilds: int = 2,
) -> ConformalInterval:
    """Localize with split CP, build the map, and enumerate the set.

    If the set reaches past the outer anchors, the bracket is widened around
    the hull and the map rebuilt (at most ``max_rebuilds`` times).
    """
    from .split import SplitConfig, split_interval

    counter = FitCounter()
    if bracket is None:
        hint = split_interval(regressor, data, cfg, SplitConfig(), score_fn=score_fn)
        counter.count += hint.fits_used
        if hint.is_empty or not (math.isfinite(hint.lower) and math.isfinite(hint.upper)):
            bracket = (float(data.responses.min()), float(data.responses.max()))
        else:
            half = 0.5 * hint.length
            bracket = (hint.lower - half, hint.upper + half)
        if bracket[0] >= bracket[1]:
            bracket = (bracket[0] - 1.0, bracket[1] + 1.0)
    notes = []
    for attempt in range(max_rebuilds + 1):
        fit_map = build_interp_map(regressor, data, bracket, d, counter=counter)
        iv = interp_conformal_interval(fit_map, data, score_fn, cfg)
        if iv.is_empty or (fit_map.z_min < iv.lower and iv.upper < fit_map.z_max):
            break
        if attempt == max_rebuilds or not (math.isfinite(iv.lower) and math.isfinite(iv.upper)):
            break
        half = 0.5 * iv.length
        bracket = (iv.lower - half, iv.upper + half)
        notes.append(f"set reached the extrapolation region; rebuilt on [{bracket[0]:.6g}, {bracket[1]:.6g}]")
    iv.fits_used = counter.count
    iv.warnings = notes + iv.warnings
    return iv
