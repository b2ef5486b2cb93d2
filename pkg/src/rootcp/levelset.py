"""Exact typicalness on stretches where every prediction is affine in z.

If mu_z(x_i) = a_i + b_i z on an interval, the residual of row i and the
candidate residual are both affine in z, and |r_i| <= |r_{n+1}| flips only
where r_i = r_{n+1} or r_i = -r_{n+1}. Sorting those roots splits the
interval into cells on which the rank, hence pi, is constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ScoreFunction, UnsupportedError, typicalness_batch

_SLOPE_EPS = 1e-14


@dataclass(frozen=True)
class Cell:
    lo: float
    hi: float
    value: float


def _check_score(score_fn: ScoreFunction) -> None:
    # squared comparisons are the same as absolute ones, so both are exact here
    if score_fn.kind not in ("absolute", "squared"):
        raise UnsupportedError(
            f"exact enumeration needs an absolute or squared score, got {score_fn.kind!r}"
        )


def crossing_points(responses, intercepts, slopes, lo=-math.inf, hi=math.inf):
    """Sorted unique z in (lo, hi) where some |r_i(z)| = |r_{n+1}(z)|."""
    y = np.asarray(responses, dtype=float)
    a = np.asarray(intercepts, dtype=float)
    b = np.asarray(slopes, dtype=float)
    n = y.size
    # r_i(z) = (y_i - a_i) - b_i z ;  r_last(z) = -a_last + (1 - b_last) z
    u, v = y - a[:n], -b[:n]
    c, d = -a[n], 1.0 - b[n]
    roots = []
    for off, slope in ((u - c, v - d), (u + c, v + d)):
        ok = np.abs(slope) > _SLOPE_EPS * (1.0 + np.abs(v) + abs(d))
        roots.append(-off[ok] / slope[ok])
    z = np.concatenate(roots) if roots else np.empty(0)
    z = z[np.isfinite(z) & (z > lo) & (z < hi)]
    return np.unique(z)


def _scores(y, a, b, score_fn, z):
    """Scores of every row at each z, computed from the residual lines.

    Writing r_i = u_i + v_i z and r_last = c + d z (rather than y - (a + b z))
    makes a row whose residual line equals +-r_last tie it exactly in floats.
    """
    n = y.size
    u, v = y - a[:n], -b[:n]
    c, d = -a[n], 1.0 - b[n]
    r = np.concatenate([u[None, :] + v[None, :] * z[:, None], (c + d * z)[:, None]], axis=1)
    return score_fn(r, np.zeros_like(r))


def _probe_points(edges, lo, hi):
    """One interior point per cell between consecutive edges."""
    pts = []
    bounds = [lo, *edges, hi]
    for left, right in zip(bounds[:-1], bounds[1:]):
        if math.isinf(left) and math.isinf(right):
            pts.append(0.0)
        elif math.isinf(left):
            pts.append(right - max(1.0, abs(right)))
        elif math.isinf(right):
            pts.append(left + max(1.0, abs(left)))
        else:
            pts.append(0.5 * (left + right))
    return bounds, np.asarray(pts)


def affine_cells(responses, intercepts, slopes, score_fn, lo=-math.inf, hi=math.inf):
    """Cells of (lo, hi) with the constant typicalness on each."""
    _check_score(score_fn)
    y = np.asarray(responses, dtype=float)
    a = np.asarray(intercepts, dtype=float)
    b = np.asarray(slopes, dtype=float)
    edges = crossing_points(y, a, b, lo, hi)
    bounds, pts = _probe_points(list(edges), lo, hi)
    values = typicalness_batch(_scores(y, a, b, score_fn, pts))
    return [Cell(float(l), float(h), float(v)) for l, h, v in zip(bounds[:-1], bounds[1:], values)]


def superlevel_intervals(cells, level):
    """Merge consecutive cells with value >= level into maximal intervals."""
    out = []
    for cell in cells:
        if cell.value >= level:
            if out and out[-1][1] == cell.lo:
                out[-1][1] = cell.hi
            else:
                out.append([cell.lo, cell.hi])
    return [(lo, hi) for lo, hi in out]


def evaluate_affine(responses, intercepts, slopes, score_fn, z):
    """Typicalness at each z evaluated directly (used only for checking)."""
    _check_score(score_fn)
    y = np.asarray(responses, dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    a = np.asarray(intercepts, dtype=float)
    b = np.asarray(slopes, dtype=float)
    return typicalness_batch(_scores(y, a, b, score_fn, z))
