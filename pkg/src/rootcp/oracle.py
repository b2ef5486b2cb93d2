"""Exact full-conformal set for ridge regression.

Ridge predictions are affine in the candidate response, so the typicalness
function is piecewise constant with at most 2n change points. Enumerating
them gives the exact level set in O(n^2); this is the reference every
approximate method is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ABSOLUTE, Dataset, ScoreFunction
from .levelset import affine_cells, superlevel_intervals
from .regressors import affine_coefficients


@dataclass(frozen=True)
class ExactSet:
    intervals: list
    cells: list

    @property
    def is_single_interval(self) -> bool:
        return len(self.intervals) == 1

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def hull(self):
        if not self.intervals:
            return None
        return self.intervals[0][0], self.intervals[-1][1]

    def contains(self, z: float) -> bool:
        return any(lo <= z <= hi for lo, hi in self.intervals)

    @property
    def length(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)


def exact_ridge_set(
    data: Dataset, lam: float, alpha: float, score_fn: ScoreFunction = ABSOLUTE
) -> ExactSet:
    coeffs = affine_coefficients(data, lam)
    cells = affine_cells(data.responses, coeffs.intercepts, coeffs.slopes, score_fn)
    return ExactSet(superlevel_intervals(cells, alpha), cells)
