"""Scores, ranks, empirical quantiles and the typicalness function.

Everything in here is a pure function of its inputs. The conformal methods
in the sibling modules all reduce to these few primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ConformalError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(ConformalError, ValueError):
    pass


class NumericalError(ConformalError, ArithmeticError):
    pass


class UnsupportedError(ConformalError):
    pass


class FitBudgetExceeded(ConformalError):
    pass


class InitializationError(ConformalError):
    """No point with typicalness above the level was found.

    ``probes`` holds every ``(z, pi(z))`` pair evaluated before giving up.
    """

    def __init__(self, message: str, probes: Optional[list] = None):
        super().__init__(message)
        self.probes = list(probes or [])


@dataclass(frozen=True)
class Dataset:
    """Observed pairs plus the feature row of the point to predict."""

    features: np.ndarray
    responses: np.ndarray
    test_features: np.ndarray

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        y = np.array(self.responses, dtype=float, copy=True).ravel()
        x_test = np.array(self.test_features, dtype=float, copy=True).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise InvalidInputError("features must be a 2-d array")
        if X.shape[0] != y.shape[0]:
            raise InvalidInputError(
                f"features have {X.shape[0]} rows but responses have {y.shape[0]}"
            )
        if X.shape[0] < 2:
            raise InvalidInputError("need at least 2 observations")
        if x_test.shape[0] != X.shape[1]:
            raise InvalidInputError(
                f"test_features has length {x_test.shape[0]}, expected {X.shape[1]}"
            )
        for name, arr in (("features", X), ("responses", y), ("test_features", x_test)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contain non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "test_features", x_test)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def augmented_features(self) -> np.ndarray:
        """The (n+1) x p design with the test row appended last."""
        return np.vstack([self.features, self.test_features[None, :]])

    def augmented_responses(self, candidate: float) -> np.ndarray:
        return np.append(self.responses, float(candidate))

    def response_range(self) -> float:
        return float(self.responses.max() - self.responses.min())


@dataclass(frozen=True)
class ScoreFunction:
    """Conformity score S(truth, prediction).

    ``kind`` is one of ``"absolute"``, ``"squared"`` or ``"linex"``; the
    linex loss exp(g d) - g d - 1 with d = truth - prediction needs a
    nonzero ``gamma``.
    """

    kind: str = "absolute"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("absolute", "squared", "linex"):
            raise InvalidInputError(f"unknown score kind {self.kind!r}")
        if self.kind == "linex" and (self.gamma == 0 or not math.isfinite(self.gamma)):
            raise InvalidInputError("linex score needs a finite nonzero gamma")

    def __call__(self, truth, prediction):
        d = np.asarray(truth, dtype=float) - np.asarray(prediction, dtype=float)
        if self.kind == "absolute":
            return np.abs(d)
        if self.kind == "squared":
            return d * d
        gd = self.gamma * d
        return np.expm1(gd) - gd


ABSOLUTE = ScoreFunction("absolute")


@dataclass(frozen=True)
class ConformalConfig:
    """Miscoverage level, root tolerance and model-fit budget.

    ``epsilon=None`` means 1e-4 times the observed response range,
    resolved per dataset by :meth:`resolve_epsilon`.
    """

    alpha: float = 0.1
    epsilon: Optional[float] = None
    max_fits: int = 256

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.epsilon is not None and not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_fits) < 1:
            raise InvalidInputError("max_fits must be a positive integer")

    def resolve_epsilon(self, data: Dataset) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        span = data.response_range()
        return 1e-4 * span if span > 0 else 1e-4


def score(score_fn: ScoreFunction, truth: float, prediction: float) -> float:
    if not (math.isfinite(truth) and math.isfinite(prediction)):
        raise InvalidInputError("score inputs must be finite")
    return float(score_fn(truth, prediction))


def _as_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float).ravel()
    if s.size < 2:
        raise InvalidInputError("a score vector needs at least 2 entries")
    if np.isnan(s).any():
        raise InvalidInputError("scores contain NaN")
    return s


def rank_of_last(scores) -> int:
    """Number of entries (the last one included) that are <= the last entry."""
    s = _as_scores(scores)
    return int(np.count_nonzero(s <= s[-1]))


def typicalness(scores) -> float:
    """1 - rank_of_last / (n+1), computed as an integer ratio.

    Computing ``(N - rank) / N`` rather than ``1 - rank / N`` keeps values on
    the exact grid so that comparisons against a level such as 0.1 are not
    perturbed by a last-bit rounding error.
    """
    s = _as_scores(scores)
    total = s.size
    return (total - int(np.count_nonzero(s <= s[-1]))) / total


def typicalness_batch(scores: np.ndarray) -> np.ndarray:
    """Row-wise typicalness of an (m, n+1) score matrix."""
    S = np.atleast_2d(np.asarray(scores, dtype=float))
    total = S.shape[1]
    counts = np.count_nonzero(S <= S[:, -1:], axis=1)
    return (total - counts) / total


def typicalness_with_slack(scores, slack: float) -> float:
    """Fraction of scores with E_i >= E_{n+1} - slack.

    Used when fits are only approximate: ``slack`` is the caller's bound on
    how far each score may be off (2 sqrt(2 nu eps) for an eps-accurate
    solution of a nu-strongly convex problem). Upper-bounds typicalness.
    """
    if not slack >= 0:
        raise InvalidInputError(f"slack must be non-negative, got {slack}")
    s = _as_scores(scores)
    return int(np.count_nonzero(s >= s[-1] - slack)) / s.size


def optimization_slack(nu: float, gap: float) -> float:
    """2 sqrt(2 nu gap), the score perturbation allowed by a duality gap."""
    if nu < 0 or gap < 0:
        raise InvalidInputError("nu and gap must be non-negative")
    return 2.0 * math.sqrt(2.0 * nu * gap)


def quantile_index(m: int, level: float) -> int:
    # guard against (m+1)*level landing a hair above an integer, e.g. 30.000000000000004
    x = (m + 1) * level
    k = math.ceil(x)
    if k - x > 1 - 1e-9:
        k -= 1
    return k


def order_statistic(values, k: int) -> float:
    """k-th smallest entry (1-based); +inf when k exceeds the sample size."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise InvalidInputError("empty input")
    if k > v.size:
        return math.inf
    if k < 1:
        return -math.inf
    return float(np.partition(v, k - 1)[k - 1])


def empirical_quantile(values, level: float) -> float:
    """The ceil((m+1) level)-th order statistic of ``values``.

    Returns ``inf`` when that index exceeds m; callers get an unbounded
    interval rather than a silently clamped one.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise InvalidInputError("empty input")
    if not (0.0 < level < 1.0):
        raise InvalidInputError(f"level must lie in (0, 1), got {level}")
    return order_statistic(v, quantile_index(v.size, level))


@dataclass
class FitCounter:
    """Shared model-fit tally with an optional hard limit."""

    count: int = 0
    limit: Optional[int] = None
    history: list = field(default_factory=list)

    def tick(self, label: str = "fit") -> None:
        if self.limit is not None and self.count >= self.limit:
            raise FitBudgetExceeded(f"fit budget of {self.limit} exhausted")
        self.count += 1
        self.history.append(label)


METHODS = ("root_full", "split", "interp", "smooth", "ridge_exact", "oracle")


@dataclass
class ConformalInterval:
    """[lower, upper] with the bookkeeping of how it was obtained.

    An empty set is stored as lower = upper = nan. Root searches also
    record the outer ``bracket`` (z_min, z_max) they bisected from.
    """

    lower: float
    upper: float
    epsilon: float = 0.0
    fits_used: int = 0
    method: str = "root_full"
    warnings: list = field(default_factory=list)
    init_fits: int = 0
    diagnostic_fits: int = 0
    z0: Optional[float] = None
    bracket: Optional[tuple] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        if not (math.isnan(self.lower) or math.isnan(self.upper)) and self.lower > self.upper:
            raise InvalidInputError("lower endpoint exceeds upper endpoint")

    @classmethod
    def empty(cls, method: str, **kwargs) -> "ConformalInterval":
        iv = cls(math.nan, math.nan, method=method, **kwargs)
        iv.warnings.append("empty conformal set")
        return iv

    @property
    def is_empty(self) -> bool:
        return math.isnan(self.lower) or math.isnan(self.upper)

    @property
    def length(self) -> float:
        if self.is_empty:
            return 0.0
        return self.upper - self.lower

    def contains(self, z: float) -> bool:
        return not self.is_empty and self.lower <= z <= self.upper

    def shifted(self, offset: float) -> "ConformalInterval":
        out = ConformalInterval(**{**self.__dict__, "warnings": list(self.warnings)})
        out.lower += offset
        out.upper += offset
        if out.z0 is not None:
            out.z0 += offset
        if out.bracket is not None:
            out.bracket = (out.bracket[0] + offset, out.bracket[1] + offset)
        return out

    def fit_bound(self) -> Optional[int]:
        """init_fits + 2 ceil(log2((z_max - z_min) / eps)) for root searches."""
        if self.bracket is None or not self.epsilon > 0:
            return None
        width = self.bracket[1] - self.bracket[0]
        return self.init_fits + 2 * max(math.ceil(math.log2(width / self.epsilon)), 0)
