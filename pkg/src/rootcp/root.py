"""Full conformal intervals by bisection on the typicalness function.

The conformal set {z : pi(z) >= alpha} is, in the usual case, an interval
around a good point prediction. Once a point z0 inside it and two points
outside it on either side are known, each endpoint is a level crossing of
pi that bisection pins down to +-eps in about log2(width / eps) refits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import (
    ABSOLUTE,
    ConformalConfig,
    ConformalInterval,
    Dataset,
    FitBudgetExceeded,
    FitCounter,
    InitializationError,
    InvalidInputError,
    ScoreFunction,
    UnsupportedError,
    typicalness,
    typicalness_with_slack,
)
from .interp import InterpolatedFitMap, most_typical_point
from .levelset import crossing_points
from .regressors import AffineFitCoefficients, fit_observed, _fit_augmented


class TypicalnessProfile:
    """A cached z -> pi(z) map that charges one fit per new z."""

    def __init__(self, func: Callable[[float], float], counter: Optional[FitCounter] = None):
        self._func = func
        self.counter = counter if counter is not None else FitCounter()
        self.cache: dict[float, float] = {}

    def __call__(self, z: float) -> float:
        z = float(z)
        if z in self.cache:
            return self.cache[z]
        self.counter.tick()
        value = float(self._func(z))
        self.cache[z] = value
        return value

    @property
    def fits(self) -> int:
        return self.counter.count

    def probes(self):
        return sorted(self.cache.items())

    def predictions(self, z: float):
        return None

    def point_estimate(self):
        return None


class ModelProfile(TypicalnessProfile):
    """pi(z) obtained by refitting ``regressor`` on D_{n+1}(z).

    ``statistic`` maps the n+1 scores to the profile value (hard typicalness
    by default). ``slack``, if given, is either a constant or a function of
    the fitted model, and switches to the slack-adjusted typicalness.
    """

    def __init__(
        self,
        regressor,
        data: Dataset,
        score_fn: ScoreFunction = ABSOLUTE,
        statistic: Callable = typicalness,
        slack=None,
        counter: Optional[FitCounter] = None,
        warm_start: bool = True,
    ):
        super().__init__(self._evaluate, counter)
        self.regressor = regressor
        self.data = data
        self.score_fn = score_fn
        self.statistic = statistic
        self.slack = slack
        self.warm_start = warm_start
        self._X = data.augmented_features
        self._preds: dict[float, np.ndarray] = {}
        self._last_model = None
        self._observed = None

    def _evaluate(self, z: float) -> float:
        warm = self._last_model if self.warm_start else None
        model = _fit_augmented(self.regressor, self.data, z, warm=warm)
        self._last_model = model
        preds = model.predict(self._X)
        self._preds[z] = preds
        scores = self.score_fn(self.data.augmented_responses(z), preds)
        if self.slack is not None:
            slack = self.slack(model) if callable(self.slack) else self.slack
            return typicalness_with_slack(scores, slack)
        return self.statistic(scores)

    def predictions(self, z: float):
        return self._preds.get(float(z))

    def observed_model(self):
        if self._observed is None:
            self.counter.tick("observed")
            self._observed = fit_observed(self.regressor, self.data)
        return self._observed

    def point_estimate(self):
        return float(self.observed_model().predict(self.data.test_features))

    def sibling(self, regressor) -> "ModelProfile":
        """Same data, score and statistic with another regressor and a shared counter."""
        return ModelProfile(
            regressor, self.data, self.score_fn, self.statistic, self.slack, self.counter, self.warm_start
        )


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    lo_value: float
    hi_value: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidInputError("bracket needs lo < hi")

    def straddles(self, level: float) -> bool:
        return (self.lo_value >= level) != (self.hi_value >= level)


class Initialization(NamedTuple):
    z_min: float
    z0: float
    z_max: float
    stage: str


def _usable(iv: Optional[ConformalInterval]) -> bool:
    return (
        iv is not None
        and not iv.is_empty
        and math.isfinite(iv.lower)
        and math.isfinite(iv.upper)
        and iv.upper > iv.lower
    )


def initialize(
    profile: TypicalnessProfile,
    data: Dataset,
    cfg: ConformalConfig,
    split_hint: Optional[ConformalInterval] = None,
    *,
    level: Optional[float] = None,
    point_hint: Optional[float] = None,
    coarse_profile: Optional[TypicalnessProfile] = None,
    d: int = 10,
    refine_rounds: int = 3,
    max_expansions: int = 10,
) -> Initialization:
    """Find z_min < z0 < z_max with pi(z_min) < level <= pi(z0) > pi(z_max).

    z0 is searched by a cascade that stops at the first success:

    1. ``point_hint``, or the prediction at x_{n+1} of a model fit on D_n;
    2. the midpoint of the split interval (computed if not given);
    3. ``d`` evenly spaced points over the split interval enlarged by half
       its length on both sides;
    4. up to ``refine_rounds`` probes at the most typical point of the
       interpolated profile through everything probed so far.

    Stages 3 and 4 run on ``coarse_profile`` when one is given (a cheaper,
    less accurate fit); their winner is then confirmed on ``profile``.
    The outer bounds start at the response extremes and move outward by the
    current bracket width until pi drops below the level.
    """
    level = cfg.alpha if level is None else level
    search = coarse_profile if coarse_profile is not None else profile

    def accept(z) -> bool:
        if search is not profile and search(z) < level:
            return False
        return profile(z) >= level

    def fail(msg):
        probes = profile.probes()
        if search is not profile:
            probes = probes + [("coarse", z, v) for z, v in search.probes()]
        return InitializationError(msg, probes)

    try:
        lo, hi = float(data.responses.min()), float(data.responses.max())
        if lo == hi:
            lo, hi = lo - 1.0, hi + 1.0
        profile(lo)
        profile(hi)

        z0, stage = None, None
        if point_hint is None:
            point_hint = profile.point_estimate()
        if point_hint is not None and math.isfinite(point_hint) and profile(point_hint) >= level:
            z0, stage = float(point_hint), "point"

        window = None
        if z0 is None:
            if split_hint is None and isinstance(profile, ModelProfile):
                from .split import split_interval

                profile.counter.tick("split")
                split_hint = split_interval(profile.regressor, data, cfg, score_fn=profile.score_fn)
            if _usable(split_hint):
                half = 0.5 * (split_hint.upper - split_hint.lower)
                window = (split_hint.lower - half, split_hint.upper + half)
                mid = 0.5 * (split_hint.lower + split_hint.upper)
                if profile(mid) >= level:
                    z0, stage = mid, "split"
        if window is None:
            window = (lo, hi)

        if z0 is None:
            grid = np.linspace(window[0], window[1], d)
            values = [search(z) for z in grid]
            best = int(np.argmax(values))
            if values[best] >= level and accept(grid[best]):
                z0, stage = float(grid[best]), "grid"

        if z0 is None and isinstance(search, ModelProfile):
            for _ in range(refine_rounds):
                pts = [(z, search.predictions(z)) for z, _ in search.probes()]
                pts = [(z, p) for z, p in pts if p is not None]
                if len(pts) < 2:
                    break
                fmap = InterpolatedFitMap.from_points([z for z, _ in pts], [p for _, p in pts])
                try:
                    zc, _ = most_typical_point(fmap, data, search.score_fn)
                except UnsupportedError:
                    break
                if zc is None or zc in search.cache:
                    break
                if search(zc) >= level and accept(zc):
                    z0, stage = float(zc), "interpolation"
                    break

        if z0 is None:
            raise fail("no candidate with typicalness above the level was found")

        for _ in range(max_expansions):
            if lo < z0 and profile(lo) < level:
                break
            lo = min(lo, z0) - (hi - min(lo, z0))
        else:
            if not (lo < z0 and profile(lo) < level):
                raise fail("could not find a lower bound outside the conformal set")
        for _ in range(max_expansions):
            if hi > z0 and profile(hi) < level:
                break
            hi = max(hi, z0) + (max(hi, z0) - lo)
        else:
            if not (hi > z0 and profile(hi) < level):
                raise fail("could not find an upper bound outside the conformal set")
    except FitBudgetExceeded as exc:
        raise fail(f"initialization ran out of fits: {exc}") from None
    return Initialization(lo, z0, hi, stage)


def bisect_edge(
    profile: TypicalnessProfile,
    inner: float,
    outer: float,
    cfg: Optional[ConformalConfig] = None,
    *,
    epsilon: Optional[float] = None,
    level: Optional[float] = None,
    value_tol: float = 0.0,
) -> float:
    """Midpoint of a bracket of width <= 2 eps holding a level crossing.

    Needs profile(inner) >= level > profile(outer). With ``value_tol > 0``
    the search also stops as soon as |profile(mid) - level| <= value_tol,
    which only makes sense for continuous profiles.
    """
    if epsilon is None:
        if cfg is None or cfg.epsilon is None:
            raise InvalidInputError("bisect_edge needs an explicit epsilon")
        epsilon = cfg.epsilon
    if level is None:
        level = cfg.alpha if cfg is not None else None
    if level is None:
        raise InvalidInputError("bisect_edge needs a level")
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    v_in, v_out = profile(inner), profile(outer)
    if not (v_in >= level > v_out):
        raise InvalidInputError(
            f"bisection needs pi(inner) >= {level} > pi(outer); got {v_in} and {v_out}"
        )
    a, b = float(inner), float(outer)
    while abs(b - a) > 2.0 * epsilon:
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        v = profile(m)
        if value_tol > 0 and abs(v - level) <= value_tol:
            return m
        if v >= level:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def bisection_bound(width: float, epsilon: float) -> int:
    """Worst-case refits for one edge: ceil(log2(width / eps))."""
    if width <= 2 * epsilon:
        return 0
    return math.ceil(math.log2(width / epsilon))


def run_root_search(
    profile: ModelProfile,
    data: Dataset,
    cfg: ConformalConfig,
    *,
    level: Optional[float] = None,
    split_hint: Optional[ConformalInterval] = None,
    coarse_profile: Optional[ModelProfile] = None,
    value_tol: float = 0.0,
    interior_checks: int = 5,
    method: str = "root_full",
) -> ConformalInterval:
    level = cfg.alpha if level is None else level
    eps = cfg.resolve_epsilon(data)
    init = initialize(profile, data, cfg, split_hint, level=level, coarse_profile=coarse_profile)
    init_fits = profile.counter.count
    lower = bisect_edge(profile, init.z0, init.z_min, epsilon=eps, level=level, value_tol=value_tol)
    upper = bisect_edge(profile, init.z0, init.z_max, epsilon=eps, level=level, value_tol=value_tol)
    iv = ConformalInterval(
        lower,
        upper,
        epsilon=eps,
        fits_used=profile.counter.count,
        method=method,
        init_fits=init_fits,
        z0=init.z0,
        bracket=(init.z_min, init.z_max),
    )
    if init.stage != "point":
        iv.warnings.append(f"initialized at stage '{init.stage}'")
    if interior_checks > 0 and upper > lower:
        # diagnostic probes are tallied apart from the algorithm's own fits
        budgeted = profile.counter
        profile.counter = FitCounter()
        try:
            inside = np.linspace(lower, upper, interior_checks + 2)[1:-1]
            low = [z for z in inside if profile(z) < level]
        finally:
            iv.diagnostic_fits = profile.counter.count
            profile.counter = budgeted
        if low:
            iv.warnings.append(
                "possibly non-interval: pi < level at interior points "
                + ", ".join(f"{z:.6g}" for z in low)
            )
    return iv


def conformal_interval(
    regressor,
    data: Dataset,
    cfg: ConformalConfig = ConformalConfig(),
    *,
    score_fn: ScoreFunction = ABSOLUTE,
    split_hint: Optional[ConformalInterval] = None,
    slack=None,
    coarse_factor: float = 100.0,
    interior_checks: int = 5,
) -> ConformalInterval:
    """Full conformal interval [l, u] with each endpoint within eps.

    Iterative regressors (those with a ``relaxed`` method) get a coarse
    sibling with tolerance multiplied by ``coarse_factor`` for the grid and
    interpolation stages of the initialization.
    """
    counter = FitCounter(limit=cfg.max_fits)
    profile = ModelProfile(regressor, data, score_fn, slack=slack, counter=counter)
    coarse = None
    if hasattr(regressor, "relaxed") and coarse_factor and coarse_factor != 1:
        coarse = profile.sibling(regressor.relaxed(coarse_factor))
    return run_root_search(
        profile,
        data,
        cfg,
        split_hint=split_hint,
        coarse_profile=coarse,
        interior_checks=interior_checks,
    )


@dataclass(frozen=True)
class IntervalCondition:
    holds: bool
    a_max: float
    b_min: float
    non_interval_rows: tuple = ()


def check_zero_intervals(a, b) -> IntervalCondition:
    """max_i a_i <= min_i b_i for per-row zero pairs a_i <= b_i."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0:
        return IntervalCondition(True, -math.inf, math.inf)
    a_max, b_min = float(a.max()), float(b.min())
    return IntervalCondition(a_max <= b_min, a_max, b_min)


def _nonneg_set(u, v, c, d):
    """{z : |u + v z| >= |c + d z|} as a list of closed intervals."""
    roots = crossing_points([u], [0.0, -c], [-v, 1.0 - d])
    g = lambda z: abs(u + v * z) - abs(c + d * z)
    pieces = []
    bounds = [-math.inf, *roots.tolist(), math.inf]
    for left, right in zip(bounds[:-1], bounds[1:]):
        if math.isinf(left) and math.isinf(right):
            mid = 0.0
        elif math.isinf(left):
            mid = right - 1.0 - abs(right)
        elif math.isinf(right):
            mid = left + 1.0 + abs(left)
        else:
            mid = 0.5 * (left + right)
        if g(mid) >= 0:
            pieces.append([left, right])
    for r in roots:
        if not any(lo <= r <= hi for lo, hi in pieces) and g(r) >= -1e-12 * (1 + abs(u) + abs(c)):
            pieces.append([r, r])
    pieces.sort()
    merged = []
    for lo, hi in pieces:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return merged


def check_interval_condition(
    coeffs: AffineFitCoefficients, data: Dataset, score_fn: ScoreFunction = ABSOLUTE
) -> IntervalCondition:
    """Sufficient condition for pi to be quasi-concave, for fits affine in z.

    Row i contributes to pi(z) exactly on {z : E_i(z) >= E_{n+1}(z)}. If every
    such set is an interval [a_i, b_i] and all of them share a point
    (max a_i <= min b_i), the count is unimodal and the conformal set is an
    interval or empty. Rows whose set is empty never count and are skipped;
    rows whose set splits into two pieces make the condition fail.
    """
    if not isinstance(coeffs, AffineFitCoefficients):
        raise UnsupportedError("the interval condition is only computable for fits affine in z")
    if score_fn.kind not in ("absolute", "squared"):
        raise UnsupportedError("the interval condition needs an absolute or squared score")
    y = data.responses
    a_all, b_all = coeffs.intercepts, coeffs.slopes
    n = y.size
    c, d = -a_all[n], 1.0 - b_all[n]
    lows, highs, bad = [], [], []
    for i in range(n):
        pieces = _nonneg_set(y[i] - a_all[i], -b_all[i], c, d)
        if not pieces:
            continue
        if len(pieces) > 1:
            bad.append(i)
            continue
        lows.append(pieces[0][0])
        highs.append(pieces[0][1])
    cond = check_zero_intervals(lows, highs)
    if bad:
        return IntervalCondition(False, cond.a_max, cond.b_min, tuple(bad))
    return cond
