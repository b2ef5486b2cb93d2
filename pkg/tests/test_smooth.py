import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ridge_instance
from rootcp.core import ConformalConfig, InvalidInputError, rank_of_last, typicalness
from rootcp.oracle import exact_ridge_set
from rootcp.regressors import Ridge
from rootcp.root import conformal_interval
from rootcp.smooth import (
    SmoothingConfig,
    calibrated_level,
    delta,
    phi,
    smooth_conformal_interval,
    smooth_rank,
    smooth_rank_grad,
    smooth_typicalness,
)

CFG = ConformalConfig(alpha=0.1)
scores_st = st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=30)


def sig(x):
    return 1.0 / (1.0 + math.exp(x))


def test_phi_examples():
    assert phi("sigmoid", 3.0, 0.0) == 0.5
    assert phi("lower_ramp", 5.0, 1e-9) == 0.0 and phi("lower_ramp", 5.0, 2.0) == 0.0
    assert phi("upper_ramp", 5.0, 0.0) == 1.0 and phi("upper_ramp", 5.0, -3.0) == 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert phi("sigmoid", 1.0, -700.0) == 1.0
        assert phi("sigmoid", 1.0, 700.0) == pytest.approx(math.exp(-700.0), rel=1e-12)
        assert phi("sigmoid", 1e6, -1e6) == 1.0


def test_phi_rejects_bad_arguments():
    with pytest.raises(InvalidInputError):
        phi("tanh", 1.0, 0.0)
    with pytest.raises(InvalidInputError):
        phi("sigmoid", 0.0, 0.0)


@given(st.sampled_from(["sigmoid", "lower_ramp", "upper_ramp"]), st.floats(0.01, 1e3), st.floats(-50, 50), st.floats(-50, 50))
def test_phi_non_increasing(envelope, gamma, x1, x2):
    lo, hi = sorted((x1, x2))
    assert phi(envelope, gamma, lo) >= phi(envelope, gamma, hi)


@given(st.floats(0.01, 1e3), st.floats(-50, 50))
def test_envelope_sandwich_pointwise(gamma, x):
    ind = 1.0 if x <= 0 else 0.0
    assert phi("lower_ramp", gamma, x) <= ind <= phi("upper_ramp", gamma, x)


def test_smooth_rank_examples():
    cfg = SmoothingConfig(gamma=1.0, scale="none")
    assert smooth_rank([4.0] * 7, cfg) == 3.5
    assert smooth_typicalness([4.0] * 7, cfg) == 0.5
    expected = sig(-2.0) + sig(-1.0) + 0.5
    assert smooth_rank([1, 2, 3], cfg) == pytest.approx(expected, abs=1e-12)
    assert round(expected, 4) == 2.1119
    assert smooth_typicalness([1, 2, 3], cfg) == pytest.approx(1 - expected / 3, abs=1e-12)
    assert round(1 - expected / 3, 4) == 0.2960


@given(scores_st)
def test_upper_ramp_limit_is_hard_rank(s):
    cfg = SmoothingConfig(gamma=1e12, envelope="upper_ramp", scale="none")
    gaps = np.abs(np.subtract.outer(s, s))
    if np.any((gaps > 0) & (gaps < 1e-9)):
        return
    assert smooth_rank(s, cfg) == pytest.approx(rank_of_last(s))


@given(scores_st, st.floats(0.1, 100))
def test_typicalness_sandwich(s, gamma):
    lo = smooth_typicalness(s, SmoothingConfig(gamma=gamma, envelope="upper_ramp"))
    hi = smooth_typicalness(s, SmoothingConfig(gamma=gamma, envelope="lower_ramp"))
    assert lo - 1e-12 <= typicalness(s) <= hi + 1e-12
    assert 0.0 <= lo and hi <= 1.0


@given(scores_st, st.floats(0, 10), st.sampled_from(["sigmoid", "lower_ramp", "upper_ramp"]))
def test_smooth_rank_monotone_in_candidate(s, bump, envelope):
    cfg = SmoothingConfig(gamma=2.0, envelope=envelope)
    t = list(s)
    t[-1] += bump
    assert smooth_rank(t, cfg) >= smooth_rank(s, cfg) - 1e-12


def test_delta_and_calibration():
    for g in (0.1, 1.0, 1e4):
        assert delta("sigmoid", g) == 0.5
        assert delta("lower_ramp", g) == 0.0
        assert delta("upper_ramp", g) == 1.0
    lower = SmoothingConfig(envelope="lower_ramp", calibrate=True)
    assert calibrated_level(0.1, lower) == 0.1
    assert calibrated_level(0.1, lower) - delta("lower_ramp", 1.0) >= 0.1
    assert SmoothingConfig(calibrate=True).level(0.1) == 0.6
    with pytest.raises(InvalidInputError):
        SmoothingConfig(target_alpha=0.3, calibrate=True).level(0.1)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    cfg = SmoothingConfig(gamma=2.0)
    for _ in range(20):
        s = rng.uniform(0, 3, size=15)
        h = 1e-6
        up, dn = s.copy(), s.copy()
        up[-1] += h
        dn[-1] -= h
        fd = (smooth_rank(up, cfg) - smooth_rank(dn, cfg)) / (2 * h)
        assert smooth_rank_grad(s, cfg) == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("envelope,slackness", [("sigmoid", 0.5), ("lower_ramp", 0.0)])
@pytest.mark.parametrize("target", [0.1, 0.3, 0.6])
def test_smoothed_rank_validity_monte_carlo(envelope, slackness, target):
    rng = np.random.default_rng(4)
    trials, n = 10_000, 99
    cfg = SmoothingConfig(gamma=20.0, envelope=envelope)
    S = rng.random((trials, n + 1))
    F = np.array([smooth_rank(row, cfg) for row in S]) / (n + 1)
    p_hat = float(np.mean(F <= target))
    sigma = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / trials)
    assert p_hat >= target - slackness - 3 * sigma


@pytest.mark.parametrize("seed", range(8))
def test_gap_nesting_against_oracle(seed):
    data, _ = ridge_instance(seed, n=80, p=10)
    ex = exact_ridge_set(data, 1.0, 0.1)
    lo, hi = ex.hull
    eps = CFG.resolve_epsilon(data)
    inner = smooth_conformal_interval(Ridge(1.0), data, CFG, SmoothingConfig(gamma=100, envelope="upper_ramp"))
    outer = smooth_conformal_interval(Ridge(1.0), data, CFG, SmoothingConfig(gamma=100, envelope="lower_ramp"))
    assert lo - eps <= inner.lower and inner.upper <= hi + eps
    assert outer.lower <= lo + eps and hi - eps <= outer.upper


@pytest.mark.parametrize("seed", range(5))
def test_large_gamma_tracks_hard_interval(seed):
    data, _ = ridge_instance(seed, n=80, p=10)
    hard = conformal_interval(Ridge(1.0), data, CFG)
    soft = smooth_conformal_interval(Ridge(1.0), data, CFG, SmoothingConfig(gamma=1e4))
    assert abs(soft.lower - hard.lower) <= 2 * hard.epsilon
    assert abs(soft.upper - hard.upper) <= 2 * hard.epsilon
    assert soft.method == "smooth"


def test_small_gamma_changes_the_set():
    data, _ = ridge_instance(0, n=80, p=10)
    hard = conformal_interval(Ridge(1.0), data, CFG)
    soft = smooth_conformal_interval(Ridge(1.0), data, CFG, SmoothingConfig(gamma=1.0))
    assert abs(soft.length - hard.length) > 10 * hard.epsilon


def test_value_tolerance_saves_fits():
    data, _ = ridge_instance(1, n=80, p=10)
    tight = ConformalConfig(alpha=0.1, epsilon=1e-9)
    soft = smooth_conformal_interval(Ridge(1.0), data, tight, SmoothingConfig(gamma=10.0, value_tol=1e-3))
    exact = smooth_conformal_interval(Ridge(1.0), data, tight, SmoothingConfig(gamma=10.0, value_tol=0.0))
    assert soft.fits_used < exact.fits_used
