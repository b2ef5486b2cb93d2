import json
import math

import numpy as np
import pytest

from rootcp.bench import (
    CsvError,
    MethodSpec,
    SyntheticSpec,
    generate,
    generate_table,
    load_csv,
    oracle_interval,
    run_benchmark,
)
from rootcp.core import ConformalConfig, InvalidInputError
from rootcp.regressors import Lasso, Ridge, fit

SMALL = SyntheticSpec(n=60, p=5, seed=1)


def test_generate_shapes_and_support():
    spec = SyntheticSpec(n=300, p=50, n_informative=12, seed=3)
    table = generate_table(spec)
    assert table.features.shape == (300, 50)
    assert np.count_nonzero(table.coef) == 12
    data, y = generate(spec)
    assert (data.n, data.p) == (299, 50) and math.isfinite(y)


def test_generate_is_deterministic():
    a, b = generate_table(SMALL), generate_table(SMALL)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.responses, b.responses)
    assert not np.array_equal(a.responses, generate_table(SyntheticSpec(n=60, p=5, seed=2)).responses)


def test_noiseless_data_is_recovered():
    spec = SyntheticSpec(n=40, p=5, noise_sd=0.0, seed=0)
    table = generate_table(spec)
    assert np.allclose(table.features @ table.coef, table.responses)
    data, y_true = generate(spec)
    pred = fit(Ridge(1e-10), data, y_true).predict(data.features)
    assert np.max(np.abs(pred - data.responses)) <= 1e-6


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        SyntheticSpec(n=10, p=3, n_informative=4)
    with pytest.raises(InvalidInputError):
        SyntheticSpec(noise_sd=-1.0)


def test_holdout_standardizes():
    data, y_true, shift = generate_table(SMALL).holdout()
    X = data.augmented_features
    assert np.allclose(X.mean(axis=0), 0) and np.allclose(X.std(axis=0), 1)
    assert abs(data.responses.mean()) < 1e-12
    raw = generate_table(SMALL).responses
    assert y_true + shift == pytest.approx(raw[-1])


def test_load_csv_examples(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2,3\n4,5,6\n7,8,9\n")
    t = load_csv(f)
    assert t.features.shape == (3, 2) and list(t.responses) == [3, 6, 9]
    g = tmp_path / "b.csv"
    g.write_text("x1,x2,y\n1,2,3\n4,5,6\n")
    assert load_csv(g).features.shape == (2, 2)


@pytest.mark.parametrize(
    "text,needle",
    [
        ("1,2\n3,4\n5,6\n7,8\nNaN,1\n", "line 5"),
        ("1,2\n3,4,5\n", "line 2"),
        ("1,2\n3,abc\n", "line 2"),
        ("1,2\n", "at least 2"),
        ("1,2\n3,inf\n", "line 2"),
    ],
)
def test_load_csv_errors(tmp_path, text, needle):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(CsvError, match=needle):
        load_csv(f)


def test_oracle_interval_noiseless_and_single_fit():
    data, y_true = generate(SyntheticSpec(n=40, p=5, noise_sd=0.0, seed=0))
    iv = oracle_interval(Ridge(1e-12), data, y_true)
    assert iv.fits_used == 1 and iv.length <= 1e-6


def test_oracle_interval_uses_order_statistic():
    data, y_true, _ = generate_table(SMALL).holdout()
    iv = oracle_interval(Ridge(1.0), data, y_true, ConformalConfig(alpha=0.1))
    model = fit(Ridge(1.0), data, y_true)
    scores = np.abs(data.augmented_responses(y_true) - model.predict(data.augmented_features))
    q = np.sort(scores)[math.ceil(0.9 * scores.size) - 1]
    assert iv.length == pytest.approx(2 * q)


def test_report_means_are_consistent():
    rep = run_benchmark(["full", "split", "oracle", "ridge-exact"], SMALL, Ridge(1.0), repeats=5, seed=2)
    for m, s in rep.summary.items():
        rows = [r for r in rep.per_rep if r.method == m]
        assert s["mean_length"] == pytest.approx(np.mean([r.length for r in rows]))
        assert s["mean_coverage"] == pytest.approx(np.mean([r.covered for r in rows]))
        assert s["mean_fits"] == pytest.approx(np.mean([r.fits for r in rows]))
        assert s["mean_time"] == pytest.approx(np.mean([r.wall_time for r in rows]))
    assert rep.summary["oracle"]["normalized_time"] == 1.0


def test_single_repetition_summary():
    rep = run_benchmark(["split"], SMALL, Ridge(1.0), repeats=1)
    (row,) = rep.per_rep
    s = rep.summary["split"]
    assert s["mean_length"] == row.length and s["mean_fits"] == row.fits == 1


def test_fit_accounting():
    rep = run_benchmark(
        ["split", "oracle", MethodSpec("interp", d=6), "full"], SMALL, Lasso(0.5), repeats=3
    )
    for r in rep.per_rep:
        if r.method in ("split", "oracle"):
            assert r.fits == 1
        if r.method == "interp":
            # localization fit plus one or more builds of d + 2 fits
            assert (r.fits - 1) % 8 == 0
        if r.method == "full":
            assert r.fits <= 35


def test_threads_do_not_change_the_report():
    a = run_benchmark(["full", "split"], SMALL, Ridge(1.0), repeats=6, seed=4, threads=1)
    b = run_benchmark(["full", "split"], SMALL, Ridge(1.0), repeats=6, seed=4, threads=3)
    assert a.to_json(timing=False) == b.to_json(timing=False)


def test_env_var_threads(monkeypatch):
    monkeypatch.setenv("CP_THREADS", "2")
    rep = run_benchmark(["split"], SMALL, Ridge(1.0), repeats=4)
    assert [r.rep for r in rep.per_rep] == [0, 1, 2, 3]


def test_failures_are_recorded_not_raised():
    rep = run_benchmark(["full"], SMALL, Ridge(1.0), ConformalConfig(max_fits=3), repeats=2)
    assert all(r.error and r.error.startswith("InitializationError") for r in rep.per_rep)
    assert rep.summary["full"]["failures"] == 2


def test_outputs(tmp_path):
    rep = run_benchmark(["split", "oracle"], SMALL, Ridge(1.0), repeats=2)
    d = json.loads(rep.to_json(timing=False))
    assert "mean_time" not in d["summary"]["split"]
    assert d["config"]["source"]["noise_sd"] == 1.0
    assert "T/T_oracle" in rep.to_table()
    with open(tmp_path / "x.csv", "w") as fh:
        rep.to_csv(fh, timing=True)
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert lines[0].startswith("rep,method,covered") and len(lines) == 5


def test_unknown_method_rejected():
    with pytest.raises(InvalidInputError):
        run_benchmark(["bogus"], SMALL)
    with pytest.raises(InvalidInputError):
        run_benchmark(["split"], SMALL, repeats=0)


def test_coverage_band():
    reps = 400
    rep = run_benchmark(
        ["full", "split", "oracle"], SyntheticSpec(n=80, p=10, seed=5), Ridge(1.0), repeats=reps, threads=4
    )
    band = 3 * math.sqrt(0.09 / reps)
    for m, s in rep.summary.items():
        assert abs(s["mean_coverage"] - 0.9) <= band, m
