"""Synthetic data, CSV ingestion, and the repeated hold-out benchmark.

Each repetition permutes the rows, holds out the last one as (x_{n+1},
y_{n+1}), standardizes features and centers responses using what a
practitioner would see, computes every requested interval, and records
coverage, length, wall time and fit count.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import (
    ABSOLUTE,
    ConformalConfig,
    ConformalError,
    ConformalInterval,
    Dataset,
    InvalidInputError,
    ScoreFunction,
    order_statistic,
    quantile_index,
)
from .interp import interp_interval
from .oracle import exact_ridge_set
from .regressors import Ridge, fit
from .root import conformal_interval
from .smooth import SmoothingConfig, smooth_conformal_interval
from .split import SplitConfig, split_interval

METHOD_NAMES = ("full", "split", "interp", "smooth", "oracle", "ridge-exact")


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 300
    p: int = 50
    n_informative: Optional[int] = None
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 3 or self.p < 1:
            raise InvalidInputError("need n >= 3 and p >= 1")
        if self.informative > self.p or self.informative < 0:
            raise InvalidInputError(
                f"n_informative={self.informative} must lie in [0, p={self.p}]"
            )
        if not self.noise_sd >= 0:
            raise InvalidInputError("noise_sd must be non-negative")

    @property
    def informative(self) -> int:
        return self.p if self.n_informative is None else int(self.n_informative)


@dataclass(frozen=True)
class Table:
    """Raw rows: features and responses, nothing held out yet."""

    features: np.ndarray
    responses: np.ndarray
    coef: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def holdout(self, perm=None):
        """(Dataset, held-out response, response shift) after standardizing.

        Features are standardized with all rows (the test features are known);
        responses are centered with the observed rows only. Intervals on the
        returned dataset are in centered units; add the shift to go back.
        """
        idx = np.arange(self.n) if perm is None else np.asarray(perm)
        X = self.features[idx]
        y = self.responses[idx]
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        Xs = (X - mu) / sd
        shift = float(y[:-1].mean())
        data = Dataset(Xs[:-1], y[:-1] - shift, Xs[-1])
        return data, float(y[-1] - shift), shift


def generate_table(spec: SyntheticSpec) -> Table:
    rng = np.random.default_rng(spec.seed)
    X = rng.standard_normal((spec.n, spec.p))
    coef = np.zeros(spec.p)
    support = rng.choice(spec.p, size=spec.informative, replace=False)
    coef[np.sort(support)] = rng.standard_normal(spec.informative)
    y = X @ coef + spec.noise_sd * rng.standard_normal(spec.n)
    return Table(X, y, coef)


def generate(spec: SyntheticSpec):
    """Dataset of the first n-1 rows and the held-out last response."""
    table = generate_table(spec)
    data = Dataset(table.features[:-1], table.responses[:-1], table.features[-1])
    return data, float(table.responses[-1])


class CsvError(InvalidInputError):
    pass


def _parse_row(row, lineno):
    out = []
    for col, cell in enumerate(row, start=1):
        try:
            v = float(cell)
        except ValueError:
            raise CsvError(f"line {lineno}, column {col}: non-numeric value {cell!r}") from None
        if not math.isfinite(v):
            raise CsvError(f"line {lineno}, column {col}: non-finite value {cell!r}")
        out.append(v)
    return out


def load_csv(path) -> Table:
    """Numeric CSV with the response in the last column; header optional."""
    rows, width = [], None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not rows:
                try:
                    [float(c) for c in row]
                except ValueError:
                    continue  # header
            values = _parse_row(row, lineno)
            if width is None:
                width = len(values)
                if width < 2:
                    raise CsvError(f"line {lineno}: need at least one feature and a response")
            elif len(values) != width:
                raise CsvError(f"line {lineno}: expected {width} columns, found {len(values)}")
            rows.append(values)
    if len(rows) < 2:
        raise CsvError(f"{path}: need at least 2 data rows, found {len(rows)}")
    A = np.asarray(rows)
    return Table(A[:, :-1], A[:, -1])


def oracle_interval(
    regressor,
    data: Dataset,
    true_response: float,
    cfg: ConformalConfig = ConformalConfig(),
    score_fn: ScoreFunction = ABSOLUTE,
) -> ConformalInterval:
    """[mu(x_{n+1}) -+ Q] from one fit that uses the true y_{n+1}.

    Q is the ceil((n+1)(1-alpha))-th smallest of the n+1 scores. Only a
    benchmark reference: y_{n+1} is never available in practice.
    """
    if score_fn.kind != "absolute":
        raise InvalidInputError("the oracle interval is defined for the absolute score")
    model = fit(regressor, data, true_response)
    preds = model.predict(data.augmented_features)
    scores = score_fn(data.augmented_responses(true_response), preds)
    m = scores.size
    q = order_statistic(scores, quantile_index(m - 1, 1.0 - cfg.alpha))
    center = float(preds[-1])
    return ConformalInterval(center - q, center + q, fits_used=1, method="oracle", z0=center)


def ridge_exact_interval(regressor, data, cfg, score_fn=ABSOLUTE) -> ConformalInterval:
    if not isinstance(regressor, Ridge):
        raise InvalidInputError("ridge-exact needs the ridge model")
    ex = exact_ridge_set(data, regressor.lam, cfg.alpha, score_fn)
    if ex.is_empty:
        return ConformalInterval.empty("ridge_exact", fits_used=1)
    lo, hi = ex.hull
    # one factorization of the augmented design, counted as one fit
    iv = ConformalInterval(lo, hi, fits_used=1, method="ridge_exact")
    if not ex.is_single_interval:
        iv.warnings.append(f"exact set is a union of {len(ex.intervals)} intervals")
    return iv


@dataclass
class MethodSpec:
    name: str
    d: int = 8
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)


def compute_interval(method: MethodSpec, regressor, data, y_true, cfg, score_fn=ABSOLUTE, seed=0):
    name = method.name
    if name == "full":
        return conformal_interval(regressor, data, cfg, score_fn=score_fn)
    if name == "split":
        return split_interval(regressor, data, cfg, SplitConfig(shuffle_seed=seed), score_fn)
    if name == "interp":
        return interp_interval(regressor, data, cfg, d=method.d, score_fn=score_fn)
    if name == "smooth":
        return smooth_conformal_interval(regressor, data, cfg, method.smoothing, score_fn)
    if name == "oracle":
        return oracle_interval(regressor, data, y_true, cfg, score_fn)
    if name == "ridge-exact":
        return ridge_exact_interval(regressor, data, cfg, score_fn)
    raise InvalidInputError(f"unknown method {name!r}")


@dataclass
class RepRecord:
    rep: int
    method: str
    covered: Optional[bool]
    length: Optional[float]
    wall_time: float
    fits: Optional[int]
    lower: Optional[float] = None
    upper: Optional[float] = None
    error: Optional[str] = None
    warnings: list = field(default_factory=list)
    init_fits: Optional[int] = None
    fit_bound: Optional[int] = None


@dataclass
class BenchReport:
    per_rep: list
    config: dict = field(default_factory=dict)

    def methods(self):
        seen = []
        for r in self.per_rep:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    @property
    def summary(self) -> dict:
        out = {}
        for m in self.methods():
            rows = [r for r in self.per_rep if r.method == m]
            ok = [r for r in rows if r.error is None]
            k = len(ok)
            mean = lambda xs: float(sum(xs) / len(xs)) if xs else math.nan
            out[m] = {
                "repetitions": len(rows),
                "failures": len(rows) - k,
                "mean_coverage": mean([float(r.covered) for r in ok]),
                "mean_length": mean([r.length for r in ok]),
                "mean_time": mean([r.wall_time for r in ok]),
                "mean_fits": mean([r.fits for r in ok]),
                "max_fits": max((r.fits for r in ok), default=0),
            }
        if "oracle" in out and out["oracle"]["mean_time"] > 0:
            base = out["oracle"]["mean_time"]
            for m in out:
                out[m]["normalized_time"] = out[m]["mean_time"] / base
        return out

    def to_dict(self, timing: bool = True) -> dict:
        summary = self.summary
        reps = [asdict(r) for r in self.per_rep]
        if not timing:
            for r in reps:
                r.pop("wall_time")
            for s in summary.values():
                s.pop("mean_time")
                s.pop("normalized_time", None)
        return {"config": self.config, "summary": summary, "per_rep": reps}

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(_jsonable(self.to_dict(timing)), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        summary = self.summary
        cols = ["method", "coverage", "length", "time (s)", "T/T_oracle", "fits", "failures"]
        lines = []
        for m, s in summary.items():
            lines.append([
                m,
                f"{s['mean_coverage']:.3f}",
                f"{s['mean_length']:.4f}",
                f"{s['mean_time']:.4f}",
                f"{s['normalized_time']:.2f}" if "normalized_time" in s else "-",
                f"{s['mean_fits']:.1f}",
                str(s["failures"]),
            ])
        widths = [max(len(c), *(len(l[i]) for l in lines)) if lines else len(c) for i, c in enumerate(cols)]
        fmt = lambda row: "  ".join(v.rjust(w) if i else v.ljust(w) for i, (v, w) in enumerate(zip(row, widths)))
        return "\n".join([fmt(cols), fmt(["-" * w for w in widths]), *map(fmt, lines)]) + "\n"

    def to_csv(self, fh, timing: bool = True) -> None:
        fields = ["rep", "method", "covered", "length", "wall_time", "fits", "init_fits", "fit_bound", "lower", "upper", "error"]
        if not timing:
            fields.remove("wall_time")
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.per_rep:
            w.writerow(asdict(r))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _one_rep(rep, table, perm, methods, regressor, cfg, score_fn, seed):
    data, y_true, shift = table.holdout(perm)
    records = []
    for method in methods:
        t0 = time.perf_counter()
        try:
            iv = compute_interval(method, regressor, data, y_true, cfg, score_fn, seed=seed + rep)
            dt = time.perf_counter() - t0
            bound = iv.fit_bound()
            records.append(RepRecord(
                rep, method.name, iv.contains(y_true), iv.length, dt, iv.fits_used,
                iv.lower + shift, iv.upper + shift, None, list(iv.warnings),
                iv.init_fits if bound is not None else None, bound,
            ))
        except ConformalError as exc:
            dt = time.perf_counter() - t0
            records.append(RepRecord(
                rep, method.name, None, None, dt, None, error=f"{type(exc).__name__}: {exc}",
            ))
    return records


def run_benchmark(
    methods,
    source,
    regressor=None,
    cfg: ConformalConfig = ConformalConfig(),
    repeats: int = 100,
    seed: int = 0,
    score_fn: ScoreFunction = ABSOLUTE,
    threads: Optional[int] = None,
) -> BenchReport:
    """Repeat the hold-out protocol ``repeats`` times.

    ``source`` is a :class:`SyntheticSpec` or a :class:`Table`. Repetitions
    may run on ``threads`` workers (default: the ``CP_THREADS`` variable, else
    1); records are merged in repetition order so the report is the same.
    """
    if repeats < 1:
        raise InvalidInputError("repeats must be >= 1")
    regressor = regressor or Ridge(1.0)
    methods = [m if isinstance(m, MethodSpec) else MethodSpec(m) for m in methods]
    for m in methods:
        if m.name not in METHOD_NAMES:
            raise InvalidInputError(f"unknown method {m.name!r}")
    table = generate_table(source) if isinstance(source, SyntheticSpec) else source
    rng = np.random.default_rng(seed)
    perms = [rng.permutation(table.n) for _ in range(repeats)]
    if threads is None:
        threads = int(os.environ.get("CP_THREADS", "1") or 1)
    job = lambda r: _one_rep(r, table, perms[r], methods, regressor, cfg, score_fn, seed)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(job, range(repeats)))
    else:
        chunks = [job(r) for r in range(repeats)]
    config = {
        "methods": [m.name for m in methods],
        "model": getattr(regressor, "kind", type(regressor).__name__),
        "regressor": {k: v for k, v in vars(regressor).items()},
        "alpha": cfg.alpha,
        "epsilon": cfg.epsilon,
        "max_fits": cfg.max_fits,
        "repeats": repeats,
        "seed": seed,
        "source": asdict(source) if isinstance(source, SyntheticSpec) else {"rows": table.n},
    }
    return BenchReport([r for chunk in chunks for r in chunk], config)
