"""Permutation-symmetric regressors refit on the augmented data set.

All penalized fits are intercept-free; centering is the caller's job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import linalg

from .core import Dataset, InvalidInputError, NumericalError, UnsupportedError


@dataclass(frozen=True)
class FitMeta:
    iterations: int = 0
    final_tol: float = 0.0
    converged: bool = True


@dataclass(frozen=True)
class FittedModel:
    """An immutable prediction rule.

    Linear models keep ``coef``; the k-NN model keeps its training rows.
    """

    kind: str
    coef: Optional[np.ndarray] = None
    train_X: Optional[np.ndarray] = None
    train_y: Optional[np.ndarray] = None
    k: int = 0
    meta: FitMeta = field(default_factory=FitMeta)

    @property
    def fit_meta(self) -> FitMeta:
        return self.meta

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if self.coef is not None:
            out = X @ self.coef
        else:
            out = _knn_predict(self.train_X, self.train_y, self.k, X)
        return float(out[0]) if single else out


def _knn_predict(train_X, train_y, k, X):
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * X @ train_X.T
        + np.sum(train_X * train_X, axis=1)[None, :]
    )
    # stable sort: distance ties go to the lowest row index
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return train_y[idx].mean(axis=1)


@dataclass(frozen=True)
class Ridge:
    """argmin 0.5 ||y - X b||^2 + 0.5 lam ||b||^2, solved by Cholesky."""

    lam: float = 1.0
    kind = "ridge"

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidInputError("ridge lambda must be non-negative")

    def fit_xy(self, X, y, warm: Optional[FittedModel] = None) -> FittedModel:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        A = X.T @ X
        A[np.diag_indices_from(A)] += self.lam
        try:
            c = linalg.cho_factor(A, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"ridge system is singular: {exc}") from None
        coef = linalg.cho_solve(c, X.T @ y, check_finite=False)
        if not np.all(np.isfinite(coef)):
            raise NumericalError("ridge solve produced non-finite coefficients")
        return FittedModel("ridge", coef=coef)


@dataclass(frozen=True)
class Lasso:
    """argmin 0.5 ||y - X b||^2 + lam ||b||_1 by cyclic coordinate descent.

    Stops once the duality gap is <= ``tol``. ``tol=None`` means
    ``tol_scale * ||y_obs||^2`` where ``y_obs`` excludes the candidate row.
    """

    lam: float = 1.0
    tol: Optional[float] = None
    max_iter: int = 10_000
    tol_scale: float = 1e-8
    kind = "lasso"

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidInputError("lasso lambda must be positive")
        if self.tol is not None and not self.tol > 0:
            raise InvalidInputError("lasso tol must be positive")
        if int(self.max_iter) < 1:
            raise InvalidInputError("max_iter must be positive")

    def relaxed(self, factor: float) -> "Lasso":
        if self.tol is None:
            return replace(self, tol_scale=self.tol_scale * factor)
        return replace(self, tol=self.tol * factor)

    def resolve_tol(self, y_obs) -> float:
        if self.tol is not None:
            return float(self.tol)
        return self.tol_scale * max(float(np.dot(y_obs, y_obs)), 1e-300)

    def fit_xy(self, X, y, warm: Optional[FittedModel] = None, tol: Optional[float] = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        if tol is None:
            tol = self.resolve_tol(y)
        if warm is not None and warm.coef is not None:
            if warm.coef.shape != (p,):
                raise InvalidInputError("warm start has the wrong shape")
            beta = warm.coef.copy()
        else:
            beta = np.zeros(p)
        col_sq = np.einsum("ij,ij->j", X, X)
        resid = y - X @ beta
        gap = lasso_duality_gap(X, y, beta, self.lam, resid)
        sweeps = 0
        while gap > tol and sweeps < self.max_iter:
            for j in range(p):
                if col_sq[j] == 0.0:
                    continue
                xj = X[:, j]
                old = beta[j]
                rho = xj @ resid + col_sq[j] * old
                new = math.copysign(max(abs(rho) - self.lam, 0.0), rho) / col_sq[j]
                if new != old:
                    resid -= (new - old) * xj
                    beta[j] = new
            sweeps += 1
            gap = lasso_duality_gap(X, y, beta, self.lam, resid)
        return FittedModel(
            "lasso", coef=beta, meta=FitMeta(sweeps, float(gap), bool(gap <= tol))
        )


def lasso_duality_gap(X, y, beta, lam, resid=None) -> float:
    """Primal minus dual objective at the rescaled residual dual point."""
    if resid is None:
        resid = y - X @ beta
    corr = np.max(np.abs(X.T @ resid)) if X.shape[1] else 0.0
    scale = min(1.0, lam / corr) if corr > 0 else 1.0
    theta = scale * resid
    primal = 0.5 * resid @ resid + lam * np.sum(np.abs(beta))
    dual = 0.5 * (y @ y) - 0.5 * ((y - theta) @ (y - theta))
    return max(float(primal - dual), 0.0)


@dataclass(frozen=True)
class KNN:
    """Mean response of the k nearest training rows (Euclidean)."""

    k: int = 5
    kind = "knn"

    def __post_init__(self):
        if int(self.k) < 1:
            raise InvalidInputError("k must be a positive integer")

    def fit_xy(self, X, y, warm: Optional[FittedModel] = None) -> FittedModel:
        X = np.array(X, dtype=float)
        y = np.array(y, dtype=float)
        k = min(int(self.k), X.shape[0])
        return FittedModel("knn", train_X=X, train_y=y, k=k)


def _fit_augmented(regressor, data: Dataset, candidate: float, warm=None) -> FittedModel:
    if not math.isfinite(candidate):
        raise InvalidInputError("candidate must be finite")
    X, y = data.augmented_features, data.augmented_responses(candidate)
    if isinstance(regressor, Lasso):
        # tolerance is tied to the observed responses so it does not move with z
        return regressor.fit_xy(X, y, warm=warm, tol=regressor.resolve_tol(data.responses))
    return regressor.fit_xy(X, y, warm=warm)


def fit(regressor, data: Dataset, candidate: float) -> FittedModel:
    """Fit on D_{n+1}(candidate)."""
    return _fit_augmented(regressor, data, candidate)


def fit_with_warm_start(regressor, data: Dataset, candidate: float, previous: FittedModel):
    if previous.coef is not None and previous.coef.shape != (data.p,):
        raise InvalidInputError("previous model was fit on a different feature count")
    if previous.train_X is not None and previous.train_X.shape != (data.n + 1, data.p):
        raise InvalidInputError("previous model was fit on a different data shape")
    return _fit_augmented(regressor, data, candidate, warm=previous)


def fit_observed(regressor, data: Dataset) -> FittedModel:
    """Fit on D_n only, without the test row."""
    return regressor.fit_xy(data.features, data.responses)


@dataclass(frozen=True)
class AffineFitCoefficients:
    """Ridge predictions at the n+1 rows as intercepts + slopes * z."""

    intercepts: np.ndarray
    slopes: np.ndarray

    def predictions(self, z: float) -> np.ndarray:
        return self.intercepts + self.slopes * z


def affine_coefficients(data: Dataset, lam: float) -> AffineFitCoefficients:
    """Hat-matrix split of the ridge fit into a z-free part and a z-slope.

    With H = X (X'X + lam I)^-1 X' on the augmented design, the predictions
    are H[:, :n] y + H[:, n] z.
    """
    if isinstance(lam, Ridge):
        lam = lam.lam
    X = data.augmented_features
    A = X.T @ X
    A[np.diag_indices_from(A)] += lam
    try:
        c = linalg.cho_factor(A, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"ridge system is singular: {exc}") from None
    # G = (X'X + lam I)^-1 X'  (p x (n+1))
    G = linalg.cho_solve(c, X.T, check_finite=False)
    base = X @ (G[:, :-1] @ data.responses)
    slopes = X @ G[:, -1]
    return AffineFitCoefficients(base, slopes)


def is_affine_in_candidate(regressor) -> bool:
    return isinstance(regressor, Ridge)


def make_regressor(kind: str, **params):
    kind = kind.lower()
    if kind == "ridge":
        return Ridge(lam=params.get("lam", 1.0))
    if kind == "lasso":
        return Lasso(
            lam=params.get("lam", 1.0),
            tol=params.get("tol"),
            max_iter=params.get("max_iter", 10_000),
            tol_scale=params.get("tol_scale", 1e-8),
        )
    if kind == "knn":
        return KNN(k=params.get("k", 5))
    raise UnsupportedError(f"unknown regressor {kind!r}")
