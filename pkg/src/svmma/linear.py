"""Global-coefficient (OLS) candidates: MMA, JMA and AIC/BIC selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .averaging import one_hot, select_index, simplex_qp, smoothed_weights
from .data import SpatialDataset
from .exceptions import DegenerateDof

LINEAR_METHODS = ("mma", "jma", "linear_aic", "linear_bic", "linear_saic", "linear_sbic")


@dataclass(frozen=True, eq=False)
class LinearFit:
    column_indices: tuple
    fitted: np.ndarray
    hat_diagonal: np.ndarray
    residuals: np.ndarray
    coefficients: np.ndarray

    @property
    def dof(self) -> int:
        return len(self.column_indices)

    def predict(self, covariates) -> np.ndarray:
        X = np.atleast_2d(np.asarray(covariates, dtype=float))
        return X[:, list(self.column_indices)] @ self.coefficients


def ols_fit(ds: SpatialDataset, cm) -> LinearFit:
    """Least squares of y on the candidate's columns via a thin QR.

    ``cm`` may be a CandidateModel or a plain sequence of column indices.
    """
    idx = tuple(getattr(cm, "column_indices", cm))
    X = ds.covariates[:, list(idx)]
    y = ds.response
    Q, R = np.linalg.qr(X)
    d = np.abs(np.diag(R))
    if X.shape[0] < X.shape[1] or d.min() <= 1e-12 * max(d.max(), 1e-300):
        raise np.linalg.LinAlgError(f"design for columns {idx} is rank deficient")
    coef = solve_triangular(R, Q.T @ y)
    fitted = X @ coef
    return LinearFit(idx, fitted, np.sum(Q * Q, axis=1), y - fitted, coef)


def _largest(fits):
    return max(range(len(fits)), key=lambda k: (fits[k].dof, -k))


def mma_weights(fits: Sequence[LinearFit], y, tol: float = 1e-10) -> np.ndarray:
    """Mallows weights with sigma2 from the largest model on ``n - p`` dof."""
    y = np.asarray(y, dtype=float)
    n = y.size
    big = fits[_largest(fits)]
    if n - big.dof <= 0:
        raise DegenerateDof(f"largest linear model has {big.dof} >= n = {n} parameters")
    s2 = float(big.residuals @ big.residuals) / (n - big.dof)
    F = np.column_stack([f.fitted for f in fits])
    k = np.array([f.dof for f in fits], dtype=float)
    return simplex_qp(F.T @ F, F.T @ y - s2 * k, tol=tol)


def loo_residuals(fit: LinearFit) -> np.ndarray:
    """Leave-one-out residuals ``e_i / (1 - h_ii)``."""
    denom = 1.0 - fit.hat_diagonal
    if np.any(denom <= 1e-12):
        raise DegenerateDof(f"leverage equal to 1 in model {fit.column_indices}")
    return fit.residuals / denom


def jma_weights(fits: Sequence[LinearFit], y=None, tol: float = 1e-10) -> np.ndarray:
    """Jackknife weights: minimise ||E w||^2 over the simplex, E the LOO residuals."""
    E = np.column_stack([loo_residuals(f) for f in fits])
    return simplex_qp(E.T @ E, np.zeros(len(fits)), tol=tol)


def linear_scores(fits: Sequence[LinearFit], y):
    """(AIC, BIC) arrays: log(RSS/n) + 2p/n and log(RSS/n) + p log(n)/n."""
    n = np.asarray(y).size
    aic, bic = [], []
    for f in fits:
        s2 = float(f.residuals @ f.residuals) / n
        ls = math.log(s2) if s2 > 0 else -math.inf
        aic.append(ls + 2.0 * f.dof / n)
        bic.append(ls + f.dof * math.log(n) / n)
    return np.array(aic), np.array(bic)


def linear_ic_select(fits: Sequence[LinearFit], y):
    """Indices chosen by AIC and BIC (ties to the smaller model index)."""
    aic, bic = linear_scores(fits, y)
    return select_index(aic), select_index(bic)


def linear_method_weights(fits: Sequence[LinearFit], y, method: str, tol: float = 1e-10):
    M = len(fits)
    if method == "mma":
        return mma_weights(fits, y, tol)
    if method == "jma":
        return jma_weights(fits, y, tol)
    aic, bic = linear_scores(fits, y)
    if method == "linear_aic":
        return one_hot(select_index(aic), M)
    if method == "linear_bic":
        return one_hot(select_index(bic), M)
    if method == "linear_saic":
        return smoothed_weights(aic, "saic")
    if method == "linear_sbic":
        return smoothed_weights(bic, "sbic")
    raise ValueError(f"unknown linear method {method!r}; expected one of {LINEAR_METHODS}")
