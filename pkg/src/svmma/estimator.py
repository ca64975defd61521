"""scikit-learn style estimators.

Both estimators take the spatial coordinates as a separate ``coords``
argument to ``fit`` and ``predict``::

    est = SVMMARegressor(candidates="all-subsets", kernel="bisquare")
    est.fit(X_train, y_train, coords=s_train)
    y_hat = est.predict(X_test, coords=s_test)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import averaging
from .candidates import CandidateSet, all_subsets, nested_count_rule, nested_covariates
from .data import SpatialDataset
from .gwr import CandidateModel, default_bandwidth_grid, fit_candidate, fit_candidates, loocv_bandwidth


def _check_coords(coords, n):
    coords = check_array(coords, ensure_2d=True, dtype=float)
    if coords.shape != (n, 2):
        raise ValueError(f"coords must have shape ({n}, 2), got {coords.shape}")
    return coords


def _design(X, fit_intercept):
    return np.column_stack([np.ones(X.shape[0]), X]) if fit_intercept else X


def _grid(est, coords):
    if est.bandwidth_grid is not None:
        return np.asarray(est.bandwidth_grid, dtype=float)
    return default_bandwidth_grid(coords, est.q, est.n_bandwidths)


class LocalConstantRegressor(RegressorMixin, BaseEstimator):
    """Single local-constant GWR model with a leave-one-out CV bandwidth.

    Parameters
    ----------
    kernel : {"gaussian", "bisquare"}
    q : float, default 2.0
        Order of the L_q distance.
    bandwidth : float or None
        Fixed bandwidth; ``None`` selects one by leave-one-out CV.
    bandwidth_grid : array-like or None
        Search grid; default is 30 log-spaced values between 0.05 and 2
        times the largest pairwise distance.
    fit_intercept : bool, default True
    """

    def __init__(self, kernel="gaussian", q=2.0, bandwidth=None, bandwidth_grid=None, n_bandwidths=30,
                 fit_intercept=True, fast_cv=False):
        self.kernel = kernel
        self.q = q
        self.bandwidth = bandwidth
        self.bandwidth_grid = bandwidth_grid
        self.n_bandwidths = n_bandwidths
        self.fit_intercept = fit_intercept
        self.fast_cv = fast_cv

    def fit(self, X, y, coords):
        X, y = check_X_y(X, y, y_numeric=True)
        coords = _check_coords(coords, X.shape[0])
        self.n_features_in_ = X.shape[1]
        Z = _design(X, self.fit_intercept)
        ds = SpatialDataset(coords, Z, y, has_intercept=self.fit_intercept)
        cm = CandidateModel(tuple(range(Z.shape[1])), self.kernel, self.q, self.bandwidth)
        if self.bandwidth is None:
            h, self.cv_values_ = loocv_bandwidth(ds, cm, _grid(self, coords), self.fast_cv)
            cm = cm.with_bandwidth(h)
        self.bandwidth_ = cm.bandwidth
        self.fit_ = fit_candidate(ds, cm)
        self.hat_trace_ = self.fit_.hat_trace
        return self

    def predict(self, X, coords):
        check_is_fitted(self, "fit_")
        X = check_array(X)
        coords = _check_coords(coords, X.shape[0])
        return self.fit_.predict(coords, _design(X, self.fit_intercept))

    def coefficients_at(self, coords):
        check_is_fitted(self, "fit_")
        return self.fit_.coefficients_at(check_array(coords))


class SVMMARegressor(RegressorMixin, BaseEstimator):
    """Model average of local-constant GWR candidates.

    Parameters
    ----------
    candidates : "nested", "all-subsets" or list of column-index tuples
        Column indices refer to the columns of ``X`` (0-based). With
        ``fit_intercept`` the intercept is added to every candidate.
    n_models : int or None
        Number of nested models; model m uses the first m columns of ``X``.
        Default ``min(p, floor(3 n^(1/3)))``.
    method : str, default "svmma"
        One of ``svmma``, ``saic``, ``sbic``, ``aic``, ``bic``, ``aicc``.
    sigma2 : float or None
        Known error variance for the Mallows criterion. ``None`` plugs in
        the residual variance of the largest candidate.

    Attributes
    ----------
    candidates_ : CandidateSet with CV bandwidths attached
    fits_ : list of FittedCandidate
    weights_ : ndarray of shape (n_candidates,)
    sigma2_ : float or None
    """

    def __init__(self, candidates="nested", n_models=None, kernel="gaussian", q=2.0, bandwidth_grid=None,
                 n_bandwidths=30, method="svmma", sigma2=None, fit_intercept=True, fast_cv=False, tol=1e-10):
        self.candidates = candidates
        self.n_models = n_models
        self.kernel = kernel
        self.q = q
        self.bandwidth_grid = bandwidth_grid
        self.n_bandwidths = n_bandwidths
        self.method = method
        self.sigma2 = sigma2
        self.fit_intercept = fit_intercept
        self.fast_cv = fast_cv
        self.tol = tol

    def _candidate_set(self, n, p):
        off = 1 if self.fit_intercept else 0
        if isinstance(self.candidates, str):
            if self.candidates == "nested":
                M = self.n_models or min(p, nested_count_rule(n))
                return nested_covariates(p, M, self.kernel, self.q, intercept=self.fit_intercept)
            if self.candidates == "all-subsets":
                return all_subsets(p, self.kernel, self.q, offset=off, always=(0,) if off else ())
            raise ValueError(f"unknown candidates spec {self.candidates!r}")
        models = []
        for idx in self.candidates:
            idx = tuple(int(i) + off for i in idx)
            models.append(CandidateModel(((0,) if off else ()) + idx, self.kernel, self.q))
        return CandidateSet(tuple(models))

    def fit(self, X, y, coords):
        X, y = check_X_y(X, y, y_numeric=True)
        coords = _check_coords(coords, X.shape[0])
        n, p = X.shape
        self.n_features_in_ = p
        Z = _design(X, self.fit_intercept)
        ds = SpatialDataset(coords, Z, y, has_intercept=self.fit_intercept)
        cs = self._candidate_set(n, p)
        self.fits_ = fit_candidates(ds, cs.models, _grid(self, coords), self.fast_cv)
        self.candidates_ = cs.with_models([f.model for f in self.fits_])
        self.sigma2_ = None
        self.criterion_ = None
        if self.method in ("svmma", "svmma_known_sigma"):
            mp = averaging.feasible_problem(self.fits_, sigma2=self.sigma2)
            self.sigma2_ = mp.sigma2
            self.weights_ = averaging.solve_weights(mp, self.tol)
            self.criterion_ = averaging.criterion_value(mp, self.weights_)
        else:
            self.weights_ = averaging.method_weights(self.fits_, self.method)
        self.fitted_ = np.column_stack([f.fitted for f in self.fits_]) @ self.weights_
        return self

    def candidate_predictions(self, X, coords, skip_zero=True):
        """(k, M) predictions of every candidate; zero-weight columns are left at 0."""
        check_is_fitted(self, "weights_")
        X = check_array(X)
        coords = _check_coords(coords, X.shape[0])
        Z = _design(X, self.fit_intercept)
        out = np.zeros((X.shape[0], len(self.fits_)))
        for k, f in enumerate(self.fits_):
            if skip_zero and self.weights_[k] == 0:
                continue
            out[:, k] = f.predict(coords, Z)
        return out

    def predict(self, X, coords):
        P = self.candidate_predictions(X, coords)
        return averaging.combine_predictions(self.weights_, P)

    def coefficients_at(self, coords):
        """Averaged coefficient field at ``coords``; intercept first when fitted."""
        check_is_fitted(self, "weights_")
        p = self.n_features_in_ + (1 if self.fit_intercept else 0)
        return averaging.averaged_coefficients(self.fits_, self.weights_, check_array(coords), p)

    def weight_table(self, threshold=1e-6, column_names=None):
        check_is_fitted(self, "weights_")
        return averaging.weight_rows(self.fits_, self.weights_, column_names, threshold)
