"""Local-constant geographically weighted regression for one candidate model.

At a regression point ``s`` the coefficients solve the kernel-weighted
normal equations ``(X' W_s X) beta = X' W_s y``. Everything here is batched
over regression points: the local moment matrices for all points are formed
with one matrix product ``W @ vec(x_j x_j')`` and solved together.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .data import SpatialDataset
from .exceptions import DegenerateDof, NoValidBandwidth, SingularLocalFit

PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class CandidateModel:
    """A covariate subset fitted as a spatially varying coefficient model.

    ``column_indices`` are 0-based positions into the dataset covariates.
    """

    column_indices: tuple
    kernel: str = "gaussian"
    q: float = 2.0
    bandwidth: Optional[float] = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.column_indices)
        if not idx:
            raise ValueError("a candidate model needs at least one covariate")
        if len(set(idx)) != len(idx) or min(idx) < 0:
            raise ValueError(f"column indices must be distinct and nonnegative: {idx}")
        if self.kernel not in kernels.KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not self.q >= 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        object.__setattr__(self, "column_indices", idx)

    @property
    def p_m(self) -> int:
        return len(self.column_indices)

    def with_bandwidth(self, h) -> "CandidateModel":
        return replace(self, bandwidth=float(h))

    def check(self, p: int):
        if max(self.column_indices) >= p:
            raise ValueError(f"column index out of range for p={p}: {self.column_indices}")


def _require_bandwidth(cm):
    if cm.bandwidth is None:
        raise ValueError("candidate model has no bandwidth; run loocv_bandwidth first")
    return cm.bandwidth


def spd_solve(A, B):
    """Solve a stack of small SPD systems, flagging the singular ones.

    Parameters
    ----------
    A : array, shape (k, p, p)
    B : array, shape (k, p) or (k, p, r)

    Returns
    -------
    X : array like ``B``; NaN rows where the system is singular.
    ok : bool array, shape (k,)

    A system counts as singular when its Cholesky factorisation fails or its
    smallest pivot is below ``PIVOT_RTOL`` times its largest.
    """
    A = np.asarray(A, dtype=float)
    k, p = A.shape[:2]
    vec = B.ndim == 2
    Bm = B[..., None] if vec else B
    L = np.zeros_like(A)
    ok = np.ones(k, dtype=bool)
    try:
        L[:] = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        for j in range(k):
            try:
                L[j] = np.linalg.cholesky(A[j])
            except np.linalg.LinAlgError:
                ok[j] = False
    piv = np.diagonal(L, axis1=1, axis2=2) ** 2
    pmax = piv.max(axis=1)
    ok &= (pmax > 0) & (piv.min(axis=1) >= PIVOT_RTOL * pmax) & np.isfinite(pmax)
    X = np.full(Bm.shape, np.nan)
    if ok.any():
        X[ok] = np.linalg.solve(A[ok], Bm[ok])
    return (X[..., 0] if vec else X), ok


def local_moments(W, X, y=None):
    """Stacked ``X' W_s X`` (k, p, p) and ``X' W_s y`` (k, p) for weight rows of ``W``."""
    n, p = X.shape
    Z = (X[:, :, None] * X[:, None, :]).reshape(n, p * p)
    A = (W @ Z).reshape(W.shape[0], p, p)
    b = None if y is None else W @ (X * y[:, None])
    return A, b


def _sub(A, b, pos):
    pos = np.asarray(pos)
    As = A[:, pos[:, None], pos[None, :]]
    return As, (None if b is None else b[:, pos])


def _singular(msg, locations, W, ok, h):
    j = int(np.flatnonzero(~ok)[0])
    support = int(np.count_nonzero(W[j] > 0))
    return SingularLocalFit(
        f"{msg} at location {locations[j].tolist()} (row {j}), bandwidth {h:g}, "
        f"{support} points with nonzero weight",
        location=locations[j],
        bandwidth=h,
        support=support,
        index=j,
    )


@dataclass(frozen=True, eq=False)
class FittedCandidate:
    """In-sample fit of one candidate model.

    ``coefficients`` holds the local estimates at the data locations
    (n, p_m); ``hat_matrix`` is only present when requested.
    """

    model: CandidateModel
    dataset: SpatialDataset
    fitted: np.ndarray
    hat_diagonal: np.ndarray
    coefficients: np.ndarray
    hat_matrix: Optional[np.ndarray] = None
    kernel_scale: float = 1.0

    @property
    def hat_trace(self) -> float:
        return float(np.sum(self.hat_diagonal))

    @property
    def residuals(self) -> np.ndarray:
        return self.dataset.response - self.fitted

    def coefficients_at(self, locations) -> np.ndarray:
        return local_coefficients(self.dataset, self.model, locations, self.kernel_scale)

    def predict(self, locations, covariates) -> np.ndarray:
        return predict_at(self, locations, covariates)


def local_coefficients(ds, cm, locations, kernel_scale=1.0):
    """Local coefficient vectors at arbitrary points, shape (k, p_m)."""
    h = _require_bandwidth(cm)
    cm.check(ds.p)
    locations = np.atleast_2d(np.asarray(locations, dtype=float)).reshape(-1, 2)
    if locations.shape[0] == 0:
        return np.empty((0, cm.p_m))
    D = kernels.pairwise_distances(locations, ds.locations, cm.q)
    W = kernels.weight_matrix(D, cm.kernel, h, kernel_scale)
    Xm = ds.covariates[:, list(cm.column_indices)]
    A, b = local_moments(W, Xm, ds.response)
    beta, ok = spd_solve(A, b)
    if not ok.all():
        raise _singular("singular local fit", locations, W, ok, h)
    return beta


def fit_local(ds: SpatialDataset, cm: CandidateModel, s, kernel_scale: float = 1.0) -> np.ndarray:
    """Local coefficient estimate at a single point ``s``."""
    return local_coefficients(ds, cm, np.asarray(s, dtype=float)[None, :], kernel_scale)[0]


def hat_row(ds: SpatialDataset, cm: CandidateModel, i: int, kernel_scale: float = 1.0) -> np.ndarray:
    """Row ``i`` of the hat matrix: ``x_i' (X' W_i X)^{-1} X' W_i``."""
    h = _require_bandwidth(cm)
    Xm = ds.covariates[:, list(cm.column_indices)]
    w = kernels.weight_diagonal(ds.locations, ds.locations[i], cm.kernel, h, cm.q, kernel_scale)
    A = (Xm * w[:, None]).T @ Xm
    g, ok = spd_solve(A[None], Xm[i][None])
    if not ok[0]:
        raise SingularLocalFit(
            f"singular local fit at row {i}, bandwidth {h:g}",
            location=ds.locations[i],
            bandwidth=h,
            support=int(np.count_nonzero(w > 0)),
            index=i,
        )
    return (Xm @ g[0]) * w


def fit_candidate(
    ds: SpatialDataset,
    cm: CandidateModel,
    materialize_hat: bool = False,
    distances=None,
    kernel_scale: float = 1.0,
) -> FittedCandidate:
    """Fit one candidate at every data location.

    The hat diagonal is ``K_h(0) x_i' (X' W_i X)^{-1} x_i``, so the trace is
    available without forming the n x n hat matrix.
    """
    h = _require_bandwidth(cm)
    cm.check(ds.p)
    D = kernels.pairwise_distances(ds.locations, q=cm.q) if distances is None else distances
    W = kernels.weight_matrix(D, cm.kernel, h, kernel_scale)
    Xm = ds.covariates[:, list(cm.column_indices)]
    A, b = local_moments(W, Xm, ds.response)
    sol, ok = spd_solve(A, np.stack([b, Xm], axis=2))
    if not ok.all():
        raise _singular("singular local fit", ds.locations, W, ok, h)
    beta, g = sol[:, :, 0], sol[:, :, 1]
    fitted = np.einsum("ij,ij->i", Xm, beta)
    hat_diag = np.diagonal(W) * np.einsum("ij,ij->i", Xm, g)
    P = (g @ Xm.T) * W if materialize_hat else None
    for a in (fitted, hat_diag, beta):
        a.setflags(write=False)
    return FittedCandidate(cm, ds, fitted, hat_diag, beta, P, kernel_scale)


def predict_at(fc: FittedCandidate, new_locations, new_covariates) -> np.ndarray:
    """Predictions at new points using the training data of ``fc`` only."""
    new_locations = np.asarray(new_locations, dtype=float).reshape(-1, 2)
    Xn = np.asarray(new_covariates, dtype=float)
    if new_locations.shape[0] == 0:
        return np.empty(0)
    Xn = Xn.reshape(new_locations.shape[0], -1)
    beta = fc.coefficients_at(new_locations)
    return np.einsum("ij,ij->i", Xn[:, list(fc.model.column_indices)], beta)


def default_bandwidth_grid(locations, q: float = 2.0, num: int = 30, lo: float = 0.05, hi: float = 2.0):
    """Log-spaced bandwidths between ``lo`` and ``hi`` times the data extent."""
    ext = kernels.max_extent(locations, q)
    if not ext > 0:
        raise ValueError("all locations coincide; cannot build a bandwidth grid")
    return np.geomspace(lo * ext, hi * ext, num)


def _loo(A, b, xm, y, wii, fast):
    """Leave-one-out fits at the data points from the full local moments; None if any is singular."""
    if fast:
        sol, ok = spd_solve(A, np.stack([b, xm], axis=2))
        if not ok.all():
            return None
        mu = np.einsum("ij,ij->i", xm, sol[:, :, 0])
        pii = wii * np.einsum("ij,ij->i", xm, sol[:, :, 1])
        denom = 1.0 - pii
        if np.any(denom <= 1e-12):
            return None
        return (mu - pii * y) / denom
    Ar = A - wii[:, None, None] * (xm[:, :, None] * xm[:, None, :])
    br = b - (wii * y)[:, None] * xm
    beta, ok = spd_solve(Ar, br)
    if not ok.all():
        return None
    return np.einsum("ij,ij->i", xm, beta)


def loo_predictions(ds: SpatialDataset, cm: CandidateModel, fast: bool = False) -> np.ndarray:
    """Fit at each ``s_i`` from the other n - 1 rows, at the model's bandwidth."""
    h = _require_bandwidth(cm)
    cm.check(ds.p)
    W = kernels.weight_matrix(kernels.pairwise_distances(ds.locations, q=cm.q), cm.kernel, h)
    Xm = ds.covariates[:, list(cm.column_indices)]
    A, b = local_moments(W, Xm, ds.response)
    loo = _loo(A, b, Xm, ds.response, np.diagonal(W), fast)
    if loo is None:
        raise SingularLocalFit(f"singular leave-one-out fit at bandwidth {h:g}", bandwidth=h)
    return loo


def cv_scores(ds: SpatialDataset, models: Sequence[CandidateModel], grid, fast: bool = False, distances=None):
    """Leave-one-out CV sums of squares, shape (len(models), len(grid)).

    The leave-one-out fit at ``s_i`` drops row ``i`` from the local normal
    equations at ``s_i``. By default the reduced system is re-solved
    exactly; ``fast=True`` uses ``(mu_i - P_ii y_i) / (1 - P_ii)`` instead.
    Grid points where any leave-one-out fit is singular score ``inf``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("bandwidth grid must be nonempty and positive")
    y = ds.response
    out = np.full((len(models), grid.size), np.inf)
    groups = {}
    for k, cm in enumerate(models):
        cm.check(ds.p)
        groups.setdefault((cm.kernel, cm.q), []).append(k)
    for (kind, q), members in groups.items():
        cols = sorted({c for k in members for c in models[k].column_indices})
        where = {c: j for j, c in enumerate(cols)}
        X = ds.covariates[:, cols]
        D = kernels.pairwise_distances(ds.locations, q=q) if distances is None else distances
        for gi, h in enumerate(grid):
            W = kernels.weight_matrix(D, kind, h)
            A, b = local_moments(W, X, y)
            wii = np.diagonal(W)
            for k in members:
                pos = [where[c] for c in models[k].column_indices]
                Am, bm = _sub(A, b, pos)
                loo = _loo(Am, bm, X[:, pos], y, wii, fast)
                if loo is None:
                    continue
                out[k, gi] = float(np.sum((y - loo) ** 2))
    return out


def _argmin_small(cv, grid, y):
    finite = np.isfinite(cv)
    if not finite.any():
        return None
    best = cv[finite].min()
    tol = 1e-12 * (float(np.dot(y, y)) + 1e-300)
    ties = np.flatnonzero(finite & (cv <= best + tol))
    return int(ties[np.argmin(grid[ties])])


def loocv_bandwidth(ds: SpatialDataset, cm: CandidateModel, grid=None, fast: bool = False):
    """Bandwidth minimising the leave-one-out CV sum of squares.

    Returns ``(h_star, cv_values)``; ties go to the smaller bandwidth.
    """
    if grid is None:
        grid = default_bandwidth_grid(ds.locations, cm.q)
    grid = np.asarray(grid, dtype=float)
    cv = cv_scores(ds, [cm], grid, fast=fast)[0]
    k = _argmin_small(cv, grid, ds.response)
    if k is None:
        raise NoValidBandwidth(
            f"every grid bandwidth gives a singular leave-one-out fit for columns {cm.column_indices}"
        )
    return float(grid[k]), cv


def select_bandwidths(ds: SpatialDataset, models: Sequence[CandidateModel], grid=None, fast: bool = False):
    """Attach a CV-selected bandwidth to each model; returns (models, cv matrix)."""
    if grid is None:
        grid = default_bandwidth_grid(ds.locations, models[0].q)
    grid = np.asarray(grid, dtype=float)
    cv = cv_scores(ds, models, grid, fast=fast)
    chosen = []
    for cm, row in zip(models, cv):
        k = _argmin_small(row, grid, ds.response)
        if k is None:
            raise NoValidBandwidth(
                f"every grid bandwidth gives a singular leave-one-out fit for columns {cm.column_indices}"
            )
        chosen.append(cm.with_bandwidth(grid[k]))
    return chosen, cv


def sigma2_from_fit(fc: FittedCandidate) -> float:
    """Residual variance with ``n - tr(P)`` degrees of freedom."""
    n = fc.dataset.n
    dof = n - fc.hat_trace
    if not dof > 0:
        raise DegenerateDof(f"tr(P) = {fc.hat_trace:.6g} >= n = {n}")
    r = fc.residuals
    return float(r @ r) / dof


def sigma2_largest(ds: SpatialDataset, cm_largest: CandidateModel) -> float:
    return sigma2_from_fit(fit_candidate(ds, cm_largest))


def sigma2_naive(fc: FittedCandidate, y=None) -> float:
    """Mean squared residual ``||y - mu_hat||^2 / n``."""
    y = fc.dataset.response if y is None else np.asarray(y, dtype=float)
    r = y - fc.fitted
    return float(r @ r) / r.size


def fit_candidates(ds: SpatialDataset, models: Sequence[CandidateModel], grid=None, fast: bool = False):
    """CV-select a bandwidth for every model, then fit each one in-sample.

    Models that already carry a bandwidth are fitted as given.
    """
    todo = [k for k, m in enumerate(models) if m.bandwidth is None]
    models = list(models)
    if todo:
        chosen, _ = select_bandwidths(ds, [models[k] for k in todo], grid, fast)
        for k, m in zip(todo, chosen):
            models[k] = m
    cache = {}
    fits = []
    for m in models:
        if m.q not in cache:
            cache[m.q] = kernels.pairwise_distances(ds.locations, q=m.q)
        fits.append(fit_candidate(ds, m, distances=cache[m.q]))
    return fits
