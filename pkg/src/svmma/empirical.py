"""Real-data workflow: full-sample fit summaries and train/test MSPE."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import averaging, linear
from .candidates import CandidateSet
from .data import SpatialDataset, split_train_test
from .exceptions import SVMMAError
from .gwr import default_bandwidth_grid, fit_candidates

SVCM_METHODS = ("svmma", "saic", "sbic", "aic", "bic", "aicc")
LINEAR_METHODS = linear.LINEAR_METHODS
ALL_METHODS = SVCM_METHODS + LINEAR_METHODS
WEIGHT_THRESHOLD = 1e-6

logger = logging.getLogger(__name__)


def _grid(ds, cs, grid):
    """``grid`` may be an array, ``None`` (default grid) or a callable of the locations."""
    if callable(grid):
        return np.asarray(grid(ds.locations), dtype=float)
    if grid is not None:
        return np.asarray(grid, dtype=float)
    return default_bandwidth_grid(ds.locations, cs.models[0].q)


def svcm_weights(fits, methods: Sequence[str] = SVCM_METHODS) -> dict:
    return {m: averaging.method_weights(fits, m) for m in methods}


def fit_report(
    ds: SpatialDataset, cs: CandidateSet, grid=None, threshold: float = WEIGHT_THRESHOLD, fast_cv: bool = False
) -> dict:
    """Fit every candidate on the full sample and summarise.

    Returns a JSON-ready dict with per-candidate bandwidths and hat traces,
    SVMMA/SAIC/SBIC weights, AIC/BIC/AICc selections, the in-sample MSE of
    each method and the SVMMA weight table above ``threshold``.
    """
    fits = fit_candidates(ds, cs.models, _grid(ds, cs, grid), fast_cv)
    mp = averaging.feasible_problem(fits)
    weights = {"svmma": averaging.solve_weights(mp)}
    weights.update(svcm_weights(fits, ("saic", "sbic", "aic", "bic", "aicc")))
    F = np.column_stack([f.fitted for f in fits])
    ics = [averaging.info_criteria(f) for f in fits]
    selections = {}
    for name in ("aic", "bic", "aicc"):
        k = int(np.argmax(weights[name]))
        selections[name] = {
            "model": k,
            "columns": [ds.column_names[c] for c in fits[k].model.column_indices],
            "score": getattr(ics[k], name),
        }
    mse = {m: float(np.mean((ds.response - F @ w) ** 2)) for m, w in weights.items()}
    return {
        "n": ds.n,
        "candidates": [
            {
                "model": k,
                "columns": [ds.column_names[c] for c in f.model.column_indices],
                "bandwidth": f.model.bandwidth,
                "hat_trace": f.hat_trace,
                "aic": ics[k].aic,
                "bic": ics[k].bic,
                "aicc": ics[k].aicc,
                "w_svmma": float(weights["svmma"][k]),
                "w_saic": float(weights["saic"][k]),
                "w_sbic": float(weights["sbic"][k]),
            }
            for k, f in enumerate(fits)
        ],
        "sigma2_plugin": mp.sigma2,
        "criterion": averaging.criterion_value(mp, weights["svmma"]),
        "selections": selections,
        "mse": mse,
        "threshold": threshold,
        "weight_table": averaging.weight_rows(fits, weights["svmma"], ds.column_names, threshold),
    }


def prediction_errors(
    train: SpatialDataset,
    test: SpatialDataset,
    cs: CandidateSet,
    methods: Sequence[str] = ALL_METHODS,
    grid=None,
    fast_cv: bool = False,
) -> dict:
    """MSPE of each method on ``test`` after fitting on ``train``."""
    if train.column_names != test.column_names or train.has_intercept != test.has_intercept:
        raise ValueError(f"schema mismatch: train {train.column_names} vs test {test.column_names}")
    bad = [m for m in methods if m not in ALL_METHODS]
    if bad:
        raise ValueError(f"unknown method(s) {bad}; expected from {ALL_METHODS}")
    out = {}
    svcm = [m for m in methods if m in SVCM_METHODS]
    if svcm:
        fits = fit_candidates(train, cs.models, _grid(train, cs, grid), fast_cv)
        W = svcm_weights(fits, svcm)
        used = np.any(np.column_stack(list(W.values())) > 0, axis=1)
        P = np.zeros((test.n, len(fits)))
        for k in np.flatnonzero(used):
            P[:, k] = fits[k].predict(test.locations, test.covariates)
        for m in svcm:
            out[m] = float(np.mean((test.response - P @ W[m]) ** 2))
    lin = [m for m in methods if m in LINEAR_METHODS]
    if lin:
        lfits = [linear.ols_fit(train, cm) for cm in cs.models]
        G = np.column_stack([f.predict(test.covariates) for f in lfits])
        for m in lin:
            w = linear.linear_method_weights(lfits, train.response, m)
            out[m] = float(np.mean((test.response - G @ w) ** 2))
    return out


def repeated_splits(
    ds: SpatialDataset,
    cs: CandidateSet,
    n0: int,
    seed: int,
    repeats: int,
    methods: Sequence[str] = ALL_METHODS,
    grid=None,
    fast_cv: bool = False,
    threads: int = 1,
) -> list:
    """MSPE rows for ``repeats`` random splits; split j uses seed ``seed + j``.

    A split whose fit fails (e.g. a singular local fit at a test location)
    yields a row with an ``error`` message instead of ``mspe``.
    """

    def task(j):
        train, test = split_train_test(ds, n0, seed + j)
        try:
            mspe = prediction_errors(train, test, cs, methods, grid, fast_cv)
        except (SVMMAError, np.linalg.LinAlgError) as exc:
            logger.warning("split %d excluded: %s", j, exc)
            return {"repeat": j, "seed": seed + j, "error": f"{type(exc).__name__}: {exc}"}
        return {"repeat": j, "seed": seed + j, "mspe": mspe}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(task, range(repeats)))
    return [task(j) for j in range(repeats)]


def summarise_mspe(rows: Sequence[dict], methods: Optional[Sequence[str]] = None) -> dict:
    """Mean and median MSPE per method over the rows without an ``error``."""
    rows = [r for r in rows if "error" not in r]
    if not rows:
        raise ValueError("no successful splits to summarise")
    methods = methods or list(rows[0]["mspe"])
    out = {}
    for m in methods:
        v = np.array([r["mspe"][m] for r in rows])
        out[m] = {"mean": float(v.mean()), "median": float(np.median(v)), "repeats": int(v.size)}
    return out
