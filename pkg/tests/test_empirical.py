import numpy as np
import pytest

from svmma import empirical
from svmma.candidates import all_subsets
from svmma.data import SpatialDataset


def _ds(n=70, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.uniform(size=(n, 2))
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 3))])
    y = X[:, 0] + (1 + 2 * s[:, 0]) * X[:, 1] + 0.2 * rng.standard_normal(n)
    return SpatialDataset(s, X, y, ("intercept", "a", "b", "c"))


CS = all_subsets(3, offset=1, always=(0,))


def test_fit_report_contents():
    rep = empirical.fit_report(_ds(), CS)
    assert len(rep["candidates"]) == 7
    assert rep["selections"]["bic"]["columns"][0] == "intercept"
    assert rep["mse"]["svmma"] >= 0
    assert all(r["weight"] > empirical.WEIGHT_THRESHOLD for r in rep["weight_table"])


def test_prediction_errors_in_sample_matches_fit():
    ds = _ds()
    rep = empirical.fit_report(ds, CS)
    err = empirical.prediction_errors(ds, ds, CS, empirical.SVCM_METHODS)
    for m in empirical.SVCM_METHODS:
        assert err[m] == pytest.approx(rep["mse"][m], rel=1e-9)


def test_schema_mismatch():
    ds = _ds()
    other = SpatialDataset(ds.locations, ds.covariates, ds.response, ("intercept", "a", "b", "z"))
    with pytest.raises(ValueError, match="schema"):
        empirical.prediction_errors(ds, other, CS)
    with pytest.raises(ValueError, match="unknown method"):
        empirical.prediction_errors(ds, ds, CS, ["svmma", "lasso"])


def test_repeated_splits_seed_offsets():
    rows = empirical.repeated_splits(_ds(), CS, 50, 10, 3, ("svmma", "mma"))
    assert [r["seed"] for r in rows] == [10, 11, 12]
    summ = empirical.summarise_mspe(rows)
    v = [r["mspe"]["mma"] for r in rows]
    assert summ["mma"]["median"] == pytest.approx(np.median(v))


def test_failed_split_is_recorded_and_excluded():
    ds = _ds(40)
    rows = empirical.repeated_splits(ds, CS, 30, 0, 2, ("svmma",), grid=[1e-6])
    assert all("NoValidBandwidth" in r["error"] for r in rows)
    with pytest.raises(ValueError, match="no successful splits"):
        empirical.summarise_mspe(rows)
    ok = {"repeat": 2, "seed": 2, "mspe": {"svmma": 1.5}}
    assert empirical.summarise_mspe(rows + [ok])["svmma"] == {"mean": 1.5, "median": 1.5, "repeats": 1}
