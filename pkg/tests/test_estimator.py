import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from svmma import LocalConstantRegressor, SVMMARegressor
from svmma.averaging import feasible_problem, solve_weights
from svmma.candidates import all_subsets
from svmma.data import SpatialDataset
from svmma.gwr import fit_candidates


def _data(n=80, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.uniform(size=(n, 2))
    X = rng.standard_normal((n, 3))
    y = 1 + (1 + s[:, 0]) * X[:, 0] - 0.5 * X[:, 1] + 0.3 * rng.standard_normal(n)
    return X, y, s


def test_params_round_trip():
    est = SVMMARegressor(candidates="all-subsets", kernel="bisquare", q=1.5)
    p = est.get_params()
    assert p["kernel"] == "bisquare" and p["q"] == 1.5
    c = clone(est)
    assert c.get_params() == p
    c.set_params(method="saic")
    assert c.method == "saic"


def test_matches_functional_pipeline():
    X, y, s = _data()
    est = SVMMARegressor(candidates="all-subsets").fit(X, y, s)
    Z = np.column_stack([np.ones(len(y)), X])
    ds = SpatialDataset(s, Z, y)
    fits = fit_candidates(ds, all_subsets(3, offset=1, always=(0,)).models)
    np.testing.assert_allclose(est.weights_, solve_weights(feasible_problem(fits)), atol=1e-12)
    assert len(est.candidates_) == 7
    assert all(m.bandwidth is not None for m in est.candidates_.models)
    np.testing.assert_allclose(est.predict(X, s), est.fitted_, rtol=1e-9)


def test_predict_new_points_and_coefficients():
    X, y, s = _data()
    est = SVMMARegressor(candidates="nested", n_models=3).fit(X[:60], y[:60], s[:60])
    pred = est.predict(X[60:], s[60:])
    assert pred.shape == (20,) and np.all(np.isfinite(pred))
    B = est.coefficients_at(s[60:])
    assert B.shape == (20, 4)
    np.testing.assert_allclose(np.sum(np.column_stack([np.ones(20), X[60:]]) * B, axis=1), pred, rtol=1e-9)
    rows = est.weight_table(column_names=["intercept", "a", "b", "c"])
    assert abs(sum(r["weight"] for r in rows) - 1) < 1e-9


def test_methods_and_known_sigma():
    X, y, s = _data()
    for m in ("saic", "sbic", "aic", "bic", "aicc"):
        w = SVMMARegressor(candidates="nested", method=m).fit(X, y, s).weights_
        assert abs(w.sum() - 1) < 1e-10
    est = SVMMARegressor(candidates="nested", sigma2=0.09).fit(X, y, s)
    assert est.sigma2_ == 0.09


def test_custom_candidates_without_intercept():
    X, y, s = _data()
    est = SVMMARegressor(candidates=[(0,), (0, 1)], fit_intercept=False).fit(X, y, s)
    assert [m.column_indices for m in est.candidates_.models] == [(0,), (0, 1)]


def test_validation():
    X, y, s = _data()
    est = SVMMARegressor()
    with pytest.raises(NotFittedError):
        est.predict(X, s)
    with pytest.raises(ValueError, match="coords"):
        est.fit(X, y, s[:10])
    with pytest.raises(ValueError):
        est.fit(X, y[:10], s)
    with pytest.raises(ValueError, match="unknown candidates"):
        SVMMARegressor(candidates="everything").fit(X, y, s)
    Xn = X.copy()
    Xn[0, 0] = np.nan
    with pytest.raises(ValueError):
        est.fit(Xn, y, s)


def test_local_constant_regressor():
    X, y, s = _data()
    est = LocalConstantRegressor().fit(X, y, s)
    assert est.bandwidth_ > 0 and 0 < est.hat_trace_ < len(y)
    np.testing.assert_allclose(est.predict(X, s), est.fit_.fitted, rtol=1e-9)
    fixed = LocalConstantRegressor(bandwidth=1e6).fit(X, y, s)
    Z = np.column_stack([np.ones(len(y)), X])
    ols = np.linalg.lstsq(Z, y, rcond=None)[0]
    np.testing.assert_allclose(fixed.coefficients_at(s[:3]), np.tile(ols, (3, 1)), rtol=1e-6)
