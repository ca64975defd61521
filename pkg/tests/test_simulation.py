import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import spearmanr

from conftest import simplex_grid
from svmma import simulation as sim


def test_theta_sequence():
    th = sim.theta_sequence(0.5, 5)
    assert th[0] == pytest.approx(0.1) and th[1] == pytest.approx(0.5)
    assert sim.theta_sequence(1.0, 3)[2] == pytest.approx(3**-1.5) == pytest.approx(0.19245, abs=1e-5)


def test_spatial_surface():
    assert sim.spatial_surface([0.5, 0.5]) == 1.0
    assert sim.spatial_surface([0.0, 0.0]) == -1.0
    assert sim.spatial_surface([0.5, 0.0]) == 0.0


def test_error_cases():
    rng = np.random.default_rng(0)
    e, v = sim.draw_errors("i", 100_000, rng=rng)
    assert v == 1.0 and abs(e.var() - 1) < 0.03
    assert sim.draw_errors("ii", 10, rng=rng)[1] == pytest.approx(5 / 3)
    x2 = rng.standard_normal(200_000)
    e, v = sim.draw_errors("iii", x2.size, x2, rng)
    assert v == 0.7 and abs(e.var() - 0.7) < 0.02
    with pytest.raises(ValueError):
        sim.draw_errors("iii", 5, rng=rng)


def test_calibrate_c_examples():
    mu = np.array([-1.0, 1.0])  # sample variance 2
    assert sim.calibrate_c(mu / math.sqrt(2), 1.0, 0.5) == pytest.approx(1.0)
    assert sim.calibrate_c(mu, 1.0, 1 - 1e-12) < 1e-5
    with pytest.raises(ValueError):
        sim.calibrate_c(np.ones(4), 1.0, 0.5)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), r2=st.floats(0.01, 0.99), var_eps=st.floats(0.1, 10))
def test_calibrate_c_hits_target(seed, r2, var_eps):
    mu = np.random.default_rng(seed).standard_normal(30) * 3
    c = sim.calibrate_c(mu, var_eps, r2)
    v = np.var(mu, ddof=1)
    assert v / (v + c * c * var_eps) == pytest.approx(r2, abs=1e-12)


def test_design2_c_fixture():
    s = sim.generate(sim.DesignConfig(design=2, n=225, seed=0, replications=1), 0)
    assert s.c == pytest.approx(0.4286807686417785, rel=1e-12)


def test_generate_designs():
    s3 = sim.generate(sim.DesignConfig(design=3, n=100, seed=1), 0)
    assert s3.true_support == (0, 1, 2, 3)
    assert not s3.dataset.has_intercept and s3.dataset.p == 6
    s1 = sim.generate(sim.DesignConfig(design=1, n=100, seed=1), 0)
    assert s1.dataset.p == 13 and np.all(s1.dataset.covariates[:, 0] == 1)
    np.testing.assert_allclose(s1.dataset.response, s1.mu + s1.c * s1.epsilon)
    assert s1.sigma2_true == pytest.approx(s1.c**2)


def test_design2_is_design1_times_surface():
    cfg1 = sim.DesignConfig(design=1, n=49, seed=4)
    cfg2 = sim.DesignConfig(design=2, n=49, seed=4)
    a, b = sim.generate(cfg1, 0), sim.generate(cfg2, 0)
    np.testing.assert_array_equal(a.dataset.covariates, b.dataset.covariates)
    F = sim.spatial_surface(b.dataset.locations)
    np.testing.assert_allclose(b.mu, F * a.mu, rtol=1e-12)
    centre = np.flatnonzero(np.all(b.dataset.locations == [4 / 7, 4 / 7], axis=1))
    assert b.mu[centre] == pytest.approx(F[centre] * a.mu[centre])


def test_design3_correlation_converges():
    s = sim.generate(sim.DesignConfig(design=3, n=10_000, seed=3, replications=1), 0)
    C = np.corrcoef(s.dataset.covariates, rowvar=False)
    target = np.full((6, 6), 0.5) + 0.5 * np.eye(6)
    assert np.abs(C - target).max() < 0.05


def test_config_validation_names_field():
    for kw, field in [({"design": 4, "n": 100}, "design"), ({"design": 2, "n": 101}, "n"),
                      ({"design": 1, "n": 100, "r2": 1.0}, "r2"), ({"design": 1, "n": 100, "error_case": "iv"},
                                                                   "error_case")]:
        with pytest.raises(ValueError, match=field):
            sim.DesignConfig(**kw)
    with pytest.raises(ValueError, match="bogus"):
        sim.DesignConfig.from_dict({"design": 1, "n": 100, "bogus": 1})
    cfg = sim.DesignConfig(design=1, n=100, bandwidth_grid=[0.1, 0.2])
    assert sim.DesignConfig.from_dict(cfg.to_dict()) == cfg


def test_oracle_weights_examples():
    rng = np.random.default_rng(0)
    mu = rng.standard_normal(20)
    F = np.column_stack([mu + rng.standard_normal(20), mu])
    np.testing.assert_allclose(sim.oracle_weights(F, mu), [0, 1], atol=1e-10)
    same = np.column_stack([mu + 1, mu + 1, mu + 1])
    np.testing.assert_allclose(sim.oracle_weights(same, mu), [1 / 3] * 3, atol=1e-9)
    F = rng.standard_normal((20, 2))
    w = sim.oracle_weights(F, mu)
    grid = simplex_grid(2, 0.001)
    loss = np.sum((grid @ F.T - mu) ** 2, axis=1)
    assert np.sum((F @ w - mu) ** 2) <= loss.min() + 1e-12


def test_relative_risk_and_mse():
    a = np.array([1.0, 2.0, 3.0])
    assert sim.relative_risk(a, a) == 1.0
    assert sim.relative_risk(2 * a, a) == 2.0
    assert sim.relative_risk(a, 2 * a) == 0.5
    with pytest.raises(ZeroDivisionError):
        sim.relative_risk(a, np.zeros(3))
    mu = np.random.default_rng(0).standard_normal((2, 5))
    assert sim.mse(mu, mu) == 0.0
    assert sim.mse(mu + 1, mu) == pytest.approx(1.0)
    E = mu.copy()
    E[0] += 1.0
    E[1] += math.sqrt(3.0)
    assert sim.mse(E, mu) == pytest.approx(2.0)


def test_run_replications_contract():
    cfg = sim.DesignConfig(design=3, n=100, seed=7, replications=2)
    rep = sim.run_replications(cfg)
    assert len(rep.records) == 2 and not rep.failures
    for m in rep.methods:
        assert np.all(rep.losses(m) >= 0)
        t = rep.taus(m)
        assert np.all((t >= 0) & (t <= 1))
    for r in rep.records:
        for m in rep.methods:
            assert r["loss"]["oracle_svcma"] <= r["loss"][m] + 1e-8 * cfg.n
    one = sim.run_replications(sim.DesignConfig(design=1, n=49, seed=1, replications=1))
    assert len(one.records) == 1
    assert one.summary()["svmma_plugin"]["risk_vs_oracle_svcma"] >= 1 - 1e-9


def test_reports_are_deterministic_and_thread_independent():
    cfg = sim.DesignConfig(design=2, n=49, seed=3, replications=3)
    a = sim.run_replications(cfg)
    b = sim.run_replications(cfg, threads=3)
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()
    head = a.to_csv().splitlines()[0]
    assert head == "design,n,alpha,r2,case,method,replication,loss,tau"


def test_failed_replications_are_counted():
    cfg = sim.DesignConfig(design=2, n=49, seed=3, replications=2, kernel="bisquare", bandwidth_grid=[1e-4])
    rep = sim.run_replications(cfg)
    assert not rep.records and len(rep.failures) == 2
    assert "NoValidBandwidth" in rep.failures[0]["error"]


def test_plugin_variance_close_to_truth_design1():
    cfg = sim.DesignConfig(design=1, n=100, seed=21, replications=100)
    ratios = []
    for j in range(cfg.replications):
        rec = sim.run_one(cfg, j, ("svmma_plugin",))
        ratios.append(rec["sigma2_plugin"] / rec["sigma2_true"])
    assert abs(np.mean(ratios) - 1) <= 0.2


@pytest.mark.slow
def test_design3_tau_increases_with_n():
    ns = (100, 169, 225, 324, 400)
    means = []
    for n in ns:
        rep = sim.run_replications(sim.DesignConfig(design=3, n=n, r2=0.7, seed=99, replications=50),
                                   ("svmma_plugin",))
        means.append(rep.taus("svmma_plugin").mean())
    assert spearmanr(ns, means)[0] > 0
