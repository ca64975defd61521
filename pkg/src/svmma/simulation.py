"""Simulation designs, oracle weights, risk metrics and the replication driver."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import averaging, linear
from .candidates import CandidateSet, all_subsets, nested_count_rule, nested_set, quasi_correct_flags
from .data import SpatialDataset, unit_square_grid
from .exceptions import SVMMAError
from .gwr import default_bandwidth_grid, fit_candidates

logger = logging.getLogger(__name__)

ERROR_CASES = ("i", "ii", "iii")
SVCM_METHODS = ("svmma_known_sigma", "svmma_plugin", "saic", "sbic", "aic", "bic", "aicc", "oracle_svcma")
LINEAR_METHODS = ("mma", "jma", "linear_aic", "linear_bic", "linear_saic", "linear_sbic", "oracle_linear")
ALL_METHODS = SVCM_METHODS + LINEAR_METHODS
DEFAULT_METHODS = {
    1: ("svmma_plugin", "saic", "sbic", "aic", "bic", "aicc", "mma", "jma", "oracle_svcma", "oracle_linear"),
    2: ("svmma_plugin", "saic", "sbic", "aic", "bic", "aicc", "mma", "jma", "oracle_svcma", "oracle_linear"),
    3: ("svmma_known_sigma", "svmma_plugin", "saic", "sbic", "aic", "bic", "aicc", "oracle_svcma"),
}

DESIGN3_THETA = np.array([1.0, 1.2, -1.0, 0.9, 0.0, 0.0])
DESIGN3_RHO = 0.5
T_DOF = 5


@dataclass(frozen=True)
class DesignConfig:
    """One simulation cell.

    ``n_models`` overrides the nested count rule for Designs 1-2;
    ``bandwidth_grid`` overrides the default 30-point log grid.
    """

    design: int
    n: int
    alpha: float = 0.5
    r2: float = 0.5
    error_case: str = "i"
    seed: int = 0
    replications: int = 200
    kernel: str = "gaussian"
    q: float = 2.0
    n_models: Optional[int] = None
    n_bandwidths: int = 30
    bandwidth_grid: Optional[tuple] = None
    fast_cv: bool = False

    def __post_init__(self):
        if self.design not in (1, 2, 3):
            raise ValueError(f"design: must be 1, 2 or 3, got {self.design!r}")
        if not isinstance(self.n, int) or self.n < 4:
            raise ValueError(f"n: must be an integer >= 4, got {self.n!r}")
        if self.design in (2, 3) and math.isqrt(self.n) ** 2 != self.n:
            raise ValueError(f"n: Design {self.design} needs a perfect square, got {self.n}")
        if not 0 < self.r2 < 1:
            raise ValueError(f"r2: must lie in (0, 1), got {self.r2}")
        if not self.alpha > 0:
            raise ValueError(f"alpha: must be positive, got {self.alpha}")
        if self.error_case not in ERROR_CASES:
            raise ValueError(f"error_case: expected one of {ERROR_CASES}, got {self.error_case!r}")
        if self.replications < 1:
            raise ValueError("replications: must be >= 1")
        if self.n_bandwidths < 1:
            raise ValueError("n_bandwidths: must be >= 1")
        if self.bandwidth_grid is not None:
            object.__setattr__(self, "bandwidth_grid", tuple(float(h) for h in self.bandwidth_grid))

    @property
    def n_candidates(self) -> int:
        if self.design == 3:
            return 2 ** len(DESIGN3_THETA) - 1
        return self.n_models or nested_count_rule(self.n)

    @classmethod
    def from_dict(cls, d: dict) -> "DesignConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["bandwidth_grid"] is not None:
            d["bandwidth_grid"] = list(d["bandwidth_grid"])
        return d


@dataclass(frozen=True, eq=False)
class GeneratedSample:
    dataset: SpatialDataset
    mu: np.ndarray
    epsilon: np.ndarray
    c: float
    var_epsilon: float
    true_support: Optional[tuple] = None

    @property
    def sigma2_true(self) -> float:
        return self.c**2 * self.var_epsilon


def theta_sequence(alpha: float, count: int) -> np.ndarray:
    """theta_1 = 10^(-alpha-1/2), theta_j = j^(-alpha-1/2) for j >= 2."""
    j = np.arange(1, count + 1, dtype=float)
    th = j ** (-alpha - 0.5)
    th[0] = 10.0 ** (-alpha - 0.5)
    return th


def spatial_surface(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return 1.0 - (1.0 - 2.0 * s[..., 0]) ** 2 - (1.0 - 2.0 * s[..., 1]) ** 2


def draw_errors(case: str, n: int, x2_column=None, rng=None):
    """Error draws and their population variance.

    i: N(0, 1); ii: t(5); iii: sqrt(0.2 + 0.5 x2^2) * N(0, 1). The case iii
    variance 0.7 assumes x2 is standard normal.
    """
    rng = np.random.default_rng(rng)
    if case == "i":
        return rng.standard_normal(n), 1.0
    if case == "ii":
        return rng.standard_t(T_DOF, n), T_DOF / (T_DOF - 2.0)
    if case == "iii":
        if x2_column is None:
            raise ValueError("error case iii needs the x2 column")
        a = 0.2 + 0.5 * np.asarray(x2_column, dtype=float) ** 2
        return np.sqrt(a) * rng.standard_normal(n), 0.7
    raise ValueError(f"unknown error case {case!r}")


def calibrate_c(mu, var_epsilon: float, r2: float) -> float:
    """Noise scale giving var(mu) / (var(mu) + c^2 var_eps) = r2 (sample variance of mu)."""
    v = float(np.var(mu, ddof=1))
    if not v > 0:
        raise ValueError("mu has zero sample variance; cannot calibrate c")
    if not 0 < r2 < 1:
        raise ValueError("r2 must lie in (0, 1)")
    return math.sqrt(v * (1.0 - r2) / (r2 * var_epsilon))


def _design_locations(n, rng):
    if math.isqrt(n) ** 2 == n:
        return unit_square_grid(n)
    return rng.uniform(size=(n, 2))


def generate(config: DesignConfig, replication: int = 0) -> GeneratedSample:
    """Draw one dataset; replication ``j`` uses seed ``config.seed + j``."""
    rng = np.random.default_rng(config.seed + replication)
    n = config.n
    if config.design in (1, 2):
        M = config.n_candidates
        J = M + 200
        X = np.column_stack([np.ones(n), rng.standard_normal((n, J - 1))])
        loc = _design_locations(n, rng)
        mu = X @ theta_sequence(config.alpha, J)
        if config.design == 2:
            mu = spatial_surface(loc) * mu
        x2 = X[:, 1]
        names = tuple(["intercept"] + [f"x{j}" for j in range(2, M + 1)])
        ds_X, has_icpt, support = X[:, :M], True, None
    else:
        p = DESIGN3_THETA.size
        cov = np.full((p, p), DESIGN3_RHO) + (1 - DESIGN3_RHO) * np.eye(p)
        X = rng.standard_normal((n, p)) @ np.linalg.cholesky(cov).T
        loc = unit_square_grid(n)
        mu = spatial_surface(loc) * (X @ DESIGN3_THETA)
        x2 = X[:, 1]
        names = tuple(f"x{j}" for j in range(1, p + 1))
        ds_X, has_icpt = X, False
        support = tuple(int(k) for k in np.flatnonzero(DESIGN3_THETA))
    eps, var_eps = draw_errors(config.error_case, n, x2, rng)
    c = calibrate_c(mu, var_eps, config.r2)
    y = mu + c * eps
    ds = SpatialDataset(loc, ds_X, y, names, has_intercept=has_icpt)
    return GeneratedSample(ds, mu, eps, c, var_eps, support)


def candidate_set(config: DesignConfig, sample: Optional[GeneratedSample] = None) -> CandidateSet:
    if config.design == 3:
        cs = all_subsets(DESIGN3_THETA.size, config.kernel, config.q)
        support = tuple(int(k) for k in np.flatnonzero(DESIGN3_THETA))
        return cs.with_flags(quasi_correct_flags(cs, support))
    M = config.n_candidates
    return nested_set(M, M, config.kernel, config.q)


def oracle_weights(F, mu, tol: float = 1e-10) -> np.ndarray:
    """Infeasible weights minimising ||F w - mu||^2 over the simplex."""
    F = np.asarray(F, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != mu.size:
        raise ValueError(f"F has {F.shape[0]} rows, mu has {mu.size}")
    return averaging.simplex_qp(F.T @ F, F.T @ mu, tol=tol)


def relative_risk(losses_method, losses_oracle) -> float:
    a = np.asarray(losses_method, dtype=float)
    b = np.asarray(losses_oracle, dtype=float)
    denom = b.mean()
    if not denom > 0:
        raise ZeroDivisionError("oracle losses are all zero")
    return float(a.mean() / denom)


def mse(estimates, mu) -> float:
    """(nN)^-1 sum_j ||estimate_j - mu_j||^2 over replications (rows)."""
    E = np.atleast_2d(np.asarray(estimates, dtype=float))
    U = np.atleast_2d(np.asarray(mu, dtype=float))
    if E.shape != U.shape:
        raise ValueError(f"shape mismatch {E.shape} vs {U.shape}")
    return float(np.sum((E - U) ** 2) / E.size)


def _bandwidth_grid(config, ds):
    if config.bandwidth_grid is not None:
        return np.asarray(config.bandwidth_grid)
    return default_bandwidth_grid(ds.locations, config.q, config.n_bandwidths)


def run_one(config: DesignConfig, replication: int, methods: Sequence[str]) -> dict:
    """Everything recorded for one replication (no timing, so runs are reproducible)."""
    sample = generate(config, replication)
    ds, mu = sample.dataset, sample.mu
    cs = candidate_set(config)
    rec = {"replication": replication, "c": sample.c, "sigma2_true": sample.sigma2_true, "loss": {}, "tau": {}, "weights": {}}
    svcm = [m for m in methods if m in SVCM_METHODS]
    lin = [m for m in methods if m in LINEAR_METHODS]
    if svcm:
        fits = fit_candidates(ds, cs.models, _bandwidth_grid(config, ds), config.fast_cv)
        F = np.column_stack([f.fitted for f in fits])
        rec["bandwidths"] = [f.model.bandwidth for f in fits]
        rec["hat_traces"] = [f.hat_trace for f in fits]
        plug = averaging.feasible_problem(fits)
        rec["sigma2_plugin"] = plug.sigma2
        for m in svcm:
            if m == "oracle_svcma":
                w = oracle_weights(F, mu)
            elif m == "svmma_plugin":
                w = averaging.solve_weights(plug)
                rec["criterion_per_n"] = averaging.criterion_value(plug, w) / ds.n
            elif m == "svmma_known_sigma":
                w = averaging.method_weights(fits, m, sample.sigma2_true)
            else:
                w = averaging.method_weights(fits, m)
            rec["loss"][m] = float(np.sum((F @ w - mu) ** 2))
            rec["weights"][m] = w.tolist()
            if cs.quasi_correct is not None:
                rec["tau"][m] = averaging.tau_sum(w, cs.quasi_correct)
    if lin:
        lfits = [linear.ols_fit(ds, cm) for cm in cs.models]
        G = np.column_stack([f.fitted for f in lfits])
        for m in lin:
            w = oracle_weights(G, mu) if m == "oracle_linear" else linear.linear_method_weights(lfits, ds.response, m)
            rec["loss"][m] = float(np.sum((G @ w - mu) ** 2))
            rec["weights"][m] = w.tolist()
            if cs.quasi_correct is not None:
                rec["tau"][m] = averaging.tau_sum(w, cs.quasi_correct)
    return rec


@dataclass
class RiskReport:
    """Per-method losses over the completed replications plus summaries.

    ``records`` is ordered by replication index; ``failures`` lists the
    excluded replications with their error message.
    """

    config: DesignConfig
    methods: tuple
    records: list
    failures: list = field(default_factory=list)
    runtime_seconds: Optional[float] = None

    @property
    def replications(self) -> list:
        return [r["replication"] for r in self.records]

    def losses(self, method: str) -> np.ndarray:
        return np.array([r["loss"][method] for r in self.records])

    def taus(self, method: str) -> np.ndarray:
        return np.array([r["tau"][method] for r in self.records if method in r["tau"]])

    def mean_loss(self, method: str) -> float:
        return float(self.losses(method).mean())

    def mse(self, method: str) -> float:
        return self.mean_loss(method) / self.config.n

    def relative_risk(self, method: str, oracle: str = "oracle_svcma") -> float:
        return relative_risk(self.losses(method), self.losses(oracle))

    def summary(self) -> dict:
        out = {}
        oracles = [o for o in ("oracle_svcma", "oracle_linear") if o in self.methods]
        for m in self.methods:
            if not self.records:
                break
            row = {"mean_loss": self.mean_loss(m), "mse": self.mse(m)}
            for o in oracles:
                row[f"risk_vs_{o}"] = self.relative_risk(m, o)
            t = self.taus(m)
            if t.size:
                row["tau_mean"] = float(t.mean())
                row["tau_median"] = float(np.median(t))
            out[m] = row
        return out

    def to_json(self) -> str:
        doc = {
            "schema": "svmma.risk_report/1",
            "config": self.config.to_dict(),
            "methods": list(self.methods),
            "completed": len(self.records),
            "failed": len(self.failures),
            "failures": self.failures,
            "summary": self.summary(),
            "replications": self.records,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    def to_csv(self) -> str:
        """Long format: design, n, alpha, r2, case, method, replication, loss, tau."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["design", "n", "alpha", "r2", "case", "method", "replication", "loss", "tau"])
        c = self.config
        for m in self.methods:
            for r in self.records:
                tau = r["tau"].get(m)
                w.writerow([c.design, c.n, repr(c.alpha), repr(c.r2), c.error_case, m, r["replication"],
                            repr(r["loss"][m]), "" if tau is None else repr(tau)])
        return buf.getvalue()


def run_replications(config: DesignConfig, methods: Optional[Sequence[str]] = None, threads: int = 1) -> RiskReport:
    """Run ``config.replications`` seeded replications.

    Results land in replication-indexed slots, so the report does not depend
    on ``threads``. A replication that fails (e.g. no nonsingular bandwidth)
    is excluded and listed under ``failures``.
    """
    methods = tuple(methods or DEFAULT_METHODS[config.design])
    bad = [m for m in methods if m not in ALL_METHODS]
    if bad:
        raise ValueError(f"unknown method(s) {bad}; expected from {ALL_METHODS}")
    if config.design != 3 and "svmma_known_sigma" in methods and config.error_case == "iii":
        logger.info("case iii is heteroscedastic; known-sigma mode uses the average variance")

    def task(j):
        try:
            return run_one(config, j, methods)
        except (SVMMAError, np.linalg.LinAlgError) as exc:
            logger.warning("replication %d excluded: %s", j, exc)
            return {"replication": j, "error": f"{type(exc).__name__}: {exc}"}

    t0 = time.perf_counter()
    reps = range(config.replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            slots = list(pool.map(task, reps))
    else:
        slots = [task(j) for j in reps]
    records = [r for r in slots if "error" not in r]
    failures = [r for r in slots if "error" in r]
    return RiskReport(config, methods, records, failures, time.perf_counter() - t0)
