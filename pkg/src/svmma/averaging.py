"""Mallows model averaging over fitted candidates.

Weights live on the probability simplex. The Mallows criterion

    C(w) = ||y - F w||^2 + 2 sigma2 * traces . w

is a convex quadratic in ``w`` and is minimised by :func:`simplex_qp`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .exceptions import NoConvergence, NonFiniteInput
from .gwr import FittedCandidate, sigma2_from_fit

WEIGHT_ATOL = 1e-10

SVCM_METHODS = ("svmma", "svmma_known_sigma", "saic", "sbic", "aic", "bic", "aicc")


def as_weight_vector(w, atol: float = WEIGHT_ATOL) -> np.ndarray:
    """Validate that ``w`` is a simplex point and return it as a float array."""
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 0 or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a nonempty finite vector")
    if np.any(w < -atol) or np.any(w > 1 + atol) or abs(w.sum() - 1.0) > atol:
        raise ValueError(f"not a simplex point: sum={w.sum():.12g}, min={w.min():.3g}")
    return w


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto {w >= 0, sum(w) = 1}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _kkt_residual(w, g, L):
    return float(np.max(np.abs(w - project_simplex(w - g / L))))


def _face_solve(H, b, S):
    """Minimum-norm minimiser of w'Hw - 2b'w on {sum(w_S) = 1, w_rest = 0}."""
    M = H.shape[0]
    k = len(S)
    w = np.zeros(M)
    if k == 1:
        w[S[0]] = 1.0
        return w
    HS = H[np.ix_(S, S)]
    bS = b[S]
    w0 = np.full(k, 1.0 / k)
    # orthonormal basis of the sum-zero subspace
    N = np.linalg.qr(np.eye(k) - 1.0 / k, mode="reduced")[0][:, : k - 1]
    red = N.T @ HS @ N
    rhs = N.T @ (bS - HS @ w0)
    # pseudo-inverse with the cutoff relative to H_S, not to the (possibly
    # all-noise) reduced matrix, so flat directions are dropped
    lam, V = np.linalg.eigh(0.5 * (red + red.T))
    keep = lam > 1e-10 * max(np.abs(HS).max(), 1e-300)
    z = V[:, keep] @ ((V[:, keep].T @ rhs) / lam[keep])
    w[S] = w0 + N @ z
    return w


def _polish(H, b, w, L, tol):
    """Active-set refinement starting from the support of ``w``.

    Returns a KKT-verified solution or None.
    """
    M = H.shape[0]
    S = sorted(np.flatnonzero(w > 1e-9).tolist()) or [int(np.argmax(w))]
    for _ in range(4 * M + 4):
        cand = _face_solve(H, b, S)
        neg = [i for i in S if cand[i] < -1e-13]
        if neg:
            worst = min(neg, key=lambda i: cand[i])
            S = [i for i in S if i != worst]
            if not S:
                return None
            continue
        cand = np.maximum(cand, 0.0)
        cand /= cand.sum()
        g = 2.0 * (H @ cand - b)
        if _kkt_residual(cand, g, L) <= tol:
            return cand
        inactive = [i for i in range(M) if i not in S]
        if not inactive:
            return None
        theta = float(np.mean(g[S]))
        add = min(inactive, key=lambda i: g[i])
        if g[add] >= theta:
            return None
        S = sorted(S + [add])
    return None


def simplex_qp(H, b, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Minimise ``w'Hw - 2 b'w`` over the probability simplex.

    Accelerated projected gradient (with adaptive restart) from the uniform
    point, interleaved with an active-set polish that solves the equality
    constrained problem on the current support. Converged when the
    projected-gradient step ``||w - proj(w - grad/L)||_inf`` is at most
    ``tol``. On flat faces (singular ``H``) the minimum-norm point is returned.
    """
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    M = b.size
    if H.shape != (M, M):
        raise ValueError(f"H must be {M}x{M}, got {H.shape}")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(b))):
        raise NonFiniteInput("non-finite entries in the QP data")
    if not tol > 0:
        raise ValueError("tol must be positive")
    scale = max(np.max(np.abs(H)), np.max(np.abs(b)), 1e-300)
    if not np.allclose(H, H.T, rtol=0, atol=1e-8 * scale):
        raise ValueError("H must be symmetric")
    if M == 1:
        return np.ones(1)
    H = 0.5 * (H + H.T) / scale
    b = b / scale
    L = 2.0 * max(float(np.linalg.eigvalsh(H)[-1]), 0.0)
    if L <= 0:
        L = 1.0

    w = np.full(M, 1.0 / M)
    out = _polish(H, b, w, L, tol)
    if out is not None:
        return out
    z, t = w.copy(), 1.0
    res = np.inf
    for it in range(1, max_iter + 1):
        w_new = project_simplex(z - 2.0 * (H @ z - b) / L)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if np.dot(z - w_new, w_new - w) > 0:  # restart momentum
            z, t_new = w_new.copy(), 1.0
        else:
            z = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
        if it % 25 == 0 or it == max_iter:
            g = 2.0 * (H @ w - b)
            res = _kkt_residual(w, g, L)
            out = _polish(H, b, w, L, tol)
            if out is not None:
                return out
            if res <= tol:
                w = np.maximum(w, 0.0)
                return w / w.sum()
    raise NoConvergence(f"simplex QP did not converge in {max_iter} iterations (KKT residual {res:.3g})", res)


@dataclass(frozen=True, eq=False)
class MallowsProblem:
    """Data for the Mallows criterion.

    F : (n, M) candidate fitted values, y : (n,), traces : (M,) hat traces,
    sigma2 : error variance (known, or a plug-in estimate).
    """

    F: np.ndarray
    y: np.ndarray
    traces: np.ndarray
    sigma2: float

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        t = np.asarray(self.traces, dtype=float).ravel()
        if F.ndim == 1:
            F = F[:, None]
        if F.shape != (y.size, t.size):
            raise ValueError(f"F is {F.shape}, expected ({y.size}, {t.size})")
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "traces", t)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def M(self) -> int:
        return self.traces.size

    def quadratic(self):
        """``(H, b)`` with C(w) = y'y + w'Hw - 2 b'w."""
        H = self.F.T @ self.F
        b = self.F.T @ self.y - self.sigma2 * self.traces
        return H, b


def criterion_value(mp: MallowsProblem, w) -> float:
    w = np.asarray(w, dtype=float).ravel()
    if w.size != mp.M:
        raise ValueError(f"weight length {w.size} != number of candidates {mp.M}")
    r = mp.y - mp.F @ w
    return float(r @ r + 2.0 * mp.sigma2 * (mp.traces @ w))


def solve_weights(mp: MallowsProblem, tol: float = 1e-10) -> np.ndarray:
    if not (np.all(np.isfinite(mp.F)) and np.all(np.isfinite(mp.y)) and np.all(np.isfinite(mp.traces))):
        raise NonFiniteInput("Mallows problem has non-finite entries")
    if not math.isfinite(mp.sigma2):
        raise NonFiniteInput("sigma2 is not finite")
    H, b = mp.quadratic()
    return simplex_qp(H, b, tol=tol)


def largest_fit_index(fits: Sequence[FittedCandidate]) -> int:
    """Candidate with the most covariates; ties go to the larger hat trace."""
    keys = [(f.model.p_m, f.hat_trace) for f in fits]
    return max(range(len(fits)), key=lambda k: (keys[k], -k))


def feasible_problem(fits: Sequence[FittedCandidate], cm_largest=None, sigma2: Optional[float] = None) -> MallowsProblem:
    """Assemble the Mallows problem from candidate fits.

    Without a known ``sigma2`` the variance is estimated from the largest
    candidate with ``n - tr(P)`` degrees of freedom.
    """
    if not fits:
        raise ValueError("no fitted candidates")
    y = fits[0].dataset.response
    F = np.column_stack([f.fitted for f in fits])
    traces = np.array([f.hat_trace for f in fits])
    if sigma2 is None:
        if cm_largest is None:
            k = largest_fit_index(fits)
        else:
            k = next(i for i, f in enumerate(fits) if f.model == cm_largest)
        sigma2 = sigma2_from_fit(fits[k])
    return MallowsProblem(F, y, traces, sigma2)


class ICScores(NamedTuple):
    aic: float
    bic: float
    aicc: float
    zero_variance: bool = False


def info_criteria(fit: FittedCandidate) -> ICScores:
    """AIC, BIC and AICc of one candidate, with sigma2 = RSS / n.

    A perfect fit has undefined log-variance and scores ``-inf`` (flagged);
    AICc is ``+inf`` once ``tr(P) >= n - 2``.
    """
    n = fit.dataset.n
    tr = fit.hat_trace
    r = fit.residuals
    s2 = float(r @ r) / n
    return ic_from_stats(s2, tr, n)


def ic_from_stats(s2: float, tr: float, n: int) -> ICScores:
    if s2 <= 0:
        return ICScores(-math.inf, -math.inf, -math.inf, True)
    ls = math.log(s2)
    aic = ls + 2.0 * tr / n
    bic = ls + tr * math.log(n) / n
    denom = n - tr - 2.0
    aicc = ls + (n + tr) / denom if denom > 0 else math.inf
    return ICScores(aic, bic, aicc)


def select_index(scores) -> int:
    """Argmin; ties go to the smaller model index."""
    scores = np.asarray(scores, dtype=float)
    if np.all(np.isnan(scores)):
        raise ValueError("no usable scores")
    return int(np.nanargmin(scores))


def one_hot(k: int, M: int) -> np.ndarray:
    w = np.zeros(M)
    w[k] = 1.0
    return w


def smoothed_weights(scores, kind: str = "saic") -> np.ndarray:
    """``exp(-score/2)`` normalised over candidates.

    ``kind`` only labels the criterion the scores came from.
    """
    if kind not in ("saic", "sbic"):
        raise ValueError(f"kind must be 'saic' or 'sbic', got {kind!r}")
    s = np.asarray(scores, dtype=float).ravel()
    if np.any(np.isnan(s)):
        raise ValueError("scores contain NaN")
    if np.all(s == np.inf):
        raise ValueError("all scores are +inf")
    if np.any(s == -np.inf):
        w = (s == -np.inf).astype(float)
        return w / w.sum()
    e = np.exp(-0.5 * (s - s.min()))
    return e / e.sum()


def tau_sum(w, flags) -> float:
    """Total weight on flagged (quasi-correct) candidates."""
    w = np.asarray(w, dtype=float).ravel()
    flags = np.asarray(flags, dtype=bool).ravel()
    if w.size != flags.size:
        raise ValueError(f"{w.size} weights vs {flags.size} flags")
    return float(np.clip(w[flags].sum(), 0.0, 1.0))


def combine_predictions(w, per_candidate_predictions) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    P = np.asarray(per_candidate_predictions, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[1] != w.size:
        raise ValueError(f"predictions have {P.shape[1]} columns for {w.size} weights")
    return P @ w


def method_weights(fits: Sequence[FittedCandidate], method: str, sigma2: Optional[float] = None, tol: float = 1e-10):
    """Weights for one of the SVCM-candidate methods.

    Selection methods (aic, bic, aicc) return a unit vector. ``sigma2`` is
    required for ``svmma_known_sigma`` and ignored by the others.
    """
    M = len(fits)
    if method == "svmma":
        return solve_weights(feasible_problem(fits), tol)
    if method == "svmma_known_sigma":
        if sigma2 is None:
            raise ValueError("svmma_known_sigma needs the true sigma2")
        return solve_weights(feasible_problem(fits, sigma2=sigma2), tol)
    ics = [info_criteria(f) for f in fits]
    if method == "saic":
        return smoothed_weights([s.aic for s in ics], "saic")
    if method == "sbic":
        return smoothed_weights([s.bic for s in ics], "sbic")
    if method in ("aic", "bic", "aicc"):
        return one_hot(select_index([getattr(s, method) for s in ics]), M)
    raise ValueError(f"unknown method {method!r}; expected one of {SVCM_METHODS}")


def weight_rows(fits: Sequence[FittedCandidate], w, column_names=None, threshold: float = 0.0, mp: Optional[MallowsProblem] = None):
    """JSON-ready rows (model, columns, weight, trace, bandwidth) for weights above ``threshold``.

    Rows are sorted by decreasing weight.
    """
    w = np.asarray(w, dtype=float)
    crit = criterion_value(mp, w) if mp is not None else None
    rows = []
    for k in np.argsort(-w, kind="stable"):
        if w[k] <= threshold:
            continue
        m = fits[k].model
        row = {
            "model": int(k),
            "columns": list(m.column_indices),
            "weight": float(w[k]),
            "hat_trace": fits[k].hat_trace,
            "bandwidth": m.bandwidth,
        }
        if column_names is not None:
            row["names"] = [column_names[c] for c in m.column_indices]
        if crit is not None:
            row["criterion"] = crit
            row["criterion_per_n"] = crit / mp.n
        rows.append(row)
    return rows


def averaged_coefficients(fits: Sequence[FittedCandidate], w, locations, p: int) -> np.ndarray:
    """Weighted coefficient field sum_m w_m Pi_m' beta_m(s), shape (k, p).

    Candidates with zero weight are skipped.
    """
    locations = np.asarray(locations, dtype=float).reshape(-1, 2)
    out = np.zeros((locations.shape[0], p))
    for wm, f in zip(np.asarray(w, dtype=float), fits):
        if wm == 0:
            continue
        out[:, list(f.model.column_indices)] += wm * f.coefficients_at(locations)
    return out
