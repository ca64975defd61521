import numpy as np
import pytest

from svmma.data import SpatialDataset


def make_dataset(n=40, p=3, seed=0, intercept=True, noise=0.5):
    """Random locations in the unit square with a smooth varying-coefficient truth."""
    rng = np.random.default_rng(seed)
    s = rng.uniform(size=(n, 2))
    Z = rng.standard_normal((n, p - 1 if intercept else p))
    X = np.column_stack([np.ones(n), Z]) if intercept else Z
    beta = np.column_stack([1 + s[:, 0] + k * s[:, 1] for k in range(X.shape[1])])
    y = np.sum(X * beta, axis=1) + noise * rng.standard_normal(n)
    return SpatialDataset(s, X, y, has_intercept=intercept)


def simplex_grid(M, step):
    """All points of the simplex on a lattice of spacing ``step`` (M <= 4)."""
    k = int(round(1 / step))
    axes = np.meshgrid(*[np.arange(k + 1)] * (M - 1), indexing="ij")
    C = np.stack([a.ravel() for a in axes], axis=1) if M > 1 else np.zeros((1, 0), dtype=int)
    C = C[C.sum(axis=1) <= k]
    return np.column_stack([C, k - C.sum(axis=1)]).astype(float) / k


def grid_min(H, b, step):
    W = simplex_grid(H.shape[0], step)
    vals = np.sum((W @ H) * W, axis=1) - 2 * W @ b
    return float(vals.min())


@pytest.fixture
def small_ds():
    return make_dataset()


ACCEPTANCE_LINES = []


def record_criterion(label, passed, detail):
    """Log one acceptance line; shown again in the terminal summary.

    ``passed=None`` marks a criterion that could not run.
    """
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    line = f"[{status}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
