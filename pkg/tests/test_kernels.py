import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svmma.kernels import distance, kernel_eval, pairwise_distances, scaled_kernel, weight_diagonal

coord = st.floats(-100, 100, allow_nan=False)
point = st.tuples(coord, coord)


def test_distance_examples():
    assert distance((0, 0), (3, 4), 2) == 5
    assert distance((0, 0), (3, 4), 1) == 7
    assert distance((1.5, -2), (1.5, -2), 3) == 0
    with pytest.raises(ValueError):
        distance((0, 0), (1, 1), 0.5)


@settings(max_examples=200, deadline=None)
@given(a=point, b=point, c=point, q=st.floats(1, 8))
def test_triangle_inequality_and_symmetry(a, b, c, q):
    ab, bc, ac = distance(a, b, q), distance(b, c, q), distance(a, c, q)
    assert ac <= ab + bc + 1e-9 * (1 + ab + bc)
    assert ab == pytest.approx(distance(b, a, q), rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(q=st.sampled_from([1.0, 1.5, 2.0, 3.0]), seed=st.integers(0, 1000))
def test_pairwise_matches_pointwise(q, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.uniform(size=(4, 2)), rng.uniform(size=(3, 2))
    D = pairwise_distances(A, B, q)
    for i in range(4):
        for j in range(3):
            assert D[i, j] == pytest.approx(distance(A[i], B[j], q), rel=1e-12)


def test_kernel_values():
    assert kernel_eval("bisquare", 0.0) == 1.0
    assert kernel_eval("bisquare", 0.5) == 0.5625
    assert kernel_eval("bisquare", 1.5) == 0.0
    assert kernel_eval("gaussian", 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    with pytest.raises(ValueError):
        kernel_eval("triangle", 0.1)


def test_scaled_kernel_values():
    assert scaled_kernel("bisquare", 2.0, 1.0) == 0.140625
    assert scaled_kernel("bisquare", 1.0, 2.0) == 0.0
    assert scaled_kernel("gaussian", 1.0, 0.0) == pytest.approx(1 / (2 * math.pi))
    with pytest.raises(ValueError):
        scaled_kernel("gaussian", 0.0, 1.0)


@pytest.mark.parametrize("kind", ["gaussian", "bisquare"])
def test_kernel_nonnegative_and_nonincreasing(kind):
    r = np.linspace(0, 3, 301)
    k = kernel_eval(kind, r)
    assert np.all(k >= 0)
    assert np.all(np.diff(k) <= 0)


def test_weight_diagonal_examples():
    rng = np.random.default_rng(0)
    loc = rng.uniform(size=(20, 2))
    w = weight_diagonal(loc, loc[0], "gaussian", 0.3)
    assert np.argmax(w) == 0
    D = pairwise_distances(loc)
    hmin = D[D > 0].min()
    w = weight_diagonal(loc, loc[3], "bisquare", 0.9 * hmin)
    assert np.count_nonzero(w) == 1 and w[3] > 0
    same = np.tile([0.2, 0.7], (5, 1))
    w = weight_diagonal(same, np.array([0.0, 0.0]), "gaussian", 0.5)
    assert np.all(w == w[0])


@settings(max_examples=50, deadline=None)
@given(c=st.floats(1e-3, 1e3), h=st.floats(0.05, 5), kind=st.sampled_from(["gaussian", "bisquare"]))
def test_kernel_scale_multiplies_weights(c, h, kind):
    loc = np.random.default_rng(1).uniform(size=(15, 2))
    s = np.array([0.4, 0.6])
    np.testing.assert_allclose(weight_diagonal(loc, s, kind, h, scale=c), c * weight_diagonal(loc, s, kind, h),
                               rtol=1e-14, atol=0)
