import itertools
import json

import pytest

from svmma.candidates import (
    CandidateSet,
    all_subsets,
    nested_count_rule,
    nested_covariates,
    nested_set,
    quasi_correct_flags,
)
from svmma.gwr import CandidateModel


def _idx(cs):
    return [m.column_indices for m in cs.models]


def test_nested_count_rule():
    assert nested_count_rule(100) == 13
    assert nested_count_rule(225) == 18
    assert nested_count_rule(27) == 9
    assert nested_count_rule(1) == 3
    # brute-force floor(3 n^(1/3)) via exact integer comparison
    for n in range(1, 3000):
        m = nested_count_rule(n)
        assert m**3 <= 27 * n < (m + 1) ** 3


def test_nested_set():
    assert _idx(nested_set(5, 3)) == [(0,), (0, 1), (0, 1, 2)]
    assert _idx(nested_set(5, 1)) == [(0,)]
    assert _idx(nested_set(4, 4))[-1] == (0, 1, 2, 3)
    with pytest.raises(ValueError):
        nested_set(3, 4)
    ids = _idx(nested_set(8, 8))
    for a, b in zip(ids, ids[1:]):
        assert set(a) < set(b)


def test_nested_covariates_keeps_intercept():
    assert _idx(nested_covariates(3, 2)) == [(0, 1), (0, 1, 2)]
    assert _idx(nested_covariates(3, 2, intercept=False)) == [(0,), (0, 1)]
    with pytest.raises(ValueError):
        nested_covariates(3, 5)


def test_all_subsets():
    assert len(all_subsets(6)) == 63
    assert len(all_subsets(1)) == 1
    assert _idx(all_subsets(2)) == [(0,), (1,), (0, 1)]
    for bad in (0, 21):
        with pytest.raises(ValueError):
            all_subsets(bad)
    cs = all_subsets(3, offset=1, always=(0,))
    assert all(m.column_indices[0] == 0 for m in cs.models)
    assert _idx(cs)[:3] == [(0, 1), (0, 2), (0, 3)]


@pytest.mark.parametrize("p", range(1, 7))
def test_all_subsets_is_a_bijection(p):
    ids = _idx(all_subsets(p))
    assert len(ids) == 2**p - 1 == len(set(ids))
    expected = {c for k in range(1, p + 1) for c in itertools.combinations(range(p), k)}
    assert set(ids) == expected


def test_quasi_correct_flags():
    cs = all_subsets(6)
    assert sum(quasi_correct_flags(cs, (0, 1, 2, 3))) == 4
    assert all(quasi_correct_flags(cs, ()))
    flags = quasi_correct_flags(cs, range(6))
    assert sum(flags) == 1 and flags[-1]
    for p in range(1, 7):
        cs = all_subsets(p)
        for k in range(1, p + 1):
            for support in itertools.combinations(range(p), k):
                assert sum(quasi_correct_flags(cs, support)) == 2 ** (p - k)


def test_candidate_set_json_and_checks():
    cs = all_subsets(2).with_flags((False, True, True))
    cs = cs.with_models([m.with_bandwidth(0.5) for m in cs.models])
    rows = cs.to_json(["a", "b"])
    json.dumps(rows)
    assert rows[2]["bandwidth"] == 0.5 and rows[1]["quasi_correct"] is True
    with pytest.raises(ValueError):
        CandidateSet(())
    with pytest.raises(ValueError):
        CandidateSet((CandidateModel((0,)),), quasi_correct=(True, False))
