"""Candidate-model sets: nested, all-subsets, and quasi-correct flags."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .gwr import CandidateModel


@dataclass(frozen=True)
class CandidateSet:
    models: tuple
    quasi_correct: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if not self.models:
            raise ValueError("candidate set is empty")
        if self.quasi_correct is not None:
            flags = tuple(bool(f) for f in self.quasi_correct)
            if len(flags) != len(self.models):
                raise ValueError("one quasi-correct flag per model is required")
            object.__setattr__(self, "quasi_correct", flags)

    def __len__(self):
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, k):
        return self.models[k]

    def with_models(self, models) -> "CandidateSet":
        return CandidateSet(tuple(models), self.quasi_correct)

    def with_flags(self, flags) -> "CandidateSet":
        return CandidateSet(self.models, tuple(flags))

    def largest_index(self) -> int:
        """Index of the model with the most covariates (first one on ties)."""
        sizes = [m.p_m for m in self.models]
        return sizes.index(max(sizes))

    def to_json(self, column_names: Optional[Sequence[str]] = None) -> list:
        rows = []
        for k, m in enumerate(self.models):
            row = {
                "model": k,
                "columns": list(m.column_indices),
                "kernel": m.kernel,
                "q": m.q,
                "bandwidth": m.bandwidth,
            }
            if column_names is not None:
                row["names"] = [column_names[c] for c in m.column_indices]
            if self.quasi_correct is not None:
                row["quasi_correct"] = self.quasi_correct[k]
            rows.append(row)
        return rows


def nested_count_rule(n: int) -> int:
    """Largest integer M with M <= 3 n^(1/3), i.e. M^3 <= 27 n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = int(3 * round(n ** (1 / 3), 12))
    while m**3 > 27 * n:
        m -= 1
    while (m + 1) ** 3 <= 27 * n:
        m += 1
    return m


def nested_set(p_total: int, M: int, kernel: str = "gaussian", q: float = 2.0) -> CandidateSet:
    """Model m uses the first m covariate columns, m = 1..M."""
    if not 1 <= M <= p_total:
        raise ValueError(f"need 1 <= M <= p_total, got M={M}, p_total={p_total}")
    return CandidateSet(tuple(CandidateModel(tuple(range(m)), kernel, q) for m in range(1, M + 1)))


def nested_covariates(
    p: int, M: int, kernel: str = "gaussian", q: float = 2.0, intercept: bool = True
) -> CandidateSet:
    """Model m uses the first m explanatory columns, m = 1..M.

    With ``intercept`` the explanatory columns start at 1 and every model
    also carries column 0, so each candidate has at least one covariate.
    """
    if not 1 <= M <= p:
        raise ValueError(f"nested:M needs 1 <= M <= p = {p}, got M={M}")
    off = int(intercept)
    return CandidateSet(tuple(CandidateModel(tuple(range(m + off)), kernel, q) for m in range(1, M + 1)))


def all_subsets(
    p: int, kernel: str = "gaussian", q: float = 2.0, offset: int = 0, always: Sequence[int] = ()
) -> CandidateSet:
    """Every nonempty subset of ``p`` explanatory columns.

    Ordered by subset size, then lexicographically. Columns are numbered
    from ``offset``; indices in ``always`` (e.g. an intercept at 0) are
    prepended to every model.
    """
    if not 1 <= p <= 20:
        raise ValueError(f"all-subsets enumeration supports 1 <= p <= 20, got {p}")
    cols = range(offset, offset + p)
    models = []
    for size in range(1, p + 1):
        for combo in itertools.combinations(cols, size):
            models.append(CandidateModel(tuple(always) + combo, kernel, q))
    return CandidateSet(tuple(models))


def quasi_correct_flags(cs: CandidateSet, true_support) -> tuple:
    support = set(true_support)
    return tuple(support <= set(m.column_indices) for m in cs.models)
