"""Spatial datasets: CSV ingest, variable transforms, splits and grids."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exceptions import DataError

TRANSFORMS = ("identity", "natural_log", "square_root", "standardize")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpatialDataset:
    """n observations with 2-D locations, covariates and a response.

    Parameters
    ----------
    locations : array, shape (n, 2)
    covariates : array, shape (n, p)
        When ``has_intercept`` is true the first column must be identically 1.
    response : array, shape (n,)
    column_names : sequence of str, length p
    has_intercept : bool, default True
        Simulation Design 3 has no intercept column, so the check can be
        switched off.
    """

    locations: np.ndarray
    covariates: np.ndarray
    response: np.ndarray
    column_names: tuple = ()
    has_intercept: bool = True
    response_name: str = "y"
    location_names: tuple = ("s1", "s2")

    def __post_init__(self):
        loc = _frozen(self.locations)
        X = _frozen(self.covariates)
        y = _frozen(self.response).ravel()
        y.setflags(write=False)
        if X.ndim == 1:
            X = _frozen(X[:, None])
        if loc.ndim != 2 or loc.shape[1] != 2:
            raise DataError(f"locations must be (n, 2), got {loc.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise DataError("dataset needs n >= 1 rows and p >= 1 columns")
        if loc.shape[0] != n or y.shape[0] != n:
            raise DataError(
                f"row mismatch: locations {loc.shape[0]}, covariates {n}, response {y.shape[0]}"
            )
        for name, arr in (("locations", loc), ("covariates", X), ("response", y)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
        if self.has_intercept and not np.all(X[:, 0] == 1.0):
            raise DataError("first covariate column must be the intercept (all ones)")
        names = tuple(self.column_names) or tuple(f"x{k + 1}" for k in range(p))
        if len(names) != p:
            raise DataError(f"{len(names)} column names for {p} columns")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "location_names", tuple(self.location_names))

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def subset(self, rows) -> "SpatialDataset":
        rows = np.asarray(rows, dtype=int)
        return SpatialDataset(
            self.locations[rows],
            self.covariates[rows],
            self.response[rows],
            self.column_names,
            self.has_intercept,
            self.response_name,
            self.location_names,
        )

    def with_response(self, y) -> "SpatialDataset":
        return SpatialDataset(
            self.locations,
            self.covariates,
            y,
            self.column_names,
            self.has_intercept,
            self.response_name,
            self.location_names,
        )


def load_csv(
    path,
    location_columns: Sequence[str],
    response_column: str,
    covariate_columns: Sequence[str],
    add_intercept: bool = True,
) -> SpatialDataset:
    """Read a comma-separated file with a header row into a dataset.

    Only the referenced columns are parsed; each must hold a finite real in
    every row. Row order is preserved. With ``add_intercept`` a column named
    ``"intercept"`` is prepended to the covariates.
    """
    path = Path(path)
    if len(location_columns) != 2:
        raise DataError("exactly two location columns are required")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        seen = set()
        dupes = sorted({h for h in header if h in seen or seen.add(h)})
        if dupes:
            raise DataError(f"{path}: duplicate column names {dupes}")
        wanted = list(location_columns) + [response_column] + list(covariate_columns)
        missing = [c for c in wanted if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(map(repr, missing))}")
        col = {h: j for j, h in enumerate(header)}
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            vals = []
            for name in wanted:
                j = col[name]
                cell = rec[j].strip() if j < len(rec) else ""
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {name!r}: cannot parse {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {lineno}, column {name!r}: non-finite {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    X = arr[:, 3:]
    names = list(covariate_columns)
    if add_intercept:
        X = np.column_stack([np.ones(len(arr)), X])
        names = ["intercept"] + names
    return SpatialDataset(
        arr[:, :2],
        X,
        arr[:, 2],
        tuple(names),
        has_intercept=add_intercept,
        response_name=response_column,
        location_names=tuple(location_columns),
    )


def write_csv(ds: SpatialDataset, path) -> None:
    """Write ``ds`` back out with the same header convention as :func:`load_csv`.

    The intercept column is omitted, so reading the file with
    ``add_intercept=True`` round-trips.
    """
    cols = list(range(ds.p))
    names = list(ds.column_names)
    if ds.has_intercept:
        cols, names = cols[1:], names[1:]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.location_names) + [ds.response_name] + names)
        for i in range(ds.n):
            w.writerow(
                [repr(float(v)) for v in ds.locations[i]]
                + [repr(float(ds.response[i]))]
                + [repr(float(ds.covariates[i, j])) for j in cols]
            )


@dataclass(frozen=True)
class TransformSpec:
    """Per-column transform actions, keyed by column name.

    The response can be transformed too, under the key ``response``
    (or the dataset's response name). Unlisted columns are left alone.
    """

    actions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        bad = {k: v for k, v in self.actions.items() if v not in TRANSFORMS}
        if bad:
            raise DataError(f"unknown transform(s) {bad}; expected one of {TRANSFORMS}")


def _transform_column(v, action, label):
    if action == "identity":
        return v
    if action == "natural_log":
        if np.any(v <= 0):
            raise DataError(f"natural_log of nonpositive value in {label!r}")
        return np.log(v)
    if action == "square_root":
        if np.any(v < 0):
            raise DataError(f"square_root of negative value in {label!r}")
        return np.sqrt(v)
    sd = np.std(v, ddof=1) if v.size > 1 else 0.0
    if not sd > 0:
        raise DataError(f"cannot standardize constant column {label!r}")
    return (v - v.mean()) / sd


def apply_transforms(ds: SpatialDataset, spec: TransformSpec) -> SpatialDataset:
    known = set(ds.column_names) | {"response", ds.response_name}
    unknown = set(spec.actions) - known
    if unknown:
        raise DataError(f"transform for unknown column(s) {sorted(unknown)}")
    if ds.has_intercept and spec.actions.get(ds.column_names[0], "identity") != "identity":
        raise DataError("the intercept column only accepts the identity transform")
    X = np.array(ds.covariates)
    for j, name in enumerate(ds.column_names):
        X[:, j] = _transform_column(X[:, j], spec.actions.get(name, "identity"), name)
    action = spec.actions.get(ds.response_name, spec.actions.get("response", "identity"))
    y = _transform_column(np.array(ds.response), action, ds.response_name)
    return SpatialDataset(
        ds.locations, X, y, ds.column_names, ds.has_intercept, ds.response_name, ds.location_names
    )


def split_indices(n: int, n0: int, seed: int):
    """Seeded uniform split of ``range(n)`` into sorted train/test index arrays."""
    if not 1 <= n0 < n:
        raise DataError(f"training size n0={n0} must satisfy 1 <= n0 < n={n}")
    rng = np.random.default_rng(seed)
    train = np.sort(rng.choice(n, size=n0, replace=False))
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    return train, np.flatnonzero(mask)


def split_train_test(ds: SpatialDataset, n0: int, seed: int):
    train, test = split_indices(ds.n, n0, seed)
    return ds.subset(train), ds.subset(test)


def unit_square_grid(n: int) -> np.ndarray:
    """Grid points ``(j/k, l/k)``, ``j, l = 1..k`` with ``k = sqrt(n)``, row-major."""
    k = math.isqrt(n) if n >= 0 else -1
    if n < 1 or k * k != n:
        raise DataError(f"n={n} is not a perfect square")
    ticks = np.arange(1, k + 1) / k
    jj, ll = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([jj.ravel(), ll.ravel()])
