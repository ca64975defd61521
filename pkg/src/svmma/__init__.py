"""Model averaging over spatially varying coefficient (local-constant GWR) candidates."""

__version__ = "0.1.0"

from .candidates import CandidateSet, all_subsets, nested_covariates, nested_set
from .data import SpatialDataset, TransformSpec, apply_transforms, load_csv, split_train_test
from .estimator import LocalConstantRegressor, SVMMARegressor
from .exceptions import DataError, DegenerateDof, NoConvergence, SingularLocalFit, SVMMAError
from .gwr import CandidateModel, FittedCandidate, fit_candidate, fit_candidates, loocv_bandwidth

__all__ = [
    "CandidateModel",
    "CandidateSet",
    "DataError",
    "DegenerateDof",
    "FittedCandidate",
    "LocalConstantRegressor",
    "NoConvergence",
    "SVMMAError",
    "SVMMARegressor",
    "SingularLocalFit",
    "SpatialDataset",
    "TransformSpec",
    "all_subsets",
    "apply_transforms",
    "fit_candidate",
    "fit_candidates",
    "load_csv",
    "loocv_bandwidth",
    "nested_covariates",
    "nested_set",
    "split_train_test",
]
