"""Approximate kernel k-means with rank-restricted Nystrom features."""
from .approx import (
    FeatureMatrix,
    NystromFactors,
    kpca_features,
    nystrom_factors,
    nystrom_from_kernel,
    pinv_root_features,
    power_method_features,
    rank_restricted_approx,
    rank_restricted_features,
    rff_features,
    trace_error_ratio,
)
from .cluster import Clustering, kernel_objective, kmeans, linear_objective, lloyd
from .evaluation import brute_force_kernel_kmeans, brute_force_kmeans, nmi, pcp_check
from .io import ingest
from .kernel import DataMatrix, KernelSpec, kernel_columns, kernel_matrix, sigma_heuristic
from .runner import RunConfig, compare, run, sweep
from .sketch import SketchPlan, build_sketch
from .spectral import DegreeFailure, spectral_exact, spectral_nystrom

__all__ = [
    "Clustering", "DataMatrix", "DegreeFailure", "FeatureMatrix", "KernelSpec", "NystromFactors",
    "RunConfig", "SketchPlan", "brute_force_kernel_kmeans", "brute_force_kmeans", "build_sketch",
    "compare", "ingest", "kernel_columns", "kernel_matrix", "kernel_objective", "kmeans",
    "kpca_features", "linear_objective", "lloyd", "nmi", "nystrom_factors", "nystrom_from_kernel",
    "pcp_check", "pinv_root_features", "power_method_features", "rank_restricted_approx",
    "rank_restricted_features", "rff_features", "run", "sigma_heuristic", "spectral_exact",
    "spectral_nystrom", "sweep", "trace_error_ratio",
]
