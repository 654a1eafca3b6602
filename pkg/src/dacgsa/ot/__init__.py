"""Discrete optimal transport and the Wasserstein-Bures semi-metric."""

from .gaussian import GaussianSummary, empirical_summary, sqrtm_psd, wasserstein_bures
from .solvers import (
    ConvergenceError,
    DiscreteMeasure,
    TransportPlan,
    solve_balanced_assignment,
    solve_exact,
    solve_sinkhorn,
    sqeuclidean_cost,
    transport,
)

__all__ = [
    "ConvergenceError",
    "DiscreteMeasure",
    "GaussianSummary",
    "TransportPlan",
    "empirical_summary",
    "solve_balanced_assignment",
    "solve_exact",
    "solve_sinkhorn",
    "sqeuclidean_cost",
    "sqrtm_psd",
    "transport",
    "wasserstein_bures",
]
