"""Moment summaries and the Wasserstein-Bures semi-metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solvers import DiscreteMeasure

__all__ = ["GaussianSummary", "empirical_summary", "sqrtm_psd", "wasserstein_bures"]


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and covariance matrix of a distribution on R^m."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10):
            raise ValueError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))


def _psd_eigh(A: np.ndarray, tol: float = 1e-10):
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.min(initial=0.0) < -tol * scale:
        raise np.linalg.LinAlgError(f"matrix is not PSD (smallest eigenvalue {w.min():.3e})")
    return np.clip(w, 0.0, None), V


def sqrtm_psd(A) -> np.ndarray:
    """Symmetric square root of a PSD matrix; tiny negative eigenvalues are clamped."""
    w, V = _psd_eigh(np.atleast_2d(np.asarray(A, dtype=float)))
    return (V * np.sqrt(w)) @ V.T


def wasserstein_bures(a: GaussianSummary, b: GaussianSummary) -> tuple[float, float]:
    """Closed-form part of the squared 2-Wasserstein distance.

    Returns
    -------
    mean_term : float
        ``||m_a - m_b||^2``
    cov_term : float
        ``Tr(S_a + S_b - 2 (S_b^1/2 S_a S_b^1/2)^1/2)``, the Bures term.
    """
    if a.mean.size != b.mean.size:
        raise ValueError("summaries live in different dimensions")
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    rb = sqrtm_psd(b.covariance)
    inner = rb @ a.covariance @ rb
    w, _ = _psd_eigh(inner)
    cov_term = float(np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * np.sqrt(w).sum())
    return max(mean_term, 0.0), max(cov_term, 0.0)


def empirical_summary(measure: DiscreteMeasure) -> GaussianSummary:
    """Weighted mean and (population-normalised) covariance of a measure."""
    w = measure.weights
    X = measure.points
    mean = w @ X
    D = X - mean
    cov = (D * w[:, None]).T @ D
    return GaussianSummary(mean, 0.5 * (cov + cov.T))
