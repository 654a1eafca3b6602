"""Discrete optimal transport between weighted point clouds.

Ground cost is always the squared Euclidean distance.  Two solvers are
provided: an exact one (network simplex, or the monotone coupling when the
points are one-dimensional) and a log-domain Sinkhorn iteration for the
entropically regularised problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import logsumexp

from . import _netsimplex

__all__ = [
    "ConvergenceError",
    "DiscreteMeasure",
    "TransportPlan",
    "sqeuclidean_cost",
    "transport",
    "solve_exact",
    "solve_sinkhorn",
    "solve_balanced_assignment",
]


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver stops before meeting its tolerance."""


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure on R^m.

    Parameters
    ----------
    points : array-like (n, m) or (n,)
        Atom locations.  A 1-D array is read as n scalar atoms.
    weights : array-like (n,), optional
        Non-negative masses summing to one.  Uniform when omitted.
    """

    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError("points must be a non-empty (n, m) array")
        n = pts.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != (n,):
                raise ValueError(f"expected {n} weights, got {w.shape[0]}")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and non-negative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_samples(cls, samples) -> "DiscreteMeasure":
        """Empirical measure with equal mass on every row of ``samples``."""
        return cls(samples)


@dataclass
class TransportPlan:
    """Coupling between two discrete measures and its transport cost."""

    coupling: np.ndarray
    cost: float
    info: dict = field(default_factory=dict)


def sqeuclidean_cost(x, y) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of ``x`` and ``y``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    C = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * x @ y.T
    np.maximum(C, 0.0, out=C)
    return C


def _check_pair(source: DiscreteMeasure, target: DiscreteMeasure):
    if source.dim != target.dim:
        raise ValueError(f"dimension mismatch: source in R^{source.dim}, target in R^{target.dim}")


def transport(a, b, C, max_iter: int = 100_000_000) -> TransportPlan:
    """Exact transportation LP for explicit marginals and cost matrix.

    ``a`` and ``b`` need not be normalised but must have equal totals.
    Zero-mass atoms are dropped before the solve and restored as zero
    rows/columns of the coupling.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.shape != (a.size, b.size):
        raise ValueError(f"cost matrix shape {C.shape} does not match marginals ({a.size}, {b.size})")
    if not np.all(np.isfinite(C)):
        raise ValueError("ground cost has non-finite entries")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("marginals must be non-negative")
    if not np.isclose(a.sum(), b.sum(), rtol=1e-12, atol=0.0):
        raise ValueError(f"marginal totals differ: {a.sum()!r} vs {b.sum()!r}")
    rows = np.flatnonzero(a > 0)
    cols = np.flatnonzero(b > 0)
    Cs = np.ascontiguousarray(C[np.ix_(rows, cols)])
    P, u, v, status, pivots = _netsimplex.network_simplex(Cs, a[rows], b[cols], max_iter)
    if status == _netsimplex.MAX_ITER_REACHED:
        raise ConvergenceError(f"network simplex hit max_iter={max_iter}")
    if status != _netsimplex.OPTIMAL:
        raise RuntimeError(f"network simplex failed with status {status}")
    full = np.zeros(C.shape)
    full[np.ix_(rows, cols)] = P
    return TransportPlan(full, float((C * full).sum()), {"method": "network_simplex", "pivots": int(pivots)})


@njit(cache=True)
def _northwest(xs, ys, a, b):
    # north-west corner rule on sorted atoms is optimal for convex costs in 1D
    n = a.size + b.size
    ri = np.empty(n, np.int64)
    ci = np.empty(n, np.int64)
    qs = np.empty(n)
    cost = 0.0
    i = j = k = 0
    while i < a.size and j < b.size:
        q = min(a[i], b[j])
        ri[k], ci[k], qs[k] = i, j, q
        k += 1
        cost += q * (xs[i] - ys[j]) ** 2
        a[i] -= q
        b[j] -= q
        if a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return ri[:k], ci[:k], qs[:k], cost


def _monotone_1d(source: DiscreteMeasure, target: DiscreteMeasure) -> TransportPlan:
    xs = source.points[:, 0]
    ys = target.points[:, 0]
    ix = np.argsort(xs, kind="stable")
    iy = np.argsort(ys, kind="stable")
    ri, ci, qs, cost = _northwest(xs[ix], ys[iy], source.weights[ix].copy(), target.weights[iy].copy())
    P = np.zeros((xs.size, ys.size))
    np.add.at(P, (ix[ri], iy[ci]), qs)
    return TransportPlan(P, float(cost), {"method": "monotone_1d"})


def solve_exact(source: DiscreteMeasure, target: DiscreteMeasure, method: str = "auto") -> TransportPlan:
    """Optimal coupling under squared Euclidean ground cost.

    Parameters
    ----------
    source, target : DiscreteMeasure
        Measures on the same space.  Cardinalities may differ.
    method : {"auto", "network_simplex", "monotone"}
        ``auto`` uses the sorted monotone coupling for scalar points and the
        network simplex otherwise.  Both are exact.

    Returns
    -------
    TransportPlan
    """
    _check_pair(source, target)
    if method == "auto":
        method = "monotone" if source.dim == 1 else "network_simplex"
    if method == "monotone":
        if source.dim != 1:
            raise ValueError("monotone coupling requires one-dimensional points")
        return _monotone_1d(source, target)
    if method != "network_simplex":
        raise ValueError(f"unknown method {method!r}")
    C = sqeuclidean_cost(source.points, target.points)
    return transport(source.weights, target.weights, C)


def _sinkhorn_sweep(M, log_a, log_b, f, g, epsilon):
    f = epsilon * (log_a - logsumexp(M / epsilon + g[None, :] / epsilon, axis=1))
    g = epsilon * (log_b - logsumexp(M / epsilon + f[:, None] / epsilon, axis=0))
    return f, g


def solve_sinkhorn(
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    epsilon: float,
    max_iter: int = 10_000,
    tol: float = 1e-9,
    scaling_steps: int = 20,
) -> TransportPlan:
    """Entropic OT by log-domain Sinkhorn iterations.

    The regularisation is annealed geometrically from the largest ground
    cost down to ``epsilon`` (``scaling_steps`` sweeps per intermediate
    level, dual potentials warm-started), then iterated at ``epsilon``
    until the L1 violation of the row marginal drops below ``tol``.  The
    column marginal is exact after every sweep.  The reported cost is
    ``<C, P>`` without the entropy term.

    Raises
    ------
    ConvergenceError
        If ``tol`` is not met within ``max_iter`` sweeps at ``epsilon``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    _check_pair(source, target)
    C = sqeuclidean_cost(source.points, target.points)
    with np.errstate(divide="ignore"):
        log_a = np.log(source.weights)
        log_b = np.log(target.weights)
    f = np.zeros(source.size)
    g = np.zeros(target.size)
    M = -C
    level = float(C.max())
    if scaling_steps > 0:
        while level > 2 * epsilon:
            for _ in range(scaling_steps):
                f, g = _sinkhorn_sweep(M, log_a, log_b, f, g, level)
            level *= 0.5
    history = []
    for it in range(1, max_iter + 1):
        f, g = _sinkhorn_sweep(M, log_a, log_b, f, g, epsilon)
        logP = (M + f[:, None] + g[None, :]) / epsilon
        err = float(np.abs(np.exp(logsumexp(logP, axis=1)) - source.weights).sum())
        history.append(err)
        if err < tol:
            P = np.exp(logP)
            return TransportPlan(
                P, float((C * P).sum()), {"method": "sinkhorn", "iterations": it, "violation": history}
            )
    raise ConvergenceError(
        f"Sinkhorn did not reach tol={tol} in {max_iter} iterations (marginal violation {history[-1]:.3e})"
    )


def solve_balanced_assignment(points, centroids, capacity: int):
    """Assign points to centroids, exactly ``capacity`` points each.

    Solves the transportation LP with uniform marginals, whose vertices
    are integral, so the optimal plan is a pure assignment.

    Returns
    -------
    labels : ndarray of int (n_points,)
        Centroid index for every point.
    cost : float
        Total squared Euclidean assignment cost.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    Z = np.atleast_2d(np.asarray(centroids, dtype=float))
    if X.shape[0] != capacity * Z.shape[0]:
        raise ValueError(
            f"{X.shape[0]} points cannot fill {Z.shape[0]} centroids with capacity {capacity}"
        )
    C = sqeuclidean_cost(X, Z)
    # integer masses keep the simplex arithmetic exact
    plan = transport(np.ones(X.shape[0]), np.full(Z.shape[0], float(capacity)), C)
    labels = plan.coupling.argmax(axis=1)
    if not np.allclose(plan.coupling.max(axis=1), 1.0) or np.any(
        np.bincount(labels, minlength=Z.shape[0]) != capacity
    ):
        raise RuntimeError("balanced assignment LP returned a fractional plan")
    return labels, float(C[np.arange(X.shape[0]), labels].sum())
