"""Seeded substreams, Latin Hypercube designs and Sobol points."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .dist import InputSpace

__all__ = ["SampleMatrix", "substream", "lhs_sample", "sobol_points", "MAX_SOBOL_DIM"]

MAX_SOBOL_DIM = 64


def substream(seed: int, *keys) -> np.random.Generator:
    """Philox generator keyed by the experiment seed and a hashed label.

    The same ``(seed, keys)`` always yields the same stream, independently of
    which other streams have been drawn.
    """
    label = "/".join(str(k) for k in keys).encode()
    digest = int.from_bytes(hashlib.blake2b(label, digest_size=16).digest(), "little")
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, digest])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SampleMatrix:
    """N x p input realisations together with their quantile-space twin.

    ``degenerate`` flags columns drawn from point masses; they carry no
    information and are skipped when clustering.
    """

    values: np.ndarray
    quantiles: np.ndarray
    column_names: list
    degenerate: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.quantiles = np.asarray(self.quantiles, dtype=float)
        if self.values.shape != self.quantiles.shape or self.values.ndim != 2:
            raise ValueError("values and quantiles must be N x p arrays of equal shape")
        if np.any(self.quantiles < 0) or np.any(self.quantiles > 1):
            raise ValueError("quantiles must lie in [0, 1]")
        if len(self.column_names) != self.values.shape[1]:
            raise ValueError("one column name per column required")
        self.column_names = list(self.column_names)
        if self.degenerate is None:
            self.degenerate = np.zeros(self.values.shape[1], dtype=bool)
        self.degenerate = np.asarray(self.degenerate, dtype=bool)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def rows(self, idx) -> "SampleMatrix":
        return SampleMatrix(self.values[idx], self.quantiles[idx], self.column_names, self.degenerate)


def lhs_sample(input_space: InputSpace, n: int, designs: int = 1, seed: int = 0) -> SampleMatrix:
    """Stack ``designs`` independent Latin Hypercube designs of ``n/designs`` points.

    Within a design every column places exactly one quantile level in each
    of the ``n/designs`` equal-width bins of [0, 1].  Column ``c`` of design
    ``d`` draws from its own substream keyed by ``(column name, d)``.
    """
    if designs < 1 or n % designs:
        raise ValueError(f"n={n} is not divisible by designs={designs}")
    size = n // designs
    p = len(input_space)
    U = np.empty((n, p))
    for d in range(designs):
        for c, entry in enumerate(input_space):
            rng = substream(seed, "lhs", entry.name, d)
            strata = rng.permutation(size)
            U[d * size:(d + 1) * size, c] = (strata + rng.random(size)) / size
    V = np.column_stack([entry.spec.quantile(U[:, c]) for c, entry in enumerate(input_space)]) if p else U.copy()
    degenerate = np.array([entry.spec.degenerate for entry in input_space], dtype=bool)
    return SampleMatrix(V, U, input_space.names, degenerate)


def sobol_points(n: int, dim: int) -> np.ndarray:
    """First ``n`` points of the unscrambled Sobol sequence in [0, 1]^dim.

    The all-zero origin is skipped, so the sequence starts at the all-0.5
    point.  Direction numbers are those of Joe and Kuo.
    """
    if not 1 <= dim <= MAX_SOBOL_DIM:
        raise ValueError(f"Sobol dimension must be in [1, {MAX_SOBOL_DIM}], got {dim}")
    if n < 0:
        raise ValueError("n must be non-negative")
    engine = qmc.Sobol(d=dim, scramble=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        pts = engine.random(n + 1)
    return pts[1:]
