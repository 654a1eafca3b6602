"""Marginal input distributions and the ordered input space.

Every family exposes a vectorised ``quantile`` (inverse CDF) so that
uniform design points can be pushed through the inverse transform, plus a
``cdf`` and a JSON round trip.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import ClassVar

import numpy as np
from scipy import special

__all__ = [
    "DistributionSpec",
    "Uniform",
    "DiscreteUniform",
    "Delta",
    "TruncatedNormal",
    "Gamma",
    "LogNormal",
    "KdeData",
    "InputEntry",
    "InputSpace",
    "quantile",
    "kde_fit",
    "silverman_bandwidth",
    "load_observations",
    "spec_from_dict",
    "default_input_space",
]

DIMENSIONS = ("Technical", "Market", "Political", "Finance")
TECHNOLOGIES = ("LS", "SS", "CaO", "Global")


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u < 0) or np.any(u > 1):
        raise ValueError("quantile levels must lie in [0, 1]")
    return u


class DistributionSpec:
    """Base class of the tagged marginal distributions."""

    family: ClassVar[str] = ""
    degenerate: ClassVar[bool] = False

    def quantile(self, u):
        u = _check_u(u)
        out = self._ppf(u)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        raise NotImplementedError

    def _ppf(self, u):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    lo: float
    hi: float
    family: ClassVar[str] = "Uniform"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"Uniform needs lo < hi, got [{self.lo}, {self.hi}]")

    def _ppf(self, u):
        return self.lo + u * (self.hi - self.lo)

    def cdf(self, x):
        return np.clip((np.asarray(x, float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def to_dict(self):
        return {"family": self.family, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class DiscreteUniform(DistributionSpec):
    """Equal mass on an ordered finite value set."""

    values: tuple
    family: ClassVar[str] = "DiscreteUniform"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("DiscreteUniform needs a non-empty value set")
        object.__setattr__(self, "values", vals)

    def _ppf(self, u):
        k = len(self.values)
        idx = np.clip(np.ceil(u * k).astype(int) - 1, 0, k - 1)
        return np.asarray(self.values)[idx]

    def cdf(self, x):
        vals = np.sort(self.values)
        return np.searchsorted(vals, np.asarray(x, float), side="right") / len(vals)

    def to_dict(self):
        return {"family": self.family, "values": list(self.values)}


@dataclass(frozen=True)
class Delta(DistributionSpec):
    point: float
    family: ClassVar[str] = "Delta"
    degenerate: ClassVar[bool] = True

    def _ppf(self, u):
        return np.full(np.shape(u), float(self.point))

    def cdf(self, x):
        return (np.asarray(x, float) >= self.point).astype(float)

    def to_dict(self):
        return {"family": self.family, "point": self.point}


@dataclass(frozen=True)
class TruncatedNormal(DistributionSpec):
    """Normal(mean, sd) restricted to [lo, hi]; ``hi`` may be ``inf``."""

    mean: float
    sd: float
    lo: float = -np.inf
    hi: float = np.inf
    family: ClassVar[str] = "TruncatedNormal"

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("TruncatedNormal needs sd > 0")
        if not self.lo < self.hi:
            raise ValueError("TruncatedNormal needs lo < hi")

    def _ppf(self, u):
        a = (self.lo - self.mean) / self.sd
        b = (self.hi - self.mean) / self.sd
        if a > 0:
            # work in the upper tail to keep precision
            sa, sb = special.ndtr(-a), special.ndtr(-b)
            z = -special.ndtri(sa - u * (sa - sb))
        else:
            fa, fb = special.ndtr(a), special.ndtr(b)
            z = special.ndtri(fa + u * (fb - fa))
        return np.clip(self.mean + self.sd * z, self.lo, self.hi)

    def cdf(self, x):
        a = special.ndtr((self.lo - self.mean) / self.sd)
        b = special.ndtr((self.hi - self.mean) / self.sd)
        z = special.ndtr((np.asarray(x, float) - self.mean) / self.sd)
        return np.clip((z - a) / (b - a), 0.0, 1.0)

    def to_dict(self):
        return {"family": self.family, "mean": self.mean, "sd": self.sd, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Gamma(DistributionSpec):
    """Gamma with shape/rate parameterisation."""

    shape: float
    rate: float
    family: ClassVar[str] = "Gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("Gamma needs shape > 0 and rate > 0")

    def _ppf(self, u):
        return special.gammaincinv(self.shape, u) / self.rate

    def cdf(self, x):
        return special.gammainc(self.shape, np.clip(np.asarray(x, float), 0, None) * self.rate)

    def to_dict(self):
        return {"family": self.family, "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class LogNormal(DistributionSpec):
    """exp(N(mu_log, sd_log^2))."""

    mu_log: float
    sd_log: float
    family: ClassVar[str] = "LogNormal"

    def __post_init__(self):
        if not self.sd_log > 0:
            raise ValueError("LogNormal needs sd_log > 0")

    def _ppf(self, u):
        return np.exp(self.mu_log + self.sd_log * special.ndtri(u))

    def cdf(self, x):
        x = np.asarray(x, float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, special.ndtr((np.log(np.where(x > 0, x, 1)) - self.mu_log) / self.sd_log), 0.0)

    def to_dict(self):
        return {"family": self.family, "mu_log": self.mu_log, "sd_log": self.sd_log}


def silverman_bandwidth(data) -> float:
    """Silverman's rule of thumb, ``0.9 min(sd, IQR/1.34) n^(-1/5)``."""
    x = np.asarray(data, dtype=float)
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    h = 0.9 * spread * x.size ** (-0.2)
    if h <= 0:
        # constant data: fall back to a narrow kernel around the common value
        h = 1e-3 * max(abs(float(x.mean())), 1.0)
    return float(h)


@dataclass(frozen=True)
class KdeData(DistributionSpec):
    """Gaussian-kernel density over observations, optionally truncated below."""

    observations: tuple
    bandwidth: float
    lower: float | None = None
    family: ClassVar[str] = "KdeData"

    def __post_init__(self):
        obs = tuple(float(v) for v in self.observations)
        if len(obs) < 5:
            raise ValueError(f"KdeData needs at least 5 observations, got {len(obs)}")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "observations", obs)

    def _raw_cdf(self, x):
        obs = np.asarray(self.observations)
        x = np.asarray(x, float)
        return special.ndtr((x[..., None] - obs) / self.bandwidth).mean(axis=-1)

    def cdf(self, x):
        x = np.asarray(x, float)
        if self.lower is None:
            return self._raw_cdf(x)
        f0 = self._raw_cdf(self.lower)
        return np.where(x < self.lower, 0.0, (self._raw_cdf(x) - f0) / (1.0 - f0))

    def _ppf(self, u):
        obs = np.asarray(self.observations)
        lo = obs.min() - 12 * self.bandwidth
        if self.lower is not None:
            lo = max(lo, self.lower)
        hi = obs.max() + 12 * self.bandwidth
        u = np.asarray(u, float)
        a = np.full(u.shape, lo)
        b = np.full(u.shape, hi)
        for _ in range(64):
            mid = 0.5 * (a + b)
            below = self.cdf(mid) < u
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        return 0.5 * (a + b)

    def to_dict(self):
        return {
            "family": self.family,
            "observations": list(self.observations),
            "bandwidth": self.bandwidth,
            "lower": self.lower,
        }


def kde_fit(data, lower_truncation: float | None = None) -> KdeData:
    """Fit a Gaussian KDE, dropping observations below ``lower_truncation``.

    The bandwidth is Silverman's rule on the retained data; the quantile of
    the result inverts the KDE CDF renormalised over ``[lower_truncation, inf)``.
    """
    x = np.asarray(data, dtype=float).ravel()
    if lower_truncation is not None:
        x = x[x >= lower_truncation]
    if x.size < 5:
        raise ValueError(f"need at least 5 observations after truncation, have {x.size}")
    return KdeData(tuple(x), silverman_bandwidth(x), lower_truncation)


def quantile(spec: DistributionSpec, u):
    """Inverse CDF of ``spec`` at level(s) ``u`` in [0, 1]."""
    return spec.quantile(u)


_FAMILIES = {cls.family: cls for cls in (Uniform, DiscreteUniform, Delta, TruncatedNormal, Gamma, LogNormal, KdeData)}


def _num(v):
    if v is None:
        return None
    if isinstance(v, str):
        return float(v.replace("Infinity", "inf"))
    return float(v)


def spec_from_dict(d: dict) -> DistributionSpec:
    d = dict(d)
    family = d.pop("family")
    if family not in _FAMILIES:
        raise ValueError(f"unknown distribution family {family!r}")
    if family == "DiscreteUniform":
        return DiscreteUniform(tuple(d["values"]))
    if family == "KdeData":
        obs = d["observations"]
        if "bandwidth" in d and d["bandwidth"] is not None:
            return KdeData(tuple(obs), float(d["bandwidth"]), _num(d.get("lower")))
        return kde_fit(obs, _num(d.get("lower")))
    return _FAMILIES[family](**{k: _num(v) for k, v in d.items()})


def load_observations(path) -> np.ndarray:
    """Read a one-column CSV with header ``value``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "value" not in reader.fieldnames:
            raise ValueError(f"{path}: expected a 'value' column")
        return np.array([float(row["value"]) for row in reader])


@dataclass(frozen=True)
class InputEntry:
    name: str
    spec: DistributionSpec
    dimension: str
    technology: str
    label: str = ""

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"{self.name}: dimension must be one of {DIMENSIONS}")
        if self.technology not in TECHNOLOGIES:
            raise ValueError(f"{self.name}: technology must be one of {TECHNOLOGIES}")
        if not self.label:
            object.__setattr__(self, "label", self.name)


@dataclass
class InputSpace:
    """Ordered collection of uncertain inputs; order fixes sample columns."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        names = [e.name for e in self.entries]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise ValueError(f"duplicate input names: {sorted(dup)}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, key):
        if isinstance(key, str):
            for e in self.entries:
                if e.name == key:
                    return e
            raise KeyError(key)
        return self.entries[key]

    @property
    def names(self) -> list:
        return [e.name for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "schema": "dacgsa.input_space/1",
            "inputs": [
                {
                    "name": e.name,
                    "label": e.label,
                    "dimension": e.dimension,
                    "technology": e.technology,
                    "distribution": e.spec.to_dict(),
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "InputSpace":
        entries = []
        for item in d["inputs"]:
            dist = dict(item["distribution"])
            if dist.get("family") == "KdeData" and "csv" in dist:
                path = Path(dist.pop("csv"))
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                dist["observations"] = load_observations(path).tolist()
            entries.append(
                InputEntry(item["name"], spec_from_dict(dist), item["dimension"], item["technology"], item.get("label", ""))
            )
        return cls(entries)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, allow_nan=True))

    @classmethod
    def load(cls, path) -> "InputSpace":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)


def default_input_space() -> InputSpace:
    """The bundled 38-input parameterisation of the DACCS experiment."""
    text = resources.files("dacgsa.daccs").joinpath("data/input_space.json").read_text()
    return InputSpace.from_dict(json.loads(text))
