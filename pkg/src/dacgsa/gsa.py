"""Optimal-transport sensitivity indices from given input/output samples.

For input X_i the sample is split into cells by the rank of X_i (or by its
distinct values when it takes few of them).  In each cell the conditional
empirical output measure is compared to the full empirical output measure
by the squared 2-Wasserstein cost; the cell-mass weighted mean of these
local separations, divided by twice the total output variance, is the
index.  Outputs are standardised per dimension first.

Each local separation splits into a mean-shift part, a covariance part
(together the Wasserstein-Bures value of the two moment summaries) and a
non-negative higher-moment residual.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ot import DiscreteMeasure, empirical_summary, solve_exact, solve_sinkhorn, sqeuclidean_cost, wasserstein_bures
from .sampling import SampleMatrix, substream

__all__ = [
    "ZeroVarianceError",
    "CellUnderflowError",
    "IoSample",
    "LocalSeparations",
    "IndexEntry",
    "SensitivityReport",
    "default_partitions",
    "partition_cells",
    "estimate_index",
    "local_separations",
    "dummy_threshold",
    "bootstrap_ci",
    "sensitivity_report",
    "rank_inputs",
]

REPORT_SCHEMA = "dacgsa.sensitivity_report/1"
SOLVERS = ("exact", "sinkhorn", "wb_only", "wb")  # "wb" is shorthand for "wb_only"
MIN_CELL = 5


class ZeroVarianceError(ValueError):
    """All outputs are identical, so the index is undefined."""


class CellUnderflowError(ValueError):
    """A partition cell holds too few points for a conditional measure."""


@dataclass
class IoSample:
    """Paired inputs and outputs; rows with ``valid == False`` are ignored."""

    inputs: SampleMatrix
    outputs: np.ndarray
    valid: np.ndarray = None
    output_names: list = None

    def __post_init__(self):
        Y = np.asarray(self.outputs, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2 or Y.shape[1] < 1:
            raise ValueError("outputs must be an N x m array with m >= 1")
        if Y.shape[0] != self.inputs.n:
            raise ValueError(f"{self.inputs.n} input rows but {Y.shape[0]} output rows")
        self.outputs = Y
        self.valid = np.ones(Y.shape[0], bool) if self.valid is None else np.asarray(self.valid, bool)
        if self.valid.shape != (Y.shape[0],):
            raise ValueError("validity mask must have one entry per row")
        if self.output_names is None:
            self.output_names = [f"y{j}" for j in range(Y.shape[1])]
        ok = np.all(np.isfinite(Y[self.valid]))
        if not ok:
            raise ValueError("valid rows contain non-finite outputs")

    @property
    def X(self) -> np.ndarray:
        return self.inputs.values[self.valid]

    @property
    def Y(self) -> np.ndarray:
        return self.outputs[self.valid]

    @property
    def n(self) -> int:
        return int(self.valid.sum())

    def column_index(self, key) -> int:
        return self.inputs.column_names.index(key) if isinstance(key, str) else int(key)


def _standardise(Y: np.ndarray) -> np.ndarray:
    sd = Y.std(axis=0)
    keep = sd > 1e-12 * np.maximum(1.0, np.abs(Y).max(axis=0))
    if not np.any(keep):
        raise ZeroVarianceError("output has zero variance; the index is undefined")
    Z = Y[:, keep]
    return (Z - Z.mean(axis=0)) / sd[keep]


def default_partitions(n: int) -> int:
    """30 cells at N = 3000, never fewer than 2 or fewer than ~100 points per cell."""
    return max(2, min(30, n // 100))


def partition_cells(x, partitions: int) -> list:
    """Row-index cells of one conditioning column.

    Equal-count rank cells (stable ordering, sizes differ by at most one),
    or one cell per distinct value when there are at most ``partitions`` of
    them.
    """
    x = np.asarray(x)
    if partitions < 2:
        raise ValueError("need at least 2 partitions")
    values = np.unique(x)
    if values.size <= partitions:
        cells = [np.flatnonzero(x == v) for v in values]
    else:
        order = np.argsort(x, kind="stable")
        cells = np.array_split(order, partitions)
    small = min(len(c) for c in cells)
    if small < MIN_CELL:
        raise CellUnderflowError(f"a partition cell holds {small} points; at least {MIN_CELL} required")
    return cells


@dataclass
class LocalSeparations:
    """Per-cell separations of the conditional output from the full output."""

    centers: np.ndarray
    weights: np.ndarray
    gamma: np.ndarray
    mean_part: np.ndarray
    cov_part: np.ndarray
    lo: np.ndarray = None
    hi: np.ndarray = None

    @property
    def xi(self) -> float:
        return float(self.weights @ self.gamma)


def _separations(x, Z, partitions, solver) -> LocalSeparations:
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}")
    cells = partition_cells(x, partitions)
    full = DiscreteMeasure(Z)
    full_summary = empirical_summary(full)
    k = len(cells)
    gamma, mpart, cpart, centers = (np.empty(k) for _ in range(4))
    for c, idx in enumerate(cells):
        cond = DiscreteMeasure(Z[idx])
        mpart[c], cpart[c] = wasserstein_bures(empirical_summary(cond), full_summary)
        centers[c] = float(np.median(x[idx]))
        if solver == "exact":
            gamma[c] = solve_exact(cond, full).cost
        elif solver == "sinkhorn":
            eps = 0.01 * float(np.median(sqeuclidean_cost(cond.points, full.points)))
            gamma[c] = solve_sinkhorn(cond, full, max(eps, 1e-12), tol=1e-6).cost
        else:
            gamma[c] = mpart[c] + cpart[c]
    weights = np.array([len(idx) for idx in cells], float) / len(x)
    return LocalSeparations(centers, weights, gamma, mpart, cpart)


@dataclass
class IndexEntry:
    name: str
    index: float
    mean_part: float
    cov_part: float
    residual_part: float
    ci: tuple = (float("nan"), float("nan"))
    label: str = ""
    technology: str = ""
    dimension: str = ""
    irrelevant: bool = False
    separations: LocalSeparations = None


def _entry_from(name, seps: LocalSeparations, total_var) -> IndexEntry:
    scale = 2.0 * total_var
    iota = seps.xi / scale
    iv = float(seps.weights @ seps.mean_part) / scale
    isig = float(seps.weights @ seps.cov_part) / scale
    return IndexEntry(name, iota, iv, isig, iota - iv - isig, separations=seps)


def estimate_index(sample: IoSample, input_index, partitions: int | None = None, solver: str = "exact") -> IndexEntry:
    """OT-based index of one input with its mean/covariance/residual split.

    Parameters
    ----------
    sample : IoSample
    input_index : int or str
        Column position or name.
    partitions : int, optional
        Number of rank cells; :func:`default_partitions` when omitted.
    solver : {"exact", "sinkhorn", "wb_only", "wb"}
        ``wb_only`` (alias ``wb``) replaces every local separation by its closed-form
        Wasserstein-Bures part, so the residual is zero.
    """
    j = sample.column_index(input_index)
    Z = _standardise(sample.Y)
    M = default_partitions(sample.n) if partitions is None else partitions
    seps = _separations(sample.X[:, j], Z, M, solver)
    # standardised outputs: the covariance trace is the number of kept dimensions
    return _entry_from(sample.inputs.column_names[j], seps, float(Z.shape[1]))


def local_separations(sample: IoSample, input_index, partitions: int | None = None, solver: str = "exact",
                      replicates: int = 0, level: float = 0.95, seed: int = 0) -> LocalSeparations:
    """Separation curve over the cells of one input.

    With ``replicates > 0`` every cell also gets a percentile interval from
    resampling rows jointly, keeping the cell boundaries of the original
    sample (rows are re-assigned to the fixed cells by their input value).
    """
    j = sample.column_index(input_index)
    Z = _standardise(sample.Y)
    M = default_partitions(sample.n) if partitions is None else partitions
    x = sample.X[:, j]
    seps = _separations(x, Z, M, solver)
    if replicates > 0:
        cells = partition_cells(x, M)
        edges = [x[c].max() for c in cells[:-1]]
        discrete = np.unique(x).size <= M
        rng = substream(seed, "separations", sample.inputs.column_names[j])
        draws = np.full((replicates, len(cells)), np.nan)
        for r in range(replicates):
            rows = rng.integers(0, len(x), len(x))
            xb, Zb = x[rows], Z[rows]
            try:
                Zb = _standardise(Zb)
            except ZeroVarianceError:
                continue
            full = DiscreteMeasure(Zb)
            for c, cell in enumerate(cells):
                if discrete:
                    mask = xb == x[cell[0]]
                else:
                    lo = -np.inf if c == 0 else edges[c - 1]
                    hi = np.inf if c == len(cells) - 1 else edges[c]
                    mask = (xb > lo) & (xb <= hi)
                if mask.sum() < MIN_CELL:
                    continue
                cond = DiscreteMeasure(Zb[mask])
                if solver in ("wb", "wb_only"):
                    draws[r, c] = sum(wasserstein_bures(empirical_summary(cond), empirical_summary(full)))
                else:
                    draws[r, c] = solve_exact(cond, full).cost
        a = (1 - level) / 2
        seps.lo = np.nanquantile(draws, a, axis=0)
        seps.hi = np.nanquantile(draws, 1 - a, axis=0)
    return seps


def dummy_threshold(sample: IoSample, partitions: int | None = None, replicates: int = 3, seed: int = 0,
                    solver: str = "exact"):
    """Index of an auxiliary uniform input drawn independently of everything.

    Returns
    -------
    threshold : float
        Mean over replicates.
    values : ndarray
        Per-replicate dummy indices.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    Z = _standardise(sample.Y)
    M = default_partitions(sample.n) if partitions is None else partitions
    vals = np.empty(replicates)
    for r in range(replicates):
        u = substream(seed, "dummy", r).random(sample.n)
        vals[r] = _entry_from("dummy", _separations(u, Z, M, solver), float(Z.shape[1])).index
    return float(vals.mean()), vals


def bootstrap_ci(sample: IoSample, input_index, level: float = 0.95, replicates: int = 1000, seed: int = 0,
                 partitions: int | None = None, solver: str = "exact") -> tuple:
    """Percentile interval of the index over row-resampled replicates.

    Rows (inputs and outputs together) are drawn with replacement, then
    re-standardised, re-partitioned and re-estimated.
    """
    j = sample.column_index(input_index)
    Z = _standardise(sample.Y)  # propagates the zero-variance error before any work
    x = sample.X[:, j]
    M = default_partitions(sample.n) if partitions is None else partitions
    rng = substream(seed, "bootstrap", sample.inputs.column_names[j])
    vals = []
    for _ in range(replicates):
        rows = rng.integers(0, len(x), len(x))
        try:
            Zb = _standardise(Z[rows])
            vals.append(_entry_from("", _separations(x[rows], Zb, M, solver), float(Zb.shape[1])).index)
        except (ZeroVarianceError, CellUnderflowError):
            continue
    if not vals:
        return float("nan"), float("nan")
    a = (1 - level) / 2
    return float(np.quantile(vals, a)), float(np.quantile(vals, 1 - a))


@dataclass
class SensitivityReport:
    entries: list
    dummy_threshold: float
    dummy_values: list = field(default_factory=list)
    partitions: int = 0
    solver: str = "exact"
    n: int = 0
    output_names: list = field(default_factory=list)

    def __getitem__(self, name) -> IndexEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    CSV_FIELDS = ("name", "label", "technology", "dimension", "index", "mean_part", "cov_part",
                  "residual_part", "ci_lo", "ci_hi", "irrelevant")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_FIELDS)
            for e in self.entries:
                w.writerow([e.name, e.label, e.technology, e.dimension, repr(e.index), repr(e.mean_part),
                            repr(e.cov_part), repr(e.residual_part), repr(e.ci[0]), repr(e.ci[1]), int(e.irrelevant)])

    def to_dict(self) -> dict:
        entries = []
        for e in self.entries:
            d = {k: v for k, v in asdict(e).items() if k != "separations"}
            d["ci"] = list(e.ci)
            if e.separations is not None:
                s = e.separations
                d["separations"] = {
                    k: (None if getattr(s, k) is None else np.asarray(getattr(s, k)).tolist())
                    for k in ("centers", "weights", "gamma", "mean_part", "cov_part", "lo", "hi")
                }
            entries.append(d)
        return {
            "schema": REPORT_SCHEMA,
            "n": self.n,
            "partitions": self.partitions,
            "solver": self.solver,
            "outputs": list(self.output_names),
            "dummy_threshold": self.dummy_threshold,
            "dummy_values": list(map(float, self.dummy_values)),
            "entries": entries,
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, allow_nan=True))

    @classmethod
    def from_dict(cls, d: dict) -> "SensitivityReport":
        entries = []
        for e in d["entries"]:
            e = dict(e)
            s = e.pop("separations", None)
            e["ci"] = tuple(e["ci"])
            seps = None
            if s is not None:
                seps = LocalSeparations(**{k: (None if v is None else np.asarray(v, float)) for k, v in s.items()})
            entries.append(IndexEntry(separations=seps, **e))
        return cls(entries, d["dummy_threshold"], d.get("dummy_values", []), d["partitions"], d["solver"],
                   d["n"], d.get("outputs", []))

    @classmethod
    def from_json(cls, path) -> "SensitivityReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sensitivity_report(sample: IoSample, input_space=None, partitions: int | None = None, solver: str = "exact",
                       dummy_replicates: int = 3, bootstrap_replicates: int = 0, level: float = 0.95,
                       seed: int = 0, columns=None) -> SensitivityReport:
    """Indices for every non-degenerate input (or ``columns``), plus the dummy threshold.

    ``input_space`` only supplies labels and technology/dimension tags.
    """
    M = default_partitions(sample.n) if partitions is None else partitions
    names = sample.inputs.column_names
    if columns is None:
        columns = [j for j in range(len(names)) if not sample.inputs.degenerate[j]]
    else:
        columns = [sample.column_index(c) for c in columns]
    thr, dvals = dummy_threshold(sample, M, dummy_replicates, seed, solver)
    entries = []
    for j in columns:
        e = estimate_index(sample, j, M, solver)
        if bootstrap_replicates > 0:
            e.ci = bootstrap_ci(sample, j, level, bootstrap_replicates, seed, M, solver)
        if input_space is not None:
            meta = input_space[names[j]]
            e.label, e.technology, e.dimension = meta.label, meta.technology, meta.dimension
        e.irrelevant = bool(e.index <= thr)
        entries.append(e)
    return SensitivityReport(entries, thr, list(dvals), M, solver, sample.n, list(sample.output_names))


def rank_inputs(report: SensitivityReport, group_by_technology: bool = True) -> list:
    """Rows sorted by decreasing index; ties keep declaration order.

    With grouping, inputs sharing a label across LS/SS/CaO collapse to one
    row carrying the largest index among them.
    """
    rows = []
    groups = {}
    for e in report.entries:
        tech_specific = e.technology in ("LS", "SS", "CaO")
        key = (e.label or e.name) if (group_by_technology and tech_specific) else e.name
        row = {"name": key, "label": e.label or e.name, "dimension": e.dimension, "index": e.index,
               "ci_lo": e.ci[0], "ci_hi": e.ci[1], "source": e.name, "irrelevant": e.irrelevant}
        if key in groups:
            cur = rows[groups[key]]
            if e.index > cur["index"]:
                rows[groups[key]] = row
        else:
            groups[key] = len(rows)
            rows.append(row)
    return sorted(rows, key=lambda r: -r["index"])
