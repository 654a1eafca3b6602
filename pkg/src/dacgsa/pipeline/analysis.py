"""Reports computed from a finished run directory.

Only runs with status ``ok`` enter any statistic; failed runs are dropped
when the table is read.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..daccs import EMISSION_YEARS, GAIN_YEARS
from ..gsa import IoSample, local_separations, rank_inputs, sensitivity_report
from ..sampling import SampleMatrix, substream
from .config import SCHEMAS, ExperimentConfig
from .runner import QOI_COLUMNS, read_runs

__all__ = [
    "AnalysisError",
    "QOI_GROUPS",
    "GIGATON",
    "RunTable",
    "load_run_table",
    "quantile_summary",
    "exceedance_probability",
    "minimum_subsidy",
    "binned_means",
    "analyze",
    "emit_plot_data",
]

QOI_GROUPS = {
    "emissions": [f"E{y}" for y in EMISSION_YEARS],
    "gains_gdp": [f"G_gdp_{y}" for y in GAIN_YEARS],
    "gains_consumption": [f"G_consumption_{y}" for y in GAIN_YEARS],
    "total_subsidies": ["TS"],
}
GIGATON = 1.0e9  # t CO2 / yr
SUMMARY_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


class AnalysisError(RuntimeError):
    """A run directory cannot be analysed as requested."""


class RunTable:
    """Successful runs of a directory: inputs, outputs and the experiment config."""

    def __init__(self, config: ExperimentConfig, header: list, rows: list):
        self.config = config
        self.space = config.load_input_space()
        names = self.space.names
        missing = [n for n in names if n not in header]
        if missing:
            raise AnalysisError(f"runs.csv lacks input columns {missing}")
        ok = [r for r in rows if r[header.index("status")] == "ok"]
        self.n_total = len(rows)
        self.n_failed = len(rows) - len(ok)
        self.header = header
        self.run_ids = np.array([int(r[0]) for r in ok], dtype=int)
        self._cols = {h: [r[i] for r in ok] for i, h in enumerate(header)}
        self.inputs = np.column_stack([self.column(n) for n in names]) if ok else np.empty((0, len(names)))

    @property
    def n(self) -> int:
        return self.run_ids.size

    def column(self, name) -> np.ndarray:
        if name not in self._cols:
            raise AnalysisError(f"runs.csv lacks column {name!r}")
        return np.array([float(v) for v in self._cols[name]])

    def outputs(self, names) -> np.ndarray:
        return np.column_stack([self.column(n) for n in names]).reshape(self.n, len(names))

    def sample(self) -> SampleMatrix:
        U = np.column_stack([np.clip(e.spec.cdf(self.inputs[:, c]), 0.0, 1.0) for c, e in enumerate(self.space)])
        degenerate = np.array([e.spec.degenerate for e in self.space])
        return SampleMatrix(self.inputs, U.reshape(self.inputs.shape), self.space.names, degenerate)


def load_run_table(run_dir) -> RunTable:
    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text())
        header, rows = read_runs(run_dir)
    except (OSError, json.JSONDecodeError, IndexError) as exc:
        raise AnalysisError(f"{run_dir} is not a finished run directory: {exc}") from exc
    cfg = ExperimentConfig.from_dict(manifest["config"])
    return RunTable(cfg, header, rows)


# --- statistics -------------------------------------------------------------------------


def quantile_summary(values: np.ndarray, names) -> list:
    """Per-column mean and quantiles (5, 25, 50, 75, 95 %)."""
    values = np.asarray(values, dtype=float).reshape(-1, len(names))
    out = []
    for j, name in enumerate(names):
        v = values[:, j]
        row = {"qoi": name, "n": int(v.size), "mean": float(v.mean()) if v.size else float("nan")}
        qs = np.quantile(v, SUMMARY_LEVELS) if v.size else [float("nan")] * len(SUMMARY_LEVELS)
        row.update({f"q{int(round(100 * p)):02d}": float(q) for p, q in zip(SUMMARY_LEVELS, qs)})
        out.append(row)
    return out


def exceedance_probability(e2050, threshold: float = GIGATON) -> float:
    """Share of runs with removals at or above ``threshold``."""
    e2050 = np.asarray(e2050, dtype=float)
    if e2050.size == 0:
        raise AnalysisError("no successful runs")
    return float(np.mean(e2050 >= threshold))


def minimum_subsidy(e2050, avg_subsidy, threshold: float = GIGATON, level: float = 0.95,
                    replicates: int = 1000, seed: int = 0, q: float = 0.05) -> dict:
    """Lower ``q`` quantile of average subsidy among runs reaching ``threshold``.

    Returns a dict with ``value``, ``ci_lo``, ``ci_hi`` (percentile bootstrap)
    and ``n_gigaton``.  With no qualifying runs the statistic is undefined
    and every numeric field is None.
    """
    e2050 = np.asarray(e2050, dtype=float)
    s = np.asarray(avg_subsidy, dtype=float)[e2050 >= threshold]
    out = {"n_gigaton": int(s.size), "quantile": q, "level": level, "value": None, "ci_lo": None, "ci_hi": None}
    if s.size == 0:
        return out
    out["value"] = float(np.quantile(s, q))
    if replicates > 0:
        rng = substream(seed, "minimum_subsidy")
        boot = np.quantile(s[rng.integers(0, s.size, size=(replicates, s.size))], q, axis=1)
        a = (1.0 - level) / 2.0
        out["ci_lo"], out["ci_hi"] = (float(v) for v in np.quantile(boot, [a, 1.0 - a]))
    return out


def binned_means(x, y, bins: int = 50) -> dict:
    """Rank-binned conditional means of ``y`` given ``x``.

    Points are ordered by ``x`` (stable) and split into ``bins`` groups whose
    sizes differ by at most one.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if bins < 1:
        raise ValueError("bins must be positive")
    groups = np.array_split(np.argsort(x, kind="stable"), min(bins, x.size))
    return {
        "count": np.array([g.size for g in groups]),
        "x_mean": np.array([x[g].mean() for g in groups]),
        "x_min": np.array([x[g].min() for g in groups]),
        "x_max": np.array([x[g].max() for g in groups]),
        "y_mean": np.array([y[g].mean() for g in groups]),
    }


# --- writers ------------------------------------------------------------------------------


def _write_rows(path: Path, rows: list, fieldnames=None):
    fieldnames = fieldnames or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def analyze(run_dir, qoi: str = "emissions", solver: str | None = None, partitions: int | None = None,
            bootstrap: int | None = None, threshold: float = GIGATON, out_dir=None) -> dict:
    """Sensitivity report, quantile summary and gigaton statistics of a QoI group.

    Writes ``sensitivity_<qoi>.json/.csv``, ``ranking_<qoi>.csv``,
    ``summary_<qoi>.csv`` and ``statistics.json`` into ``out_dir`` (default
    ``run_dir/analysis``) and returns their contents.
    """
    if qoi not in QOI_GROUPS:
        raise AnalysisError(f"qoi must be one of {sorted(QOI_GROUPS)}, got {qoi!r}")
    table = load_run_table(run_dir)
    cfg = table.config
    if table.n == 0:
        raise AnalysisError("no successful runs to analyse")
    names = QOI_GROUPS[qoi]
    Y = table.outputs(names)
    solver = solver or cfg.solver
    partitions = partitions or cfg.partitions
    bootstrap = cfg.bootstrap if bootstrap is None else bootstrap
    out_dir = Path(out_dir) if out_dir is not None else Path(run_dir) / "analysis"
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        report = sensitivity_report(IoSample(table.sample(), Y, output_names=names), table.space,
                                    partitions=partitions, solver=solver,
                                    dummy_replicates=cfg.dummy_replicates,
                                    bootstrap_replicates=bootstrap, seed=cfg.seed)
    except ValueError as exc:
        raise AnalysisError(f"sensitivity analysis failed: {exc}") from exc
    report.to_json(out_dir / f"sensitivity_{qoi}.json")
    report.to_csv(out_dir / f"sensitivity_{qoi}.csv")
    ranking = rank_inputs(report)
    _write_rows(out_dir / f"ranking_{qoi}.csv", ranking)
    summary = quantile_summary(Y, names)
    _write_rows(out_dir / f"summary_{qoi}.csv", summary)

    e2050 = table.column("E2050")
    stats = {
        "schema": SCHEMAS["summary"],
        "n_ok": table.n,
        "n_failed": table.n_failed,
        "threshold": threshold,
        "exceedance_probability": exceedance_probability(e2050, threshold),
        "minimum_subsidy": minimum_subsidy(e2050, table.column("S_avg"), threshold,
                                           replicates=bootstrap or 1000, seed=cfg.seed),
    }
    (out_dir / "statistics.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return {"report": report, "ranking": ranking, "summary": summary, "statistics": stats, "out_dir": out_dir}


def emit_plot_data(run_dir, bins: int = 50, output: str = "E2050", qoi: str = "emissions",
                   solver: str | None = None, out_dir=None) -> Path:
    """Tidy CSVs for density plots, partial dependence and separation curves.

    ``density.csv`` holds every QoI value of every successful run;
    ``scatter.csv`` pairs each input with ``output``; ``partial_dependence.csv``
    holds rank-binned conditional means; ``separations.csv`` the local
    separation curves of the ``qoi`` group for every non-degenerate input.
    """
    table = load_run_table(run_dir)
    if table.n == 0:
        raise AnalysisError("no successful runs")
    if qoi not in QOI_GROUPS:
        raise AnalysisError(f"qoi must be one of {sorted(QOI_GROUPS)}, got {qoi!r}")
    out_dir = Path(out_dir) if out_dir is not None else Path(run_dir) / "plotdata"
    out_dir.mkdir(parents=True, exist_ok=True)
    y = table.column(output)

    qcols = [*QOI_COLUMNS, "S_avg"]
    density = [{"qoi": c, "run_id": int(r), "value": float(v)}
               for c in qcols for r, v in zip(table.run_ids, table.column(c))]
    _write_rows(out_dir / "density.csv", density, ["qoi", "run_id", "value"])

    scatter, pdp = [], []
    for c, entry in enumerate(table.space):
        x = table.inputs[:, c]
        scatter += [{"input": entry.name, "run_id": int(r), "x": float(a), "y": float(b)}
                    for r, a, b in zip(table.run_ids, x, y)]
        bm = binned_means(x, y, bins)
        pdp += [{"input": entry.name, "bin": k, "count": int(bm["count"][k]), "x_mean": float(bm["x_mean"][k]),
                 "x_min": float(bm["x_min"][k]), "x_max": float(bm["x_max"][k]), "y_mean": float(bm["y_mean"][k])}
                for k in range(bm["count"].size)]
    _write_rows(out_dir / "scatter.csv", scatter, ["input", "run_id", "x", "y"])
    _write_rows(out_dir / "partial_dependence.csv", pdp,
                ["input", "bin", "count", "x_mean", "x_min", "x_max", "y_mean"])

    sample = IoSample(table.sample(), table.outputs(QOI_GROUPS[qoi]))
    seps = []
    try:
        for c, entry in enumerate(table.space):
            if entry.spec.degenerate:
                continue
            ls = local_separations(sample, c, table.config.partitions, solver or table.config.solver)
            seps += [{"input": entry.name, "cell": k, "center": float(ls.centers[k]), "weight": float(ls.weights[k]),
                      "gamma": float(ls.gamma[k]), "mean_part": float(ls.mean_part[k]),
                      "cov_part": float(ls.cov_part[k])} for k in range(ls.gamma.size)]
    except ValueError as exc:
        raise AnalysisError(f"separation curves failed: {exc}") from exc
    _write_rows(out_dir / "separations.csv", seps,
                ["input", "cell", "center", "weight", "gamma", "mean_part", "cov_part"])
    (out_dir / "README.json").write_text(json.dumps({"schema": SCHEMAS["plotdata"], "bins": bins,
                                                     "output": output, "qoi": qoi}, indent=2) + "\n")
    return out_dir
