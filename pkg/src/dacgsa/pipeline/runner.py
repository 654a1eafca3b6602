"""Design, execute and persist a batch of model runs.

Layout of a run directory::

    manifest.json       config, config hash, code version, file schemas
    samples.csv         run_id + input values
    quantiles.csv       run_id + quantile-space coordinates
    layout.json         balanced clusters and in-cluster order
    parts/              append-only per-cluster records (resume state)
    runs.csv            merged run records, sorted by run_id
    trajectories.csv    merged tidy trajectories, sorted by run_id

Each line in ``parts/`` ends with a sentinel field, so a line cut short by a
crash is detected and discarded on the next invocation.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..daccs import EMISSION_YEARS, GAIN_YEARS, inputs_from_values, subsidy_at
from ..daccs.run import run_from_values, trajectory_rows
from ..doe import ExperimentLayout, cluster_balanced
from ..sampling import SampleMatrix, lhs_sample
from .config import SCHEMAS, ConfigError, ExperimentConfig

__all__ = [
    "QOI_COLUMNS",
    "RUN_META",
    "RunSummary",
    "evaluate",
    "write_samples",
    "read_samples",
    "make_layout",
    "run_experiment",
    "read_runs",
    "SUBSIDY_HORIZON",
]

QOI_COLUMNS = (
    [f"E{y}" for y in EMISSION_YEARS]
    + [f"G_{m}_{y}" for m in ("gdp", "consumption") for y in list(GAIN_YEARS) + ["npv"]]
    + ["TS"]
)
RUN_META = ["run_id", "cluster_id", "order", "status", "reason"]
SUBSIDY_HORIZON = tuple(range(2025, 2051, 5))
_END = "."


def fmt(v) -> str:
    return repr(float(v))


# --- samples and layout -------------------------------------------------------------------


def _write_matrix(path: Path, names, M):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_id", *names])
        for i, row in enumerate(M):
            w.writerow([i, *map(fmt, row)])


def _read_matrix(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    M = np.array([[float(v) for v in r[1:]] for r in body]).reshape(len(body), len(header) - 1)
    return header[1:], M


def write_samples(cfg: ExperimentConfig, run_dir) -> SampleMatrix:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    S = lhs_sample(cfg.load_input_space(), cfg.n, designs=cfg.designs, seed=cfg.seed)
    _write_matrix(run_dir / "samples.csv", S.column_names, S.values)
    _write_matrix(run_dir / "quantiles.csv", S.column_names, S.quantiles)
    return S


def read_samples(cfg: ExperimentConfig, run_dir) -> SampleMatrix:
    """Persisted sample of ``run_dir``; drawn and written first if absent."""
    run_dir = Path(run_dir)
    if not (run_dir / "samples.csv").is_file():
        return write_samples(cfg, run_dir)
    space = cfg.load_input_space()
    names, V = _read_matrix(run_dir / "samples.csv")
    _, U = _read_matrix(run_dir / "quantiles.csv")
    if names != space.names or V.shape[0] != cfg.n:
        raise ConfigError([f"{run_dir / 'samples.csv'} does not match the configured input space and n"])
    return SampleMatrix(V, U, names, np.array([e.spec.degenerate for e in space]))


def make_layout(cfg: ExperimentConfig, run_dir, samples: SampleMatrix | None = None) -> ExperimentLayout:
    run_dir = Path(run_dir)
    path = run_dir / "layout.json"
    if path.is_file():
        layout = ExperimentLayout.load(path)
        if layout.n_runs != cfg.n or len(layout.clusters) != cfg.n_clusters:
            raise ConfigError([f"{path} does not match n={cfg.n}, n_clusters={cfg.n_clusters}"])
        return layout
    samples = samples if samples is not None else read_samples(cfg, run_dir)
    layout = cluster_balanced(samples, cfg.n_clusters)
    layout.save(path)
    return layout


# --- one run ----------------------------------------------------------------------------------


def average_subsidy(values: dict, model_config) -> float:
    """Mean subsidy level over the policy horizon 2025-2050 [USD/t]."""
    schedule = inputs_from_values(values, model_config).schedule
    return float(np.mean([subsidy_at(schedule, t) for t in SUBSIDY_HORIZON]))


def evaluate(values: dict, model_config, scenario: str, trajectory_variables=("capacity",), run_id=0):
    """Simulate one input vector.

    Returns
    -------
    status : {"ok", "failed"}
    reason : str
    qoi : dict
        QoIs plus ``S_avg``; empty when failed.
    trajectories : list of tuples
    """
    try:
        world, _, q = run_from_values(values, model_config, scenario)
        bad = [k for k in QOI_COLUMNS if not math.isfinite(q[k])]
        if bad:
            raise FloatingPointError(f"non-finite QoIs {bad}")
        q = {k: q[k] for k in QOI_COLUMNS}
        q["S_avg"] = average_subsidy(values, model_config)
        traj = list(trajectory_rows(world, run_id, trajectory_variables))
    except Exception as exc:  # noqa: BLE001 - any model failure masks the run
        return "failed", f"{type(exc).__name__}: {exc}".replace("\n", " "), {}, []
    return "ok", "", q, traj


# --- persistence helpers ---------------------------------------------------------------------


def _valid_lines(path: Path) -> list:
    """Complete sentinel-terminated lines of a part file; trailing junk is cut."""
    if not path.is_file():
        return []
    text = path.read_text()
    lines = text.split("\n")
    tail = lines.pop()  # empty if the file ends with a newline
    good = [ln for ln in lines if ln.endswith("," + _END)]
    if tail or len(good) != len(lines):
        path.write_text("".join(ln + "\n" for ln in good))
    return good


def _csv_line(fields) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([*fields, _END])
    return buf.getvalue()


def _parse(line: str) -> list:
    return next(csv.reader([line]))[:-1]


def run_header(input_names) -> list:
    return [*RUN_META, *input_names, *QOI_COLUMNS, "S_avg"]


TRAJ_HEADER = ["run_id", "region", "tech", "year", "variable", "value"]


@dataclass(frozen=True)
class _ClusterTask:
    cluster_id: int
    specs: tuple  # (run_id, order, values tuple)
    names: tuple
    model_config: object
    scenario: str
    trajectory_variables: tuple
    part_dir: str


def _run_cluster(task: _ClusterTask):
    part = Path(task.part_dir)
    runs_path = part / f"c{task.cluster_id:05d}.runs.csv"
    traj_path = part / f"c{task.cluster_id:05d}.traj.csv"
    counts = {"ok": 0, "failed": 0}
    with open(runs_path, "a", newline="") as fr, open(traj_path, "a", newline="") as ft:
        for run_id, order, vals in task.specs:
            values = dict(zip(task.names, vals))
            status, reason, q, traj = evaluate(values, task.model_config, task.scenario,
                                               task.trajectory_variables, run_id)
            for r in traj:
                ft.write(_csv_line([r[0], r[1], r[2], r[3], r[4], fmt(r[5])]))
            ft.flush()
            qcols = [fmt(q[k]) for k in [*QOI_COLUMNS, "S_avg"]] if status == "ok" else [""] * (len(QOI_COLUMNS) + 1)
            fr.write(_csv_line([run_id, task.cluster_id, order, status, reason, *map(fmt, vals), *qcols]))
            fr.flush()
            counts[status] += 1
    return task.cluster_id, counts


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_manifest(run_dir: Path, cfg: ExperimentConfig, extra: dict):
    path = run_dir / "manifest.json"
    old = json.loads(path.read_text()) if path.is_file() else {}
    m = {
        "schema": SCHEMAS["manifest.json"],
        "code_version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "identity": cfg.identity(),
        "schemas": SCHEMAS,
        "created": old.get("created", _now()),
    }
    m.update({k: v for k, v in old.items() if k not in m})
    m.update(extra)
    path.write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")


def _check_directory(run_dir: Path, cfg: ExperimentConfig):
    path = run_dir / "manifest.json"
    if path.is_file():
        old = json.loads(path.read_text())
        if old.get("config_hash") != cfg.hash():
            raise ConfigError([f"{run_dir} holds a different experiment (config hash mismatch)"])
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / ".write_test").touch()
        (run_dir / ".write_test").unlink()
    except OSError as exc:
        raise ConfigError([f"output directory {run_dir} is not writable: {exc}"]) from exc


# --- orchestration --------------------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    run_dir: Path
    new_runs: int
    ok: int
    failed: int

    @property
    def complete(self) -> bool:
        return self.failed == 0


def prepare(cfg: ExperimentConfig, run_dir=None, stage="sample") -> Path:
    run_dir = Path(run_dir) if run_dir is not None else cfg.run_dir()
    _check_directory(run_dir, cfg)
    _write_manifest(run_dir, cfg, {})
    samples = read_samples(cfg, run_dir)
    if stage in ("layout", "run"):
        make_layout(cfg, run_dir, samples)
    return run_dir


def run_experiment(cfg: ExperimentConfig, run_dir=None, jobs: int = 1) -> RunSummary:
    """Run every not-yet-persisted run of ``cfg`` and merge the results.

    Runs already recorded in ``parts/`` are skipped, so an interrupted
    experiment resumes where it stopped and a finished one does no work.
    Clusters go to a pool of ``jobs`` processes; runs within a cluster are
    executed in layout order.
    """
    cfg.validate()
    model_config = cfg.load_model_config()
    run_dir = prepare(cfg, run_dir, stage="run")
    samples = read_samples(cfg, run_dir)
    layout = make_layout(cfg, run_dir, samples)
    part = run_dir / "parts"
    part.mkdir(exist_ok=True)

    done = set()
    for p in sorted(part.glob("c*.runs.csv")):
        done.update(int(_parse(ln)[0]) for ln in _valid_lines(p))
    for p in sorted(part.glob("c*.traj.csv")):
        lines = _valid_lines(p)
        keep = [ln for ln in lines if int(_parse(ln)[0]) in done]
        if len(keep) != len(lines):  # trajectories of a run whose record never landed
            p.write_text("".join(ln + "\n" for ln in keep))

    tasks = []
    for cid, members in enumerate(layout.clusters):
        specs = tuple((int(r), pos, tuple(samples.values[r])) for pos, r in enumerate(members) if int(r) not in done)
        if specs:
            tasks.append(_ClusterTask(cid, specs, tuple(samples.column_names), model_config, cfg.scenario,
                                      tuple(cfg.trajectory_variables), str(part)))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_run_cluster, tasks))
    else:
        for t in tasks:
            _run_cluster(t)
    new_runs = sum(len(t.specs) for t in tasks)

    ok, failed = _merge(run_dir, samples.column_names)
    _write_manifest(run_dir, cfg, {"finished": _now(), "runs": {"total": cfg.n, "ok": ok, "failed": failed}})
    return RunSummary(run_dir, new_runs, ok, failed)


def _merge(run_dir: Path, names) -> tuple:
    part = run_dir / "parts"
    rows = []
    for p in sorted(part.glob("c*.runs.csv")):
        rows.extend(_parse(ln) for ln in _valid_lines(p))
    rows.sort(key=lambda r: int(r[0]))
    with open(run_dir / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(run_header(names))
        w.writerows(rows)
    traj = []
    for p in sorted(part.glob("c*.traj.csv")):
        traj.extend(_parse(ln) for ln in _valid_lines(p))
    traj.sort(key=lambda r: int(r[0]))  # stable: keeps emission order within a run
    with open(run_dir / "trajectories.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJ_HEADER)
        w.writerows(traj)
    ok = sum(r[3] == "ok" for r in rows)
    return ok, len(rows) - ok


def read_runs(run_dir) -> tuple:
    """Header and rows of ``runs.csv`` as lists of strings."""
    with open(Path(run_dir) / "runs.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
