"""Experiment configuration: validation, output location and hashing."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..daccs import DaccsConfig, load_config
from ..dist import InputSpace, default_input_space

__all__ = ["ConfigError", "ExperimentConfig", "OUTPUT_ROOT_ENV", "SCHEMAS", "canonical_hash"]

OUTPUT_ROOT_ENV = "DACGSA_OUTPUT_ROOT"
SCENARIOS = ("ndc", "lts")
SOLVERS = ("exact", "sinkhorn", "wb")

# versioned schemas of every persisted file
SCHEMAS = {
    "manifest.json": "dacgsa.manifest/1",
    "samples.csv": "dacgsa.samples/1",
    "layout.json": "dacgsa.layout/1",
    "runs.csv": "dacgsa.runs/1",
    "trajectories.csv": "dacgsa.trajectories/1",
    "sensitivity": "dacgsa.sensitivity_report/1",
    "summary": "dacgsa.summary/1",
    "plotdata": "dacgsa.plotdata/1",
}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid experiment configuration:\n  - " + "\n  - ".join(self.errors))


def canonical_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    """Shape of one desk experiment.

    Parameters
    ----------
    scenario : {"ndc", "lts"}
    n : int
        Number of runs; divisible by ``n_clusters`` and ``designs``.
    n_clusters : int
        Balanced clusters in the layout.
    designs : int
        Independent Latin Hypercube designs stacked into the sample.
    seed : int
        Master seed; every random stream derives from it.
    solver : {"exact", "sinkhorn", "wb"}
    partitions : int or None
        Conditioning cells for the indices; None picks a default from ``n``.
    bootstrap : int
        Bootstrap replicates for confidence intervals (0 disables them).
    dummy_replicates : int
        Replicates averaged into the irrelevance threshold.
    input_space, model_config : str or None
        JSON files; None selects the bundled defaults.  Relative paths are
        resolved against the config file.
    output_dir : str or None
        Run directory.  Relative paths (and the default name) are placed
        under ``$DACGSA_OUTPUT_ROOT`` when it is set.
    trajectory_variables : tuple of str
        Annual state arrays written to ``trajectories.csv``.
    """

    scenario: str = "ndc"
    n: int = 600
    n_clusters: int = 20
    designs: int = 6
    seed: int = 0
    solver: str = "exact"
    partitions: int | None = None
    bootstrap: int = 200
    dummy_replicates: int = 3
    input_space: str | None = None
    model_config: str | None = None
    output_dir: str | None = None
    trajectory_variables: tuple = ("capacity",)

    # -- construction ---------------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        d = dict(d)
        d.pop("schema", None)
        known = {f.name for f in fields(cls)}
        errors = [f"unknown key {k!r}" for k in sorted(set(d) - known)]
        if errors:
            raise ConfigError(errors)
        for key in ("input_space", "model_config"):
            if d.get(key) and base_dir is not None and not Path(d[key]).is_absolute():
                d[key] = str(Path(base_dir) / d[key])
        if "trajectory_variables" in d:
            d["trajectory_variables"] = tuple(d["trajectory_variables"])
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read {path}: {exc}"]) from exc
        return cls.from_dict(d, base_dir=path.parent)

    def override(self, **kw) -> "ExperimentConfig":
        cfg = replace(self, **{k: v for k, v in kw.items() if v is not None})
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trajectory_variables"] = list(self.trajectory_variables)
        return {"schema": "dacgsa.experiment/1", **d}

    # -- validation -----------------------------------------------------------------

    def validate(self):
        """Raise :class:`ConfigError` listing every violated constraint."""
        from ..daccs.run import TRAJECTORY_VARIABLES

        e = []

        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        if self.scenario not in SCENARIOS:
            e.append(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        for key in ("n", "n_clusters", "designs"):
            v = getattr(self, key)
            if not is_int(v) or v < 1:
                e.append(f"{key} must be a positive integer, got {v!r}")
        if is_int(self.n) and is_int(self.n_clusters) and self.n_clusters >= 1 and self.n % self.n_clusters:
            e.append(f"n={self.n} is not divisible by n_clusters={self.n_clusters}")
        if is_int(self.n) and is_int(self.designs) and self.designs >= 1 and self.n % self.designs:
            e.append(f"n={self.n} is not divisible by designs={self.designs}")
        if not is_int(self.seed) or self.seed < 0:
            e.append(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.solver not in SOLVERS:
            e.append(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.partitions is not None and (not is_int(self.partitions) or self.partitions < 2):
            e.append(f"partitions must be an integer >= 2 or null, got {self.partitions!r}")
        if not is_int(self.bootstrap) or self.bootstrap < 0:
            e.append(f"bootstrap must be a non-negative integer, got {self.bootstrap!r}")
        if not is_int(self.dummy_replicates) or self.dummy_replicates < 1:
            e.append(f"dummy_replicates must be a positive integer, got {self.dummy_replicates!r}")
        for var in self.trajectory_variables:
            if var not in TRAJECTORY_VARIABLES:
                e.append(f"unknown trajectory variable {var!r}")
        for key in ("input_space", "model_config"):
            p = getattr(self, key)
            if p is not None and not Path(p).is_file():
                e.append(f"{key} file not found: {p}")
        if e:
            raise ConfigError(e)

    # -- derived objects ------------------------------------------------------------

    def load_input_space(self) -> InputSpace:
        return default_input_space() if self.input_space is None else InputSpace.load(self.input_space)

    def load_model_config(self) -> DaccsConfig:
        return load_config(self.model_config)

    def run_dir(self) -> Path:
        root = os.environ.get(OUTPUT_ROOT_ENV)
        name = self.output_dir or f"dacgsa_{self.scenario}_n{self.n}_s{self.seed}"
        path = Path(name)
        if root and not path.is_absolute():
            path = Path(root) / path
        return path

    def identity(self) -> dict:
        """Everything that determines persisted results, with input files inlined."""
        d = self.to_dict()
        for key in ("output_dir", "input_space", "model_config"):
            d.pop(key)
        d["input_space_hash"] = canonical_hash(self.load_input_space().to_dict())
        with_model = self.model_config
        d["model_config_hash"] = canonical_hash(
            json.loads(Path(with_model).read_text()) if with_model else _bundled_model_config()
        )
        return d

    def hash(self) -> str:
        return canonical_hash(self.identity())


def _bundled_model_config() -> dict:
    from importlib import resources

    return json.loads(resources.files("dacgsa.daccs").joinpath("data/default_config.json").read_text())
