import csv
import json
import shutil

import numpy as np
import pytest

from dacgsa.daccs import load_config, run_from_values
from dacgsa.doe import ExperimentLayout
from dacgsa.pipeline import (
    QOI_COLUMNS,
    AnalysisError,
    ConfigError,
    ExperimentConfig,
    analyze,
    binned_means,
    emit_plot_data,
    exceedance_probability,
    minimum_subsidy,
    quantile_summary,
    read_runs,
    run_experiment,
)
from dacgsa.pipeline import runner
from dacgsa.pipeline.cli import main


def toy(path, **kw):
    base = dict(n=60, n_clusters=6, designs=1, bootstrap=0, dummy_replicates=1, output_dir=str(path))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def done(tmp_path_factory):
    path = tmp_path_factory.mktemp("runs") / "toy"
    cfg = toy(path)
    summary = run_experiment(cfg)
    return cfg, path, summary


def read_bytes(path, name):
    return (path / name).read_bytes()


# --- run_experiment ----------------------------------------------------------------------


def test_smoke_contract(done):
    cfg, path, summary = done
    assert summary.new_runs == 60 and summary.ok == 60 and summary.failed == 0
    header, rows = read_runs(path)
    assert [int(r[0]) for r in rows] == list(range(60))
    layout = ExperimentLayout.load(path / "layout.json")
    assert sorted(int(r) for c in layout.clusters for r in c) == list(range(60))
    assert {len(c) for c in layout.clusters} == {10}
    for r in rows:
        rid, cid, order = int(r[0]), int(r[1]), int(r[2])
        assert int(layout.clusters[cid][order]) == rid
    m = json.loads((path / "manifest.json").read_text())
    assert m["config_hash"] == cfg.hash() and m["code_version"]
    assert m["runs"] == {"total": 60, "ok": 60, "failed": 0}
    assert m["schemas"]["runs.csv"].startswith("dacgsa.runs/")


def test_runs_match_direct_evaluation(done):
    cfg, path, _ = done
    header, rows = read_runs(path)
    names = cfg.load_input_space().names
    model = load_config()
    for r in rows[:5]:
        values = {n: float(r[header.index(n)]) for n in names}
        q = run_from_values(values, model, "NDC")[2]
        for k in QOI_COLUMNS:
            assert float(r[header.index(k)]) == q[k]


def test_qoi_columns_match_model():
    values = dict(zip(*_one_sample()))
    q = run_from_values(values, load_config(), "LTS")[2]
    assert list(q) == QOI_COLUMNS


def _one_sample():
    from dacgsa.dist import default_input_space
    from dacgsa.sampling import lhs_sample

    S = lhs_sample(default_input_space(), 1)
    return S.column_names, S.values[0]


def test_idempotent_rerun(done):
    cfg, path, _ = done
    before = read_bytes(path, "runs.csv"), read_bytes(path, "trajectories.csv")
    again = run_experiment(cfg)
    assert again.new_runs == 0 and again.ok == 60
    assert (read_bytes(path, "runs.csv"), read_bytes(path, "trajectories.csv")) == before


def test_deterministic_fresh_directory_and_parallel(done, tmp_path):
    cfg, path, _ = done
    fresh = toy(tmp_path / "b")
    run_experiment(fresh, jobs=3)
    for name in ("runs.csv", "trajectories.csv", "samples.csv", "layout.json"):
        assert read_bytes(tmp_path / "b", name) == read_bytes(path, name)
    assert fresh.hash() == cfg.hash()  # output location is not part of the identity


def test_resume_after_interruption(done, tmp_path):
    cfg, path, _ = done
    copy = tmp_path / "c"
    shutil.copytree(path, copy)
    parts = sorted((copy / "parts").glob("c*.runs.csv"))
    text = parts[0].read_text()
    cut = text[: text.index("\n", len(text) // 2) + 7]  # drop later runs and leave a torn line
    parts[0].write_text(cut)
    (parts[1]).unlink()
    (copy / "runs.csv").unlink()
    s = run_experiment(toy(copy))
    assert 10 < s.new_runs < 20
    assert read_bytes(copy, "runs.csv") == read_bytes(path, "runs.csv")
    assert read_bytes(copy, "trajectories.csv") == read_bytes(path, "trajectories.csv")


def test_failed_runs_are_recorded(tmp_path, monkeypatch):
    real = runner.run_from_values
    calls = []

    def flaky(values, config, scenario):
        calls.append(1)
        if len(calls) == 3:
            raise FloatingPointError("solver diverged")
        return real(values, config, scenario)

    monkeypatch.setattr(runner, "run_from_values", flaky)
    cfg = toy(tmp_path / "f", n=12, n_clusters=2)
    s = run_experiment(cfg)
    assert s.failed == 1 and s.ok == 11 and not s.complete
    header, rows = read_runs(tmp_path / "f")
    bad = [r for r in rows if r[3] == "failed"]
    assert len(bad) == 1 and "solver diverged" in bad[0][4]
    assert all(bad[0][header.index(k)] == "" for k in QOI_COLUMNS)
    # resuming does not retry it
    assert run_experiment(cfg).new_runs == 0


def test_config_errors_listed_exhaustively():
    with pytest.raises(ConfigError) as err:
        ExperimentConfig(scenario="bau", n=61, n_clusters=6, solver="simplex", bootstrap=-1).validate()
    assert len(err.value.errors) >= 4
    with pytest.raises(ConfigError, match="unknown key"):
        ExperimentConfig.from_dict({"n": 60, "colour": 1})
    with pytest.raises(ConfigError, match="not found"):
        ExperimentConfig(model_config="/nonexistent.json").validate()


def test_config_file_round_trip(tmp_path):
    cfg = toy(tmp_path / "x", scenario="lts", seed=5)
    (tmp_path / "e.json").write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(tmp_path / "e.json") == cfg


def test_directory_of_other_experiment_is_refused(done, tmp_path):
    _, path, _ = done
    copy = tmp_path / "o"
    shutil.copytree(path, copy)
    with pytest.raises(ConfigError, match="different experiment"):
        run_experiment(toy(copy, seed=1))


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DACGSA_OUTPUT_ROOT", str(tmp_path))
    assert ExperimentConfig(output_dir="a").run_dir() == tmp_path / "a"
    assert ExperimentConfig(output_dir="/abs").run_dir().as_posix() == "/abs"
    assert ExperimentConfig().run_dir().parent == tmp_path


# --- analysis --------------------------------------------------------------------------------


def test_analyze_emissions(done, tmp_path):
    _, path, _ = done
    res = analyze(path, "emissions", out_dir=tmp_path / "a")
    assert res["report"].output_names == ["E2040", "E2045", "E2050"]
    for f in ("sensitivity_emissions.json", "sensitivity_emissions.csv", "ranking_emissions.csv",
              "summary_emissions.csv", "statistics.json"):
        assert (tmp_path / "a" / f).is_file()
    st = json.loads((tmp_path / "a" / "statistics.json").read_text())
    assert 0 <= st["exceedance_probability"] <= 1 and st["n_ok"] == 60


def test_analyze_other_groups(done, tmp_path):
    _, path, _ = done
    for g in ("gains_gdp", "total_subsidies"):
        res = analyze(path, g, out_dir=tmp_path / g)
        assert res["report"].n == 60


def test_poisoned_failed_run_changes_nothing(done, tmp_path):
    _, path, _ = done
    clean, dirty = tmp_path / "clean", tmp_path / "dirty"
    shutil.copytree(path, clean)
    shutil.copytree(path, dirty)
    header, rows = read_runs(dirty)
    poison = list(rows[0])
    poison[0], poison[3], poison[4] = "60", "failed", "injected"
    for k in [*QOI_COLUMNS, "S_avg"]:
        poison[header.index(k)] = "1e30"
    with open(dirty / "runs.csv", "a", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerow(poison)
    for d in (clean, dirty):
        analyze(d, "emissions")
        emit_plot_data(d)
    for sub, name in [("analysis", "sensitivity_emissions.json"), ("analysis", "ranking_emissions.csv"),
                      ("analysis", "summary_emissions.csv"), ("plotdata", "density.csv"),
                      ("plotdata", "partial_dependence.csv"), ("plotdata", "separations.csv"),
                      ("plotdata", "scatter.csv")]:
        assert (clean / sub / name).read_bytes() == (dirty / sub / name).read_bytes(), name
    a = json.loads((clean / "analysis" / "statistics.json").read_text())
    b = json.loads((dirty / "analysis" / "statistics.json").read_text())
    assert b.pop("n_failed") == 1 and a.pop("n_failed") == 0
    assert a == b


def test_missing_qoi_column(done, tmp_path):
    _, path, _ = done
    copy = tmp_path / "m"
    shutil.copytree(path, copy)
    header, rows = read_runs(copy)
    j = header.index("E2045")
    with open(copy / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header[:j] + header[j + 1:])
        w.writerows(r[:j] + r[j + 1:] for r in rows)
    with pytest.raises(AnalysisError, match="E2045"):
        analyze(copy, "emissions")
    with pytest.raises(AnalysisError):
        analyze(tmp_path / "nowhere", "emissions")
    with pytest.raises(AnalysisError):
        analyze(copy, "welfare")


def test_all_below_threshold():
    e = np.full(50, 5e8)
    assert exceedance_probability(e) == 0.0
    m = minimum_subsidy(e, np.linspace(0, 500, 50))
    assert m["value"] is None and m["ci_lo"] is None and m["n_gigaton"] == 0


def test_minimum_subsidy_oracle():
    rng = np.random.default_rng(1)
    e = rng.uniform(0, 2e9, 400)
    s = rng.uniform(0, 600, 400)
    m = minimum_subsidy(e, s, replicates=500, seed=3)
    sel = np.sort(s[e >= 1e9])
    h = (sel.size - 1) * 0.05
    want = sel[int(np.floor(h))] + (h - np.floor(h)) * (sel[int(np.floor(h)) + 1] - sel[int(np.floor(h))])
    assert m["value"] == pytest.approx(want, rel=1e-12)
    assert m["n_gigaton"] == sel.size
    assert m["ci_lo"] <= m["value"] <= m["ci_hi"]
    assert minimum_subsidy(e, s, replicates=500, seed=3) == m
    assert exceedance_probability(e) == pytest.approx(np.mean(e >= 1e9))


def test_quantile_summary_oracle():
    rng = np.random.default_rng(2)
    Y = rng.lognormal(size=(301, 2))
    rows = quantile_summary(Y, ["a", "b"])
    for j, row in enumerate(rows):
        s = np.sort(Y[:, j])
        # n = 301: the p-quantile with linear interpolation sits exactly on order statistic 300 p
        for p, key in ((0.05, "q05"), (0.25, "q25"), (0.5, "q50"), (0.75, "q75"), (0.95, "q95")):
            assert row[key] == pytest.approx(s[int(round(300 * p))], rel=1e-12)
        assert row["mean"] == pytest.approx(s.sum() / 301)


def test_binned_means_properties():
    rng = np.random.default_rng(3)
    x = rng.normal(size=1000)
    flat = binned_means(x, np.full(1000, 7.0))
    assert np.all(flat["y_mean"] == 7.0) and flat["count"].size == 50
    mono = binned_means(x, np.exp(x))
    assert np.all(np.diff(mono["y_mean"]) > 0)
    y = rng.normal(size=1000) + x
    bm = binned_means(x, y, 50)
    order = sorted(range(1000), key=lambda i: x[i])
    for k in range(50):
        idx = order[20 * k: 20 * (k + 1)]
        assert bm["y_mean"][k] == pytest.approx(sum(y[i] for i in idx) / 20, rel=1e-12)
        assert bm["x_min"][k] == min(x[i] for i in idx)
    uneven = binned_means(x[:103], y[:103], 50)
    assert uneven["count"].sum() == 103 and set(uneven["count"]) == {2, 3}


def test_plot_data_files(done, tmp_path):
    _, path, _ = done
    out = emit_plot_data(path, bins=10, out_dir=tmp_path / "p")
    with open(out / "partial_dependence.csv") as fh:
        rows = list(csv.DictReader(fh))
    names = {r["input"] for r in rows}
    assert len(names) == 38 and len(rows) == 38 * 10
    with open(out / "separations.csv") as fh:
        seps = list(csv.DictReader(fh))
    assert seps and all(float(r["gamma"]) >= -1e-9 for r in seps)


# --- CLI -----------------------------------------------------------------------------------


def test_cli_end_to_end(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DACGSA_OUTPUT_ROOT", str(tmp_path))
    cfg = toy("cli", scenario="lts")
    (tmp_path / "exp.json").write_text(json.dumps(cfg.to_dict()))
    base = ["--config", str(tmp_path / "exp.json")]
    assert main(["sample", *base]) == 0
    assert (tmp_path / "cli" / "samples.csv").is_file()
    assert main(["layout", *base]) == 0
    assert (tmp_path / "cli" / "layout.json").is_file()
    assert main(["run", *base, "--jobs", "2"]) == 0
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["ok"] == 60
    assert main(["analyze", *base, "--qoi", "emissions", "--solver", "wb"]) == 0
    assert main(["plotdata", *base, "--bins", "5"]) == 0
    assert (tmp_path / "cli" / "plotdata" / "density.csv").is_file()


def test_cli_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setenv("DACGSA_OUTPUT_ROOT", str(tmp_path))
    assert main(["run", "--n", "61", "--clusters", "6"]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["run", "--config", str(tmp_path / "bad.json")]) == 2
    assert main(["analyze", "--out", "empty"]) == 4

    def broken(values, config, scenario):
        raise ValueError("boom")

    monkeypatch.setattr(runner, "run_from_values", broken)
    assert main(["run", "--n", "12", "--clusters", "2", "--out", "f"]) == 3
