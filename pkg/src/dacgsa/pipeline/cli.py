"""``dacgsa`` command line.

Exit codes: 0 ok, 2 configuration error, 3 some runs failed, 4 analysis error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .analysis import QOI_GROUPS, AnalysisError, analyze, emit_plot_data
from .config import SOLVERS, ConfigError, ExperimentConfig
from .runner import make_layout, prepare, read_samples, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_ANALYSIS = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config JSON (defaults when omitted)")
    common.add_argument("--scenario", type=str.lower, choices=("ndc", "lts"))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", metavar="DIR", help="run directory (relative paths go under $DACGSA_OUTPUT_ROOT)")
    common.add_argument("--solver", choices=SOLVERS)
    common.add_argument("--jobs", type=int, default=1, help="worker processes for 'run'")
    common.add_argument("--n", type=int, help="number of runs")
    common.add_argument("--clusters", type=int, help="number of balanced clusters")

    p = argparse.ArgumentParser(prog="dacgsa", description="DACCS deployment experiments with OT sensitivity analysis")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="draw the input sample")
    sub.add_parser("layout", parents=[common], help="build the balanced cluster layout")
    sub.add_parser("run", parents=[common], help="simulate every pending run")
    a = sub.add_parser("analyze", parents=[common], help="sensitivity report and summary statistics")
    a.add_argument("--qoi", choices=[*QOI_GROUPS, "all"], default="emissions")
    pd = sub.add_parser("plotdata", parents=[common], help="tidy CSVs for plots")
    pd.add_argument("--bins", type=int, default=50)
    return p


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    return cfg.override(scenario=args.scenario, seed=args.seed, output_dir=args.out, solver=args.solver,
                        n=args.n, n_clusters=args.clusters)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.jobs < 1:
            raise ConfigError([f"--jobs must be positive, got {args.jobs}"])
        if args.command in ("sample", "layout"):
            run_dir = prepare(cfg, stage=args.command)
            if args.command == "layout":
                make_layout(cfg, run_dir, read_samples(cfg, run_dir))
            print(run_dir)
            return EXIT_OK
        if args.command == "run":
            s = run_experiment(cfg, jobs=args.jobs)
            print(json.dumps({"run_dir": str(s.run_dir), "new_runs": s.new_runs, "ok": s.ok, "failed": s.failed}))
            return EXIT_OK if s.complete else EXIT_PARTIAL
    except ConfigError as exc:
        print(f"dacgsa: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    run_dir = cfg.run_dir()
    try:
        if args.command == "analyze":
            groups = list(QOI_GROUPS) if args.qoi == "all" else [args.qoi]
            for g in groups:
                res = analyze(run_dir, g, solver=args.solver)
                top = [(r["label"], round(r["index"], 3)) for r in res["ranking"][:5]]
                print(f"{g}: top inputs {top}")
            st = res["statistics"]
            print(json.dumps({"exceedance_probability": st["exceedance_probability"],
                              "minimum_subsidy": st["minimum_subsidy"]["value"]}))
        else:
            print(emit_plot_data(run_dir, bins=args.bins, solver=args.solver))
    except (AnalysisError, ConfigError) as exc:
        print(f"dacgsa: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
