"""
A small DACCS deployment experiment
===================================

Runs 120 input draws under both climate-policy scenarios through the batch
pipeline, then ranks inputs by their influence on the removal trajectory.
The same steps are available on the command line as
``dacgsa run`` / ``dacgsa analyze`` / ``dacgsa plotdata``.
"""

import sys
import tempfile
from pathlib import Path

from dacgsa.pipeline import ExperimentConfig, analyze, emit_plot_data, run_experiment

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="dacgsa_demo_"))

for scenario in ("ndc", "lts"):
    cfg = ExperimentConfig(scenario=scenario, n=120, n_clusters=6, designs=2, bootstrap=0,
                           output_dir=str(root / scenario))
    summary = run_experiment(cfg)
    print(f"{scenario}: {summary.ok} ok, {summary.failed} failed -> {summary.run_dir}")

    res = analyze(summary.run_dir, "emissions")
    st = res["statistics"]
    print(f"  P(E2050 >= 1 Gt) = {st['exceedance_probability']:.3f}")
    print(f"  minimum average subsidy among gigaton runs: {st['minimum_subsidy']['value']}")
    for row in res["ranking"][:5]:
        flag = " (below dummy)" if row["irrelevant"] else ""
        print(f"    {row['label']:28s} {row['index']:.3f}{flag}")
    for row in res["summary"]:
        print(f"    {row['qoi']}: median {row['q50'] / 1e6:8.1f} Mt, 5-95% [{row['q05'] / 1e6:.1f}, {row['q95'] / 1e6:.1f}]")
    emit_plot_data(summary.run_dir, bins=20)
