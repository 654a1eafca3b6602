"""One model evaluation: input vector in, QoIs (and optionally trajectories) out."""

from __future__ import annotations

from dataclasses import replace

from .model import TECHNOLOGIES, DacWorld, DaccsConfig, inputs_from_values, simulate
from .qoi import qoi_vector

__all__ = ["run_from_values", "trajectory_rows", "TRAJECTORY_VARIABLES"]

TRAJECTORY_VARIABLES = ("capacity", "additions", "investment", "capex", "opex", "omega_adj", "levelized_cost")


def run_from_values(values: dict, config: DaccsConfig, scenario: str):
    """Simulate one input vector and its zero-subsidy baseline.

    Returns
    -------
    world, baseline : DacWorld
    qoi : dict
        Scalar QoIs keyed by column name (see :func:`qoi_vector`).
    """
    inputs = inputs_from_values(values, config)
    world = simulate(config, inputs, scenario)
    baseline = simulate(config, inputs, scenario, replace(inputs.schedule, peak=0.0))
    return world, baseline, qoi_vector(world, baseline)


def trajectory_rows(world: DacWorld, run_id: int, variables=("capacity",), years=None):
    """Tidy rows ``(run_id, region, tech, year, variable, value)`` on the grid years."""
    years = world.config.grid if years is None else years
    regions = world.config.region_ids
    for var in variables:
        if var not in TRAJECTORY_VARIABLES:
            raise ValueError(f"unknown trajectory variable {var!r}")
        arr = getattr(world, var)
        for y in years:
            block = arr[world.index(int(y))]
            for d, tech in enumerate(TECHNOLOGIES):
                for n, reg in enumerate(regions):
                    yield (run_id, reg, tech, int(y), var, float(block[d, n]))
