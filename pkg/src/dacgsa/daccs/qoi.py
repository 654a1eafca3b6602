"""Quantities of interest read off a simulated world."""

from __future__ import annotations

import numpy as np

from .model import DacWorld, SubsidySchedule, block_factor, subsidy_at

__all__ = ["EMISSION_YEARS", "GAIN_YEARS", "qoi_emissions", "qoi_policy_gains", "qoi_total_subsidies", "qoi_vector"]

EMISSION_YEARS = (2040, 2045, 2050)
GAIN_YEARS = (2025, 2030, 2035, 2040, 2045, 2050)


def qoi_emissions(world: DacWorld, years=EMISSION_YEARS) -> tuple:
    """Net removals sum_n sum_d f_d K(d, t, n) in tCO2/yr for each year."""
    f = world.capacity_factor[:, None]
    return tuple(float((f * world.capacity_at(y)).sum()) for y in years)


def _economy(world: DacWorld, year: int, metric: str) -> np.ndarray:
    i = world.index(year)
    f = world.capacity_factor[:, None]
    K = world.capacity[i]
    removed = (f * K).sum(0)
    operating = (world.opex[i] * K + (world.energy_cost + world.storage_cost) * f * K).sum(0)
    revenue = world.carbon_price[i] * removed
    if metric == "gdp":
        return world.gdp[i] + revenue - operating
    if metric == "consumption":
        return world.config.consumption_share * world.gdp[i] + revenue - operating - world.investment[i].sum(0)
    raise ValueError(f"metric must be 'gdp' or 'consumption', got {metric!r}")


def qoi_policy_gains(world: DacWorld, baseline: DacWorld, metric: str = "gdp", rho: float = 0.03,
                     years=GAIN_YEARS):
    """Per-period gains G(t) summed over regions, and their discounted total.

    Returns
    -------
    gains : ndarray
        G(t) for each of ``years``, USD/yr.
    npv : float
        sum_t G(t) times the 5-year block discount factor of t.
    """
    if not np.array_equal(world.years, baseline.years) or world.scenario_id != baseline.scenario_id:
        raise ValueError("world and baseline must share grid and scenario")
    gains = np.array([(_economy(world, y, metric) - _economy(baseline, y, metric)).sum() for y in years])
    npv = float((gains * block_factor(np.array(years), rho, world.config.step)).sum())
    return gains, npv


def qoi_total_subsidies(world: DacWorld, schedule: SubsidySchedule, rho: float = 0.03,
                        years=GAIN_YEARS) -> float:
    """Discounted subsidies paid on removals in subsidising regions, USD.

    Uses the per-tonne rate of ``schedule`` (so a different schedule can be
    evaluated on frozen capacities) times the share actually paid out when
    the GDP cap bound.
    """
    f = world.capacity_factor[:, None]
    sub = world.subsidizes
    total = 0.0
    for y in years:
        i = world.index(y)
        removed = (f * world.capacity[i]).sum(0)
        paid = (removed * world.realized[i])[sub].sum()
        total += paid * subsidy_at(schedule, y) * block_factor(y, rho, world.config.step)
    return float(total)


def qoi_vector(world: DacWorld, baseline: DacWorld, rho: float | None = None) -> dict:
    """All scalar QoIs of one run, keyed by column name."""
    rho = world.config.discount_rate if rho is None else rho
    out = {f"E{y}": v for y, v in zip(EMISSION_YEARS, qoi_emissions(world))}
    for metric in ("gdp", "consumption"):
        g, npv = qoi_policy_gains(world, baseline, metric, rho)
        for y, v in zip(GAIN_YEARS, g):
            out[f"G_{metric}_{y}"] = float(v)
        out[f"G_{metric}_npv"] = npv
    out["TS"] = qoi_total_subsidies(world, world.inputs.schedule, rho)
    return out
