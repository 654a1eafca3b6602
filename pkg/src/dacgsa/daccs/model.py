"""Forward simulator of direct-air-capture deployment.

Three technologies (LS, SS, CaO) are deployed across regions on a 5-year
grid.  Each period is integrated in annual sub-steps with prices,
subsidies and GDP held at their period value.  Investment follows a myopic
bang-bang rule: whenever removal revenue (carbon price plus subsidy, if the
region subsidises) covers the levelised removal cost, capacity additions go
to the logistic growth bound, otherwise to zero.

Units: capacity in tCO2/yr, money in USD, energy in GJ.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._kernel import advance

__all__ = [
    "TECHNOLOGIES",
    "InvariantViolation",
    "Technology",
    "Region",
    "SubsidySchedule",
    "Scenario",
    "MarketParams",
    "DaccsConfig",
    "RunInputs",
    "DacWorld",
    "load_config",
    "annuity_factor",
    "adjusted_wacc",
    "growth_bound",
    "learning_update",
    "subsidy_at",
    "block_factor",
    "inputs_from_values",
    "new_world",
    "step_investment",
    "simulate",
]

TECHNOLOGIES = ("LS", "SS", "CaO")
CONFIG_SCHEMA = "dacgsa.daccs_config/1"


class InvariantViolation(RuntimeError):
    """A simulated state broke one of the model's hard constraints."""


@dataclass(frozen=True)
class Technology:
    """Techno-economic parameters of one capture technology.

    ``capex0`` is per unit of annual capacity (USD per tCO2/yr), ``opex0``
    per unit of capacity and year, ``thermal`` and ``electric`` in GJ per
    tonne captured.
    """

    id: str
    capex0: float
    opex0: float
    learn_capex: float
    learn_opex: float
    learn_fin: float
    thermal: float
    electric: float
    capacity_factor: float
    lifetime: int
    wacc0: float
    cost_floor: float = 0.0

    def __post_init__(self):
        if self.id not in TECHNOLOGIES:
            raise ValueError(f"unknown technology {self.id!r}")
        if not 0 < self.capacity_factor <= 1:
            raise ValueError(f"{self.id}: capacity factor must lie in (0, 1]")
        if self.lifetime < 1:
            raise ValueError(f"{self.id}: lifetime must be at least 1 year")
        if self.capex0 <= 0 or self.opex0 <= 0:
            raise ValueError(f"{self.id}: initial costs must be positive")
        if self.thermal < 0 or self.electric < 0 or self.cost_floor < 0:
            raise ValueError(f"{self.id}: energy needs and cost floor must be non-negative")


@dataclass(frozen=True)
class Region:
    id: str
    saturation_share: float
    subsidizes: bool
    gdp2025: float
    gdp_growth: float = 0.02
    interest_rate: float = 0.03
    wacc_ratio: float = 1.0
    electricity_price: float = 20.0
    gas_price: float = 8.0

    def gdp(self, year):
        """Exogenous GDP path, USD/yr."""
        return self.gdp2025 * (1.0 + self.gdp_growth) ** (np.asarray(year, dtype=float) - 2025)


@dataclass(frozen=True)
class SubsidySchedule:
    """Ramp-up to ``peak`` at year ``timing``, exponential phase-out after it.

    ``max_frac`` caps each region's yearly outlay as a share of its GDP.
    """

    peak: float
    timing: int
    phase_out: float
    max_frac: float = 1.0

    def __post_init__(self):
        if self.peak < 0:
            raise ValueError("subsidy peak must be non-negative")
        if not self.phase_out > 0:
            raise ValueError("phase-out rate must be positive")
        if not 0 < self.max_frac <= 1:
            raise ValueError("max_frac must lie in (0, 1]")
        if self.timing < 2025 or (self.timing - 2025) % 5:
            raise ValueError(f"subsidy timing {self.timing} is not on the 5-year grid")


@dataclass(frozen=True)
class Scenario:
    """Carbon-price path per grid year (and optionally per region)."""

    id: str
    years: tuple
    carbon_price: np.ndarray
    storage_cost: float = 20.0

    def __post_init__(self):
        years = tuple(int(y) for y in self.years)
        cp = np.asarray(self.carbon_price, dtype=float)
        if cp.shape[0] != len(years):
            raise ValueError("one carbon price per grid year required")
        if np.any(cp < 0):
            raise ValueError("carbon prices must be non-negative")
        if self.storage_cost < 0:
            raise ValueError("storage cost must be non-negative")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "carbon_price", cp)

    def price_at(self, year: int, n_regions: int) -> np.ndarray:
        """Carbon price in force at ``year``: the value of the latest grid year not after it."""
        idx = np.searchsorted(self.years, year, side="right") - 1
        if idx < 0:
            raise ValueError(f"year {year} precedes the carbon-price path")
        p = self.carbon_price[idx]
        return np.broadcast_to(p, (n_regions,)).astype(float)


@dataclass(frozen=True)
class MarketParams:
    """Market-penetration and financing-spread inputs shared by all technologies."""

    growth_rate: float
    initial_capacity: float
    global_saturation: float
    wacc_convergence: float = 0.0
    wacc_spread: float = 5.5

    def __post_init__(self):
        if self.growth_rate < 0 or self.initial_capacity < 0:
            raise ValueError("growth rate and initial capacity must be non-negative")
        if not self.global_saturation > 0:
            raise ValueError("global saturation must be positive")


@dataclass
class DaccsConfig:
    regions: list
    scenarios: dict
    start: int = 2025
    end: int = 2100
    step: int = 5
    nameplate: float = 1.0e6
    storage_cost: float = 20.0
    interest_rate: float = 0.03
    discount_rate: float = 0.03
    consumption_share: float = 0.6
    saturation_central: float = 26.62e9
    saturation_reference: float = 0.0175

    def __post_init__(self):
        shares = np.array([r.saturation_share for r in self.regions])
        if abs(shares.sum() - 1.0) > 1e-9:
            raise ValueError(f"saturation shares sum to {shares.sum()!r}, not 1")
        if len({r.id for r in self.regions}) != len(self.regions):
            raise ValueError("duplicate region ids")
        if self.start % self.step or (self.end - self.start) % self.step:
            raise ValueError("grid must be aligned to its step")

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.start, self.end + 1, self.step)

    @property
    def region_ids(self) -> list:
        return [r.id for r in self.regions]

    def scenario(self, sid: str) -> Scenario:
        try:
            return self.scenarios[sid.upper()]
        except KeyError:
            raise KeyError(f"unknown scenario {sid!r}; have {sorted(self.scenarios)}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "DaccsConfig":
        elec = d.get("electricity_price", 20.0)
        gas = d.get("gas_price", 8.0)
        ir = d.get("interest_rate", 0.03)
        regions = [
            Region(
                id=r["id"],
                saturation_share=float(r["saturation_share"]),
                subsidizes=bool(r["subsidizes"]),
                gdp2025=float(r["gdp2025"]),
                gdp_growth=float(r.get("gdp_growth", 0.02)),
                interest_rate=float(r.get("interest_rate", ir)),
                wacc_ratio=float(r.get("wacc_ratio", 1.0)),
                electricity_price=float(r.get("electricity_price", elec)),
                gas_price=float(r.get("gas_price", gas)),
            )
            for r in d["regions"]
        ]
        storage = float(d.get("storage_cost", 20.0))
        scenarios = {
            k.upper(): Scenario(k.upper(), v["years"], v["carbon_price"], float(v.get("storage_cost", storage)))
            for k, v in d["scenarios"].items()
        }
        g = d.get("grid", {})
        sat = d.get("global_saturation", {})
        return cls(
            regions=regions,
            scenarios=scenarios,
            start=int(g.get("start", 2025)),
            end=int(g.get("end", 2100)),
            step=int(g.get("step", 5)),
            nameplate=float(d.get("nameplate", 1.0e6)),
            storage_cost=storage,
            interest_rate=float(ir),
            discount_rate=float(d.get("discount_rate", 0.03)),
            consumption_share=float(d.get("consumption_share", 0.6)),
            saturation_central=float(sat.get("central", 26.62e9)),
            saturation_reference=float(sat.get("reference_index", 0.0175)),
        )


def load_config(path=None) -> DaccsConfig:
    """Read a config bundle; the packaged illustrative defaults when ``path`` is None."""
    if path is None:
        text = resources.files("dacgsa.daccs").joinpath("data/default_config.json").read_text()
    else:
        text = Path(path).read_text()
    return DaccsConfig.from_dict(json.loads(text))


# --- scalar building blocks --------------------------------------------------------


def annuity_factor(rate, lifetime):
    """sum_{tau=0}^{LT} (1 + rate)^-tau, elementwise, in closed form."""
    rate = np.asarray(rate, dtype=float)
    lifetime = np.asarray(lifetime, dtype=float)
    if np.any(1.0 + rate <= 0):
        raise ValueError("discount base 1 + rate must be positive")
    q = 1.0 / (1.0 + rate)
    small = np.abs(rate) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        geo = (1.0 - q ** (lifetime + 1)) / (1.0 - q)
    return np.where(small, lifetime + 1.0, geo)


def adjusted_wacc(omega, ir, lifetime: int) -> float:
    """Ratio of the interest-rate annuity factor to the WACC annuity factor.

    ``omega`` and ``ir`` are scalars or yearly paths starting at the
    investment year; a path shorter than the lifetime is held at its last
    value.
    """
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    r = np.atleast_1d(np.asarray(ir, dtype=float))
    if np.any(1.0 + om <= 0) or np.any(1.0 + r <= 0):
        raise ValueError("discount base 1 + rate must be positive")
    tau = np.arange(int(lifetime) + 1)
    om_t = om[np.minimum(tau, om.size - 1)]
    r_t = r[np.minimum(tau, r.size - 1)]
    return float(np.sum((1.0 + r_t) ** -tau) / np.sum((1.0 + om_t) ** -tau))


def growth_bound(K_now, k, L, K0):
    """Largest admissible capacity addition: k K (1 - K/L) clamped at 0, plus K0."""
    K_now = np.asarray(K_now, dtype=float)
    return np.maximum(k * K_now * (1.0 - K_now / L), 0.0) + K0


def learning_update(base, units, exponent, floor=0.0):
    """Power-law experience curve ``base * units^-exponent``, floored."""
    units = np.asarray(units, dtype=float)
    if np.any(units < 1.0):
        raise ValueError("cumulative units must be at least 1")
    return np.maximum(base * units ** (-np.asarray(exponent, dtype=float)), floor)


def subsidy_at(schedule: SubsidySchedule, t):
    """Per-tonne subsidy in year ``t``; the ramp at T = 2025 is taken as S."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 2025):
        raise ValueError("subsidies start in 2025")
    S, T = schedule.peak, float(schedule.timing)
    if T == 2025:
        ramp = np.full_like(t, S)
    else:
        ramp = S * (t - 2025.0) / (T - 2025.0)
    with np.errstate(over="ignore"):
        decay = S * np.exp(-schedule.phase_out * np.maximum(t - T, 0.0))
    out = np.where(t <= T, ramp, decay)
    return float(out) if out.ndim == 0 else out


def block_factor(t, rho: float, step: int = 5, base_year: int = 2025):
    """Discount weight of a grid period: sum over its years of (1+rho)^-(year - base)."""
    t = np.asarray(t, dtype=float)
    tau = np.arange(step)
    out = ((1.0 + rho) ** -(t[..., None] + tau - base_year)).sum(-1)
    return float(out) if out.ndim == 0 else out


# --- run inputs ---------------------------------------------------------------------


@dataclass(frozen=True)
class RunInputs:
    technologies: tuple
    market: MarketParams
    schedule: SubsidySchedule


_TECH_FIELDS = {
    "capex0": "capex0",
    "opex0": "opex0",
    "learn_capex": "learn_capex",
    "learn_opex": "learn_opex",
    "thermal": "thermal",
    "elec": "electric",
    "capacity_factor": "capacity_factor",
    "lifetime": "lifetime",
    "wacc": "wacc0",
}


def inputs_from_values(values: dict, config: DaccsConfig) -> RunInputs:
    """Build model inputs from one realised input vector keyed by input name.

    ``initial_capacity`` is read in MtCO2/yr and ``max_capacity`` as the
    land-share index whose reference value maps to the central global
    saturation level of the config.
    """
    missing = [f"{p}_{d}" for p in _TECH_FIELDS for d in TECHNOLOGIES if f"{p}_{d}" not in values]
    missing += [k for k in ("cost_floor", "learn_fin", "growth_rate", "initial_capacity", "max_capacity",
                            "subsidy_peak", "subsidy_timing", "subsidy_phaseout", "subsidy_max_frac")
                if k not in values]
    if missing:
        raise KeyError(f"missing inputs: {missing}")
    techs = []
    for d in TECHNOLOGIES:
        kw = {f: float(values[f"{p}_{d}"]) for p, f in _TECH_FIELDS.items()}
        kw["lifetime"] = int(round(kw["lifetime"]))
        techs.append(Technology(id=d, learn_fin=float(values["learn_fin"]),
                                cost_floor=float(values["cost_floor"]), **kw))
    market = MarketParams(
        growth_rate=float(values["growth_rate"]),
        initial_capacity=float(values["initial_capacity"]) * 1e6,
        global_saturation=float(values["max_capacity"]) / config.saturation_reference * config.saturation_central,
        wacc_convergence=float(values.get("wacc_convergence", 0.0)),
        wacc_spread=float(values.get("wacc_regional_spread", 5.5)),
    )
    schedule = SubsidySchedule(
        peak=float(values["subsidy_peak"]),
        timing=int(round(values["subsidy_timing"])),
        phase_out=float(values["subsidy_phaseout"]),
        max_frac=float(values["subsidy_max_frac"]),
    )
    return RunInputs(tuple(techs), market, schedule)


# --- world state --------------------------------------------------------------------


@dataclass
class DacWorld:
    """Annual state arrays, indexed ``[year, technology, region]`` or ``[year, region]``."""

    config: DaccsConfig
    inputs: RunInputs
    scenario_id: str
    years: np.ndarray
    capacity: np.ndarray
    additions: np.ndarray
    investment: np.ndarray
    bound: np.ndarray
    capex: np.ndarray
    opex: np.ndarray
    omega_adj: np.ndarray
    levelized_cost: np.ndarray
    carbon_price: np.ndarray
    subsidy: np.ndarray
    realized: np.ndarray
    outlay: np.ndarray
    outlay_cap: np.ndarray
    gdp: np.ndarray
    energy_cost: np.ndarray
    storage_cost: float
    cumulative: np.ndarray
    next_year: int
    checks: dict = field(default_factory=lambda: {"growth": 0, "nonneg": 0, "cap": 0, "learning": 0})

    @property
    def capacity_factor(self) -> np.ndarray:
        return np.array([t.capacity_factor for t in self.inputs.technologies])

    @property
    def subsidizes(self) -> np.ndarray:
        return np.array([r.subsidizes for r in self.config.regions])

    def index(self, year: int) -> int:
        i = int(year) - int(self.years[0])
        if not 0 <= i < self.years.size:
            raise KeyError(f"year {year} outside the simulated horizon")
        if year >= self.next_year:
            raise KeyError(f"year {year} has not been simulated yet")
        return i

    def capacity_at(self, year: int) -> np.ndarray:
        return self.capacity[self.index(year)]


def _regional_wacc(wacc0, regions, market: MarketParams, year: int):
    ratio = np.array([r.wacc_ratio for r in regions])
    fade = np.exp(-market.wacc_convergence * (year - 2025) / 100.0)
    spread = 1.0 + (ratio - 1.0) * (market.wacc_spread / 5.5) * fade
    return np.asarray(wacc0)[:, None] * spread[None, :]


def new_world(config: DaccsConfig, inputs: RunInputs, scenario: Scenario | str) -> DacWorld:
    if isinstance(scenario, str):
        scenario = config.scenario(scenario)
    years = np.arange(config.start, config.end + 1)
    Y, D, R = years.size, len(TECHNOLOGIES), len(config.regions)
    z3 = lambda: np.zeros((Y, D, R))
    z2 = lambda: np.zeros((Y, R))
    elec = np.array([r.electricity_price for r in config.regions])
    gas = np.array([r.gas_price for r in config.regions])
    energy = np.empty((D, R))
    for j, t in enumerate(inputs.technologies):
        if t.id == "LS":
            energy[j] = t.thermal * gas + t.electric * elec
        else:
            energy[j] = (t.thermal + t.electric) * elec
    return DacWorld(
        config=config, inputs=inputs, scenario_id=scenario.id, years=years,
        capacity=z3(), additions=z3(), investment=z3(), bound=z3(), capex=z3(), opex=z3(),
        omega_adj=z3(), levelized_cost=z3(), carbon_price=z2(), subsidy=np.zeros(Y),
        realized=np.ones((Y, R)), outlay=z2(), outlay_cap=z2(), gdp=z2(),
        energy_cost=energy, storage_cost=scenario.storage_cost,
        cumulative=np.zeros((D, R)), next_year=config.start,
    )


def _check_period(world: DacWorld, i0: int, i1: int):
    sl = slice(i0, i1)
    K = world.capacity[sl]
    K_prev = np.concatenate([world.capacity[i0 - 1:i0] if i0 > 0 else np.zeros_like(K[:1]), K[:-1]])
    yrs = f"{world.years[i0]}-{world.years[i1 - 1]}"
    tol = 1e-9 * np.maximum(1.0, np.abs(K_prev))
    if np.any(K - K_prev > world.bound[sl] + tol):
        world.checks["growth"] += 1
        raise InvariantViolation(f"growth bound exceeded in {yrs}")
    arrays = (world.capacity, world.additions, world.investment, world.capex, world.opex, world.outlay)
    if any(np.any(a[sl] < 0) for a in arrays) or np.any(world.subsidy[sl] < 0):
        world.checks["nonneg"] += 1
        raise InvariantViolation(f"negative state in {yrs}")
    if np.any(world.outlay[sl] > world.outlay_cap[sl] * (1 + 1e-9) + 1e-6):
        world.checks["cap"] += 1
        raise InvariantViolation(f"subsidy cap exceeded in {yrs}")
    techs = world.inputs.technologies
    floors = np.array([t.cost_floor for t in techs])[:, None]
    if np.any(world.capex[sl] < floors):
        world.checks["learning"] += 1
        raise InvariantViolation(f"capex below floor in {yrs}")
    if i1 - i0 > 1 or i0 > 0:
        j0 = max(i0, 1)
        learning = np.array([t.learn_capex >= 0 and t.learn_opex >= 0 for t in techs])[None, :, None]
        rising = (world.capex[j0:i1] > world.capex[j0 - 1:i1 - 1] * (1 + 1e-12)) | \
                 (world.opex[j0:i1] > world.opex[j0 - 1:i1 - 1] * (1 + 1e-12))
        if np.any(rising & learning):
            world.checks["learning"] += 1
            raise InvariantViolation(f"unit costs rose despite non-negative learning in {yrs}")


def step_investment(world: DacWorld, scenario: Scenario, schedule: SubsidySchedule, t: int) -> DacWorld:
    """Advance ``world`` through the grid period starting at year ``t``.

    Carbon price, subsidy rate and GDP are evaluated at ``t`` and held for
    the period's annual sub-steps.  Each sub-step decides additions per
    (technology, region), applies depreciation, enforces the subsidy cap
    and updates learning; the period ends with hard checks on growth
    bound, non-negativity, subsidy cap and learning.
    """
    cfg, inp = world.config, world.inputs
    if t != world.next_year:
        raise ValueError(f"world is at {world.next_year}, cannot step period {t}")
    techs, mk = inp.technologies, inp.market
    R = len(cfg.regions)
    cp = scenario.price_at(t, R)
    s = float(subsidy_at(schedule, t))
    gdp = np.array([r.gdp(t) for r in cfg.regions])
    cap = schedule.max_frac * gdp
    i0 = t - cfg.start
    i1 = min(t + cfg.step, cfg.end + 1) - cfg.start
    col = lambda attr: np.array([getattr(tc, attr) for tc in techs], dtype=float)
    advance(
        i0, i1, cp, s, cap, world.subsidizes,
        col("capex0"), col("opex0"), col("learn_capex"), col("learn_opex"), col("learn_fin"),
        col("cost_floor"), col("capacity_factor"), col("lifetime"), world.energy_cost,
        float(world.storage_cost), _regional_wacc(col("wacc0"), cfg.regions, mk, t),
        np.array([r.interest_rate for r in cfg.regions]), mk.growth_rate, mk.initial_capacity,
        mk.global_saturation * np.array([r.saturation_share for r in cfg.regions]), cfg.nameplate,
        world.capacity, world.additions, world.investment, world.bound, world.capex, world.opex,
        world.omega_adj, world.levelized_cost, world.realized, world.outlay, world.cumulative,
    )
    world.carbon_price[i0:i1] = cp
    world.subsidy[i0:i1] = s
    world.outlay_cap[i0:i1] = cap
    world.gdp[i0:i1] = gdp
    world.next_year = i1 + cfg.start
    _check_period(world, i0, i1)
    return world


def simulate(config: DaccsConfig, inputs: RunInputs, scenario: Scenario | str,
             schedule: SubsidySchedule | None = None) -> DacWorld:
    """Run the full horizon.  ``schedule`` overrides the one in ``inputs``."""
    if isinstance(scenario, str):
        scenario = config.scenario(scenario)
    schedule = inputs.schedule if schedule is None else schedule
    world = new_world(config, inputs, scenario)
    for t in config.grid:
        step_investment(world, scenario, schedule, int(t))
    return world
