import math
from dataclasses import replace

import numpy as np
import pytest
from daccs_reference import reference_run

from dacgsa.daccs import (
    TECHNOLOGIES,
    DaccsConfig,
    InvariantViolation,
    MarketParams,
    Region,
    RunInputs,
    Scenario,
    SubsidySchedule,
    Technology,
    adjusted_wacc,
    annuity_factor,
    block_factor,
    growth_bound,
    inputs_from_values,
    learning_update,
    load_config,
    new_world,
    qoi_emissions,
    qoi_policy_gains,
    qoi_total_subsidies,
    run_from_values,
    simulate,
    step_investment,
    subsidy_at,
    trajectory_rows,
)
from dacgsa.dist import default_input_space
from dacgsa.sampling import lhs_sample

GRID = list(range(2025, 2101, 5))


def tech(id="LS", **kw):
    base = dict(capex0=1000.0, opex0=50.0, learn_capex=0.1, learn_opex=0.05, learn_fin=0.03, thermal=5.0,
                electric=1.0, capacity_factor=0.9, lifetime=20, wacc0=0.07, cost_floor=10.0)
    base.update(kw)
    return Technology(id=id, **base)


def one_region_config(prices, subsidizes=True, gdp=1e12, end=2100):
    years = list(range(2025, end + 1, 5))
    prices = np.broadcast_to(prices, (len(years),))
    return DaccsConfig(
        regions=[Region("r1", 1.0, subsidizes, gdp, gdp_growth=0.0)],
        scenarios={"X": Scenario("X", years, prices)}, end=end,
    )


def run_inputs(techs=None, k=0.2, K0=1e6, L=10e9, schedule=None):
    techs = techs or tuple(tech(d) for d in TECHNOLOGIES)
    schedule = schedule or SubsidySchedule(0.0, 2030, 1.0, 1.0)
    return RunInputs(tuple(techs), MarketParams(k, K0, L), schedule)


def sample_values(n=50, seed=0):
    space = default_input_space()
    S = lhs_sample(space, n, designs=1, seed=seed)
    return [dict(zip(S.column_names, row)) for row in S.values]


# --- scalar building blocks ----------------------------------------------------------------


def oracle_annuity(rate, lt):
    return sum((1.0 + rate) ** -tau for tau in range(int(lt) + 1))


def test_adjusted_wacc_examples():
    assert adjusted_wacc(0.05, 0.05, 20) == pytest.approx(1.0, abs=1e-15)
    num = oracle_annuity(0.03, 20)
    den = oracle_annuity(0.07, 20)
    assert num == pytest.approx(15.8775, abs=5e-4) and den == pytest.approx(11.5940, abs=5e-4)
    assert adjusted_wacc(0.07, 0.03, 20) == pytest.approx(num / den, rel=1e-12)
    assert adjusted_wacc(0.07, 0.03, 20) == pytest.approx(1.3695, abs=1e-4)
    # dropping the final term (20 terms, not 21) gives a visibly different factor
    assert oracle_annuity(0.03, 19) / oracle_annuity(0.07, 19) == pytest.approx(1.3518, abs=1e-4)
    for ir in (0.0, 0.01, 0.05, 0.2):
        assert adjusted_wacc(0.0, ir, 25) <= 1.0


def test_adjusted_wacc_paths_extrapolate_flat():
    assert adjusted_wacc([0.07, 0.07], [0.03], 20) == adjusted_wacc(0.07, 0.03, 20)
    path = [0.10, 0.08, 0.06]
    expect = oracle_annuity(0.03, 5) / sum((1 + path[min(t, 2)]) ** -t for t in range(6))
    assert adjusted_wacc(path, 0.03, 5) == pytest.approx(expect, rel=1e-14)


def test_adjusted_wacc_rejects_bad_base():
    with pytest.raises(ValueError):
        adjusted_wacc(-1.0, 0.03, 20)
    with pytest.raises(ValueError):
        annuity_factor(-1.5, 10)


def test_annuity_closed_form_matches_sum():
    rng = np.random.default_rng(0)
    for _ in range(100):
        r, lt = rng.uniform(-0.05, 0.3), int(rng.integers(1, 40))
        assert annuity_factor(r, lt) == pytest.approx(oracle_annuity(r, lt), rel=1e-9)
    assert annuity_factor(0.0, 20) == 21.0


def test_growth_bound_examples():
    assert growth_bound(0.0, 0.2, 10e9, 1e6) == 1e6
    assert growth_bound(10e9, 0.2, 10e9, 1e6) == 1e6
    assert growth_bound(12e9, 0.2, 10e9, 1e6) == 1e6  # logistic term clamped
    assert growth_bound(5.0, 0.2, 10.0, 0.001) == pytest.approx(0.501, rel=1e-12)


def test_learning_examples():
    assert learning_update(1000.0, 1.0, 0.1) == 1000.0
    assert learning_update(1000.0, 4.0, 0.1) / learning_update(1000.0, 2.0, 0.1) == pytest.approx(2 ** -0.1)
    assert 2 ** -0.1 == pytest.approx(0.933, abs=5e-4)
    assert learning_update(1000.0, 10.0, -0.011, 50.0) > 1000.0
    assert learning_update(1000.0, 1e9, 0.5, 50.0) == 50.0
    with pytest.raises(ValueError):
        learning_update(1000.0, 0.5, 0.1)


def test_subsidy_examples():
    assert subsidy_at(SubsidySchedule(1000, 2050, 1.0), 2050) == 1000
    assert subsidy_at(SubsidySchedule(1000, 2050, 1.0), 2025) == 0
    assert subsidy_at(SubsidySchedule(425, 2040, 1.0), 2045) == pytest.approx(425 * math.exp(-5), rel=1e-12)
    assert 425 * math.exp(-5) == pytest.approx(2.864, abs=5e-4)
    assert subsidy_at(SubsidySchedule(300, 2025, 0.5), 2025) == 300
    assert subsidy_at(SubsidySchedule(1000, 2045, 1.0), 2035) == pytest.approx(500)
    with pytest.raises(ValueError):
        subsidy_at(SubsidySchedule(1, 2030, 1.0), 2020)


def test_schedule_validation():
    for bad in [(-1, 2030, 1.0, 0.1), (1, 2031, 1.0, 0.1), (1, 2030, 0.0, 0.1), (1, 2030, 1.0, 0.0)]:
        with pytest.raises(ValueError):
            SubsidySchedule(*bad)


def test_block_factor():
    assert block_factor(2025, 0.03) == pytest.approx(sum(1.03 ** -t for t in range(5)), rel=1e-14)
    assert block_factor(2025, 0.03) == pytest.approx(4.7171, abs=5e-5)
    assert block_factor(2040, 0.0) == 5.0


def test_scalar_oracles_random():
    rng = np.random.default_rng(42)
    for _ in range(100):
        S, T, a = rng.uniform(0, 1800), int(rng.choice(range(2025, 2051, 5))), rng.gamma(7, 1 / 7)
        t = int(rng.choice(GRID))
        if t <= T:
            want = S if T == 2025 else S * (t - 2025) / (T - 2025)
        else:
            want = S * math.exp(-a * (t - T))
        assert subsidy_at(SubsidySchedule(S, T, a), t) == pytest.approx(want, rel=1e-9, abs=1e-300)

        K, k, L, K0 = rng.uniform(0, 2e10), rng.uniform(0, 0.4), rng.uniform(1e9, 1e10), rng.uniform(8e5, 1.2e6)
        assert growth_bound(K, k, L, K0) == pytest.approx(max(k * K * (1 - K / L), 0) + K0, rel=1e-9)

        om, ir, lt = rng.uniform(0, 0.2), rng.uniform(0, 0.1), int(rng.integers(20, 26))
        assert adjusted_wacc(om, ir, lt) == pytest.approx(oracle_annuity(ir, lt) / oracle_annuity(om, lt), rel=1e-9)

        rho = rng.uniform(0, 0.1)
        assert block_factor(t, rho) == pytest.approx(sum((1 + rho) ** -(tau - 2025) for tau in range(t, t + 5)),
                                                     rel=1e-9)


# --- config -----------------------------------------------------------------------------


def test_default_config():
    cfg = load_config()
    assert len(cfg.regions) == 17
    assert sum(r.saturation_share for r in cfg.regions) == pytest.approx(1.0, abs=1e-9)
    assert {r.id for r in cfg.regions if not r.subsidizes} == {"laca", "mena", "mexico", "sasia", "ssa", "te"}
    assert cfg.saturation_central == pytest.approx(26.62e9)
    lts = cfg.scenario("lts").carbon_price
    assert np.all(np.diff(lts) >= 0)
    assert np.all(cfg.scenario("LTS").carbon_price >= cfg.scenario("NDC").carbon_price)
    assert cfg.grid[0] == 2025 and cfg.grid[-1] == 2100


def test_config_validation():
    with pytest.raises(ValueError):
        DaccsConfig([Region("a", 0.5, True, 1e12)], {})
    with pytest.raises(ValueError):
        Scenario("X", [2025, 2030], [-1.0, 2.0])
    with pytest.raises(ValueError):
        tech(capacity_factor=0.0)
    with pytest.raises(ValueError):
        tech(lifetime=0)
    with pytest.raises(KeyError):
        load_config().scenario("bau")


def test_saturation_mapping_matches_bounds():
    cfg = load_config()
    vals = sample_values(1)[0]
    for x, want in ((0.005, 7.61e9), (0.03, 45.64e9)):
        vals["max_capacity"] = x
        assert inputs_from_values(vals, cfg).market.global_saturation == pytest.approx(want, rel=1e-3)


def test_missing_inputs():
    vals = sample_values(1)[0]
    del vals["growth_rate"]
    with pytest.raises(KeyError):
        inputs_from_values(vals, load_config())


# --- step examples -------------------------------------------------------------------------


def test_no_revenue_no_investment_and_geometric_decay():
    prices = np.zeros(len(GRID))
    prices[0] = 1e5  # build some capacity in the first period, nothing afterwards
    cfg = one_region_config(prices)
    w = simulate(cfg, run_inputs(), "X")
    i = w.index(2030)
    assert np.all(w.additions[i:] == 0)
    delta = 1 / np.array([t.lifetime for t in w.inputs.technologies])[:, None]
    for j in range(i, i + 10):
        assert np.allclose(w.capacity[j], (1 - delta) * w.capacity[j - 1], rtol=1e-15)


def test_zero_price_zero_subsidy_world_stays_empty():
    cfg = one_region_config(0.0)
    w = simulate(cfg, run_inputs(), "X")
    assert np.all(w.capacity == 0) and np.all(w.investment == 0)
    assert qoi_emissions(w) == (0.0, 0.0, 0.0)


def test_first_addition_is_K0():
    cfg = one_region_config(1e5)
    world = new_world(cfg, run_inputs(K0=1.234e6), "X")
    step_investment(world, cfg.scenario("X"), world.inputs.schedule, 2025)
    assert np.all(world.additions[0] == 1.234e6)
    assert np.all(world.capacity[0] == 1.234e6)


def test_step_out_of_order():
    cfg = one_region_config(0.0)
    world = new_world(cfg, run_inputs(), "X")
    with pytest.raises(ValueError):
        step_investment(world, cfg.scenario("X"), world.inputs.schedule, 2030)


def test_subsidy_cap_binding():
    cfg = one_region_config(0.0, gdp=1e9)
    sched = SubsidySchedule(5000.0, 2030, 0.05, 0.05)
    w = simulate(cfg, run_inputs(schedule=sched, k=0.3), "X")
    f = w.capacity_factor[:, None]
    bound_years = 0
    for i in range(w.years.size):
        s = w.subsidy[i]
        go = w.levelized_cost[i] <= s
        uncapped = s * (f * ((1 - 1 / 20) * (w.capacity[i - 1] if i else 0) + go * w.bound[i])).sum()
        recomputed = s * w.realized[i, 0] * (f * w.capacity[i]).sum()
        assert recomputed == pytest.approx(w.outlay[i, 0], rel=1e-12, abs=1e-9)
        if s > 0 and uncapped > w.outlay_cap[i, 0]:
            bound_years += 1
            assert recomputed == pytest.approx(w.outlay_cap[i, 0], rel=1e-6)
    assert bound_years > 10


def test_non_subsidizing_region_gets_nothing():
    cfg = one_region_config(0.0, subsidizes=False)
    w = simulate(cfg, run_inputs(schedule=SubsidySchedule(1e5, 2025, 0.01, 1.0)), "X")
    assert np.all(w.capacity == 0) and np.all(w.outlay == 0)


def test_kernel_matches_reference():
    cfg = load_config()
    for vals in sample_values(12, seed=3):
        inp = inputs_from_values(vals, cfg)
        for sc in ("NDC", "LTS"):
            w = simulate(cfg, inp, sc)
            ref = reference_run(cfg, inp, cfg.scenario(sc), inp.schedule)
            for key in ("capacity", "additions", "outlay", "realized", "capex", "opex", "bound"):
                np.testing.assert_allclose(getattr(w, key), ref[key], rtol=1e-12, atol=1e-6)


def test_kernel_matches_reference_with_cap():
    cfg = one_region_config(50.0, gdp=2e9)
    inp = run_inputs(schedule=SubsidySchedule(3000.0, 2035, 0.1, 0.02), k=0.35)
    w = simulate(cfg, inp, "X")
    ref = reference_run(cfg, inp, cfg.scenario("X"), inp.schedule)
    assert np.any(ref["realized"] < 1)
    for key in ("capacity", "additions", "outlay", "realized"):
        np.testing.assert_allclose(getattr(w, key), ref[key], rtol=1e-12, atol=1e-6)


def test_invariant_violation_is_raised():
    cfg = one_region_config(1e5)
    world = new_world(cfg, run_inputs(), "X")
    step_investment(world, cfg.scenario("X"), world.inputs.schedule, 2025)
    world.capacity[3] += 1e9
    from dacgsa.daccs.model import _check_period

    with pytest.raises(InvariantViolation):
        _check_period(world, 0, 5)


# --- QoIs ------------------------------------------------------------------------------------


def test_emissions_single_term():
    cfg = one_region_config(0.0)
    w = simulate(cfg, run_inputs(techs=(tech("LS", capacity_factor=0.9), tech("SS"), tech("CaO"))), "X")
    w.capacity[:] = 0
    w.capacity[w.index(2050), 0, 0] = 1e9
    assert qoi_emissions(w) == (0.0, 0.0, pytest.approx(0.9e9))


def test_emissions_match_trajectory_table():
    cfg = load_config()
    world, _, q = run_from_values(sample_values(5, seed=1)[4], cfg, "LTS")
    rows = list(trajectory_rows(world, 7))
    f = dict(zip(TECHNOLOGIES, world.capacity_factor))
    for y in (2040, 2045, 2050):
        total = sum(f[r[2]] * r[5] for r in rows if r[3] == y and r[4] == "capacity")
        assert total == pytest.approx(q[f"E{y}"], rel=1e-12)
    assert rows[0][0] == 7 and len(rows) == 16 * 3 * 17


def test_policy_gains_identity_and_undiscounted():
    cfg = load_config()
    vals = sample_values(3, seed=2)
    inp = inputs_from_values(vals[0], cfg)
    w = simulate(cfg, inp, "LTS")
    g, npv = qoi_policy_gains(w, w, "gdp")
    assert np.all(g == 0) and npv == 0
    base = simulate(cfg, inp, "LTS", replace(inp.schedule, peak=0.0))
    for metric in ("gdp", "consumption"):
        g, npv0 = qoi_policy_gains(w, base, metric, rho=0.0)
        assert npv0 == pytest.approx(5 * g.sum(), rel=1e-12)
    with pytest.raises(ValueError):
        qoi_policy_gains(w, simulate(cfg, inp, "NDC"), "gdp")
    with pytest.raises(ValueError):
        qoi_policy_gains(w, base, "welfare")


def test_total_subsidies_zero_peak():
    cfg = load_config()
    inp = inputs_from_values(sample_values(1)[0], cfg)
    sched = replace(inp.schedule, peak=0.0)
    w = simulate(cfg, inp, "LTS", sched)
    assert qoi_total_subsidies(w, sched) == 0.0


def test_total_subsidies_single_term():
    cfg = one_region_config(0.0)
    sched = SubsidySchedule(100.0, 2025, 1.0, 1.0)
    w = simulate(cfg, run_inputs(schedule=sched), "X")
    w.capacity[:] = 0
    w.realized[:] = 1
    w.capacity[w.index(2025), 0, 0] = 1e9 / w.capacity_factor[0]  # f K = 1 Gt
    ts = qoi_total_subsidies(w, sched, 0.03)
    assert ts == pytest.approx(100e9 * block_factor(2025, 0.03), rel=1e-12)
    assert ts == pytest.approx(100e9 * 4.7171, rel=1e-4)


def test_total_subsidies_linear_in_peak():
    cfg = load_config()
    inp = inputs_from_values(sample_values(8, seed=4)[5], cfg)
    w = simulate(cfg, inp, "LTS")
    a = qoi_total_subsidies(w, inp.schedule)
    b = qoi_total_subsidies(w, replace(inp.schedule, peak=2 * inp.schedule.peak))
    assert b == pytest.approx(2 * a, rel=1e-12)


def oracle_ts(world, schedule, rho):
    total = 0.0
    for t in range(2025, 2051, 5):
        i = t - 2025
        s = subsidy_at(schedule, t)
        bf = sum((1 + rho) ** -(tau - 2025) for tau in range(t, t + 5))
        for n, reg in enumerate(world.config.regions):
            if not reg.subsidizes:
                continue
            for d in range(3):
                total += world.capacity_factor[d] * world.capacity[i, d, n] * s * world.realized[i, n] * bf
    return total


def test_total_subsidies_random_oracle():
    cfg = load_config()
    rng = np.random.default_rng(9)
    vals = sample_values(100, seed=9)
    for v in vals:
        inp = inputs_from_values(v, cfg)
        w = simulate(cfg, inp, "LTS")
        rho = rng.uniform(0, 0.08)
        want = oracle_ts(w, inp.schedule, rho)
        assert qoi_total_subsidies(w, inp.schedule, rho) == pytest.approx(want, rel=1e-9, abs=1e-6)


# --- invariants over random draws ---------------------------------------------------------


def test_invariants_and_determinism_random_draws():
    cfg = load_config()
    for v in sample_values(100, seed=11):
        for sc in ("NDC", "LTS"):
            w1, _, q1 = run_from_values(v, cfg, sc)
            w2, _, q2 = run_from_values(v, cfg, sc)
            assert all(c == 0 for c in w1.checks.values())
            assert np.array_equal(w1.capacity, w2.capacity) and q1 == q2
            assert (w1.capacity >= 0).all() and (w1.investment >= 0).all() and (w1.outlay >= 0).all()
            assert np.all(w1.outlay <= w1.outlay_cap * (1 + 1e-9) + 1e-6)
            dK = np.diff(w1.capacity, axis=0)
            assert np.all(dK <= w1.bound[1:] * (1 + 1e-12) + 1e-9 * np.maximum(1, w1.capacity[:-1]))


def test_learning_monotone_when_exponents_nonnegative():
    cfg = load_config()
    for v in sample_values(60, seed=12):
        for key in [k for k in v if k.startswith("learn_")]:
            v[key] = abs(v[key])
        w, _, _ = run_from_values(v, cfg, "LTS")
        assert np.all(np.diff(w.capex, axis=0) <= 1e-9)
        assert np.all(np.diff(w.opex, axis=0) <= 1e-9)


def test_lts_removals_at_least_ndc():
    cfg = load_config()
    hits = 0
    vals = sample_values(200, seed=13)
    for v in vals:
        e_ndc = run_from_values(v, cfg, "NDC")[2]["E2050"]
        e_lts = run_from_values(v, cfg, "LTS")[2]["E2050"]
        hits += e_lts >= e_ndc
    assert hits >= 0.9 * len(vals)


def test_trajectory_variables():
    cfg = one_region_config(0.0, end=2035)
    w = simulate(cfg, run_inputs(), "X")
    rows = list(trajectory_rows(w, 0, ("capacity", "capex")))
    assert len(rows) == 2 * 3 * 3
    with pytest.raises(ValueError):
        list(trajectory_rows(w, 0, ("nonsense",)))
