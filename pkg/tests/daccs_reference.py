"""Plain-numpy re-implementation of the simulator's annual step, used as a test oracle.

Written against the model description only (annuities summed term by term,
no shared helpers), so agreement with the compiled kernel is a real check.
"""

import numpy as np


def _annuity(rate, lifetime):
    rate = np.asarray(rate, float)
    lifetime = np.broadcast_to(np.asarray(lifetime), rate.shape)
    out = np.zeros(rate.shape)
    for idx in np.ndindex(rate.shape):
        out[idx] = sum((1.0 + rate[idx]) ** -tau for tau in range(int(lifetime[idx]) + 1))
    return out


def reference_run(config, inputs, scenario, schedule):
    techs, mk = inputs.technologies, inputs.market
    regions = config.regions
    D, R = len(techs), len(regions)
    years = np.arange(config.start, config.end + 1)
    col = lambda a: np.array([getattr(t, a) for t in techs], float)[:, None]
    f, LT = col("capacity_factor"), col("lifetime")
    elec = np.array([r.electricity_price for r in regions])
    gas = np.array([r.gas_price for r in regions])
    energy = np.array([t.thermal * gas + t.electric * elec if t.id == "LS" else (t.thermal + t.electric) * elec
                       for t in techs])
    sub = np.array([r.subsidizes for r in regions])
    ratio = np.array([r.wacc_ratio for r in regions])
    ir = np.array([r.interest_rate for r in regions])[None, :].repeat(D, 0)
    L = mk.global_saturation * np.array([r.saturation_share for r in regions])[None, :]
    K = np.zeros((D, R))
    cum = np.zeros((D, R))
    out = {k: [] for k in ("capacity", "additions", "outlay", "realized", "capex", "opex", "bound", "cap")}
    for y in years:
        period = config.start + (y - config.start) // config.step * config.step
        cp = np.full(R, scenario.carbon_price[list(scenario.years).index(period)])
        S, T, a = schedule.peak, schedule.timing, schedule.phase_out
        if period <= T:
            s = S if T == 2025 else S * (period - 2025) / (T - 2025)
        else:
            s = S * np.exp(-a * (period - T))
        gdp = np.array([r.gdp2025 * (1 + r.gdp_growth) ** (period - 2025) for r in regions])
        units = 1 + cum / config.nameplate
        capex = np.maximum(col("capex0") * units ** -col("learn_capex"), col("cost_floor"))
        opex = col("opex0") * units ** -col("learn_opex")
        spread = 1 + (ratio - 1) * (mk.wacc_spread / 5.5) * np.exp(-mk.wacc_convergence * (period - 2025) / 100)
        omega = col("wacc0") * spread[None, :] * units ** -col("learn_fin")
        a_ir = _annuity(ir, LT.repeat(R, 1))
        w_adj = a_ir / _annuity(omega, LT.repeat(R, 1))
        cost = (capex * w_adj / a_ir + opex) / f + energy + scenario.storage_cost
        revenue = cp[None, :] + s * sub[None, :]
        bound = np.maximum(mk.growth_rate * K * (1 - K / L), 0) + mk.initial_capacity
        go = revenue >= cost
        A = np.where(go, bound, 0.0)
        dep = go & (cp[None, :] < cost)
        Kn = (1 - 1 / LT) * K + A
        cap = schedule.max_frac * gdp
        realized = np.ones(R)
        outlay = np.zeros(R)
        for n in range(R):
            if not sub[n] or s <= 0:
                continue
            total = s * (f[:, 0] * Kn[:, n]).sum()
            if total > cap[n]:
                extra = s * (f[:, 0] * A[:, n] * dep[:, n]).sum()
                base = total - extra
                if base <= cap[n]:
                    lam = (cap[n] - base) / extra
                    A[dep[:, n], n] *= lam
                else:
                    A[dep[:, n], n] = 0.0
                    realized[n] = cap[n] / base
                Kn[:, n] = (1 - 1 / LT[:, 0]) * K[:, n] + A[:, n]
            outlay[n] = s * realized[n] * (f[:, 0] * Kn[:, n]).sum()
        cum = cum + A
        K = Kn
        for k, v in zip(out, (K, A, outlay, realized, capex, opex, bound, cap)):
            out[k].append(np.array(v, float))
    return {k: np.array(v) for k, v in out.items()}
