"""Compiled annual sub-step loop of the deployment model."""

import numpy as np
from numba import njit


@njit(cache=True)
def _annuity(rate, lifetime):
    if abs(rate) < 1e-12:
        return lifetime + 1.0
    q = 1.0 / (1.0 + rate)
    return (1.0 - q ** (lifetime + 1.0)) / (1.0 - q)


@njit(cache=True)
def advance(i0, i1, cp, s, cap, sub, capex0, opex0, bcap, bop, bfin, floor, f, LT, energy, storage,
            wacc, ir, k, K0, L, nameplate,
            capacity, additions, investment, bound, capex, opex, wadj, lcost, realized, outlay, cumulative):
    """Integrate years ``i0 <= i < i1`` in place.

    Per-period drivers (``cp``, ``s``, ``cap``, ``wacc``) are held fixed.
    Technology vectors have length D, regional vectors length R, state
    arrays are ``[year, D, R]`` or ``[year, R]``.
    """
    D = capex0.shape[0]
    R = cp.shape[0]
    A = np.empty(D)
    need = np.empty(D, dtype=np.bool_)
    Kp = np.empty(D)
    for i in range(i0, i1):
        for n in range(R):
            for d in range(D):
                Kp[d] = capacity[i - 1, d, n] if i > 0 else 0.0
                units = 1.0 + cumulative[d, n] / nameplate
                cx = max(capex0[d] * units ** (-bcap[d]), floor[d])
                ox = opex0[d] * units ** (-bop[d])
                om = wacc[d, n] * units ** (-bfin[d])
                a_ir = _annuity(ir[n], LT[d])
                w = a_ir / _annuity(om, LT[d])
                cost = (cx * w / a_ir + ox) / f[d] + energy[d, n] + storage
                rev = cp[n] + (s if sub[n] else 0.0)
                g = k * Kp[d] * (1.0 - Kp[d] / L[n])
                b = (g if g > 0.0 else 0.0) + K0
                go = rev >= cost
                A[d] = b if go else 0.0
                need[d] = go and cp[n] < cost
                capex[i, d, n] = cx
                opex[i, d, n] = ox
                wadj[i, d, n] = w
                lcost[i, d, n] = cost
                bound[i, d, n] = b
            r = 1.0
            paid = 0.0
            if sub[n] and s > 0.0:
                total = 0.0
                extra = 0.0
                for d in range(D):
                    total += f[d] * ((1.0 - 1.0 / LT[d]) * Kp[d] + A[d])
                    if need[d]:
                        extra += f[d] * A[d]
                total *= s
                extra *= s
                if total > cap[n]:
                    base = total - extra
                    lam = (cap[n] - base) / extra if (base <= cap[n] and extra > 0.0) else 0.0
                    if lam > 1.0:
                        lam = 1.0
                    for d in range(D):
                        if need[d]:
                            A[d] *= lam
                    if base > cap[n]:
                        r = cap[n] / base
            for d in range(D):
                K = (1.0 - 1.0 / LT[d]) * Kp[d] + A[d]
                capacity[i, d, n] = K
                additions[i, d, n] = A[d]
                investment[i, d, n] = A[d] * capex[i, d, n] * wadj[i, d, n]
                cumulative[d, n] += A[d]
                paid += f[d] * K
            realized[i, n] = r
            outlay[i, n] = s * r * paid if (sub[n] and s > 0.0) else 0.0
