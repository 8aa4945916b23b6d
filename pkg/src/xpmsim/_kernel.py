"""Fixed-step classical RK4 for one atom coupled to the control and probe fields.

State: three populations, three complex coherences and the two complex
intracavity fields (13 real dimensions). Input envelopes are sampled on the
half-step grid, so ``ein[2k]`` is the value at ``t_k`` and ``ein[2k+1]`` at
``t_k + dt/2``.
"""

import math

import numba as nb
import numpy as np

from xpmsim.atomic import bloch_rhs_core
from xpmsim.cavity import cavity_rhs_core
from xpmsim.constants import HBAR


@nb.njit(cache=True, nogil=True, inline="always")
def _derivs(p0, p1, p2, c10, c21, c20, Ec, Ep, ec, ep, Delta, delta, rates, mu10, mu21,
            tau, r2, tm, kc, kp, control_phase, exact):
    R10 = mu10 * Ec / HBAR
    R21 = mu21 * Ep / HBAR
    dp0, dp1, dp2, dc10, dc21, dc20 = bloch_rhs_core(
        p0, p1, p2, c10, c21, c20, R10, R21, Delta, delta,
        rates[0], rates[1], rates[2], rates[3], rates[4])
    dEc = cavity_rhs_core(Ec, ec, kc * c10, tau, r2, tm, control_phase, exact)
    dEp = cavity_rhs_core(Ep, ep, kp * c21, tau, r2, tm, True, exact)
    return dp0, dp1, dp2, dc10, dc21, dc20, dEc, dEp


@nb.njit(cache=True, nogil=True)
def integrate_rk4(n_steps, dt, ein_c, ein_p, Delta, delta, rates, mu10, mu21,
                  tau, r2, tm, kc, kp, control_phase, exact, pops, cohs, fields):
    """Integrate from the ground state with empty cavity; return the index of
    the first non-finite step, or -1 on success.

    ``rates`` is (gamma0, gamma1, gamma2, Gamma10, Gamma21).
    """
    p0, p1, p2 = 1.0, 0.0, 0.0
    c10 = 0j
    c21 = 0j
    c20 = 0j
    Ec = 0j
    Ep = 0j
    pops[0, 0] = p0
    pops[0, 1] = p1
    pops[0, 2] = p2
    cohs[0, :] = 0j
    fields[0, :] = 0j
    h = 0.5 * dt
    for k in range(n_steps):
        e0c = ein_c[2 * k]
        e0p = ein_p[2 * k]
        ehc = ein_c[2 * k + 1]
        ehp = ein_p[2 * k + 1]
        e1c = ein_c[2 * k + 2]
        e1p = ein_p[2 * k + 2]

        a0, a1, a2, a3, a4, a5, a6, a7 = _derivs(
            p0, p1, p2, c10, c21, c20, Ec, Ep, e0c, e0p, Delta, delta, rates,
            mu10, mu21, tau, r2, tm, kc, kp, control_phase, exact)
        b0, b1, b2, b3, b4, b5, b6, b7 = _derivs(
            p0 + h * a0, p1 + h * a1, p2 + h * a2, c10 + h * a3, c21 + h * a4,
            c20 + h * a5, Ec + h * a6, Ep + h * a7, ehc, ehp, Delta, delta, rates,
            mu10, mu21, tau, r2, tm, kc, kp, control_phase, exact)
        d0, d1, d2, d3, d4, d5, d6, d7 = _derivs(
            p0 + h * b0, p1 + h * b1, p2 + h * b2, c10 + h * b3, c21 + h * b4,
            c20 + h * b5, Ec + h * b6, Ep + h * b7, ehc, ehp, Delta, delta, rates,
            mu10, mu21, tau, r2, tm, kc, kp, control_phase, exact)
        f0, f1, f2, f3, f4, f5, f6, f7 = _derivs(
            p0 + dt * d0, p1 + dt * d1, p2 + dt * d2, c10 + dt * d3, c21 + dt * d4,
            c20 + dt * d5, Ec + dt * d6, Ep + dt * d7, e1c, e1p, Delta, delta, rates,
            mu10, mu21, tau, r2, tm, kc, kp, control_phase, exact)

        s = dt / 6.0
        p0 += s * (a0 + 2.0 * b0 + 2.0 * d0 + f0)
        p1 += s * (a1 + 2.0 * b1 + 2.0 * d1 + f1)
        p2 += s * (a2 + 2.0 * b2 + 2.0 * d2 + f2)
        c10 += s * (a3 + 2.0 * b3 + 2.0 * d3 + f3)
        c21 += s * (a4 + 2.0 * b4 + 2.0 * d4 + f4)
        c20 += s * (a5 + 2.0 * b5 + 2.0 * d5 + f5)
        Ec += s * (a6 + 2.0 * b6 + 2.0 * d6 + f6)
        Ep += s * (a7 + 2.0 * b7 + 2.0 * d7 + f7)

        if not (math.isfinite(p0 + p1 + p2) and math.isfinite(abs(Ec) + abs(Ep))
                and math.isfinite(abs(c10) + abs(c21) + abs(c20))):
            return k + 1
        pops[k + 1, 0] = p0
        pops[k + 1, 1] = p1
        pops[k + 1, 2] = p2
        cohs[k + 1, 0] = c10
        cohs[k + 1, 1] = c21
        cohs[k + 1, 2] = c20
        fields[k + 1, 0] = Ec
        fields[k + 1, 1] = Ep
    return -1


def allocate(n_steps: int):
    return (np.empty((n_steps + 1, 3)),
            np.empty((n_steps + 1, 3), dtype=np.complex128),
            np.empty((n_steps + 1, 2), dtype=np.complex128))
