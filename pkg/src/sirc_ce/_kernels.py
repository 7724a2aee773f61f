"""Compiled batch evaluation of the SIRC cost index.

Mirrors ``ode_sim.sirc_rhs`` + ``control_param.eval_control`` + trapezoidal
quadrature; ``tests/test_epi_opt.py`` checks the two paths agree.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, inline="always")
def _control(nodes, c, t, lo, hi):
    n = nodes.size
    if t <= nodes[0]:
        raw = c[0]
    elif t >= nodes[n - 1]:
        raw = c[n - 1]
    else:
        a, b = 0, n - 1
        while b - a > 1:
            m = (a + b) >> 1
            if nodes[m] <= t:
                a = m
            else:
                b = m
        slope = (c[a + 1] - c[a]) / (nodes[a + 1] - nodes[a])
        raw = slope * (t - nodes[a]) + c[a]
    if raw < lo:
        return lo
    if raw > hi:
        return hi
    return raw


@nb.njit(cache=True, inline="always")
def _rhs(S, I, R, C, p, u, v, out):
    mu, beta, gamma, alpha, delta, sigma, rho1, rho2 = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    infection = beta * S * I
    cross = beta * C * I
    g = rho1 * S * u
    h = rho2 * I * v
    out[0] = mu * (1 - S) - infection + gamma * C - g
    out[1] = infection + sigma * cross - (mu + alpha) * I - h
    out[2] = (1 - sigma) * cross + alpha * I - (mu + delta) * R + g + h
    out[3] = delta * R - cross - (mu + gamma) * C


@nb.njit(cache=True)
def _cost_one(y0, p, t, nodes_u, cu, lo_u, hi_u, nodes_v, cv, lo_v, hi_v, w):
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    S, I, R, C = y0[0], y0[1], y0[2], y0[3]
    u = _control(nodes_u, cu, t[0], lo_u, hi_u)
    v = _control(nodes_v, cv, t[0], lo_v, hi_v)
    phi_prev = w[0] * S + w[1] * I + 0.5 * w[2] * u * u + 0.5 * w[3] * v * v
    total = 0.0
    for j in range(t.size - 1):
        tj = t[j]
        dt = t[j + 1] - tj
        tm = tj + dt / 2
        te = tj + dt
        um = _control(nodes_u, cu, tm, lo_u, hi_u)
        vm = _control(nodes_v, cv, tm, lo_v, hi_v)
        ue = _control(nodes_u, cu, te, lo_u, hi_u)
        ve = _control(nodes_v, cv, te, lo_v, hi_v)
        _rhs(S, I, R, C, p, u, v, k1)
        _rhs(S + dt / 2 * k1[0], I + dt / 2 * k1[1], R + dt / 2 * k1[2], C + dt / 2 * k1[3], p, um, vm, k2)
        _rhs(S + dt / 2 * k2[0], I + dt / 2 * k2[1], R + dt / 2 * k2[2], C + dt / 2 * k2[3], p, um, vm, k3)
        _rhs(S + dt * k3[0], I + dt * k3[1], R + dt * k3[2], C + dt * k3[3], p, ue, ve, k4)
        S = S + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        I = I + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        R = R + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        C = C + dt / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        if not (np.isfinite(S) and np.isfinite(I) and np.isfinite(R) and np.isfinite(C)):
            return np.nan
        # controls at the step end, re-evaluated at the grid time t[j+1]
        u = _control(nodes_u, cu, t[j + 1], lo_u, hi_u)
        v = _control(nodes_v, cv, t[j + 1], lo_v, hi_v)
        phi = w[0] * S + w[1] * I + 0.5 * w[2] * u * u + 0.5 * w[3] * v * v
        total += dt * (phi_prev + phi) / 2
        phi_prev = phi
    return total


@nb.njit(cache=True, parallel=True)
def cost_batch(y0, p, t, nodes_u, cu, lo_u, hi_u, nodes_v, cv, lo_v, hi_v, w):
    n = cu.shape[0]
    out = np.empty(n)
    for m in nb.prange(n):
        out[m] = _cost_one(y0, p, t, nodes_u, cu[m], lo_u, hi_u, nodes_v, cv[m], lo_v, hi_v, w)
    return out
