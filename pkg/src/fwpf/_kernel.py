"""Compiled closed-loop integrator.

Mirrors ``Controller.evaluate`` + ``longitudinal_rates`` + ``rk4_step`` so a
60 s run at 1 ms fits the runtime budget; tests pin it to the Python path.
Scalars travel in one float vector laid out by ``P_*``; sampled paths pass
their tables separately (empty arrays for analytic paths).
"""

import math

import numpy as np
from numba import njit

(
    P_MASS, P_IY, P_G, P_CBAR, P_CL0, P_CLA, P_CD0, P_K,
    P_KV, P_KGAMMA, P_KTH1, P_KTH2, P_KS, P_KOMEGA, P_PHIS, P_PHIW,
    P_PSIA, P_KDELTA,
    P_VD, P_GAMMAD, P_ALPHA_FREEZE,
    P_QDMODE, P_FTAU, P_SWMODE, P_TMAX, P_EPST, P_EPSV,
    P_PATH, P_PX, P_PY, P_RADIUS, P_DIR, P_PHASE,
    P_DIST, P_AMP, P_FREQ,
) = range(36)
N_PARAMS = 36

QD_FILTER, QD_ZERO, QD_FREEZE = 0, 1, 2
SW_SIGN, SW_SAT, SW_TANH = 0, 1, 2
PATH_CIRCLE, PATH_LINE, PATH_SAMPLED = 0, 1, 2

OK, FAULT_SINGULAR, FAULT_NONFINITE, FAULT_PATH = 0, 1, 2, 3

# row layout matches sim._RAW_COLUMNS
N_ROW = 30

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def wrap(a):
    r = a - TWO_PI * math.floor(a / TWO_PI + 0.5)
    if r <= -math.pi:
        r += TWO_PI
    return r


@njit(cache=True)
def switch(x, phi, mode):
    if mode == SW_SIGN or phi <= 0.0:
        if x > 0.0:
            return 1.0
        if x < 0.0:
            return -1.0
        return 0.0
    if mode == SW_SAT:
        r = x / phi
        return 1.0 if r > 1.0 else (-1.0 if r < -1.0 else r)
    return math.tanh(x / phi)


@njit(cache=True)
def sine_dd(a, b):
    h = 0.5 * (a - b)
    if abs(h) < 5e-7:
        sinc = 1.0 - h * h / 6.0
    else:
        sinc = math.sin(h) / h
    return math.cos(0.5 * (a + b)) * sinc


@njit(cache=True)
def frame(s, p, s_tab, x_tab, y_tab, psi_tab, kappa_tab):
    """Returns (px, py, psi_f, curvature, ok)."""
    kind = int(p[P_PATH])
    if kind == PATH_CIRCLE:
        sign = p[P_DIR]
        r = p[P_RADIUS]
        phi = p[P_PHASE] + sign * s / r
        return (p[P_PX] + r * math.cos(phi), p[P_PY] + r * math.sin(phi),
                phi + sign * 0.5 * math.pi, sign / r, True)
    if kind == PATH_LINE:
        h = p[P_PHASE]
        return p[P_PX] + s * math.cos(h), p[P_PY] + s * math.sin(h), h, 0.0, True
    if not (s_tab[0] <= s <= s_tab[-1]):
        return 0.0, 0.0, 0.0, 0.0, False
    return (np.interp(s, s_tab, x_tab), np.interp(s, s_tab, y_tab),
            np.interp(s, s_tab, psi_tab), np.interp(s, s_tab, kappa_tab), True)


@njit(cache=True)
def control(y, p, alpha_hold, px, py, psi_f, curvature):
    v, gamma, theta, q = y[0], y[1], y[2], y[3]
    x, yy, psi = y[4], y[5], y[7]
    m = p[P_MASS]
    g = p[P_G]
    alpha = theta - gamma
    qbar = p[P_CBAR] * v * v
    cl = p[P_CL0] + p[P_CLA] * alpha
    v_err = v - p[P_VD]
    gamma_err = gamma - p[P_GAMMAD]
    u1 = qbar * (p[P_CD0] + p[P_K] * cl * cl) + m * (g * math.sin(gamma) - p[P_KV] * v_err)
    u2 = -qbar * cl + m * (g * math.cos(gamma) - v * p[P_KGAMMA] * gamma_err)
    thrust = math.hypot(u1, u2)
    degenerate = False
    clamped = False
    if thrust < p[P_EPST]:
        alpha_d = alpha_hold
        degenerate = True
    elif u1 < 0.0:
        alpha_d = math.copysign(0.5 * math.pi, u2)
        clamped = True
    else:
        alpha_d = math.atan2(u2, u1)
    qd_mode = int(p[P_QDMODE])
    if qd_mode == QD_FREEZE:
        alpha_d = p[P_ALPHA_FREEZE]
        thrust = max(u1 * math.cos(alpha_d) + u2 * math.sin(alpha_d), 0.0)
    saturated = False
    if thrust > p[P_TMAX]:
        thrust = p[P_TMAX]
        saturated = True
    theta_d = alpha_d + p[P_GAMMAD]
    if qd_mode == QD_FILTER:
        q_d = (theta_d - y[9]) / p[P_FTAU]
        q_d_dot = (q_d - y[10]) / p[P_FTAU]
    else:
        q_d = 0.0
        q_d_dot = 0.0
    theta1_err = theta - theta_d
    theta2_err = q - q_d
    tau = p[P_IY] * (-p[P_KTH1] * theta1_err - p[P_KTH2] * theta2_err + q_d_dot)

    c = math.cos(psi_f)
    sn = math.sin(psi_f)
    dx = x - px
    dy = yy - py
    e_s = c * dx + sn * dy
    e_d = -sn * dx + c * dy
    psi_tilde = wrap(psi - psi_f)
    mode = int(p[P_SWMODE])
    s_dot = p[P_KS] * switch(e_s, p[P_PHIS], mode) + v * math.cos(psi_tilde)
    th = math.tanh(p[P_KDELTA] * e_d)
    delta = -p[P_PSIA] * th
    delta_prime = -p[P_PSIA] * p[P_KDELTA] * (1.0 - th * th)
    e_d_dot = v * math.sin(psi_tilde) - curvature * e_s * s_dot
    omega = (
        curvature * s_dot
        + delta_prime * e_d_dot
        - v * e_d * sine_dd(psi_tilde, delta)
        - p[P_KOMEGA] * switch(psi_tilde - delta, p[P_PHIW], mode)
    )
    return (thrust, tau, omega, s_dot, alpha_d, theta_d, q_d, q_d_dot, u1, u2,
            e_s, e_d, psi_tilde, delta, v_err, gamma_err, theta1_err, theta2_err,
            degenerate, clamped, saturated)


@njit(cache=True)
def first_nonfinite(a):
    for j in range(a.shape[0]):
        if not math.isfinite(a[j]):
            return j
    return -1


@njit(cache=True)
def blame(stage_in, stage_out):
    """First non-finite entry of a stage input, else of its slope; -1 if none."""
    j = first_nonfinite(stage_in)
    return j if j >= 0 else first_nonfinite(stage_out)


@njit(cache=True)
def rhs(t, y, p, alpha_hold, s_tab, x_tab, y_tab, psi_tab, kappa_tab, out):
    """Writes the derivative into ``out``; returns a status code."""
    if first_nonfinite(y) >= 0:
        return FAULT_NONFINITE
    v = y[0]
    if not v > p[P_EPSV]:
        return FAULT_SINGULAR
    px, py, psi_f, curvature, ok = frame(y[8], p, s_tab, x_tab, y_tab, psi_tab, kappa_tab)
    if not ok:
        return FAULT_PATH
    c = control(y, p, alpha_hold, px, py, psi_f, curvature)
    thrust, tau, omega, s_dot, q_d, q_d_dot = c[0], c[1], c[2], c[3], c[6], c[7]
    gamma = y[1]
    alpha = y[2] - gamma
    m = p[P_MASS]
    g = p[P_G]
    qbar = p[P_CBAR] * v * v
    cl = p[P_CL0] + p[P_CLA] * alpha
    lift = qbar * cl
    drag = qbar * (p[P_CD0] + p[P_K] * cl * cl)
    psi = y[7]
    d = p[P_AMP] * math.sin(p[P_FREQ] * t) if p[P_DIST] > 0.0 else 0.0
    out[0] = (thrust * math.cos(alpha) - drag) / m - g * math.sin(gamma)
    out[1] = (thrust * math.sin(alpha) + lift - m * g * math.cos(gamma)) / (m * v)
    out[2] = y[3]
    out[3] = tau / p[P_IY]
    out[4] = v * math.cos(psi)
    out[5] = v * math.sin(psi)
    out[6] = v * math.sin(gamma)
    out[7] = omega + d
    out[8] = s_dot
    out[9] = q_d if int(p[P_QDMODE]) == QD_FILTER else 0.0
    out[10] = q_d_dot if int(p[P_QDMODE]) == QD_FILTER else 0.0
    if first_nonfinite(out) >= 0:
        return FAULT_NONFINITE
    return OK


@njit(cache=True)
def record(t, y, p, alpha_hold, s_tab, x_tab, y_tab, psi_tab, kappa_tab, row):
    """Fill one log row; returns (status, alpha_d, degenerate, clamped, saturated)."""
    if first_nonfinite(y) >= 0:
        return FAULT_NONFINITE, alpha_hold, False, False, False
    if not y[0] > p[P_EPSV]:
        return FAULT_SINGULAR, alpha_hold, False, False, False
    px, py, psi_f, curvature, ok = frame(y[8], p, s_tab, x_tab, y_tab, psi_tab, kappa_tab)
    if not ok:
        return FAULT_PATH, alpha_hold, False, False, False
    c = control(y, p, alpha_hold, px, py, psi_f, curvature)
    d = p[P_AMP] * math.sin(p[P_FREQ] * t) if p[P_DIST] > 0.0 else 0.0
    row[0] = t
    row[1] = y[0]
    row[2] = y[1]
    row[3] = y[2]
    row[4] = y[3]
    row[5] = y[2] - y[1]
    row[6] = y[4]
    row[7] = y[5]
    row[8] = y[6]
    row[9] = y[7]
    row[10] = y[8]
    row[11] = c[10]   # e_s
    row[12] = c[11]   # e_d
    row[13] = c[12]   # psi_tilde
    row[14] = c[14]   # v_err
    row[15] = c[15]   # gamma_err
    row[16] = c[16]   # theta1_err
    row[17] = c[17]   # theta2_err
    row[18] = c[0]    # T
    row[19] = c[1]    # tau
    row[20] = c[2]    # omega
    row[21] = c[4]    # alpha_d
    row[22] = c[5]    # theta_d
    row[23] = c[6]    # q_d
    row[24] = c[7]    # q_d_dot
    row[25] = c[3]    # s_dot
    row[26] = c[8]    # u1
    row[27] = c[9]    # u2
    row[28] = c[13]   # delta
    row[29] = d
    return OK, c[4], c[18], c[19], c[20]


@njit(cache=True)
def integrate(y0, n, dt, p, alpha_hold, s_tab, x_tab, y_tab, psi_tab, kappa_tab):
    """RK4 from t=0 over ``n`` steps, logging n+1 rows.

    Returns ``(rows, rows_done, status, component, step, events)``. On a
    fault ``rows[:rows_done]`` are the valid rows, ``step`` is the index of
    the step being taken and ``component`` the first non-finite state entry
    (-1 if not applicable).
    """
    dim = y0.shape[0]
    rows = np.empty((n + 1, N_ROW))
    events = np.zeros(3, np.int64)
    y = y0.copy()
    k1 = np.zeros(dim)
    k2 = np.zeros(dim)
    k3 = np.zeros(dim)
    k4 = np.zeros(dim)
    tmp = np.zeros(dim)
    half = 0.5 * dt
    for i in range(n + 1):
        t = i * dt
        status, alpha_hold, deg, clamp, sat = record(
            t, y, p, alpha_hold, s_tab, x_tab, y_tab, psi_tab, kappa_tab, rows[i]
        )
        if status != OK:
            return rows, i, status, first_nonfinite(y), i, events
        events[0] += deg
        events[1] += clamp
        events[2] += sat
        if i == n:
            break
        status = rhs(t, y, p, alpha_hold, s_tab, x_tab, y_tab, psi_tab, kappa_tab, k1)
        stage_in, slope = y, k1
        if status == OK:
            for j in range(dim):
                tmp[j] = y[j] + half * k1[j]
            status = rhs(t + half, tmp, p, alpha_hold, s_tab, x_tab, y_tab, psi_tab, kappa_tab, k2)
            stage_in, slope = tmp, k2
        if status == OK:
            for j in range(dim):
                tmp[j] = y[j] + half * k2[j]
            status = rhs(t + half, tmp, p, alpha_hold, s_tab, x_tab, y_tab, psi_tab, kappa_tab, k3)
            stage_in, slope = tmp, k3
        if status == OK:
            for j in range(dim):
                tmp[j] = y[j] + dt * k3[j]
            status = rhs(t + dt, tmp, p, alpha_hold, s_tab, x_tab, y_tab, psi_tab, kappa_tab, k4)
            stage_in, slope = tmp, k4
        if status != OK:
            bad = blame(stage_in, slope) if status == FAULT_NONFINITE else -1
            return rows, i + 1, status, bad, i, events
        for j in range(dim):
            y[j] = y[j] + (dt / 6.0) * (k1[j] + k4[j] + 2.0 * (k2[j] + k3[j]))
        j = first_nonfinite(y)
        if j >= 0:
            return rows, i + 1, FAULT_NONFINITE, j, i, events
    return rows, n + 1, OK, -1, n, events
