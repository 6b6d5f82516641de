"""
Compiled RK4 loops for the built-in regression and MRAC systems.

These mirror :func:`hotuner.integrator.integrate` combined with
``RegressionSystem.rhs`` / ``MracSystem.rhs`` step for step (same grid, same
left-limit evaluation of the last stage, same divergence rule); the numpy
versions remain the reference and the test-suite checks agreement.
"""

import numpy as np
from numba import njit

MODEL_REGRESSION = 0
MODEL_MRAC = 1

LAW_FO = 0
LAW_HO = 1
LAW_WIB = 2

FEATURE_STEPS = 0
FEATURE_SINUSOID = 1


@njit(cache=True)
def _feature(kind, times, table, t, out):
    N = out.shape[0]
    if kind == FEATURE_STEPS:
        idx = np.searchsorted(times, t, side="right")
        for i in range(N):
            out[i] = table[idx, i]
    else:
        for i in range(N):
            out[i] = table[0, i] + table[1, i] * np.sin(table[2, i] * t + table[3, i])


@njit(cache=True)
def _command(kind, onset, value, t):
    if kind == 1 and t >= onset:
        return value
    return 0.0


@njit(cache=True)
def _rhs(model, law, t, y, out, phi, theta_star, feat_kind, times, table,
         A, bvec, bz, Pb, cmd_kind, onset, value, gamma, beta, mu, p, C, t0w):
    B, d = y.shape
    N = theta_star.shape[1]
    if model == MODEL_REGRESSION:
        _feature(feat_kind, times, table, t, phi)
        nphi2 = 0.0
        for i in range(N):
            nphi2 += phi[i] * phi[i]
        tau = t + t0w
        for b in range(B):
            Nt = 1.0 + mu[b] * nphi2
            e = 0.0
            for i in range(N):
                e += (y[b, i] - theta_star[b, i]) * phi[i]
            for i in range(N):
                if law == LAW_FO:
                    out[b, i] = -gamma * phi[i] * e
                elif law == LAW_HO:
                    out[b, i] = -beta * (y[b, i] - y[b, N + i]) * Nt
                    out[b, N + i] = -gamma * phi[i] * e
                else:
                    gain = C * p * p * tau ** (p - 2.0)
                    out[b, i] = y[b, N + i]
                    out[b, N + i] = -((p + 1.0) / tau) * y[b, N + i] - gain * phi[i] * e
            out[b, d - 1] = e * e
    else:
        n = A.shape[1]
        z = _command(cmd_kind, onset, value, t)
        for b in range(B):
            th = 2 * n
            u = 0.0
            ts_x = 0.0
            nx2 = 0.0
            for j in range(n):
                u -= y[b, th + j] * y[b, j]
                ts_x += theta_star[b, j] * y[b, j]
                nx2 += y[b, j] * y[b, j]
            th_x = -u
            ePb = 0.0
            ee = 0.0
            for i in range(n):
                ax = 0.0
                axh = 0.0
                for j in range(n):
                    ax += A[b, i, j] * y[b, j]
                    axh += A[b, i, j] * y[b, n + j]
                out[b, i] = ax + bvec[b, i] * (u + ts_x) + bz[b, i] * z
                out[b, n + i] = axh + bvec[b, i] * (u + th_x) + bz[b, i] * z
                ei = y[b, n + i] - y[b, i]
                ePb += ei * Pb[b, i]
                ee += ei * ei
            Nt = 1.0 + mu[b] * nx2
            for i in range(N):
                if law == LAW_FO:
                    out[b, th + i] = -gamma * y[b, i] * ePb
                else:
                    out[b, th + i] = -beta * (y[b, th + i] - y[b, th + N + i]) * Nt
                    out[b, th + N + i] = -gamma * y[b, i] * ePb
            out[b, d - 1] = ee


@njit(cache=True)
def _magnitude(model, t, y, b, phi, theta_star, feat_kind, times, table, n):
    """Divergence monitor: max of |state entry| (regret excluded), ||theta|| and |e_y|."""
    d = y.shape[1]
    N = theta_star.shape[1]
    m = 0.0
    for i in range(d - 1):
        a = abs(y[b, i])
        if not a <= m:
            m = a
    off = 0 if model == MODEL_REGRESSION else 2 * n
    nt = 0.0
    for i in range(N):
        nt += y[b, off + i] * y[b, off + i]
    nt = np.sqrt(nt)
    if not nt <= m:
        m = nt
    if model == MODEL_REGRESSION:
        _feature(feat_kind, times, table, t, phi)
        e = 0.0
        for i in range(N):
            e += (y[b, i] - theta_star[b, i]) * phi[i]
        if not abs(e) <= m:
            m = abs(e)
    else:
        ee = 0.0
        for i in range(n):
            ei = y[b, n + i] - y[b, i]
            ee += ei * ei
        ee = np.sqrt(ee)
        if not ee <= m:
            m = ee
    return m


@njit(cache=True)
def rk4(model, law, y0, t0, h, n_steps, log_every, threshold,
        theta_star, feat_kind, times, table, A, bvec, bz, Pb,
        cmd_kind, onset, value, gamma, beta, mu, p, C, t0w):
    B, d = y0.shape
    N = theta_star.shape[1]
    n = A.shape[1]
    n_log = n_steps // log_every + 1
    logs = np.empty((n_log, B, d))
    tlog = np.empty(n_log)
    n_valid = np.ones(B, dtype=np.int64)
    diverged_at = np.full(B, np.nan)
    active = np.ones(B, dtype=np.bool_)
    phi = np.empty(N)
    y = y0.copy()
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    tmp = np.empty_like(y)
    logs[0] = y
    tlog[0] = t0
    n_logged = 1
    nonfinite_t = np.nan
    n_active = B
    for k in range(n_steps):
        t = t0 + k * h
        t_mid = t0 + (k + 0.5) * h
        t_next = t0 + (k + 1) * h
        t_end = np.nextafter(t_next, -np.inf)
        _rhs(model, law, t, y, k1, phi, theta_star, feat_kind, times, table,
             A, bvec, bz, Pb, cmd_kind, onset, value, gamma, beta, mu, p, C, t0w)
        for b in range(B):
            if active[b]:
                for i in range(d):
                    if not np.isfinite(k1[b, i]):
                        nonfinite_t = t
        if not np.isnan(nonfinite_t):
            break
        for b in range(B):
            for i in range(d):
                tmp[b, i] = y[b, i] + 0.5 * h * k1[b, i]
        _rhs(model, law, t_mid, tmp, k2, phi, theta_star, feat_kind, times, table,
             A, bvec, bz, Pb, cmd_kind, onset, value, gamma, beta, mu, p, C, t0w)
        for b in range(B):
            for i in range(d):
                tmp[b, i] = y[b, i] + 0.5 * h * k2[b, i]
        _rhs(model, law, t_mid, tmp, k3, phi, theta_star, feat_kind, times, table,
             A, bvec, bz, Pb, cmd_kind, onset, value, gamma, beta, mu, p, C, t0w)
        for b in range(B):
            for i in range(d):
                tmp[b, i] = y[b, i] + h * k3[b, i]
        _rhs(model, law, t_end, tmp, k4, phi, theta_star, feat_kind, times, table,
             A, bvec, bz, Pb, cmd_kind, onset, value, gamma, beta, mu, p, C, t0w)
        for b in range(B):
            for i in range(d):
                tmp[b, i] = y[b, i] + (h / 6.0) * (k1[b, i] + 2.0 * k2[b, i] + 2.0 * k3[b, i] + k4[b, i])
        for b in range(B):
            if not active[b]:
                continue
            finite = True
            for i in range(d):
                if not np.isfinite(tmp[b, i]):
                    finite = False
            mag = _magnitude(model, t_next, tmp, b, phi, theta_star, feat_kind, times, table, n)
            if finite and mag <= threshold:
                for i in range(d):
                    y[b, i] = tmp[b, i]
            else:
                active[b] = False
                diverged_at[b] = t_next
                n_active -= 1
        if (k + 1) % log_every == 0:
            logs[n_logged] = y
            tlog[n_logged] = t_next
            n_logged += 1
            for b in range(B):
                if active[b]:
                    n_valid[b] = n_logged
        if n_active == 0:
            break
    return tlog[:n_logged], logs[:n_logged], active, n_valid, diverged_at, nonfinite_t
