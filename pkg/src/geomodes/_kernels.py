"""Numba kernels for the hot integration loops.

Only imported lazily from fastpath.py; everything here mirrors the generic
numpy implementations exactly (same RK4 stages, same metric algebra for the
double pendulum) so the two paths can be cross-checked in tests.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _polyval_desc(c, x):
    # Horner evaluation, coefficients in descending powers
    r = 0.0
    for i in range(c.shape[0]):
        r = r * x + c[i]
    return r


@njit(cache=True)
def _ppoly_scalar(c, x0, h, x):
    # piecewise polynomial with uniform breakpoints, c shape (k, m)
    m = c.shape[1]
    i = int(math.floor((x - x0) / h))
    if i < 0:
        i = 0
    elif i >= m:
        i = m - 1
    t = x - (x0 + i * h)
    r = c[0, i]
    for j in range(1, c.shape[0]):
        r = r * t + c[j, i]
    return r


@njit(cache=True)
def _ppoly_vec2(c, x0, h, x):
    # vector-valued variant, c shape (k, m, 2)
    m = c.shape[1]
    i = int(math.floor((x - x0) / h))
    if i < 0:
        i = 0
    elif i >= m:
        i = m - 1
    t = x - (x0 + i * h)
    r0 = c[0, i, 0]
    r1 = c[0, i, 1]
    for j in range(1, c.shape[0]):
        r0 = r0 * t + c[j, i, 0]
        r1 = r1 * t + c[j, i, 1]
    return r0, r1


@njit(cache=True)
def _accel_dp(q2, v1, v2, d1, d2):
    # double-pendulum covariant algebra: returns -Gamma(v,v) + g^{-1} d
    c = math.cos(q2)
    s = math.sin(q2)
    det = 2.0 - c * c
    l1 = -s * (2.0 * v1 * v2 + v2 * v2)
    l2 = s * v1 * v1
    g1 = (l1 - (1.0 + c) * l2) / det
    g2 = (-(1.0 + c) * l1 + (3.0 + 2.0 * c) * l2) / det
    p1 = (d1 - (1.0 + c) * d2) / det
    p2 = (-(1.0 + c) * d1 + (3.0 + 2.0 * c) * d2) / det
    return p1 - g1, p2 - g2


@njit(cache=True)
def rk4_dp_circular(q0, v0, dt, nsteps, k0):
    qs = np.empty((nsteps + 1, 2))
    vs = np.empty((nsteps + 1, 2))
    q1, q2 = q0[0], q0[1]
    v1, v2 = v0[0], v0[1]
    qs[0, 0] = q1
    qs[0, 1] = q2
    vs[0, 0] = v1
    vs[0, 1] = v2
    half = 0.5 * dt
    for i in range(nsteps):
        a11, a12 = _accel_dp(q2, v1, v2, -k0 * q1, -k0 * q2)

        qb1 = q1 + half * v1
        qb2 = q2 + half * v2
        vb1 = v1 + half * a11
        vb2 = v2 + half * a12
        a21, a22 = _accel_dp(qb2, vb1, vb2, -k0 * qb1, -k0 * qb2)

        qc1 = q1 + half * vb1
        qc2 = q2 + half * vb2
        vc1 = v1 + half * a21
        vc2 = v2 + half * a22
        a31, a32 = _accel_dp(qc2, vc1, vc2, -k0 * qc1, -k0 * qc2)

        qd1 = q1 + dt * vc1
        qd2 = q2 + dt * vc2
        vd1 = v1 + dt * a31
        vd2 = v2 + dt * a32
        a41, a42 = _accel_dp(qd2, vd1, vd2, -k0 * qd1, -k0 * qd2)

        sixth = dt / 6.0
        q1 += sixth * (v1 + 2.0 * vb1 + 2.0 * vc1 + vd1)
        q2 += sixth * (v2 + 2.0 * vb2 + 2.0 * vc2 + vd2)
        v1 += sixth * (a11 + 2.0 * a21 + 2.0 * a31 + a41)
        v2 += sixth * (a12 + 2.0 * a22 + 2.0 * a32 + a42)
        qs[i + 1, 0] = q1
        qs[i + 1, 1] = q2
        vs[i + 1, 0] = v1
        vs[i + 1, 1] = v2
    return qs, vs


@njit(cache=True)
def _chart_newton(gam_c, w_c, dw_c, s0, hs, q1, q2, xi1, xi2, tol, maxit):
    tol2 = tol * tol
    for _ in range(maxit):
        g1, g2 = _ppoly_vec2(gam_c, s0, hs, xi1)
        w1, w2 = _ppoly_vec2(w_c, s0, hs, xi1)
        e1 = -w2
        e2 = w1
        r1 = g1 + xi2 * e1 - q1
        r2 = g2 + xi2 * e2 - q2
        if r1 * r1 + r2 * r2 <= tol2:
            return xi1, xi2, True
        dw1, dw2 = _ppoly_vec2(dw_c, s0, hs, xi1)
        de1 = -dw2
        de2 = dw1
        j11 = w1 + xi2 * de1
        j12 = e1
        j21 = w2 + xi2 * de2
        j22 = e2
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            return xi1, xi2, False
        xi1 -= (j22 * r1 - j12 * r2) / det
        xi2 -= (-j21 * r1 + j11 * r2) / det
    g1, g2 = _ppoly_vec2(gam_c, s0, hs, xi1)
    w1, w2 = _ppoly_vec2(w_c, s0, hs, xi1)
    r1 = g1 - xi2 * w2 - q1
    r2 = g2 + xi2 * w1 - q2
    return xi1, xi2, r1 * r1 + r2 * r2 <= tol2


@njit(cache=True)
def _designed_grad(xi1, xi2, w_c, dw_c, s0, hs, alpha_desc, s_c, d_c, bp_desc):
    # covariant differential of the designed potential in configuration
    # coordinates: df_q = (J^T)^{-1} df_xi
    f1 = _polyval_desc(alpha_desc, xi1) + xi2 * _ppoly_scalar(d_c, s0, hs, xi1)
    f2 = _ppoly_scalar(s_c, s0, hs, xi1) + _polyval_desc(bp_desc, xi2)
    w1, w2 = _ppoly_vec2(w_c, s0, hs, xi1)
    dw1, dw2 = _ppoly_vec2(dw_c, s0, hs, xi1)
    j11 = w1 - xi2 * dw2
    j12 = -w2
    j21 = w2 + xi2 * dw1
    j22 = w1
    det = j11 * j22 - j12 * j21
    d1 = (j22 * f1 - j21 * f2) / det
    d2 = (-j12 * f1 + j11 * f2) / det
    return d1, d2


@njit(cache=True)
def rk4_dp_designed(
    q0,
    v0,
    dt,
    nsteps,
    gam_c,
    w_c,
    dw_c,
    s0,
    hs,
    alpha_desc,
    s_c,
    d_c,
    bp_desc,
    x1min,
    x1max,
    hw,
    tol,
    maxit,
    seed,
):
    qs = np.empty((nsteps + 1, 2))
    vs = np.empty((nsteps + 1, 2))
    q1, q2 = q0[0], q0[1]
    v1, v2 = v0[0], v0[1]
    qs[0, 0] = q1
    qs[0, 1] = q2
    vs[0, 0] = v1
    vs[0, 1] = v2
    xi1, xi2 = seed[0], seed[1]
    half = 0.5 * dt
    status = 0
    done = 0
    for i in range(nsteps):
        # stage 1
        xi1, xi2, ok = _chart_newton(gam_c, w_c, dw_c, s0, hs, q1, q2, xi1, xi2, tol, maxit)
        if not ok:
            status = 1
            break
        if xi1 < x1min or xi1 > x1max or xi2 < -hw or xi2 > hw:
            status = 2
            break
        d1, d2 = _designed_grad(xi1, xi2, w_c, dw_c, s0, hs, alpha_desc, s_c, d_c, bp_desc)
        a11, a12 = _accel_dp(q2, v1, v2, d1, d2)

        qb1 = q1 + half * v1
        qb2 = q2 + half * v2
        vb1 = v1 + half * a11
        vb2 = v2 + half * a12
        xi1, xi2, ok = _chart_newton(gam_c, w_c, dw_c, s0, hs, qb1, qb2, xi1, xi2, tol, maxit)
        if not ok:
            status = 1
            break
        d1, d2 = _designed_grad(xi1, xi2, w_c, dw_c, s0, hs, alpha_desc, s_c, d_c, bp_desc)
        a21, a22 = _accel_dp(qb2, vb1, vb2, d1, d2)

        qc1 = q1 + half * vb1
        qc2 = q2 + half * vb2
        vc1 = v1 + half * a21
        vc2 = v2 + half * a22
        xi1, xi2, ok = _chart_newton(gam_c, w_c, dw_c, s0, hs, qc1, qc2, xi1, xi2, tol, maxit)
        if not ok:
            status = 1
            break
        d1, d2 = _designed_grad(xi1, xi2, w_c, dw_c, s0, hs, alpha_desc, s_c, d_c, bp_desc)
        a31, a32 = _accel_dp(qc2, vc1, vc2, d1, d2)

        qd1 = q1 + dt * vc1
        qd2 = q2 + dt * vc2
        vd1 = v1 + dt * a31
        vd2 = v2 + dt * a32
        xi1, xi2, ok = _chart_newton(gam_c, w_c, dw_c, s0, hs, qd1, qd2, xi1, xi2, tol, maxit)
        if not ok:
            status = 1
            break
        d1, d2 = _designed_grad(xi1, xi2, w_c, dw_c, s0, hs, alpha_desc, s_c, d_c, bp_desc)
        a41, a42 = _accel_dp(qd2, vd1, vd2, d1, d2)

        sixth = dt / 6.0
        q1 += sixth * (v1 + 2.0 * vb1 + 2.0 * vc1 + vd1)
        q2 += sixth * (v2 + 2.0 * vb2 + 2.0 * vc2 + vd2)
        v1 += sixth * (a11 + 2.0 * a21 + 2.0 * a31 + a41)
        v2 += sixth * (a12 + 2.0 * a22 + 2.0 * a32 + a42)
        qs[i + 1, 0] = q1
        qs[i + 1, 1] = q2
        vs[i + 1, 0] = v1
        vs[i + 1, 1] = v2
        done = i + 1
    return qs, vs, status, done
