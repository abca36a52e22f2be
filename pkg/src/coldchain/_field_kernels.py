"""Local Lax-Friedrichs flux update for the closure-1/2 moment systems.

Two implementations of the same update: an explicit loop compiled with numba
and a vectorized numpy version. ``llf_update`` picks the compiled loop when
acceleration is on and the numpy version otherwise; both are exported for
the benchmark and the equivalence test.

State layout: ``u[0] = calE``, ``u[1] = M_0``, ``u[2] = M_1`` and, for
closure 2, ``u[3] = M_2``. Fluxes are ``((M_1/M_0) calE, M_1, ..., M_k,
M_k^2/M_{k-1})``; the interface speed bound is ``max(|U_1|, |U_k|)`` over the
two neighbouring cells.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, maybe_njit

PERIODIC, OUTFLOW = 0, 1


def _llf_numpy(u, dx, dt, periodic):
    nvar, n = u.shape
    k = nvar - 2
    if periodic:
        ur = np.roll(u, -1, axis=1)
    else:
        ur = np.concatenate([u[:, 1:], u[:, -1:]], axis=1)
    def flux_speed(v):
        f = np.empty_like(v)
        u1 = v[2] / v[1]
        uk = v[k + 1] / v[k]
        f[0] = u1 * v[0]
        f[1:k + 1] = v[2:k + 2]
        f[k + 1] = uk * v[k + 1]
        return f, np.maximum(np.abs(u1), np.abs(uk))
    fl, sl = flux_speed(u)
    fr, sr = flux_speed(ur)
    alpha = np.maximum(sl, sr)
    fi = 0.5 * (fl + fr) - 0.5 * alpha * (ur - u)  # flux at i+1/2
    if periodic:
        fim = np.roll(fi, 1, axis=1)
    else:
        f0, _ = flux_speed(u[:, :1])
        fim = np.concatenate([f0, fi[:, :-1]], axis=1)
    return u - dt / dx * (fi - fim)


def _llf_loop(u, dx, dt, periodic):
    nvar, n = u.shape
    k = nvar - 2
    fi = np.empty((nvar, n + 1))  # fi[:, j] is the flux at the left face of cell j
    fl = np.empty(nvar)
    fr = np.empty(nvar)
    for j in range(n + 1):
        il = j - 1
        ir = j
        if periodic:
            if il < 0:
                il = n - 1
            if ir > n - 1:
                ir = 0
        else:
            if il < 0:
                il = 0
            if ir > n - 1:
                ir = n - 1
        u1l = u[2, il] / u[1, il]
        ukl = u[k + 1, il] / u[k, il]
        u1r = u[2, ir] / u[1, ir]
        ukr = u[k + 1, ir] / u[k, ir]
        fl[0] = u1l * u[0, il]
        fr[0] = u1r * u[0, ir]
        for m in range(1, k + 1):
            fl[m] = u[m + 1, il]
            fr[m] = u[m + 1, ir]
        fl[k + 1] = ukl * u[k + 1, il]
        fr[k + 1] = ukr * u[k + 1, ir]
        alpha = max(max(abs(u1l), abs(ukl)), max(abs(u1r), abs(ukr)))
        for m in range(nvar):
            fi[m, j] = 0.5 * (fl[m] + fr[m]) - 0.5 * alpha * (u[m, ir] - u[m, il])
    out = np.empty_like(u)
    lam = dt / dx
    for m in range(nvar):
        for j in range(n):
            out[m, j] = u[m, j] - lam * (fi[m, j + 1] - fi[m, j])
    return out


def _max_speed_numpy(u):
    k = u.shape[0] - 2
    return float(max(np.max(np.abs(u[2] / u[1])), np.max(np.abs(u[k + 1] / u[k]))))


def _max_speed_loop(u):
    k = u.shape[0] - 2
    s = 0.0
    for j in range(u.shape[1]):
        a = max(abs(u[2, j] / u[1, j]), abs(u[k + 1, j] / u[k, j]))
        if a > s:
            s = a
    return s


llf_loop = maybe_njit(_llf_loop)
max_speed_loop = maybe_njit(_max_speed_loop)

if USE_NUMBA:
    llf_update = llf_loop
    max_speed = max_speed_loop
else:
    llf_update = _llf_numpy
    max_speed = _max_speed_numpy

llf_numpy = _llf_numpy
