"""Batch classifier for affine initial data (sweep hot loop).

One scalar Dormand-Prince 5(4) run per grid point, written with plain floats
so numba can compile it; the same source runs interpreted when acceleration
is off. Outcome codes match :data:`coldchain.affine.OUTCOME_CODES`.
"""
from __future__ import annotations

import numpy as np

from ._accel import maybe_njit

SMOOTH, BLOW_UP, CLASSICAL_END, ERROR = 0, 1, 2, 3
MODE_AGES, MODE_AGG = 0, 1


def _classify_batch_py(a0, g10, par, mode, t_end, rtol, atol, blowup, out):
    """Classify each start ``(a0[i], g10[i])`` with parameter ``par[i]``.

    ``mode == 0``: friction system with ``par = eps_star`` (2 unknowns).
    ``mode == 1``: closure-2 system with ``par = gamma_20`` (3 unknowns); a
    sign change of ``gamma_1`` or ``gamma_2`` passing the threshold while
    ``(a, gamma_1)`` stays moderate counts as a classical end.
    """
    n = a0.shape[0]
    big = np.sqrt(blowup)
    for idx in range(n):
        y = np.empty(3)
        y[0] = a0[idx]
        y[1] = g10[idx]
        y[2] = par[idx] if mode == MODE_AGG else 0.0
        nu = par[idx]
        k = np.empty((7, 3))
        ytmp = np.empty(3)
        ynew = np.empty(3)

        def rhs(yy, dy):
            a = yy[0]
            g1 = yy[1]
            dy[0] = -g1 * (a - 1.0)
            if mode == MODE_AGES:
                dy[1] = -a - g1 * g1 - 2.0 * g1 * nu
                dy[2] = 0.0
            else:
                g2 = yy[2]
                dy[1] = -a - 2.0 * g1 * g2 + g1 * g1
                if g1 == 0.0:
                    dy[2] = np.inf
                else:
                    dy[2] = -2.0 * a + a * g2 / g1 - g2 * g2

        if mode == MODE_AGG and y[1] == 0.0:
            out[idx] = ERROR
            continue
        t = 0.0
        h = 1e-3
        h_min = 1e-13 * t_end
        rhs(y, k[0])
        verdict = SMOOTH
        steps = 0
        while t < t_end:
            steps += 1
            if steps > 1_000_000:
                verdict = ERROR
                break
            if t + h > t_end:
                h = t_end - t
            for j in range(3):
                ytmp[j] = y[j] + h * (0.2 * k[0, j])
            rhs(ytmp, k[1])
            for j in range(3):
                ytmp[j] = y[j] + h * (3.0 / 40.0 * k[0, j] + 9.0 / 40.0 * k[1, j])
            rhs(ytmp, k[2])
            for j in range(3):
                ytmp[j] = y[j] + h * (44.0 / 45.0 * k[0, j] - 56.0 / 15.0 * k[1, j]
                                      + 32.0 / 9.0 * k[2, j])
            rhs(ytmp, k[3])
            for j in range(3):
                ytmp[j] = y[j] + h * (19372.0 / 6561.0 * k[0, j] - 25360.0 / 2187.0 * k[1, j]
                                      + 64448.0 / 6561.0 * k[2, j] - 212.0 / 729.0 * k[3, j])
            rhs(ytmp, k[4])
            for j in range(3):
                ytmp[j] = y[j] + h * (9017.0 / 3168.0 * k[0, j] - 355.0 / 33.0 * k[1, j]
                                      + 46732.0 / 5247.0 * k[2, j] + 49.0 / 176.0 * k[3, j]
                                      - 5103.0 / 18656.0 * k[4, j])
            rhs(ytmp, k[5])
            for j in range(3):
                ynew[j] = y[j] + h * (35.0 / 384.0 * k[0, j] + 500.0 / 1113.0 * k[2, j]
                                      + 125.0 / 192.0 * k[3, j] - 2187.0 / 6784.0 * k[4, j]
                                      + 11.0 / 84.0 * k[5, j])
            rhs(ynew, k[6])
            err = 0.0
            finite = True
            for j in range(3):
                e = h * (71.0 / 57600.0 * k[0, j] - 71.0 / 16695.0 * k[2, j]
                         + 71.0 / 1920.0 * k[3, j] - 17253.0 / 339200.0 * k[4, j]
                         + 22.0 / 525.0 * k[5, j] - 1.0 / 40.0 * k[6, j])
                sk = atol + rtol * max(abs(y[j]), abs(ynew[j]))
                if not (np.isfinite(e) and np.isfinite(ynew[j])):
                    finite = False
                err += (e / sk) ** 2
            err = np.sqrt(err / 3.0)
            if not finite or err > 1.0:
                h *= 0.25 if not finite else max(0.2, 0.9 * err ** -0.2)
                if h < h_min:
                    verdict = BLOW_UP if max(abs(y[0]), abs(y[1])) > big else CLASSICAL_END
                    if mode == MODE_AGES:
                        verdict = BLOW_UP
                    break
                continue
            t += h
            crossed = mode == MODE_AGG and y[1] * ynew[1] <= 0.0
            for j in range(3):
                y[j] = ynew[j]
                k[0, j] = k[6, j]
            if crossed:
                verdict = CLASSICAL_END
                break
            if max(abs(y[0]), max(abs(y[1]), abs(y[2]))) > blowup:
                verdict = BLOW_UP if max(abs(y[0]), abs(y[1])) > big else CLASSICAL_END
                break
            h *= min(10.0, max(0.2, 0.9 * max(err, 1e-10) ** -0.2))
        out[idx] = verdict
    return out


classify_batch = maybe_njit(_classify_batch_py)
