"""Explicit adaptive Runge-Kutta integration with dense output and events.

The method is the Dormand-Prince 5(4) pair with the fourth-order continuous
extension of Hairer, Norsett and Wanner. Every accepted step keeps its five
interpolation coefficient vectors, so a finished :class:`Trajectory` can be
evaluated anywhere inside its span and event crossings are located on the
interpolant instead of by re-integration.

Right-hand sides are autonomous, ``rhs(y, params) -> dy``. A right-hand side
that raises :class:`~coldchain.errors.SingularRHS` or returns non-finite
values makes the step fail, and the controller shrinks the step; only when
the step drops below the minimum does the integration stop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import OutOfSpan, SingularRHS, StepUnderflow

__all__ = [
    "IvpProblem",
    "EventSpec",
    "EventRecord",
    "Tolerances",
    "Trajectory",
    "integrate",
    "evaluate_dense",
    "REACHED_END",
    "EVENT",
    "BLOW_UP",
    "STEP_UNDERFLOW",
]

REACHED_END = "reached_end"
EVENT = "event"
BLOW_UP = "blow_up"
STEP_UNDERFLOW = "step_underflow"

# Dormand-Prince 5(4) tableau.
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423


@dataclass(frozen=True)
class IvpProblem:
    """Autonomous initial value problem ``y' = rhs(y, params)`` on ``[t0, t1]``.

    ``t1 < t0`` integrates backwards in time.
    """

    rhs: Callable[[np.ndarray, tuple], np.ndarray]
    y0: np.ndarray
    t0: float
    t1: float
    params: tuple = ()

    def __post_init__(self):
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float)).copy()
        if y0.ndim != 1 or y0.size < 1:
            raise ValueError("initial state must be a non-empty vector")
        object.__setattr__(self, "y0", y0)
        if self.t1 == self.t0:
            raise ValueError("empty integration interval")

    @property
    def dim(self) -> int:
        return self.y0.size


@dataclass(frozen=True)
class EventSpec:
    """Scalar event ``fn(y) = 0``.

    ``direction`` is +1 for rising crossings, -1 for falling, 0 for both
    (measured in the integration direction). Terminal events stop the run.
    """

    fn: Callable[[np.ndarray], float]
    direction: int = 0
    terminal: bool = False
    name: str = ""


@dataclass(frozen=True)
class EventRecord:
    index: int
    t: float
    y: np.ndarray
    residual: float
    name: str = ""


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-10
    atol: float = 1e-12
    blowup: float = 1e8
    h_min_rel: float = 1e-13
    h_max: float = math.inf
    max_steps: int = 200_000
    event_tol_rel: float = 1e-12
    # optional state-dependent cap on |h|, e.g. the distance to a singular point
    step_cap: Callable[[np.ndarray], float] | None = None
    on_underflow: str = "raise"  # or "return"


@dataclass(frozen=True)
class Trajectory:
    """Accepted samples plus the dense-output coefficients of every step."""

    t: np.ndarray
    y: np.ndarray
    termination: str
    events: tuple = ()
    h: np.ndarray = field(default=None, repr=False)
    coeffs: np.ndarray = field(default=None, repr=False)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def y_end(self) -> np.ndarray:
        return self.y[-1]

    @property
    def blowup_time(self) -> float | None:
        hits = self.event_named(BLOW_UP)
        return hits[0].t if hits else None

    def event_named(self, name: str) -> list[EventRecord]:
        return [e for e in self.events if e.name == name]

    def __call__(self, t):
        return evaluate_dense(self, t)


def _dense(coeff: np.ndarray, theta: float) -> np.ndarray:
    th1 = 1.0 - theta
    return coeff[0] + theta * (coeff[1] + th1 * (coeff[2] + theta * (coeff[3] + th1 * coeff[4])))


def evaluate_dense(tr: Trajectory, t):
    """Interpolated state(s) at time(s) ``t`` inside the trajectory span."""
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    sgn = 1.0 if tr.t[-1] >= tr.t[0] else -1.0
    key = sgn * tr.t
    out = np.empty((ts.size, tr.y.shape[1]))
    lo, hi = min(tr.t[0], tr.t[-1]), max(tr.t[0], tr.t[-1])
    for n, tt in enumerate(ts):
        if not lo <= tt <= hi:
            raise OutOfSpan(f"t={tt!r} outside [{lo!r}, {hi!r}]")
        i = int(np.searchsorted(key, sgn * tt, side="left"))
        if i < key.size and key[i] == sgn * tt:
            out[n] = tr.y[i]
            continue
        i -= 1
        out[n] = _dense(tr.coeffs[i], (tt - tr.t[i]) / tr.h[i])
    return out[0] if scalar else out


def _eval_rhs(rhs, y, params):
    try:
        dy = np.asarray(rhs(y, params), dtype=float)
    except (SingularRHS, ZeroDivisionError, FloatingPointError, OverflowError):
        return None
    if not np.isfinite(dy).all():
        return None
    return dy


def _initial_step(rhs, params, y0, f0, direction, order, rtol, atol, h_max):
    sk = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sk) ** 2))
    d1 = np.sqrt(np.mean((f0 / sk) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    f1 = _eval_rhs(rhs, y0 + direction * h0 * f0, params)
    if f1 is None:
        return h0 * 1e-3
    d2 = np.sqrt(np.mean(((f1 - f0) / sk) ** 2)) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** (1.0 / (order + 1))
    return min(100 * h0, h1, h_max)


# stage and output weights stacked for matrix products over the stage slopes
_A = np.array([
    [A21, 0, 0, 0, 0],
    [A31, A32, 0, 0, 0],
    [A41, A42, A43, 0, 0],
    [A51, A52, A53, A54, 0],
    [A61, A62, A63, A64, A65],
])
_B = np.array([A71, 0.0, A73, A74, A75, A76])
_EW = np.array([E1, 0.0, E3, E4, E5, E6, E7])
_DW = np.array([D1, 0.0, D3, D4, D5, D6, D7])


def _attempt(rhs, params, y, k1, h):
    """One Dormand-Prince step; returns (y_new, k7, err_vec, coeff) or None."""
    K = np.empty((7, y.size))
    K[0] = k1
    for s in range(1, 6):
        k = _eval_rhs(rhs, y + h * (_A[s - 1, :s] @ K[:s]), params)
        if k is None:
            return None
        K[s] = k
    y_new = y + h * (_B @ K[:6])
    if not np.isfinite(y_new).all():
        return None
    k7 = _eval_rhs(rhs, y_new, params)
    if k7 is None:
        return None
    K[6] = k7
    err = h * (_EW @ K)
    coeff = np.empty((5, y.size))
    coeff[0] = y
    coeff[1] = ydiff = y_new - y
    coeff[2] = bspl = h * k1 - ydiff
    coeff[3] = ydiff - h * k7 - bspl
    coeff[4] = h * (_DW @ K)
    return y_new, k7, err, coeff


def _crossed(g0: float, g1: float, direction: int) -> bool:
    if g0 == 0.0:
        return False
    if direction >= 0 and g0 < 0.0 <= g1:
        return True
    if direction <= 0 and g0 > 0.0 >= g1:
        return True
    return False


def _locate(fun, t_a, t_b, xtol):
    """Root of ``fun`` bracketed in [t_a, t_b] (either order)."""
    lo, hi = (t_a, t_b) if t_a < t_b else (t_b, t_a)
    flo, fhi = fun(lo), fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        # interpolant lost the bracket; fall back to the step end
        return t_b
    return brentq(fun, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def integrate(
    p: IvpProblem,
    events: Sequence[EventSpec] = (),
    ctrl: Tolerances | None = None,
) -> Trajectory:
    """Integrate ``p`` until ``t1``, a terminal event, blow-up or step underflow.

    Blow-up means the max-norm of the state exceeds ``ctrl.blowup``. The step
    that overshoots is kept as the last sample (the last finite state) and the
    threshold crossing, located on the dense output, is stored as an event
    named ``"blow_up"``. Events are located to ``event_tol_rel * span``.
    """
    ctrl = ctrl or Tolerances()
    rhs, params = p.rhs, p.params
    t0, t1 = float(p.t0), float(p.t1)
    span = abs(t1 - t0)
    direction = 1.0 if t1 > t0 else -1.0
    h_min = ctrl.h_min_rel * span
    h_max = min(ctrl.h_max, span)
    xtol = max(ctrl.event_tol_rel * span, 1e-300)

    y = p.y0.copy()
    f = _eval_rhs(rhs, y, params)
    if f is None:
        raise SingularRHS("right-hand side is singular at the initial state")
    gvals = [float(ev.fn(y)) for ev in events]

    ts, ys, hs, cs = [t0], [y.copy()], [], []
    records: list[EventRecord] = []
    termination = REACHED_END
    if np.max(np.abs(y)) > ctrl.blowup:
        termination = BLOW_UP

    t = t0
    h = _initial_step(rhs, params, y, f, direction, 5, ctrl.rtol, ctrl.atol, h_max)
    n_steps = 0
    rejected_last = False
    while termination == REACHED_END and direction * (t1 - t) > 0:
        n_steps += 1
        if n_steps > ctrl.max_steps:
            raise StepUnderflow(t, h, trajectory=_build(ts, ys, hs, cs, STEP_UNDERFLOW, records))
        cap = h_max
        if ctrl.step_cap is not None:
            cap = min(cap, max(float(ctrl.step_cap(y)), h_min))
        h = min(h, cap)
        last = abs(t1 - t) <= h * (1 + 1e-12)
        if last:
            h = abs(t1 - t)
        res = _attempt(rhs, params, y, f, direction * h)
        if res is None:
            err_norm = math.inf
        else:
            y_new, f_new, err, coeff = res
            sk = ctrl.atol + ctrl.rtol * np.maximum(np.abs(y), np.abs(y_new))
            r = err / sk
            err_norm = math.sqrt(float(r @ r) / r.size)
        if not err_norm <= 1.0:
            fac = 0.25 if not math.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** -0.2)
            h *= fac
            rejected_last = True
            if h < h_min:
                if ctrl.on_underflow == "return":
                    termination = STEP_UNDERFLOW
                    break
                tr = _build(ts, ys, hs, cs, STEP_UNDERFLOW, records)
                raise StepUnderflow(t, h, trajectory=tr)
            continue

        t_new = t1 if last else t + direction * h
        h_signed = direction * h

        # candidate stops inside this step: events and blow-up threshold
        stop_t, stop_kind, stop_y = None, None, None
        hits = []
        g_new = [float(ev.fn(y_new)) for ev in events]
        for i, ev in enumerate(events):
            if _crossed(gvals[i], g_new[i], ev.direction):
                fun = lambda tt, i=i: float(events[i].fn(_dense(coeff, (tt - t) / h_signed)))
                te = _locate(fun, t, t_new, xtol)
                hits.append((te, i))
        if abs(y_new).max() > ctrl.blowup:
            fun = lambda tt: float(np.max(np.abs(_dense(coeff, (tt - t) / h_signed))) - ctrl.blowup)
            tb = _locate(fun, t, t_new, xtol)
            hits.append((tb, -1))
        hits.sort(key=lambda x: direction * x[0])
        for te, i in hits:
            ye = _dense(coeff, (te - t) / h_signed) if te != t_new else y_new.copy()
            if i < 0:
                records.append(EventRecord(-1, te, ye, float(np.max(np.abs(ye)) - ctrl.blowup), BLOW_UP))
                stop_t, stop_kind, stop_y = te, BLOW_UP, ye
                break
            records.append(EventRecord(i, te, ye, float(events[i].fn(ye)), events[i].name))
            if events[i].terminal:
                stop_t, stop_kind, stop_y = te, EVENT, ye
                break

        hs.append(h_signed)
        cs.append(coeff)
        if stop_kind == BLOW_UP:
            # keep the overshooting step: its end is the last finite state
            ts.append(t_new)
            ys.append(y_new.copy())
            termination = BLOW_UP
            break
        if stop_t is not None:
            if direction * (stop_t - t) <= 0:
                # stop coincides with the step start; drop the step
                hs.pop()
                cs.pop()
            else:
                ts.append(stop_t)
                ys.append(stop_y)
            termination = stop_kind
            break
        ts.append(t_new)
        ys.append(y_new.copy())
        t, y, f, gvals = t_new, y_new, f_new, g_new

        fac = min(10.0, max(0.2, 0.9 * max(err_norm, 1e-10) ** -0.2))
        if rejected_last:
            fac = min(fac, 1.0)
        rejected_last = False
        h = min(h * fac, h_max)

    return _build(ts, ys, hs, cs, termination, records)


def _build(ts, ys, hs, cs, termination, records) -> Trajectory:
    d = ys[0].size
    t_arr = np.array(ts, dtype=float)
    y_arr = np.array(ys, dtype=float).reshape(len(ys), d)
    h_arr = np.array(hs[: len(ts) - 1], dtype=float)
    c_arr = np.array(cs[: len(ts) - 1], dtype=float).reshape(len(h_arr), 5, d)
    for a in (t_arr, y_arr, h_arr, c_arr):
        a.setflags(write=False)
    return Trajectory(t_arr, y_arr, termination, tuple(records), h_arr, c_arr)
