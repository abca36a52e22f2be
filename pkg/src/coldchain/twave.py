"""Traveling waves ``f(x - w t)`` of the closure-1 and closure-2 systems.

Closure 1 conserves ``U_1^2 + E^2 = I_0^2``. Writing ``U_1 = I_0 sin(theta)``,
``E = I_0 cos(theta)`` turns the wave ODE into ``d xi / d theta = w - I_0
sin(theta)``, which integrates to
``xi - xi_0 = w (theta - theta_0) + I_0 (cos(theta) - cos(theta_0))``. This is
the implicit arcsine solution with the branch bookkeeping done by the angle:
for ``w^2 >= I_0^2`` the map is monotone, so each ``xi`` has exactly one
``theta``.

Closure 2 is integrated as an ODE in ``xi`` in both directions from the
data at ``xi = 0`` until the ``(U_1, U_2)`` projection reaches a singular
point of the planar field, or ``E`` grows without bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import InsufficientTail, NoSmoothWave, SingularManifold
from .odeint import EVENT, EventSpec, IvpProblem, Tolerances, Trajectory, integrate

__all__ = [
    "WaveParams",
    "WaveState",
    "Region",
    "SingularPoint",
    "SingularPointSet",
    "Endpoint",
    "WaveProfile",
    "AsymptoticFit",
    "wave1_profile",
    "wave1_period",
    "wave1_branch",
    "rhs_wave1",
    "rhs_wave2",
    "planar_field",
    "planar_jacobian",
    "singular_points",
    "classify_region",
    "wave2_profile",
    "asymptotics_check",
    "density_signature",
    "PHYSICAL_PERIODIC",
    "NEGATIVE_DELTA_DENSITY",
]

PHYSICAL_PERIODIC = "physical_periodic"
NEGATIVE_DELTA_DENSITY = "negative_delta_density"


class Region(Enum):
    REGION1 = 1  # w > U2 > U1 > 0
    REGION2 = 2  # U2 > w > U1 > 0
    REGION3 = 3  # U2 > U1 > w
    INVALID = 0


# terminal singular point expected for each region
TERMINAL_POINT = {Region.REGION1: "A5", Region.REGION2: "A4", Region.REGION3: "A3"}


@dataclass(frozen=True)
class WaveParams:
    w: float
    i0: float = 0.0

    def smooth(self) -> bool:
        return self.w * self.w >= self.i0 * self.i0


@dataclass(frozen=True)
class WaveState:
    E: float
    U1: float
    U2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.E, self.U1, self.U2])


# ------------------------------------------------------------------ closure 1

def rhs_wave1(s, w):
    """``E' = U1/(U1 - w)``, ``U1' = -E/(U1 - w)``."""
    w = w[0] if isinstance(w, (tuple, list)) else w
    e, u1 = s[0], s[1]
    if u1 == w:
        raise SingularManifold("U1_eq_w")
    return np.array([u1 / (u1 - w), -e / (u1 - w)])


def _theta_of_xi(xi, w, i0, theta0):
    """Invert ``xi = w (th - th0) + i0 (cos th - cos th0)`` (monotone in ``th``)."""
    c0 = math.cos(theta0)
    out = np.empty(xi.size)
    slack = 2.0 * i0 / abs(w) + 1e-12
    for n, x in enumerate(xi):
        guess = theta0 + x / w
        lo, hi = guess - slack, guess + slack
        g = lambda th: w * (th - theta0) + i0 * (math.cos(th) - c0) - x
        glo, ghi = g(lo), g(hi)
        if glo == 0.0:
            out[n] = lo
        elif ghi == 0.0:
            out[n] = hi
        else:
            out[n] = brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return out


def wave1_profile(params: WaveParams, xi, u10: float = 0.0, e_positive: bool = True):
    """Closure-1 wave ``(E, U1)`` on ``xi`` with ``U1(0) = u10``.

    ``E(0)`` is ``+-sqrt(I0^2 - u10^2)``, sign chosen by ``e_positive``.
    """
    w, i0 = float(params.w), float(params.i0)
    if w == 0:
        raise ValueError("wave speed must be nonzero")
    if not params.smooth():
        raise NoSmoothWave(f"w^2 = {w * w:.6g} < I0^2 = {i0 * i0:.6g}")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if i0 == 0.0:
        return np.zeros_like(xi), np.zeros_like(xi)
    if abs(u10) > i0:
        raise ValueError("|U1(0)| cannot exceed I0")
    theta0 = math.asin(u10 / i0)
    if not e_positive:
        theta0 = math.pi - theta0
    th = _theta_of_xi(xi, w, i0, theta0)
    return i0 * np.cos(th), i0 * np.sin(th)


def wave1_period(params: WaveParams, u10: float = 0.0) -> float:
    """Distance between consecutive upward zero crossings of ``U1``, measured."""
    w, i0 = params.w, params.i0
    if i0 == 0:
        return math.inf
    guess = 2.0 * math.pi * abs(w)
    f = lambda x: float(wave1_profile(params, [x], u10)[1][0])
    # upward crossings are where E > 0 (U1' = -E/(U1 - w) > 0 for w > U1)
    starts = []
    grid = np.linspace(-0.25 * guess, 2.25 * guess, 401)
    e, u = wave1_profile(params, grid, u10)
    for j in range(grid.size - 1):
        if u[j] < 0.0 <= u[j + 1]:
            starts.append(brentq(f, grid[j], grid[j + 1], xtol=1e-14, rtol=1e-15))
    if len(starts) < 2:
        raise RuntimeError("fewer than two upward crossings found")
    return float(starts[1] - starts[0])


def wave1_branch(params: WaveParams, xi, u10: float = 0.0, e_positive: bool = True):
    """Closure-1 solution through ``(E(0), U1(0))`` on its maximal interval.

    Same as :func:`wave1_profile` when a smooth periodic wave exists. For
    ``w^2 < I0^2`` the solution lives between the two nearest crossings of
    ``U1 = w``; outside that support the returned values are NaN.
    """
    w, i0 = float(params.w), float(params.i0)
    if params.smooth():
        return wave1_profile(params, xi, u10, e_positive)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if abs(u10) > i0:
        raise ValueError("|U1(0)| cannot exceed I0")
    if u10 == w:
        raise SingularManifold("U1_eq_w")
    theta0 = math.asin(u10 / i0)
    if not e_positive:
        theta0 = math.pi - theta0
    base = math.asin(w / i0)
    roots = [r + 2 * math.pi * k for k in (-1, 0, 1, 2) for r in (base, math.pi - base)]
    lo = max(r for r in roots if r < theta0)
    hi = min(r for r in roots if r > theta0)
    c0 = math.cos(theta0)
    xi_of = lambda th: w * (th - theta0) + i0 * (math.cos(th) - c0)
    x_lo, x_hi = sorted((xi_of(lo), xi_of(hi)))
    e = np.full(xi.size, np.nan)
    u = np.full(xi.size, np.nan)
    for n, x in enumerate(xi):
        if x_lo <= x <= x_hi:
            th = brentq(lambda t: xi_of(t) - x, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
            e[n], u[n] = i0 * math.cos(th), i0 * math.sin(th)
    return e, u


# ------------------------------------------------------------------ closure 2

def rhs_wave2(s, w):
    """Closure-2 wave ODEs in ``xi``; raises SingularManifold on a vanishing denominator."""
    w = w[0] if isinstance(w, (tuple, list)) else w
    e, u1, u2 = s[0], s[1], s[2]
    if w == 0:
        raise SingularManifold("w_eq_0")
    if u1 == w:
        raise SingularManifold("U1_eq_w")
    if u2 == w:
        raise SingularManifold("U2_eq_w")
    if u1 == 0:
        raise SingularManifold("U1_eq_0")
    return np.array([
        u1 / (u1 - w),
        e * (u1 - w) * (2 * u2 - 2 * u1 - w) / (w * (u2 - w) ** 2),
        e * (u2 - 2 * u1) / (u1 * (u2 - w)),
    ])


def planar_field(u1, u2, w):
    """Numerator/denominator field of ``dU2/dU1`` as an autonomous planar system."""
    return np.array([u1 * (u1 - w) * (2 * u2 - 2 * u1 - w), w * (u2 - 2 * u1) * (u2 - w)])


def planar_jacobian(u1, u2, w, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of :func:`planar_field`."""
    h = h * max(1.0, abs(w))
    j = np.empty((2, 2))
    j[:, 0] = (planar_field(u1 + h, u2, w) - planar_field(u1 - h, u2, w)) / (2 * h)
    j[:, 1] = (planar_field(u1, u2 + h, w) - planar_field(u1, u2 - h, w)) / (2 * h)
    return j


@dataclass(frozen=True)
class SingularPoint:
    name: str
    u1: float
    u2: float
    kind: str
    eigenvalues: tuple


@dataclass(frozen=True)
class SingularPointSet:
    w: float
    points: tuple

    def __getitem__(self, name: str) -> SingularPoint:
        for p in self.points:
            if p.name == name:
                return p
        raise KeyError(name)

    def coords(self) -> list[tuple[float, float]]:
        return [(p.u1, p.u2) for p in self.points]


def _classify_linear(ev: np.ndarray, scale: float) -> str:
    tol = 1e-6 * scale
    re, im = ev.real, ev.imag
    if np.any(np.abs(im) > tol):
        return "center" if np.all(np.abs(re) <= tol) else "focus"
    if np.any(np.abs(re) <= tol):
        return "degenerate node"
    if re[0] * re[1] < 0:
        return "saddle"
    return "node"


def singular_points(w: float) -> SingularPointSet:
    """The five equilibria of the planar field, classified by linearization."""
    if not w > 0:
        raise ValueError("singular-point analysis assumes w > 0")
    coords = {"A1": (0.0, 0.0), "A2": (0.0, w), "A3": (w, w), "A4": (w, 2 * w), "A5": (0.5 * w, w)}
    pts = []
    for name, (u1, u2) in coords.items():
        ev = np.linalg.eigvals(planar_jacobian(u1, u2, w))
        pts.append(SingularPoint(name, u1, u2, _classify_linear(ev, w * w), tuple(np.sort_complex(ev))))
    return SingularPointSet(w, tuple(pts))


def classify_region(u1: float, u2: float, w: float) -> Region:
    if w > u2 > u1 > 0:
        return Region.REGION1
    if u2 > w > u1 > 0:
        return Region.REGION2
    if u2 > u1 > w:
        return Region.REGION3
    return Region.INVALID


@dataclass(frozen=True)
class Endpoint:
    """One end of the support, as seen from ``xi = 0``."""

    xi: float
    xi_extrapolated: float
    state: np.ndarray
    reason: str  # name of the singular point reached, or "E_unbounded"
    distance: float
    # (distance, xi, state) at geometrically shrinking distance thresholds
    approach: tuple = field(default=(), repr=False)
    behaviour: dict = field(default_factory=dict)
    tol: float = math.nan


@dataclass(frozen=True)
class WaveProfile:
    w: float
    init: WaveState
    region: Region
    forward: Trajectory
    backward: Trajectory
    plus: Endpoint
    minus: Endpoint

    @property
    def support(self) -> tuple[float, float]:
        return self.minus.xi, self.plus.xi

    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        xi = np.concatenate([self.backward.t[::-1], self.forward.t[1:]])
        y = np.vstack([self.backward.y[::-1], self.forward.y[1:]])
        return xi, y

    def derivatives(self) -> np.ndarray:
        """``(E', U1', U2')`` at every sample."""
        return np.array([rhs_wave2(s, self.w) for s in self.samples()[1]])


# fractions of w at which approach snapshots are recorded (4 per decade)
_APPROACH_DECADES = 3
_PER_DECADE = 4


def _trend(d: np.ndarray, f: np.ndarray) -> tuple[str, float]:
    """Classify ``|f| ~ d^p`` over the last decade of approach (d -> 0)."""
    f = np.abs(f)
    if np.all(f == 0):
        return "zero", math.inf
    p = float(np.polyfit(np.log(d), np.log(np.maximum(f, 1e-300)), 1)[0])
    if p < -0.25:
        return "unbounded", p
    if p > 0.25:
        return "vanishing", p
    return "bounded", p


def _aitken(x0: float, x1: float, x2: float) -> float:
    d1, d2 = x1 - x0, x2 - x1
    den = d2 - d1
    if den == 0 or not math.isfinite(den):
        return x2
    return x2 - d2 * d2 / den


def _approach(tr: Trajectory, target, tol: float) -> list:
    """States where the distance to ``target`` first drops below ``tol * 10^(j/4)``.

    Located after the run on the dense output, walking back from the end.
    """
    d = np.hypot(tr.y[:, 1] - target[0], tr.y[:, 2] - target[1])
    snaps = []
    for j in range(_APPROACH_DECADES * _PER_DECADE, 0, -1):
        lvl = tol * 10.0 ** (j / _PER_DECADE)
        above = np.nonzero(d > lvl)[0]
        if above.size == 0:
            continue
        i = int(above[-1])
        if i + 1 >= d.size:
            continue
        f = lambda xi: _dist(tr(xi), target) - lvl
        xi = brentq(f, *sorted((tr.t[i], tr.t[i + 1])), xtol=1e-15, rtol=1e-15)
        snaps.append((lvl, float(xi), tr(xi)))
    return snaps


def _endpoint(tr: Trajectory, w: float, tol: float) -> Endpoint:
    term = tr.events[-1] if tr.termination == EVENT and tr.events else None
    reason = term.name if term is not None else tr.termination
    target = _point_coords(w).get(reason)
    y = tr.y_end
    xi_end = tr.t_end
    if target is None:
        behaviour = {"E": "unbounded"} if reason == "E_unbounded" else {}
        return Endpoint(xi_end, xi_end, y, reason, math.nan, (), behaviour)
    snaps = _approach(tr, target, tol)
    chain = [s[1] for s in snaps] + [xi_end]
    xi_ex = xi_end
    if len(chain) >= 2 * _PER_DECADE + 1:
        xi_ex = _aitken(chain[-1 - 2 * _PER_DECADE], chain[-1 - _PER_DECADE], chain[-1])
    last = [s for s in snaps if s[0] <= 10.0 * tol * (1 + 1e-9)] + [(tol, xi_end, y)]
    behaviour = {}
    if len(last) >= 3:
        d = np.array([s[0] for s in last])
        states = np.array([s[2] for s in last])
        ders = np.array([rhs_wave2(st, w) for st in states])
        for name, vals in (("E", states[:, 0]), ("dE", ders[:, 0]),
                           ("dU1", ders[:, 1]), ("dU2", ders[:, 2])):
            behaviour[name] = _trend(d, vals)[0]
    return Endpoint(xi_end, xi_ex, y, reason, _dist(y, target), tuple(snaps), behaviour, tol)


_POINT_NAMES = ("A1", "A2", "A3", "A4", "A5")


def _point_coords(w: float) -> dict:
    return {"A1": (0.0, 0.0), "A2": (0.0, w), "A3": (w, w), "A4": (w, 2 * w), "A5": (0.5 * w, w)}


def _dist(y, p) -> float:
    return math.hypot(y[1] - p[0], y[2] - p[1])


def wave2_profile(init: WaveState, w: float, ctrl: Tolerances | None = None,
                  endpoint_tol: float | None = None, e_max: float = 1e6,
                  xi_max: float = 100.0) -> WaveProfile:
    """Closure-2 wave through ``init`` at ``xi = 0``, integrated both ways.

    Each direction stops when ``(U1, U2)`` comes within ``endpoint_tol * w``
    of a singular point or ``|E|`` passes ``e_max``. Snapshots at distances
    ``tol * 10^(j/4)``, located afterwards on the dense output, feed the
    Aitken extrapolation of the endpoint and the boundedness classification
    of ``E``, ``E'``, ``U1'``, ``U2'`` over the last decade of approach.

    The default tolerance is ``1e-6 * w`` except at ``A5``, which the explicit
    integrator approaches at a cost growing like the inverse distance; there
    ``5e-5 * w`` is used.
    """
    if not w > 0:
        raise ValueError("closure-2 waves are implemented for w > 0")
    region = classify_region(init.U1, init.U2, w)
    if region is Region.INVALID:
        raise ValueError(f"initial (U1, U2) = ({init.U1}, {init.U2}) outside the three regions")
    if not math.isfinite(init.E):
        raise ValueError("E(0) must be finite")
    # the support ends at a square-root singularity in xi, so the minimum
    # step is far below the usual 1e-13 * span
    ctrl = ctrl or Tolerances(rtol=1e-10, atol=1e-13, blowup=math.inf, h_min_rel=1e-17,
                              max_steps=400_000)
    pts = _point_coords(w)
    tols = {name: (endpoint_tol if endpoint_tol is not None
                   else (5e-5 if name == "A5" else 1e-6)) * w for name in pts}
    events = [EventSpec(lambda y, p=p, tol=tols[name]: _dist(y, p) - tol, -1, True, name)
              for name, p in pts.items()]
    events.append(EventSpec(lambda y: abs(y[0]) - e_max, 1, True, "E_unbounded"))
    a5 = pts["A5"]

    def cap(y):
        d = _dist(y, a5)
        return d if d < 0.1 * w else math.inf

    ctrl = Tolerances(ctrl.rtol, ctrl.atol, ctrl.blowup, ctrl.h_min_rel, ctrl.h_max,
                      ctrl.max_steps, ctrl.event_tol_rel, cap, "return")
    y0 = init.as_array()
    fwd = integrate(IvpProblem(rhs_wave2, y0, 0.0, xi_max, (w,)), events, ctrl)
    bwd = integrate(IvpProblem(rhs_wave2, y0, 0.0, -xi_max, (w,)), events, ctrl)
    plus = _endpoint(fwd, w, tols.get(_reached(fwd), math.nan))
    minus = _endpoint(bwd, w, tols.get(_reached(bwd), math.nan))
    return WaveProfile(w, init, region, fwd, bwd, plus, minus)


def _reached(tr: Trajectory) -> str:
    if tr.termination == EVENT and tr.events:
        return tr.events[-1].name
    return tr.termination


@dataclass(frozen=True)
class AsymptoticFit:
    region: Region
    constants: dict
    residual: float
    ok_quantity: float  # the number the acceptance check compares


def _tail(tr: Trajectory, target, radius: float, n_dense: int = 400):
    d = np.hypot(tr.y[:, 1] - target[0], tr.y[:, 2] - target[1])
    idx = np.nonzero(d <= radius)[0]
    if idx.size < 20:
        raise InsufficientTail(f"{idx.size} samples within {radius:g} of the endpoint (need 20)")
    xi = np.linspace(tr.t[idx[0]], tr.t[-1], n_dense)
    return tr(xi)


def asymptotics_check(profile: WaveProfile, region: Region | None = None,
                      radius: float | None = None) -> AsymptoticFit:
    """Fit the local law predicted near the region's terminal point.

    Region 1: ``U2 - w = b eta + c eta^2`` with ``eta = U1 - w/2``; returns
    ``c`` (predicted ``2/w``). Region 2: relative spread of ``E^2 (U2 - 2w)``
    over the last decade of approach. Region 3: linear fit of ``E^2`` against
    ``U2``, residual relative to the ``E^2`` range.
    """
    region = region or profile.region
    w = profile.w
    name = TERMINAL_POINT.get(region)
    if name is None:
        raise ValueError("no terminal point for an invalid region")
    ends = [e for e in (profile.plus, profile.minus) if e.reason == name]
    if not ends:
        raise ValueError(f"trajectory does not reach {name}; endpoints: "
                         f"{profile.plus.reason}, {profile.minus.reason}")
    tr = profile.forward if profile.plus.reason == name else profile.backward
    end = profile.plus if tr is profile.forward else profile.minus
    target = _point_coords(w)[name]
    if region is Region.REGION1:
        s = _tail(tr, target, radius or 0.005 * w)
        eta = s[:, 1] - 0.5 * w
        psi = s[:, 2] - w
        a = np.column_stack([eta, eta * eta])
        coef, *_ = np.linalg.lstsq(a, psi, rcond=None)
        res = float(np.max(np.abs(a @ coef - psi)))
        return AsymptoticFit(region, {"linear": float(coef[0]), "quadratic": float(coef[1])},
                             res, float(coef[1]))
    if region is Region.REGION2:
        _tail(tr, target, radius or 0.05 * w)
        tol = end.tol
        pts = [s for s in end.approach if s[0] <= 10.0 * tol * (1 + 1e-9)]
        pts = [(s[0], s[2]) for s in pts] + [(tol, end.state)]
        prod = np.array([st[0] ** 2 * (st[2] - 2 * w) for _, st in pts])
        spread = float((prod.max() - prod.min()) / abs(prod.mean()))
        return AsymptoticFit(region, {"limit": float(prod[-1])}, spread, spread)
    s = _tail(tr, target, radius or 0.05 * w)
    e2, u2 = s[:, 0] ** 2, s[:, 2]
    coef = np.polyfit(u2, e2, 1)
    rng = float(e2.max() - e2.min())
    res = float(np.max(np.abs(np.polyval(coef, u2) - e2)))
    rel = res / rng if rng > 0 else 0.0
    return AsymptoticFit(region, {"slope": float(coef[0]), "intercept": float(coef[1])}, res, rel)


def density_signature(profile: WaveProfile) -> tuple[str, dict]:
    """Sign structure of the periodically glued density ``n = 1 - E'``.

    ``E`` is monotone on the support, so gluing copies makes it jump by
    ``E(xi_-) - E(xi_+)`` at every seam. An increasing ``E`` (region 3) is
    reported as the unphysical case.
    """
    e_lo, e_hi = profile.minus.state[0], profile.plus.state[0]
    increasing = e_hi > e_lo
    xi, y = profile.samples()
    n_smooth = 1.0 - y[:, 1] / (y[:, 1] - profile.w)
    diag = {"jump": float(e_lo - e_hi), "n_smooth_min": float(n_smooth.min()),
            "U1_gap": float(abs(profile.plus.state[1] - profile.minus.state[1])),
            "U2_gap": float(abs(profile.plus.state[2] - profile.minus.state[2]))}
    return (NEGATIVE_DELTA_DENSITY if increasing else PHYSICAL_PERIODIC), diag
