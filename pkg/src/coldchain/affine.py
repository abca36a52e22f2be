"""Affine (spatially linear) solutions and their slope ODEs.

For ``E = a(t) x``, ``U_1 = gamma_1(t) x``, ``U_2 = gamma_2(t) x`` the closed
moment systems reduce to small ODE systems in the slopes. Closure 1 is the
planar system in ``(a, gamma_1)``; closure 2 adds ``gamma_2``, whose equation
is singular at ``gamma_1 = 0``. The chart ``q = a/gamma_1``,
``eps = gamma_2 - gamma_1`` decouples ``a`` and is regular there, and the
friction system (constant ``eps_star`` in place of ``eps``) bounds the
closure-2 projection from below.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from . import _affine_kernels as _k
from .errors import GammaOneZero, InvalidGluing
from .odeint import (
    BLOW_UP,
    EVENT,
    EventSpec,
    IvpProblem,
    Tolerances,
    Trajectory,
    integrate,
)

__all__ = [
    "AffineState",
    "ChartQE",
    "AffineRun",
    "QeOrbit",
    "BranchPlan",
    "PiecewiseTrajectory",
    "SMOOTH",
    "BLOWUP",
    "CLASSICAL_END",
    "GLOBALLY_SMOOTH",
    "BOUNDARY",
    "rhs_ag",
    "rhs_agg",
    "rhs_qe",
    "rhs_ages",
    "criterion_closure1",
    "first_integral_ag",
    "convexity_locus",
    "simulate_affine",
    "simulate_ages",
    "trace_qe",
    "epsilon_floor",
    "alpha_star",
    "ages_arc",
    "curve_point",
    "validate_plan",
    "continue_branches",
    "sweep_affine",
]

# simulation outcomes
SMOOTH = "smooth"
BLOWUP = "blow_up"
CLASSICAL_END = "classical_end"
OUTCOME_CODES = {_k.SMOOTH: SMOOTH, _k.BLOW_UP: BLOWUP,
                 _k.CLASSICAL_END: CLASSICAL_END, _k.ERROR: "error"}

# criterion verdicts
GLOBALLY_SMOOTH = "globally_smooth"
BOUNDARY = "boundary"

DEFAULT_TOL = Tolerances(rtol=1e-10, atol=1e-12, blowup=1e8)


@dataclass(frozen=True)
class AffineState:
    """Slopes of ``E``, ``U_1``, ``U_2``; closure 1 lives on ``g2 == g1``."""

    a: float
    g1: float
    g2: float

    def __post_init__(self):
        for name in ("a", "g1", "g2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.g2 < self.g1:
            raise ValueError(
                f"gamma_2 < gamma_1 ({self.g2!r} < {self.g1!r}) violates the velocity ordering")

    @property
    def physical(self) -> bool:
        return self.a < 1.0

    def to_qe(self) -> "ChartQE":
        if self.g1 == 0:
            raise GammaOneZero("q = a/gamma_1 undefined at gamma_1 = 0")
        return ChartQE(self.a / self.g1, self.g2 - self.g1)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.g1, self.g2])


@dataclass(frozen=True)
class ChartQE:
    q: float
    eps: float

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.eps])


def rhs_ag(s, params=()):
    a, g1 = s[0], s[1]
    return np.array([-g1 * (a - 1.0), -a - g1 * g1])


def rhs_agg(s, params=()):
    a, g1, g2 = s[0], s[1], s[2]
    if g1 == 0:
        raise GammaOneZero("closure-2 slope system is singular at gamma_1 = 0")
    return np.array([-g1 * (a - 1.0), -a - 2.0 * g1 * g2 + g1 * g1,
                     -2.0 * a + a * g2 / g1 - g2 * g2])


def rhs_qe(s, params=()):
    q, eps = s[0], s[1]
    return np.array([1.0 + 2.0 * eps * q + q * q, -eps * eps + q * eps])


def rhs_ages(s, eps_star):
    """Friction system; ``eps_star`` may be passed bare or as a 1-tuple."""
    nu = eps_star[0] if isinstance(eps_star, (tuple, list)) else eps_star
    a, g1 = s[0], s[1]
    return np.array([-g1 * (a - 1.0), -a - g1 * g1 - 2.0 * g1 * nu])


def criterion_closure1(a0: float, g10: float) -> str:
    """Global smoothness verdict of closure-1 affine data."""
    if not a0 < 1:
        raise ValueError("criterion requires a0 < 1")
    v = g10 * g10 + 2.0 * a0 - 1.0
    if v < 0:
        return GLOBALLY_SMOOTH
    return BOUNDARY if v == 0 else BLOWUP


def first_integral_ag(a, g1):
    """``C = (1 - 2a - g1^2)/(a - 1)^2``, conserved by the closure-1 slopes."""
    if np.any(np.asarray(a) == 1):
        raise ValueError("first integral undefined at a = 1")
    return (1.0 - 2.0 * a - g1 * g1) / (a - 1.0) ** 2


def convexity_locus(q, eps):
    """Polynomial whose zero set (q < 0) is where (q, eps) orbits change convexity."""
    return (4 * eps**2 + q * eps + 6 * q * eps**3 + q**2 - 3 * q**3 * eps
            + 1 + 6 * q**2 * eps**2)


@dataclass(frozen=True)
class AffineRun:
    closure: int
    init: AffineState
    trajectory: Trajectory
    outcome: str
    t_stop: float | None  # blow-up time (closure 1) or classical end (closure 2)

    @property
    def limit(self) -> np.ndarray:
        return self.trajectory.y_end


def _outcome(tr: Trajectory, blowup: float) -> tuple[str, float | None]:
    if tr.termination == BLOW_UP:
        y = tr.y_end
        t_hit = tr.blowup_time
        if max(abs(y[0]), abs(y[1])) > math.sqrt(blowup):
            return BLOWUP, t_hit
        return CLASSICAL_END, t_hit
    if tr.termination == EVENT:
        return CLASSICAL_END, tr.t_end
    return SMOOTH, None


def simulate_affine(closure: int, init: AffineState, t_end: float,
                    ctrl: Tolerances | None = None) -> AffineRun:
    """Integrate the closure-1 or closure-2 slope system from ``init``.

    Closure 2 stops where ``gamma_1`` reaches zero, which in practice shows
    up first as ``gamma_2`` passing the blow-up threshold while ``(a,
    gamma_1)`` stays bounded; both are reported as a classical end.
    """
    ctrl = ctrl or DEFAULT_TOL
    if closure == 1:
        tr = integrate(IvpProblem(rhs_ag, [init.a, init.g1], 0.0, t_end), (), ctrl)
    elif closure == 2:
        if init.g1 == 0:
            raise GammaOneZero("closure-2 start needs gamma_1 != 0")
        ev = EventSpec(lambda y: y[1], 0, True, "g1_zero")
        tr = integrate(IvpProblem(rhs_agg, init.as_array(), 0.0, t_end), [ev], ctrl)
    else:
        raise ValueError(f"closure must be 1 or 2, got {closure!r}")
    outcome, t_stop = _outcome(tr, ctrl.blowup)
    return AffineRun(closure, init, tr, outcome, t_stop)


def simulate_ages(a0: float, g10: float, eps_star: float, t_end: float,
                  ctrl: Tolerances | None = None, stop_on_axis: bool = False) -> Trajectory:
    """Friction system; negative ``t_end`` runs backwards."""
    ctrl = ctrl or DEFAULT_TOL
    events = []
    if stop_on_axis:
        events.append(EventSpec(lambda y: y[1], 0, True, "g1_zero"))
    return integrate(IvpProblem(rhs_ages, [a0, g10], 0.0, t_end, (eps_star,)), events, ctrl)


# ---------------------------------------------------------------- (q, eps) chart

@dataclass(frozen=True)
class QeOrbit:
    """Orbit of the (q, eps) system through a point, traced both ways in time.

    The forward part ends where ``q`` blows up (``gamma_1`` reaches zero in
    the slope chart); the backward part ends at ``t_back`` or blow-up.
    """

    start: ChartQE
    forward: Trajectory
    backward: Trajectory

    @property
    def span(self) -> tuple[float, float]:
        return self.backward.t_end, self.forward.t_end

    def point(self, tau: float) -> ChartQE:
        tr = self.forward if tau >= 0 else self.backward
        q, eps = tr(tau)
        return ChartQE(float(q), float(eps))

    def samples(self) -> np.ndarray:
        return np.vstack([self.backward.y[::-1], self.forward.y[1:]])

    def distance(self, pt: ChartQE) -> float:
        """Distance from ``pt`` to the orbit, refined on the dense output."""
        xs = self.samples()
        ts = np.concatenate([self.backward.t[::-1], self.forward.t[1:]])
        target = pt.as_array()
        d = np.hypot(xs[:, 0] - target[0], xs[:, 1] - target[1])
        i = int(np.argmin(d))
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]
        if lo == hi:
            return float(d[i])
        res = minimize_scalar(
            lambda tau: float(np.hypot(*(self.point(tau).as_array() - target))),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        return float(min(res.fun, d[i]))


def trace_qe(start: ChartQE, t_fwd: float = 50.0, t_back: float = -50.0,
             ctrl: Tolerances | None = None) -> QeOrbit:
    ctrl = ctrl or DEFAULT_TOL
    y0 = start.as_array()
    fwd = integrate(IvpProblem(rhs_qe, y0, 0.0, t_fwd), (), ctrl)
    bwd = integrate(IvpProblem(rhs_qe, y0, 0.0, t_back), (), ctrl)
    return QeOrbit(start, fwd, bwd)


def epsilon_floor(tr: Trajectory) -> float:
    """Smallest ``eps`` along a (q, eps) trajectory, located on the dense output."""
    eps = tr.y[:, 1]
    if eps[0] < 0:
        raise ValueError("trajectory must start with eps >= 0")
    i = int(np.argmin(eps))
    if i == 0 or i == eps.size - 1:
        return float(eps[i])
    res = minimize_scalar(lambda t: float(tr(t)[1]), bounds=sorted((tr.t[i - 1], tr.t[i + 1])),
                          method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, eps[i]))


# --------------------------------------------------------------- friction system

def _ages_smooth(alpha: float, eps_star: float, t_end: float) -> bool:
    out = np.empty(1, dtype=np.int64)
    _k.classify_batch(np.array([alpha]), np.array([0.0]), np.array([eps_star]), _k.MODE_AGES,
                      t_end, DEFAULT_TOL.rtol, DEFAULT_TOL.atol, DEFAULT_TOL.blowup, out)
    return out[0] == _k.SMOOTH


@lru_cache(maxsize=256)
def alpha_star(eps_star: float, iterations: int = 20, lo: float = 0.4, hi: float = 1.0,
               t_end: float = 40.0) -> float:
    """Right end of the globally smooth interval on the axis ``gamma_1 = 0``.

    Bisection on the outcome of friction-system runs started at
    ``(alpha, 0)``. For ``eps_star`` above 1 the system has an equilibrium on
    ``a = 1`` and the value saturates just below 1.
    """
    if eps_star < 0:
        raise ValueError("eps_star must be non-negative")
    if eps_star == 0:
        return 0.5
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if _ages_smooth(mid, eps_star, t_end):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Arc:
    """Friction-system orbit from ``(beta, 0)`` as a graph ``gamma_1(a)``."""

    beta: float
    a: np.ndarray
    g1: np.ndarray
    closes: bool  # returned to the axis (True) or escaped to infinity

    def gamma_at(self, a: float) -> float:
        """Arc height above ``a``; +-inf beyond an arc that escaped."""
        if self.a.size == 0:
            return math.nan
        lo, hi = self.a.min(), self.a.max()
        if a < lo or a > hi:
            if not self.closes and a < lo:
                return math.copysign(math.inf, self.g1[-1])
            return math.nan
        order = np.argsort(self.a)
        return float(np.interp(a, self.a[order], self.g1[order]))


@lru_cache(maxsize=64)
def ages_arc(beta: float, eps_star: float, upper: bool) -> Arc:
    """Upper arc: reverse-time orbit through ``(beta, 0)`` into ``gamma_1 > 0``.

    Lower arc: forward orbit through ``(beta, 0)`` into ``gamma_1 < 0``. Each
    is followed until it returns to the axis or escapes.
    """
    seed = 1e-14 if upper else -1e-14
    t_end = -40.0 if upper else 40.0
    ctrl = Tolerances(rtol=1e-10, atol=1e-12, blowup=1e4)
    tr = simulate_ages(beta, seed, eps_star, t_end, ctrl, stop_on_axis=True)
    closes = tr.termination == EVENT
    a, g1 = np.array(tr.y[:, 0]), np.array(tr.y[:, 1])
    if not closes:
        keep = np.abs(g1) < 1e3
        a, g1 = a[keep], g1[keep]
    return Arc(beta, a, g1, closes)


# ------------------------------------------------------------ branch continuation

INITIAL = "initial"


@dataclass(frozen=True)
class BranchPlan:
    """Re-initialization rules applied at successive ``gamma_1 = 0`` hits.

    Each rule is an :class:`AffineState` or the marker ``"initial"`` (reuse
    the starting point). With ``cycle`` the rules repeat, which with the
    rules ``(upper_point, "initial")`` gives a periodic continuation.
    ``beta`` fixes the friction arcs used to validate the rules.
    """

    rules: tuple
    beta: float
    cycle: bool = False
    on_curve_tol: float = 1e-6


def curve_point(orbit: QeOrbit, tau: float, g1: float) -> AffineState:
    """Slope state with ``gamma_1 = g1`` whose (q, eps) is the orbit point at ``tau``."""
    pt = orbit.point(tau)
    return AffineState(pt.q * g1, g1, g1 + pt.eps)


@dataclass(frozen=True)
class PlanContext:
    orbit: QeOrbit
    eps_star: float
    alpha_star: float
    upper: Arc
    lower: Arc


def _context(init: AffineState, beta: float) -> PlanContext:
    orbit = trace_qe(init.to_qe())
    eps_star = epsilon_floor(orbit.forward)
    alpha = alpha_star(round(eps_star, 12))
    return PlanContext(orbit, eps_star, alpha,
                       ages_arc(beta, round(eps_star, 12), True),
                       ages_arc(beta, round(eps_star, 12), False))


def validate_plan(init: AffineState, plan: BranchPlan) -> PlanContext:
    """Check every rule against the gluing constraints; raise InvalidGluing."""
    if init.g1 >= 0:
        raise InvalidGluing("continuation starts in the lower half-plane gamma_1 < 0")
    ctx = _context(init, plan.beta)
    if not 0 < plan.beta < ctx.alpha_star:
        raise InvalidGluing(f"beta={plan.beta} must lie in (0, alpha*={ctx.alpha_star:.6g})")
    if not plan.rules:
        raise InvalidGluing("plan has no rules")
    # hits alternate: first hit leaves the lower half-plane
    for n, rule in enumerate(plan.rules):
        state = init if rule == INITIAL else rule
        if not isinstance(state, AffineState):
            raise InvalidGluing(f"rule {n}: expected AffineState or 'initial', got {rule!r}")
        going_up = n % 2 == 0
        tag = f"rule {n}"
        if going_up:
            if not (state.a < 0 and state.g1 > 0):
                raise InvalidGluing(f"{tag}: upper re-initialization needs a < 0 < gamma_1")
            bound = ctx.upper.gamma_at(state.a)
            if not state.g1 < bound:
                raise InvalidGluing(f"{tag}: (a, gamma_1) not below the reverse friction arc")
        else:
            if not state.g1 < 0:
                raise InvalidGluing(f"{tag}: lower re-initialization needs gamma_1 < 0")
            bound = ctx.lower.gamma_at(state.a)
            if not (math.isfinite(bound) and bound < state.g1):
                raise InvalidGluing(f"{tag}: (a, gamma_1) not above the forward friction arc")
        dist = ctx.orbit.distance(state.to_qe())
        scale = 1.0 + abs(state.to_qe().q) + state.to_qe().eps
        if dist > plan.on_curve_tol * scale:
            raise InvalidGluing(f"{tag}: (q, eps) is {dist:.3g} away from the step-1 orbit")
    if plan.cycle and len(plan.rules) % 2:
        raise InvalidGluing("a cyclic plan needs an even number of rules")
    return ctx


@dataclass(frozen=True)
class PiecewiseTrajectory:
    """Concatenated closure-2 segments glued at ``gamma_1 = 0`` hits."""

    segments: tuple
    offsets: tuple  # global start time of each segment
    termination: str

    @property
    def switch_times(self) -> np.ndarray:
        return np.array(self.offsets[1:])

    @property
    def t_end(self) -> float:
        return self.offsets[-1] + self.segments[-1].t_end

    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        ts = [off + seg.t for off, seg in zip(self.offsets, self.segments)]
        return np.concatenate(ts), np.vstack([seg.y for seg in self.segments])

    def __call__(self, t: float) -> np.ndarray:
        """State at global time ``t`` (right-continuous at switches)."""
        for off, seg in zip(reversed(self.offsets), reversed(self.segments)):
            if t >= off:
                return seg(min(t - off, seg.t_end))
        raise ValueError("t before the start of the continuation")


def continue_branches(init: AffineState, plan: BranchPlan, t_end: float,
                      ctrl: Tolerances | None = None) -> PiecewiseTrajectory:
    """Global bounded continuation of the closure-2 slopes through ``gamma_1 = 0``.

    Each segment runs until its classical end; the next rule of the plan then
    restarts the system. Stops at ``t_end``, on a genuine blow-up, or when a
    non-cyclic plan runs out of rules.
    """
    validate_plan(init, plan)
    segments, offsets = [], []
    t, state, n = 0.0, init, 0
    termination = "reached_end"
    while True:
        run = simulate_affine(2, state, t_end - t, ctrl)
        segments.append(run.trajectory)
        offsets.append(t)
        if run.outcome == SMOOTH:
            break
        if run.outcome == BLOWUP:
            termination = BLOWUP
            break
        t += run.trajectory.t_end
        if n >= len(plan.rules) and not plan.cycle:
            termination = "plan_exhausted"
            break
        rule = plan.rules[n % len(plan.rules)]
        state = init if rule == INITIAL else rule
        n += 1
        if t >= t_end:
            break
    return PiecewiseTrajectory(tuple(segments), tuple(offsets), termination)


# -------------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepResult:
    a0: np.ndarray
    g10: np.ndarray
    par: np.ndarray
    mode: str  # "ages" (par = eps_star) or "agg" (par = gamma_20)
    verdict: np.ndarray = field(repr=False)

    def rows(self):
        for a, g, p, v in zip(self.a0, self.g10, self.par, self.verdict):
            yield float(a), float(g), float(p), OUTCOME_CODES[int(v)]

    def grid(self, shape) -> np.ndarray:
        return self.verdict.reshape(shape)


def _threads() -> int:
    env = os.environ.get("COLDCHAIN_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def sweep_affine(a0, g10, par, mode: str = "ages", t_end: float = 40.0,
                 ctrl: Tolerances | None = None, threads: int | None = None) -> SweepResult:
    """Classify every initial point; rows sorted lexicographically by (a0, g10, par).

    Work is split into chunks handled by a thread pool; the compiled kernel
    releases the GIL, the interpreted fallback does not.
    """
    ctrl = ctrl or DEFAULT_TOL
    a0 = np.asarray(a0, dtype=float).ravel()
    g10 = np.asarray(g10, dtype=float).ravel()
    par = np.broadcast_to(np.asarray(par, dtype=float), a0.shape).ravel().copy()
    if not (a0.shape == g10.shape == par.shape):
        raise ValueError("a0, g10 and par must have matching sizes")
    order = np.lexsort((par, g10, a0))
    a0, g10, par = a0[order], g10[order], par[order]
    code = {"ages": _k.MODE_AGES, "agg": _k.MODE_AGG}[mode]
    out = np.empty(a0.size, dtype=np.int64)
    if a0.size:
        nthreads = threads or _threads()
        chunks = np.array_split(np.arange(a0.size), min(nthreads, a0.size))

        def work(idx):
            res = np.empty(idx.size, dtype=np.int64)
            _k.classify_batch(a0[idx], g10[idx], par[idx], code, float(t_end),
                              ctrl.rtol, ctrl.atol, ctrl.blowup, res)
            out[idx] = res

        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))
    return SweepResult(a0, g10, par, mode, out)
