"""Finite-volume solver for the conservative closure-1 and closure-2 systems.

Unknowns per cell are ``(calE, M_0, M_1)`` for closure 1 and ``(calE, M_0,
M_1, M_2)`` for closure 2, with ``calE = E M_0``. One step is Strang split:
half a source step, a first-order local Lax-Friedrichs flux step, half a
source step. The source part is solved exactly: it rotates ``(calE, M_1)``
at unit frequency and, for closure 2, moves ``M_2`` so that
``M_2 - M_1^2/M_0`` stays fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _field_kernels as _fk
from .closure import conservative_flux_source
from .errors import CellBlowUp, ZeroM1, ZeroMomentDenominator

__all__ = [
    "Grid1D",
    "MomentField",
    "BlowUpLimits",
    "ConservationReport",
    "RunResult",
    "PhysicalFields",
    "flux_and_source",
    "source_exact",
    "step",
    "run",
    "initial_field",
    "derive_physical",
    "conservation",
    "uniform_solution",
]


@dataclass(frozen=True)
class Grid1D:
    n: int
    x_lo: float
    x_hi: float
    boundary: str = "periodic"

    def __post_init__(self):
        if self.n < 8:
            raise ValueError("grid needs at least 8 cells")
        if not self.x_hi > self.x_lo:
            raise ValueError("x_hi must exceed x_lo")
        if self.boundary not in ("periodic", "outflow"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"


@dataclass(frozen=True)
class MomentField:
    closure: int
    grid: Grid1D
    u: np.ndarray  # (closure + 2, n)
    t: float = 0.0

    def __post_init__(self):
        if self.closure not in (1, 2):
            raise ValueError("the solver handles closures 1 and 2")
        u = np.array(self.u, dtype=float)
        if u.shape != (self.closure + 2, self.grid.n):
            raise ValueError(f"state shape {u.shape} does not match closure/grid")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def cal_e(self) -> np.ndarray:
        return self.u[0]

    @property
    def m0(self) -> np.ndarray:
        return self.u[1]

    @property
    def m1(self) -> np.ndarray:
        return self.u[2]

    @property
    def m2(self) -> np.ndarray:
        if self.closure < 2:
            raise AttributeError("closure 1 carries no M_2")
        return self.u[3]

    def admissibility(self) -> np.ndarray:
        """``M_1^2 - M_2 M_0`` per cell (closure 2); admissible where <= 0."""
        return self.m1 ** 2 - self.m2 * self.m0


@dataclass(frozen=True)
class BlowUpLimits:
    """Gradient-catastrophe proxies; ``None`` disables a check.

    ``density`` bounds ``max M_0``: a first-order scheme smears the density
    spike of a forming shock, so cell values and gradients stay moderate on
    practical grids while the density keeps growing.
    """

    value: float | None = 1e6
    gradient: float | None = 1e5
    density: float | None = 10.0


@dataclass(frozen=True)
class ConservationReport:
    t: float
    mass: float
    energy: float
    mass_drift: float
    energy_drift: float


@dataclass(frozen=True)
class RunResult:
    field: MomentField
    reports: tuple
    events: tuple  # CellBlowUp / ZeroM1 instances
    termination: str  # "reached_end" | "cell_blow_up" | "zero_m1"
    steps: int

    @property
    def blew_up(self) -> bool:
        return self.termination == "cell_blow_up"


def flux_and_source(state, closure: int, cell: int | None = None):
    """Physical flux and source for cell values ``state`` (variables first)."""
    s = np.asarray(state, dtype=float)
    if s.shape[0] != closure + 2:
        raise ValueError(f"closure {closure} needs {closure + 2} variables, got {s.shape[0]}")
    if np.any(s[1] <= 0):
        raise ValueError("M_0 must be positive")
    try:
        return conservative_flux_source(s)
    except ZeroMomentDenominator:
        if closure == 2:
            bad = np.flatnonzero(np.atleast_1d(s[2]) == 0)
            raise ZeroM1(int(bad[0]) if cell is None else cell, math.nan) from None
        raise


def source_exact(u: np.ndarray, tau: float) -> np.ndarray:
    """Exact flow of ``calE' = M_1``, ``M_1' = -calE`` (and ``M_2``) over ``tau``."""
    out = np.array(u, dtype=float, copy=True)
    c, s = math.cos(tau), math.sin(tau)
    e, m1 = u[0], u[2]
    out[0] = e * c + m1 * s
    out[2] = m1 * c - e * s
    if u.shape[0] == 4:
        out[3] = u[3] + (out[2] ** 2 - m1 ** 2) / u[1]
    return out


ZERO_M1_REL = 1e-10


def _check_m1(u: np.ndarray, t: float):
    if u.shape[0] == 4:
        small = np.abs(u[2]) <= ZERO_M1_REL * np.max(u[1])
        if np.any(small):
            raise ZeroM1(int(np.flatnonzero(small)[0]), t)


def _check_blowup(u: np.ndarray, dx: float, t: float, limits: BlowUpLimits):
    if not np.all(np.isfinite(u)):
        cell = int(np.flatnonzero(~np.all(np.isfinite(u), axis=0))[0])
        raise CellBlowUp(cell, t, "nonfinite", math.inf)
    if np.any(u[1] <= 0):
        cell = int(np.argmin(u[1]))
        raise CellBlowUp(cell, t, "M0_nonpositive", float(u[1, cell]))
    if limits.value is not None:
        mag = np.max(np.abs(u), axis=0)
        cell = int(np.argmax(mag))
        if mag[cell] > limits.value:
            raise CellBlowUp(cell, t, "value", float(mag[cell]))
    if limits.density is not None:
        cell = int(np.argmax(u[1]))
        if u[1, cell] > limits.density:
            raise CellBlowUp(cell, t, "density", float(u[1, cell]))
    if limits.gradient is not None:
        u1 = u[2] / u[1]
        g = np.abs(np.diff(u1)) / dx
        cell = int(np.argmax(g))
        if g[cell] > limits.gradient:
            raise CellBlowUp(cell, t, "gradient", float(g[cell]))


def step(fld: MomentField, cfl: float = 0.45, dt_max: float = 0.05,
         limits: BlowUpLimits | None = BlowUpLimits(), t_stop: float | None = None) -> MomentField:
    """Advance one Strang-split step; ``dt = min(cfl dx / max speed, dt_max)``."""
    if not 0 < cfl < 1:
        raise ValueError("cfl must lie in (0, 1)")
    u = np.array(fld.u)
    dx = fld.grid.dx
    _check_m1(u, fld.t)
    speed = _fk.max_speed(u)
    dt = dt_max if speed == 0 else min(cfl * dx / speed, dt_max)
    if t_stop is not None:
        dt = min(dt, t_stop - fld.t)
    u = source_exact(u, 0.5 * dt)
    _check_m1(u, fld.t)
    u = _fk.llf_update(u, dx, dt, fld.grid.periodic)
    u = source_exact(u, 0.5 * dt)
    t = fld.t + dt
    if limits is not None:
        _check_blowup(u, dx, t, limits)
    return MomentField(fld.closure, fld.grid, u, t)


def initial_field(closure: int, grid: Grid1D, e0: Callable, v0: Callable,
                  u2_0: Callable | None = None) -> MomentField:
    """Cell averages from ``E_0(x)``, ``V_0(x)`` (and ``U_2(x)`` for closure 2).

    ``M_0`` is the exact cell average of ``1 - E_0'``, so total mass matches
    the field data to rounding; ``calE = E_0 M_0``, ``M_1 = M_0 V_0``,
    ``M_2 = M_1 U_2`` (``U_2`` defaults to ``V_0``).
    """
    xe, xc, dx = grid.edges, grid.centers, grid.dx
    ee = np.asarray(e0(xe), dtype=float) * np.ones_like(xe)
    m0 = 1.0 - (ee[1:] - ee[:-1]) / dx
    if np.any(m0 <= 0):
        raise ValueError("initial density 1 - E0' must be positive in every cell")
    ec = np.asarray(e0(xc), dtype=float) * np.ones_like(xc)
    vc = np.asarray(v0(xc), dtype=float) * np.ones_like(xc)
    rows = [ec * m0, m0, m0 * vc]
    if closure == 2:
        u2 = vc if u2_0 is None else np.asarray(u2_0(xc), dtype=float) * np.ones_like(xc)
        rows.append(rows[2] * u2)
    return MomentField(closure, grid, np.array(rows), 0.0)


def conservation(fld: MomentField) -> tuple[float, float]:
    """Total mass and energy ``1/2 int (M_0 U_1 U_2 + E^2) dx``."""
    dx = fld.grid.dx
    m0, m1 = fld.m0, fld.m1
    kinetic = fld.m2 if fld.closure == 2 else m1 * m1 / m0
    e = fld.cal_e / m0
    return float(np.sum(m0) * dx), float(0.5 * np.sum(kinetic + e * e) * dx)


def run(init: MomentField, t_end: float, cfl: float = 0.45, dt_max: float = 0.05,
        limits: BlowUpLimits | None = BlowUpLimits(), report_every: int = 50,
        positive_only: bool = False, max_steps: int = 10_000_000) -> RunResult:
    """Step ``init`` to ``t_end``; CellBlowUp and ZeroM1 end the run as results."""
    if np.any(init.m0 <= 0):
        raise ValueError("initial M_0 must be positive")
    if positive_only and np.any(init.m1 / init.m0 <= 0):
        raise ValueError("positivity-restricted mode needs U_1 > 0 in every cell")
    mass0, energy0 = conservation(init)
    reports = [ConservationReport(init.t, mass0, energy0, 0.0, 0.0)]
    fld, n, events, termination = init, 0, [], "reached_end"
    while fld.t < t_end - 1e-14 * max(1.0, abs(t_end)):
        try:
            fld = step(fld, cfl, dt_max, limits, t_stop=t_end)
        except CellBlowUp as exc:
            events.append(exc)
            termination = "cell_blow_up"
            break
        except ZeroM1 as exc:
            events.append(exc)
            termination = "zero_m1"
            break
        n += 1
        if n % report_every == 0:
            m, e = conservation(fld)
            reports.append(ConservationReport(fld.t, m, e, m - mass0, e - energy0))
        if n >= max_steps:
            raise RuntimeError("maximum number of steps exceeded")
    m, e = conservation(fld)
    if reports[-1].t != fld.t:
        reports.append(ConservationReport(fld.t, m, e, m - mass0, e - energy0))
    return RunResult(fld, tuple(reports), tuple(events), termination, n)


@dataclass(frozen=True)
class PhysicalFields:
    x: np.ndarray
    E: np.ndarray
    n: np.ndarray
    U1: np.ndarray
    U2: np.ndarray | None
    u2_undefined: np.ndarray | None
    consistency: np.ndarray  # |M_0 - (1 - E_x)|


def derive_physical(fld: MomentField) -> PhysicalFields:
    m0 = fld.m0
    if np.any(m0 <= 0):
        raise ValueError("M_0 must be positive")
    e = fld.cal_e / m0
    u1 = fld.m1 / m0
    u2 = undefined = None
    if fld.closure == 2:
        undefined = fld.m1 == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            u2 = np.where(undefined, np.nan, fld.m2 / np.where(undefined, 1.0, fld.m1))
    dx = fld.grid.dx
    if fld.grid.periodic:
        e_x = (np.roll(e, -1) - np.roll(e, 1)) / (2 * dx)
    else:
        e_x = np.gradient(e, dx)
    return PhysicalFields(fld.grid.centers, e, m0.copy(), u1, u2, undefined,
                          np.abs(m0 - (1.0 - e_x)))


def uniform_solution(cal_e0: float, m0: float, m1_0: float, t: float, m2_0: float | None = None):
    """Exact spatially uniform solution ``(calE, M_0, M_1[, M_2])`` at time ``t``.

    ``calE = C cos(t + theta)``, ``M_1 = -C sin(t + theta)``; ``M_2`` keeps
    ``M_2 - M_1^2/M_0`` constant, i.e. ``M_2 = -C^2/(2 M_0) cos 2(t + theta) + C_2``.
    """
    c = math.hypot(cal_e0, m1_0)
    theta = math.atan2(-m1_0, cal_e0)
    e = c * math.cos(t + theta)
    m1 = -c * math.sin(t + theta)
    if m2_0 is None:
        return np.array([e, m0, m1])
    c2 = m2_0 + c * c / (2 * m0) * math.cos(2 * theta)
    return np.array([e, m0, m1, -c * c / (2 * m0) * math.cos(2 * (t + theta)) + c2])
