"""Moment/velocity algebra and assembly of the step-k closed moment system.

States live in the conservative (moment) chart ``(M_0, ..., M_k)``; the
velocity chart ``U_j = M_j / M_{j-1}`` is derived on demand because it is
singular wherever a moment vanishes. Every function accepts plain floats or
``fractions.Fraction`` entries; with fractions the algebra is exact, which is
what makes eigenvalue checks on the (defective) Jacobian meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Sequence

import mpmath
import numpy as np

from .errors import ZeroMomentDenominator

__all__ = [
    "MomentVector",
    "VelocityVector",
    "ClosureSpec",
    "DensityDiagnostic",
    "moments_to_velocities",
    "velocities_to_moments",
    "assemble_jacobian",
    "jacobian_eigenvalues",
    "holder_residuals",
    "holder_admissible",
    "density_from_field",
    "conservative_flux_source",
    "delta_moments",
]


@dataclass(frozen=True)
class MomentVector:
    """Moments ``M_0..M_k`` of the phase-space density at one point."""

    m: tuple

    def __post_init__(self):
        m = tuple(self.m)
        object.__setattr__(self, "m", m)
        if len(m) < 2:
            raise ValueError("a closure needs at least M_0 and M_1 (k >= 1)")
        if not m[0] > 0:
            raise ValueError(f"M_0 must be positive, got {m[0]!r}")

    @property
    def k(self) -> int:
        return len(self.m) - 1

    def as_array(self) -> np.ndarray:
        return np.array(self.m, dtype=_dtype_for(self.m))


@dataclass(frozen=True)
class VelocityVector:
    """Density ``M_0`` plus the velocities ``U_1..U_k`` of orders 1..k."""

    m0: Real
    u: tuple

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(self.u))
        if not self.m0 > 0:
            raise ValueError(f"m0 must be positive, got {self.m0!r}")
        if len(self.u) < 1:
            raise ValueError("need at least U_1")

    @property
    def k(self) -> int:
        return len(self.u)

    def ordering_ok(self) -> bool:
        """``|U_1| <= |U_2|``, the ordering every admissible density satisfies."""
        return self.k < 2 or abs(self.u[0]) <= abs(self.u[1])


@dataclass(frozen=True)
class ClosureSpec:
    """Closure level plus the chart the state is expressed in."""

    k: int
    chart: str = "moment"  # "moment": (calE, M_0..M_k); "velocity": (E, U_1..U_k)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"closure level must be an integer >= 1, got {self.k!r}")
        if self.chart not in ("moment", "velocity"):
            raise ValueError(f"unknown chart {self.chart!r}")

    @property
    def n_vars(self) -> int:
        """Unknowns including the field variable."""
        return self.k + 2


@dataclass(frozen=True)
class DensityDiagnostic:
    n: np.ndarray | float
    nonphysical: np.ndarray | bool


def _dtype_for(values) -> type:
    return object if any(isinstance(v, Fraction) for v in values) else float


def moments_to_velocities(mv: MomentVector) -> VelocityVector:
    m = mv.m
    u = []
    for j in range(1, mv.k + 1):
        if m[j - 1] == 0:
            raise ZeroMomentDenominator(j)
        u.append(m[j] / m[j - 1])
    return VelocityVector(m[0], tuple(u))


def velocities_to_moments(vv: VelocityVector) -> MomentVector:
    m = [vv.m0]
    for uj in vv.u:
        m.append(m[-1] * uj)
    return MomentVector(tuple(m))


def assemble_jacobian(mv: MomentVector) -> np.ndarray:
    """Matrix ``A(M)`` of the quasilinear form ``M_t + A(M) M_x = B``.

    Rows ``0..k-1`` shift (row i has a 1 in column i+1); the last row is zero
    except ``-M_k^2/M_{k-1}^2`` and ``2 M_k/M_{k-1}`` in its last two columns.
    Returns an object array when the moments are exact fractions.
    """
    k, m = mv.k, mv.m
    if m[k - 1] == 0:
        raise ZeroMomentDenominator(k)
    dtype = _dtype_for(m)
    zero, one = (Fraction(0), Fraction(1)) if dtype is object else (0.0, 1.0)
    a = np.full((k + 1, k + 1), zero, dtype=dtype)
    for i in range(k):
        a[i, i + 1] = one
    uk = m[k] / m[k - 1]
    a[k, k - 1] = -uk * uk
    a[k, k] = 2 * uk
    return a


def jacobian_eigenvalues(a: np.ndarray, dps: int | None = None) -> np.ndarray:
    """Eigenvalues of a closure Jacobian.

    The double eigenvalue ``U_k`` is defective, so in double precision it
    splits by about ``sqrt(eps)``. Passing ``dps`` (or an exact object array)
    runs the QR iteration in mpmath at that many digits instead.
    """
    if dps is None and a.dtype != object:
        return np.linalg.eigvals(a.astype(float))
    dps = dps or 60
    with mpmath.workdps(dps):
        mat = mpmath.matrix([[_to_mpf(x) for x in row] for row in a])
        ev = mpmath.eig(mat, left=False, right=False)
        return np.array([complex(e) for e in ev])


def _to_mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def holder_residuals(mv: MomentVector) -> np.ndarray:
    """``M_j^2 - M_{j+1} M_{j-1}`` for every odd interior ``j``.

    Admissible (kinetic) moments give residuals ``<= 0``; equality holds for a
    single-delta density.
    """
    if mv.k < 2:
        raise ValueError("Holder residuals need k >= 2")
    m = mv.m
    res = [m[j] * m[j] - m[j + 1] * m[j - 1] for j in range(1, mv.k, 2)]
    return np.array(res, dtype=_dtype_for(res))


def holder_admissible(mv: MomentVector, tol: float = 0.0) -> bool:
    return bool(np.all(holder_residuals(mv) <= tol))


def density_from_field(e_x):
    """Electron density ``n = 1 - E_x`` for unit background; flags ``n <= 0``."""
    n = 1 - np.asarray(e_x, dtype=float) if np.ndim(e_x) else 1 - e_x
    return DensityDiagnostic(n, n <= 0)


def conservative_flux_source(state: Sequence | np.ndarray):
    """Flux and source of the conservative step-k system in ``(calE, M_0..M_k)``.

    ``state`` has the variables along the first axis (extra axes, e.g. cells,
    are carried along). The closure replaces ``M_{k+1}`` by ``M_k^2/M_{k-1}``.
    """
    s = state if isinstance(state, np.ndarray) else np.asarray(state, dtype=_dtype_for(state))
    cal_e, m = s[0], s[1:]
    k = m.shape[0] - 1
    if k < 1:
        raise ValueError("state must hold calE, M_0 and at least M_1")
    if np.any(m[k - 1] == 0):
        raise ZeroMomentDenominator(k)
    m0 = m[0]
    e = cal_e / m0
    flux = np.empty_like(s)
    source = np.empty_like(s)
    flux[0] = m[1] / m0 * cal_e
    source[0] = m[1]
    for j in range(k):
        flux[1 + j] = m[j + 1]
    flux[1 + k] = m[k] * m[k] / m[k - 1]
    source[1] = 0 * m0
    for j in range(1, k + 1):
        source[1 + j] = -j * e * m[j - 1]
    return flux, source


def delta_moments(weight: Real, center: Real, k: int) -> MomentVector:
    """Moments ``M_j = P V^j`` of the single-delta density ``P delta(v - V)``."""
    return MomentVector(tuple(weight * center**j for j in range(k + 1)))
