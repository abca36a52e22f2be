"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class ColdChainError(Exception):
    """Base class for every error raised by the package."""


class SingularRHS(ColdChainError, ArithmeticError):
    """A right-hand side was evaluated on one of its singular sets.

    The integrator treats this like a failed step (the step is retried with a
    smaller size), so right-hand sides raise it instead of returning inf/nan.
    """


class ZeroMomentDenominator(ColdChainError, ZeroDivisionError):
    """``M_{j-1} = 0`` while forming the velocity of order ``j``."""

    def __init__(self, j: int):
        super().__init__(f"velocity of order {j} undefined: M_{j - 1} = 0")
        self.j = j


class GammaOneZero(SingularRHS):
    """The closure-2 affine system was evaluated at gamma_1 = 0."""


class SingularManifold(SingularRHS):
    """The closure-2 wave system was evaluated where a denominator vanishes."""

    def __init__(self, which: str):
        super().__init__(f"singular manifold hit: {which}")
        self.which = which


class StepUnderflow(ColdChainError):
    """Adaptive step fell below the minimum without meeting the tolerance."""

    def __init__(self, t: float, h: float, trajectory=None):
        super().__init__(f"step size {h:.3e} below minimum at t={t:.17g}")
        self.t = t
        self.h = h
        self.trajectory = trajectory


class OutOfSpan(ColdChainError, ValueError):
    """Dense output requested outside the integrated interval."""


class InvalidGluing(ColdChainError, ValueError):
    """A branch re-initialization violates the gluing constraints."""


class NoSmoothWave(ColdChainError, ValueError):
    """Closure-1 traveling wave requested with w**2 < I0**2."""


class InsufficientTail(ColdChainError, ValueError):
    """Too few samples near the endpoint to fit an asymptotic law."""


class ZeroM1(ColdChainError):
    """First moment vanished in a cell while running the closure-2 solver."""

    def __init__(self, cell: int, t: float):
        super().__init__(f"M1 = 0 in cell {cell} at t={t:.17g}")
        self.cell = cell
        self.t = t


class CellBlowUp(ColdChainError):
    """A cell value or discrete gradient exceeded its blow-up threshold."""

    def __init__(self, cell: int, t: float, quantity: str, value: float):
        super().__init__(
            f"blow-up in cell {cell} at t={t:.17g}: {quantity}={value:.6g}")
        self.cell = cell
        self.t = t
        self.quantity = quantity
        self.value = value


class ConfigError(ColdChainError, ValueError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message: str, *, field: str | None = None,
                 line: int | None = None, path: str | None = None):
        where = []
        if path:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.field = field
        self.line = line
        self.path = path
