"""Numerical toolkit for moment-chain closures of the 1D cold-plasma model."""
from . import affine, closure, errors, field, odeint, twave

__version__ = "0.1.0"

__all__ = ["affine", "closure", "errors", "field", "odeint", "twave", "__version__"]
