"""Integral modulars over grid fields and the norms they induce.

The modular of a field is the cell-weighted sum of the integrand applied to
pointwise magnitudes.  Its unit ball induces a norm by scaling: the least
lambda whose rescaled field has modular at most one.  On a fixed grid the
gradient seminorm obtained this way, plus the L1 norm of the field itself,
gives the combined first-order norm used to state the fixed-boundary
problems.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError
from .fields import ScalarField, VectorField, gradient, norm_l1
from .phi import PhiFunction

__all__ = ["modular", "luxemburg_norm", "sobolev_norm"]

_MAX_BRACKET_STEPS = 2000


def _magnitudes(phi: PhiFunction, u) -> np.ndarray:
    if not isinstance(u, (ScalarField, VectorField)):
        raise ValueError("modular expects a scalar or vector field")
    if phi.grid is not None and not phi.grid.compatible(u.grid):
        raise ValueError("integrand and field live on incompatible grids")
    if isinstance(u, VectorField):
        return np.sqrt(np.sum(u.values ** 2, axis=0))
    return np.abs(u.values)


def _modular_of(phi: PhiFunction, mag: np.ndarray, cell: float) -> float:
    with np.errstate(over="ignore"):
        total = cell * float(np.sum(phi.value_map(mag)))
    return total if np.isfinite(total) else math.inf


def modular(phi: PhiFunction, u) -> float:
    """Cell-weighted sum of phi(x, |u(x)|) over all nodes.

    Vector fields enter through their pointwise Euclidean magnitude.
    Overflow saturates to ``math.inf`` rather than raising.
    """
    return _modular_of(phi, _magnitudes(phi, u), u.grid.cell_measure)


def luxemburg_norm(phi: PhiFunction, u, tol: float = 1e-10) -> float:
    """Scaling norm of the modular unit ball.

    Returns the upper end of a bisection bracket for
    ``inf { lam > 0 : modular(phi, u / lam) <= 1 }`` once the bracket width
    drops below ``tol * max(1, lam)``, so the returned value always
    satisfies the unit-ball inequality itself.
    """
    if not (np.isfinite(tol) and tol > 0):
        raise ValueError("tolerance must be positive and finite")
    mag = _magnitudes(phi, u)
    if not mag.any():
        return 0.0
    cell = u.grid.cell_measure

    def feasible(lam: float) -> bool:
        # a tiny lam may overflow the division; the modular then saturates
        with np.errstate(over="ignore"):
            return _modular_of(phi, mag / lam, cell) <= 1.0

    lo, hi = 1.0, 1.0
    if feasible(1.0):
        for _ in range(_MAX_BRACKET_STEPS):
            lo = hi / 2.0
            if lo == 0.0:
                raise NumericalError("norm bracket collapsed to zero")
            if not feasible(lo):
                break
            hi = lo
        else:
            raise NumericalError("norm bracket search exhausted shrinking")
    else:
        for _ in range(_MAX_BRACKET_STEPS):
            hi = lo * 2.0
            if not np.isfinite(hi):
                raise NumericalError("overflow while expanding the norm bracket")
            if feasible(hi):
                break
            lo = hi
        else:
            raise NumericalError("norm bracket search exhausted expanding")

    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sobolev_norm(phi: PhiFunction, u: ScalarField, tol: float = 1e-10) -> float:
    """L1 norm of the field plus the scaling norm of its gradient."""
    return norm_l1(u) + luxemburg_norm(phi, gradient(u), tol=tol)
