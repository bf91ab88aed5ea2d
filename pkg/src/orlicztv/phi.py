"""Spatial Orlicz integrands phi(x, t) and their calculus.

Four convex families cover the energies in this package: a plain power,
the double-phase integrand ``t + a(x) t**2``, a variable exponent
``t**p(x)``, and powers ``base(x, t)**p`` of any of these.  Every family
exposes pointwise evaluation, the derivative in t, and the proximal map

    prox(x, tau, s) = argmin_{t >= 0} phi(x, t) + (t - s)**2 / (2 tau),

which the primal-dual solver consumes through Moreau's identity.  Sampled
checkers estimate the structural constants used across the package: the
unit-normalization window, and the almost-monotonicity constants of
``phi(x, t) / t**p``.

Scalar entry points validate their arguments; the ``*_map`` methods are the
vectorized fast paths and assume ``t >= 0`` arrays already broadcast against
the grid.
"""

from __future__ import annotations

import operator
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .fields import Grid, ScalarField

__all__ = [
    "PhiFunction",
    "PowerPhi",
    "DoublePhasePhi",
    "VariableExponentPhi",
    "PowerComposedPhi",
    "power_compose",
    "ConditionReport",
    "default_sample_points",
    "default_normalization_candidates",
    "check_unit_normalization",
    "check_almost_increasing",
    "check_almost_decreasing",
]

#: nodes whose exponent is this close to 1 are treated as exactly 1
UNIT_EXPONENT_TOL = 1e-12

_PROX_TOL = 1e-12
_PROX_MAX_ITER = 200


class PhiFunction(ABC):
    """Convex integrand phi(x, t): nondecreasing in t with phi(x, 0) = 0.

    ``grid`` is None for spatially constant integrands, which are valid on
    any grid; families with coefficient fields carry the field's grid and
    require compatible nodes.
    """

    grid: Grid | None = None

    # -- vectorized maps (t >= 0, broadcastable against the grid) ----------

    @abstractmethod
    def value_map(self, t):
        """phi(x, t) per node."""

    @abstractmethod
    def deriv_map(self, t):
        """d/dt phi(x, t) per node (right derivative at t = 0)."""

    @abstractmethod
    def deriv2_map(self, t):
        """d2/dt2 phi(x, t) per node; may be unbounded as t -> 0."""

    def prox_map(self, tau, s):
        """Pointwise prox of phi with parameter tau > 0 at source s."""
        return _prox_root(self, float(tau), np.asarray(s, dtype=float))

    # -- scalar entry points ------------------------------------------------

    def value(self, node, t) -> float:
        """phi at one node; raises on negative t or an out-of-range node."""
        idx = self._node_index(node)
        return self._pick(self.value_map(self._t_checked(t)), idx)

    def deriv(self, node, t) -> float:
        """Derivative of phi in t at one node."""
        idx = self._node_index(node)
        return self._pick(self.deriv_map(self._t_checked(t)), idx)

    def prox(self, node, tau, s) -> float:
        """Scalar prox at one node.

        Raises :class:`NumericalError` if the inner root finding does not
        meet its tolerance within the iteration cap.
        """
        idx = self._node_index(node)
        tau = float(tau)
        s = float(s)
        if not (np.isfinite(tau) and tau > 0):
            raise ValueError("prox parameter tau must be positive and finite")
        if not np.isfinite(s):
            raise ValueError("prox source s must be finite")
        if self.grid is None:
            return float(self.prox_map(tau, np.asarray(s)))
        # embed the scalar source at the requested node; every other node
        # carries s = 0 whose prox is 0 and costs nothing
        src = np.zeros(self.grid.shape)
        src[idx] = s
        return float(self.prox_map(tau, src)[idx])

    # -- helpers ------------------------------------------------------------

    def _node_index(self, node):
        if self.grid is None:
            return None
        shape = self.grid.shape
        if self.grid.ndim == 1 and not isinstance(node, (tuple, list)):
            node = (node,)
        if not isinstance(node, (tuple, list)) or len(node) != len(shape):
            raise IndexError(f"node {node!r} does not address a "
                             f"{len(shape)}-dimensional grid")
        idx = tuple(operator.index(i) for i in node)
        for i, n in zip(idx, shape):
            if not 0 <= i < n:
                raise IndexError(f"node {idx} outside grid of shape {shape}")
        return idx

    @staticmethod
    def _t_checked(t) -> np.ndarray:
        t = float(t)
        if not np.isfinite(t) or t < 0:
            raise ValueError(f"t must be a finite nonnegative real, got {t!r}")
        return np.asarray(t)

    @staticmethod
    def _pick(values, idx) -> float:
        arr = np.asarray(values)
        return float(arr if idx is None or arr.ndim == 0 else arr[idx])


class PowerPhi(PhiFunction):
    """phi(x, t) = t**p with a spatially constant exponent p >= 1."""

    def __init__(self, p: float):
        p = float(p)
        if not (np.isfinite(p) and p >= 1):
            raise ValueError(f"power exponent must be >= 1, got {p!r}")
        self.p = p
        self.grid = None

    def __repr__(self):
        return f"PowerPhi({self.p!r})"

    def value_map(self, t):
        return np.power(t, self.p)

    def deriv_map(self, t):
        t = np.asarray(t, dtype=float)
        if self.p == 1.0:
            return np.ones_like(t)
        return self.p * np.power(t, self.p - 1.0)

    def deriv2_map(self, t):
        t = np.asarray(t, dtype=float)
        if self.p == 1.0:
            return np.zeros_like(t)
        with np.errstate(divide="ignore", over="ignore"):
            return self.p * (self.p - 1.0) * np.power(t, self.p - 2.0)

    def prox_map(self, tau, s):
        tau = float(tau)
        s = np.asarray(s, dtype=float)
        if self.p == 1.0:
            return np.maximum(0.0, s - tau)
        if self.p == 2.0:
            return np.maximum(0.0, s / (1.0 + 2.0 * tau))
        return _prox_root(self, tau, s)


class DoublePhasePhi(PhiFunction):
    """phi(x, t) = t + a(x) t**2 with a nonnegative weight field a."""

    def __init__(self, weight: ScalarField):
        if np.any(weight.values < 0):
            raise ValueError("double-phase weight must be nonnegative")
        self.weight = weight
        self.grid = weight.grid

    def __repr__(self):
        return f"DoublePhasePhi(weight on {self.grid.shape})"

    def value_map(self, t):
        return t + self.weight.values * np.square(t)

    def deriv_map(self, t):
        return 1.0 + 2.0 * self.weight.values * np.asarray(t, dtype=float)

    def deriv2_map(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(2.0 * self.weight.values,
                               np.broadcast_shapes(t.shape,
                                                   self.grid.shape)).copy()

    def prox_map(self, tau, s):
        tau = float(tau)
        s = np.asarray(s, dtype=float)
        return np.maximum(0.0, (s - tau) / (1.0 + 2.0 * tau * self.weight.values))


class VariableExponentPhi(PhiFunction):
    """phi(x, t) = t**p(x) with an exponent field p >= 1.

    Exponents within ``UNIT_EXPONENT_TOL`` of 1 are snapped to exactly 1;
    the resulting node set is exposed as ``unit_region`` and drives the
    total-variation part of the variable-exponent limit energy.
    """

    def __init__(self, exponent: ScalarField):
        if np.any(exponent.values < 1):
            raise ValueError("exponent field must be >= 1 everywhere")
        self.exponent = exponent
        self.grid = exponent.grid
        unit = exponent.values <= 1.0 + UNIT_EXPONENT_TOL
        self._p = np.where(unit, 1.0, exponent.values)
        self._p.flags.writeable = False
        unit.flags.writeable = False
        self.unit_region = unit

    def __repr__(self):
        return f"VariableExponentPhi(exponent on {self.grid.shape})"

    def value_map(self, t):
        return np.power(t, self._p)

    def deriv_map(self, t):
        # 0**0 = 1 makes the p = 1 branch exact at t = 0
        return self._p * np.power(t, self._p - 1.0)

    def deriv2_map(self, t):
        with np.errstate(divide="ignore", over="ignore"):
            second = self._p * (self._p - 1.0) * np.power(t, self._p - 2.0)
        return np.where(self._p == 1.0, 0.0, second)

    def prox_map(self, tau, s):
        return _prox_root(self, float(tau), np.asarray(s, dtype=float))


class PowerComposedPhi(PhiFunction):
    """phi(x, t) = base(x, t)**p for an inner integrand and p >= 1."""

    def __init__(self, base: PhiFunction, p: float):
        p = float(p)
        if not (np.isfinite(p) and p >= 1):
            raise ValueError(f"composition exponent must be >= 1, got {p!r}")
        self.base = base
        self.p = p
        self.grid = base.grid

    def __repr__(self):
        return f"PowerComposedPhi({self.base!r}, {self.p!r})"

    def value_map(self, t):
        return np.power(self.base.value_map(t), self.p)

    def deriv_map(self, t):
        # 0**0 = 1 keeps the p = 1 case equal to the base derivative
        return self.p * np.power(self.base.value_map(t), self.p - 1.0) \
            * self.base.deriv_map(t)

    def deriv2_map(self, t):
        v = self.base.value_map(t)
        d = self.base.deriv_map(t)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = self.p * (self.p - 1.0) * np.power(v, self.p - 2.0) * d * d \
                + self.p * np.power(v, self.p - 1.0) * self.base.deriv2_map(t)
        return out

    def prox_map(self, tau, s):
        return _prox_root(self, float(tau), np.asarray(s, dtype=float))


def power_compose(phi: PhiFunction, p: float) -> PowerComposedPhi:
    """The integrand ``phi(x, t)**p``; with p = 1 it matches phi pointwise."""
    return PowerComposedPhi(phi, p)


def _prox_root(phi: PhiFunction, tau: float, s: np.ndarray) -> np.ndarray:
    """Solve t + tau * phi'(x, t) = s per node on the bracket [0, max(s, 0)].

    The prox objective is strictly convex with derivative slope >= 1 in the
    reparametrized equation, so both |g(t)| and the bracket width bound the
    distance to the root.  Newton steps are used while they stay inside the
    current sign bracket and fall back to bisection otherwise.  Termination
    on bracket collapse is essential: for exponents close to one the root
    can sit hundreds of decades below the source scale (or underflow
    entirely), where no representable t drives the residual under tolerance.
    """
    shape = np.broadcast_shapes(s.shape, () if phi.grid is None else phi.grid.shape)
    t = np.broadcast_to(np.maximum(s, 0.0), shape).astype(float).copy()
    s = np.broadcast_to(s, shape)
    scale = np.maximum(1.0, np.abs(s))

    # sources at or below tau * phi'(x, 0) project onto the constraint t >= 0
    at_zero = tau * phi.deriv_map(np.zeros(shape)) - s >= 0.0
    t[at_zero] = 0.0
    active = ~at_zero

    lo = np.zeros(shape)
    hi = t.copy()
    gt = np.zeros(shape)
    for _ in range(_PROX_MAX_ITER):
        with np.errstate(all="ignore"):
            gt = np.where(active, t + tau * phi.deriv_map(t) - s, 0.0)
        hi = np.where(active & (gt > 0.0), t, hi)
        lo = np.where(active & (gt <= 0.0), t, lo)
        active = active & (np.abs(gt) > _PROX_TOL * scale)
        collapsed = active & (hi - lo <= _PROX_TOL * scale)
        t = np.where(collapsed, 0.5 * (lo + hi), t)
        active = active & ~collapsed
        if not active.any():
            return t
        with np.errstate(all="ignore"):
            slope = 1.0 + tau * phi.deriv2_map(t)
            cand = t - gt / slope
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        t = np.where(active, cand, t)
    raise NumericalError("prox root finding did not converge",
                         residual=float(np.max(np.abs(gt[active]))),
                         iteration=_PROX_MAX_ITER)


# --- sampled condition checks ----------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a sampled structural check.

    ``witness_constant`` is the estimated best constant: for the
    normalization check a window parameter in (0, 1]; for the
    almost-monotonicity checks a ratio bound >= 1.  ``failure_sample`` holds
    ``(node, t1, t2)`` for a witnessed violation (node is None for spatially
    constant integrands).
    """

    condition: str
    holds: bool
    witness_constant: float
    failure_sample: tuple | None = None


def default_sample_points(count: int = 200,
                          t_range: tuple[float, float] = (1e-6, 1e6)) -> np.ndarray:
    """Logarithmically spaced t samples used by the monotonicity checks."""
    lo, hi = t_range
    if not (0 < lo < hi and np.isfinite(hi)):
        raise ValueError("t_range must satisfy 0 < lo < hi < inf")
    return np.geomspace(lo, hi, int(count))


def default_normalization_candidates() -> np.ndarray:
    """Candidate window parameters 1, 1/2, ..., 2**-20."""
    return 0.5 ** np.arange(21)


def _node_of_flat(phi: PhiFunction, flat_index: int):
    if phi.grid is None:
        return None
    idx = np.unravel_index(int(flat_index), phi.grid.shape)
    return idx[0] if phi.grid.ndim == 1 else tuple(int(i) for i in idx)


def _sampled_ratios(phi: PhiFunction, exponent: float,
                    samples: np.ndarray) -> np.ndarray:
    """phi(x, t) / t**exponent as a (sample, node) matrix."""
    ts = np.asarray(samples, dtype=float)
    if ts.ndim != 1 or ts.size < 2:
        raise ValueError("at least two sample points are required")
    if np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
        raise ValueError("sample points must be positive and increasing")
    if phi.grid is None:
        shaped = ts
    else:
        shaped = ts.reshape((ts.size,) + (1,) * phi.grid.ndim)
    with np.errstate(over="ignore"):
        vals = np.asarray(phi.value_map(shaped), dtype=float)
        ratios = vals / np.power(shaped, exponent)
    return ratios.reshape(ts.size, -1)


def check_unit_normalization(phi: PhiFunction,
                             candidates=None) -> ConditionReport:
    """Largest window beta in (0, 1] with phi(x, beta) <= 1 <= phi(x, 1/beta).

    Candidates are tried from the largest down; the first one that passes at
    every node is the witness.  With no passing candidate the report carries
    a failing (node, beta, 1/beta) sample for the smallest candidate.
    """
    if candidates is None:
        candidates = default_normalization_candidates()
    cand = np.sort(np.asarray(candidates, dtype=float))[::-1]
    if cand.size == 0:
        raise ValueError("candidate list must not be empty")
    if np.any(cand <= 0) or np.any(cand > 1):
        raise ValueError("normalization candidates must lie in (0, 1]")

    name = "unit-normalization"
    low = high = None
    for beta in cand:
        low = np.asarray(phi.value_map(np.asarray(beta)), dtype=float).ravel()
        with np.errstate(over="ignore"):
            high = np.asarray(phi.value_map(np.asarray(1.0 / beta)),
                              dtype=float).ravel()
        if np.all(low <= 1.0) and np.all(high >= 1.0):
            return ConditionReport(name, True, float(beta))
    beta = float(cand[-1])
    bad = np.flatnonzero(low > 1.0)
    flat = int(bad[0]) if bad.size else int(np.flatnonzero(high < 1.0)[0])
    return ConditionReport(name, False, float("nan"),
                           (_node_of_flat(phi, flat), beta, 1.0 / beta))


def _almost_monotone(phi: PhiFunction, exponent: float, samples,
                     tol_multiplier: float, decreasing: bool) -> ConditionReport:
    ts = default_sample_points() if samples is None else np.asarray(samples, float)
    ratios = _sampled_ratios(phi, exponent, ts)
    kind = "decreasing" if decreasing else "increasing"
    name = f"almost-{kind}({exponent:g})"

    if decreasing:
        # least L with r(t) <= L r(s) for sampled s <= t
        ref = np.minimum.accumulate(ratios, axis=0)
    else:
        # least L with r(s) <= L r(t) for sampled s <= t
        ref = np.minimum.accumulate(ratios[::-1], axis=0)[::-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        excess = ratios / ref
    worst_flat = int(np.nanargmax(excess))
    worst = float(excess.ravel()[worst_flat])
    constant = max(1.0, worst)
    if constant <= tol_multiplier:
        return ConditionReport(name, True, constant)

    i, node_flat = np.unravel_index(worst_flat, excess.shape)
    col = ratios[:, node_flat]
    if decreasing:
        j = int(np.argmin(col[:i + 1]))
        pair = (float(ts[j]), float(ts[i]))
    else:
        j = i + int(np.argmin(col[i:]))
        pair = (float(ts[i]), float(ts[j]))
    return ConditionReport(name, False, constant,
                           (_node_of_flat(phi, node_flat),) + pair)


def check_almost_increasing(phi: PhiFunction, exponent: float, samples=None,
                            tol_multiplier: float = 1.0 + 1e-10) -> ConditionReport:
    """Sampled check that phi(x, t) / t**exponent is almost increasing.

    Estimates the least L >= 1 with ``r(x, s) <= L r(x, t)`` over all sampled
    pairs s <= t and all nodes; holds iff L stays within ``tol_multiplier``.
    """
    return _almost_monotone(phi, float(exponent), samples,
                            float(tol_multiplier), decreasing=False)


def check_almost_decreasing(phi: PhiFunction, exponent: float, samples=None,
                            tol_multiplier: float = 1.0 + 1e-10) -> ConditionReport:
    """Sampled check that phi(x, t) / t**exponent is almost decreasing."""
    return _almost_monotone(phi, float(exponent), samples,
                            float(tol_multiplier), decreasing=True)
