"""Topological groups acting on the augmentation space.

A group action here is the data needed by the group-move samplers: the group
operations themselves, the action ``act(g, y)``, the multiplier ``j(g, y)``
satisfying the chain rule ``j(g1*g2, y) = j(g1, g2*y) * j(g2, y)`` and the
change-of-variables identity

    integral of h(g*y) * j(g, y) dy  ==  integral of h(y) dy,

the modular function ``delta``, and a density for the left-invariant measure
on the group.  The built-in group is the positive reals acting on R^n by
coordinatewise scaling, for which ``j(g, y) = g**n`` and the left-invariant
measure is dg/g.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Callable

import numpy as np

from .errors import DomainError
from .quadrature import QuadratureSpec, adaptive_trapezoid

__all__ = [
    "GroupAction",
    "MultiplicativeAction",
    "IdentityAction",
    "j_eval",
    "check_relative_invariance",
    "check_left_invariance",
    "QuadratureSpec",
]


class GroupAction(ABC):
    """Interface for a group acting on the augmentation space R^dim_y.

    Group elements are opaque to callers; the built-in actions use plain
    positive floats.  Implementations must keep ``act`` measure-compatible
    with ``j``: the multiplier is exactly the density correction that makes
    integrals of ``h(g*y)`` against the base measure match integrals of ``h``.
    """

    dim_y: int

    @property
    @abstractmethod
    def identity(self):
        """The group identity element."""

    @abstractmethod
    def compose(self, g1, g2):
        """Product g1*g2 in the group."""

    @abstractmethod
    def inverse(self, g):
        """Group inverse of g."""

    @abstractmethod
    def act(self, g, y):
        """Apply g to a point of the augmentation space."""

    @abstractmethod
    def j(self, g, y) -> float:
        """Multiplier of the action at (g, y)."""

    @abstractmethod
    def delta(self, g) -> float:
        """Modular function of the group at g."""

    @abstractmethod
    def haar_log_density(self, g) -> float:
        """Log density of the left-invariant measure w.r.t. Lebesgue on the group coordinate."""

    def orbit_index(self, y) -> int:
        """Small integer labelling the orbit of a scalar y, where orbits are finite in number."""
        raise NotImplementedError


def _check_positive_scalar(g) -> float:
    g = float(g)
    if not (math.isfinite(g) and g > 0.0):
        raise DomainError(f"group element must be a finite positive real, got {g!r}")
    return g


class MultiplicativeAction(GroupAction):
    """Positive reals under multiplication, acting on R^n by y -> g*y.

    The multiplier is ``j(g, y) = g**n`` (the Jacobian of the scaling), the
    group is abelian hence unimodular, and the left-invariant measure is
    dg/g on (0, inf).

    Parameters
    ----------
    dim_y : int
        Dimension n of the space being scaled.
    """

    def __init__(self, dim_y: int):
        if dim_y < 1:
            raise ValueError("dim_y must be a positive integer")
        self.dim_y = int(dim_y)

    @property
    def identity(self) -> float:
        return 1.0

    def compose(self, g1, g2) -> float:
        return _check_positive_scalar(_check_positive_scalar(g1) * _check_positive_scalar(g2))

    def inverse(self, g) -> float:
        return 1.0 / _check_positive_scalar(g)

    def act(self, g, y):
        g = _check_positive_scalar(g)
        if np.isscalar(y) or np.ndim(y) == 0:
            return g * float(y)
        return g * np.asarray(y, dtype=float)

    def j(self, g, y) -> float:
        return _check_positive_scalar(g) ** self.dim_y

    def delta(self, g) -> float:
        _check_positive_scalar(g)
        return 1.0

    def haar_log_density(self, g) -> float:
        return -math.log(_check_positive_scalar(g))

    def orbit_index(self, y) -> int:
        """0 for the negative half-line, 1 for the positive; the origin is its own orbit."""
        if self.dim_y != 1 or not (np.isscalar(y) or np.ndim(y) == 0):
            raise NotImplementedError("orbit labels are only enumerable for scalar y")
        y = float(y)
        if y == 0.0:
            raise DomainError("the origin is a null orbit with no sampler support")
        return 1 if y > 0 else 0


class IdentityAction(GroupAction):
    """The trivial group {e} acting by doing nothing.

    Useful as the degenerate case: every group-move kernel built on it
    collapses to the plain two-block sampler.
    """

    def __init__(self, dim_y: int = 1):
        self.dim_y = int(dim_y)

    @property
    def identity(self) -> float:
        return 1.0

    def compose(self, g1, g2) -> float:
        return 1.0

    def inverse(self, g) -> float:
        return 1.0

    def act(self, g, y):
        return y

    def j(self, g, y) -> float:
        return 1.0

    def delta(self, g) -> float:
        return 1.0

    def haar_log_density(self, g) -> float:
        # Haar measure is the point mass at e; there is no Lebesgue density.
        return 0.0

    def orbit_index(self, y) -> int:
        raise NotImplementedError("orbits of the trivial group are singletons")


def j_eval(action: GroupAction, g, y) -> float:
    """Evaluate the multiplier j(g, y), rejecting non-finite results."""
    value = float(action.j(g, y))
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"multiplier j(g, y) must be finite and positive, got {value!r}")
    return value


def check_relative_invariance(
    action: GroupAction,
    h: Callable[[np.ndarray], np.ndarray],
    g,
    spec: QuadratureSpec,
) -> float:
    """Residual of the change-of-variables identity for the multiplier.

    Computes | int h(g*y) j(g, y) dy - int h(y) dy | over the truncation
    window by the refining trapezoid rule.  Only scalar augmentation spaces
    are supported; the check is meant as a cheap certificate, not a general
    integrator.  ``h`` must be vectorized and effectively supported inside
    the window under both parametrizations.
    """
    if action.dim_y != 1:
        raise ValueError("relative-invariance check requires dim_y == 1")

    def transformed(y: np.ndarray) -> np.ndarray:
        yv = np.asarray(y, dtype=float)
        jv = np.array([j_eval(action, g, t) for t in np.atleast_1d(yv)])
        hv = np.asarray(h(np.array([action.act(g, t) for t in np.atleast_1d(yv)])))
        return (hv * jv).reshape(np.shape(y))

    lhs = adaptive_trapezoid(transformed, spec)
    rhs = adaptive_trapezoid(lambda y: np.asarray(h(y), dtype=float), spec)
    return abs(lhs - rhs)


def check_left_invariance(
    action: GroupAction,
    h: Callable[[np.ndarray], np.ndarray],
    g_left,
    spec: QuadratureSpec,
) -> float:
    """Residual of left invariance of the group's invariant measure.

    Computes | int h(g_left * g) nu(dg) - int h(g) nu(dg) | where nu has the
    density ``exp(haar_log_density)`` w.r.t. Lebesgue on the group coordinate,
    integrated over the window of ``spec`` (which must sit inside the group's
    coordinate range).
    """

    def weighted(f):
        def integrand(g: np.ndarray) -> np.ndarray:
            gv = np.atleast_1d(np.asarray(g, dtype=float))
            w = np.exp([action.haar_log_density(t) for t in gv])
            return (np.asarray(f(gv), dtype=float) * w).reshape(np.shape(g))

        return integrand

    lhs = adaptive_trapezoid(
        weighted(lambda gv: np.asarray(h(np.array([action.compose(g_left, t) for t in gv])))),
        spec,
    )
    rhs = adaptive_trapezoid(weighted(h), spec)
    return abs(lhs - rhs)
