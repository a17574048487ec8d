"""Constraint sets with closed-form linear minimization oracles.

Every ``lmo(v)`` returns a vertex maximizing ``<w, -v>``. Ties are resolved
deterministically: a zero direction component selects the upper (positive)
side, and the l1 ball picks the lowest index among equal magnitudes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import as_vector


def _descent_sign(v: np.ndarray) -> np.ndarray:
    # sign(-v) with sign(0) := +1
    return np.where(v > 0, -1.0, 1.0)


class ConstraintSet:
    """Base class. Subclasses define ``d``, ``lmo``, ``contains``, ``diameter``."""

    d: int

    def lmo(self, v) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-12) -> bool:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def vertices(self) -> np.ndarray:
        """All extreme points as rows. Exponential in ``d`` for boxes and cubes."""
        raise NotImplementedError

    def sample(self, rng) -> np.ndarray:
        """A random feasible point (not uniform)."""
        raise NotImplementedError

    def _direction(self, v) -> np.ndarray:
        return as_vector(v, self.d, "v")


class LinfBall(ConstraintSet):
    """``{x : ||x - center||_inf <= radius}``"""

    def __init__(self, radius: float, d: int, center=None):
        if not radius > 0:
            raise ValueError("radius must be positive")
        if d < 1:
            raise ValueError("d must be positive")
        self.radius = float(radius)
        self.d = int(d)
        self.center = np.zeros(d) if center is None else as_vector(center, d, "center")

    def lmo(self, v):
        v = self._direction(v)
        return self.center + self.radius * _descent_sign(v)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.max(np.abs(x - self.center)) <= self.radius + tol)

    def diameter(self):
        return 2.0 * self.radius * math.sqrt(self.d)

    def vertices(self):
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.d)))
        return self.center + self.radius * signs

    def sample(self, rng):
        return self.center + self.radius * rng.gen.uniform(-1.0, 1.0, self.d)

    def __repr__(self):
        return f"LinfBall(radius={self.radius}, d={self.d})"


class L1Ball(ConstraintSet):
    """``{x : ||x - center||_1 <= radius}``"""

    def __init__(self, radius: float, d: int, center=None):
        if not radius > 0:
            raise ValueError("radius must be positive")
        if d < 1:
            raise ValueError("d must be positive")
        self.radius = float(radius)
        self.d = int(d)
        self.center = np.zeros(d) if center is None else as_vector(center, d, "center")

    def lmo(self, v):
        v = self._direction(v)
        k = int(np.argmax(np.abs(v)))  # first maximizer on ties
        w = self.center.copy()
        w[k] += self.radius * (-1.0 if v[k] > 0 else 1.0)
        return w

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.sum(np.abs(x - self.center)) <= self.radius + tol)

    def diameter(self):
        return 2.0 * self.radius

    def vertices(self):
        eye = np.eye(self.d) * self.radius
        return self.center + np.concatenate([eye, -eye])

    def sample(self, rng):
        # a random point on a random ray, scaled inside the ball
        direction = rng.gen.standard_normal(self.d)
        direction /= np.sum(np.abs(direction))
        return self.center + self.radius * rng.gen.uniform() * direction

    def __repr__(self):
        return f"L1Ball(radius={self.radius}, d={self.d})"


class Box(ConstraintSet):
    """``{x : lower <= x <= upper}`` componentwise."""

    def __init__(self, lower, upper):
        self.lower = as_vector(lower, name="lower")
        self.upper = as_vector(upper, self.lower.shape[0], "upper")
        if np.any(self.upper <= self.lower):
            raise ValueError("need lower < upper in every coordinate")
        self.d = self.lower.shape[0]

    @classmethod
    def cube(cls, halfwidth: float, d: int) -> Box:
        return cls(np.full(d, -float(halfwidth)), np.full(d, float(halfwidth)))

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def lmo(self, v):
        v = self._direction(v)
        return np.where(v > 0, self.lower, self.upper)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def vertices(self):
        picks = np.array(list(itertools.product((0, 1), repeat=self.d)), dtype=bool)
        return np.where(picks, self.upper, self.lower)

    def sample(self, rng):
        return rng.gen.uniform(self.lower, self.upper)

    def __repr__(self):
        return f"Box(d={self.d})"


def lmo(s: ConstraintSet, v) -> np.ndarray:
    """``argmax_{w in s} <w, -v>``."""
    return s.lmo(v)


def contains(s: ConstraintSet, x, tol: float = 1e-12) -> bool:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return s.contains(x, tol)


def diameter(s: ConstraintSet) -> float:
    return s.diameter()
