"""Zeroth-order gradient estimators built from function queries only.

Coordinate estimator (central differences, ``2 d`` queries per component)::

    g = sum_k (f(x + mu e_k) - f(x - mu e_k)) / (2 mu) e_k

Sphere estimator (forward difference along a random unit direction ``u``,
2 queries per component)::

    g = d (f(x + beta u) - f(x)) / beta * u

In expectation over ``u`` the sphere estimator equals the gradient of the
ball-smoothed function ``f_beta(x) = E_{v ~ U(ball)} f(x + beta v)``.

Mini-batch versions average the per-component estimates in batch order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SeededRng, as_vector
from .oracle import BlackBoxProblem

# upper bound on rows handed to the evaluator in one call
_CHUNK_ROWS = 1 << 18


def sample_unit_sphere(d: int, rng: SeededRng, size: int | None = None) -> np.ndarray:
    """Uniform direction(s) on the unit sphere in ``R^d``.

    Normalizes standard normal draws. Returns shape ``(d,)`` or ``(size, d)``.
    """
    if d < 1:
        raise ValueError("d must be positive")
    shape = (d,) if size is None else (size, d)
    z = rng.standard_normal(shape)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    # an exactly-zero normal draw has probability zero; keep the output finite anyway
    norms = np.where(norms == 0.0, 1.0, norms)
    if size is None:
        u = z / norms
        if not u.any():
            u[0] = 1.0
        return u
    u = z / norms
    u[~u.any(axis=1), 0] = 1.0
    return u


def _as_batch(batch, n: int) -> np.ndarray:
    idx = np.asarray(batch, dtype=np.intp).reshape(-1)
    if idx.size == 0:
        raise ValueError("batch must be nonempty")
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"batch index outside [0, {n})")
    return idx


@dataclass(frozen=True)
class CooGeEstimator:
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    def queries(self, d: int, batch_size: int) -> int:
        return 2 * d * batch_size

    def per_component(self, p: BlackBoxProblem, batch, x) -> np.ndarray:
        """Estimates for each component in ``batch``, shape ``(b, d)``."""
        d = p.d
        idx = _as_batch(batch, p.n)
        x = as_vector(x, d)
        shifts = self.mu * np.eye(d)
        plus_minus = np.concatenate([x + shifts, x - shifts])  # (2d, d)
        out = np.empty((idx.size, d))
        per_chunk = max(1, _CHUNK_ROWS // (2 * d))
        for start in range(0, idx.size, per_chunk):
            sub = idx[start:start + per_chunk]
            points = np.tile(plus_minus, (sub.size, 1))
            vals = p.evaluate_batch(np.repeat(sub, 2 * d), points).reshape(sub.size, 2, d)
            out[start:start + sub.size] = (vals[:, 0] - vals[:, 1]) / (2.0 * self.mu)
        return out

    def estimate(self, p: BlackBoxProblem, batch, x) -> np.ndarray:
        return np.mean(self.per_component(p, batch, x), axis=0)

    def pair(self, p, batch, x_new, x_old, rng=None):
        """Batch estimates at two points with the same samples (``4 d b`` queries)."""
        return self.estimate(p, batch, x_new), self.estimate(p, batch, x_old)


@dataclass(frozen=True)
class UniGeEstimator:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def queries(self, d: int, batch_size: int) -> int:
        return 2 * batch_size

    def per_component(self, p: BlackBoxProblem, batch, x, directions) -> np.ndarray:
        idx = _as_batch(batch, p.n)
        x = as_vector(x, p.d)
        u = np.asarray(directions, dtype=np.float64).reshape(idx.size, p.d)
        points = np.concatenate([x + self.beta * u, np.broadcast_to(x, u.shape)])
        vals = p.evaluate_batch(np.concatenate([idx, idx]), points)
        scale = p.d * (vals[:idx.size] - vals[idx.size:]) / self.beta
        return scale[:, None] * u

    def estimate(self, p: BlackBoxProblem, batch, x, rng: SeededRng) -> np.ndarray:
        idx = _as_batch(batch, p.n)
        u = sample_unit_sphere(p.d, rng, size=idx.size)
        return np.mean(self.per_component(p, idx, x, u), axis=0)

    def pair(self, p, batch, x_new, x_old, rng: SeededRng):
        """Estimates at two points sharing one fresh direction per sample."""
        idx = _as_batch(batch, p.n)
        u = sample_unit_sphere(p.d, rng, size=idx.size)
        g_new = np.mean(self.per_component(p, idx, x_new, u), axis=0)
        g_old = np.mean(self.per_component(p, idx, x_old, u), axis=0)
        return g_new, g_old


def coo_gradient(est: CooGeEstimator, p: BlackBoxProblem, batch, x) -> np.ndarray:
    """Mini-batch coordinate estimate; costs ``2 d |batch|`` queries."""
    return est.estimate(p, batch, x)


def uni_gradient(
    est: UniGeEstimator, p: BlackBoxProblem, batch, x, rng: SeededRng
) -> np.ndarray:
    """Mini-batch sphere estimate; costs ``2 |batch|`` queries.

    One direction is drawn per batch entry, in batch order.
    """
    return est.estimate(p, batch, x, rng)
