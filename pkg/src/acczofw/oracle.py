"""Black-box objectives with exact function-query accounting.

A problem is a finite sum ``f(x) = (1/n) sum_i f_i(x)``. Solvers only see it
through :meth:`BlackBoxProblem.evaluate_batch`, which charges one query per
``(i, x)`` pair to :attr:`BlackBoxProblem.counter`. Diagnostics (training
loss, gap monitoring) are charged to a separate ``diag_counter``.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from os import PathLike
from typing import Callable

import numpy as np

from .core import as_vector

BatchEvaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemMetadata:
    d: int
    n: int
    L: float | None = None
    diameter_hint: float | None = None
    delta_hint: float | None = None
    sigma1_hint: float | None = None
    sigma2_hint: float | None = None

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be positive")
        if self.L is not None and not self.L > 0:
            raise ValueError("L must be positive when given")


class QueryCounter:
    """Monotone count of component-function evaluations."""

    def __init__(self):
        self._total = 0
        self._lock = threading.Lock()

    @property
    def total(self) -> int:
        return self._total

    def add(self, k: int) -> None:
        if k < 0:
            raise ValueError("query counts only increase")
        with self._lock:
            self._total += int(k)

    def __repr__(self):
        return f"QueryCounter(total={self._total})"


class BlackBoxProblem:
    """Finite-sum objective accessed only through function values.

    Parameters
    ----------
    metadata : ProblemMetadata
    batch_evaluator : callable
        ``batch_evaluator(indices, points)`` returns ``f_{indices[k]}(points[k])``
        for every row ``k``. Must be deterministic.
    true_gradient : callable, optional
        Analytic gradient of the mean objective. Used by diagnostics and
        tests only; it never touches a counter.
    """

    def __init__(
        self,
        metadata: ProblemMetadata,
        batch_evaluator: BatchEvaluator,
        true_gradient: Callable[[np.ndarray], np.ndarray] | None = None,
        name: str = "problem",
    ):
        self.metadata = metadata
        self._batch = batch_evaluator
        self.true_gradient = true_gradient
        self.name = name
        self.counter = QueryCounter()
        self.diag_counter = QueryCounter()
        self._sink: QueryCounter | None = None

    @property
    def d(self) -> int:
        return self.metadata.d

    @property
    def n(self) -> int:
        return self.metadata.n

    def _check(self, indices: np.ndarray, points: np.ndarray) -> None:
        if points.ndim != 2 or points.shape[1] != self.d:
            raise ValueError(f"points must have shape (m, {self.d}), got {points.shape}")
        if indices.shape != (points.shape[0],):
            raise ValueError("need exactly one component index per point")
        if indices.size and (indices.min() < 0 or indices.max() >= self.n):
            raise IndexError(f"component index outside [0, {self.n})")

    def evaluate_batch(
        self, indices, points, counter: QueryCounter | None = None
    ) -> np.ndarray:
        """Evaluate ``f_{indices[k]}(points[k])`` for all ``k``; one query each."""
        indices = np.asarray(indices, dtype=np.intp)
        points = np.asarray(points, dtype=np.float64)
        self._check(indices, points)
        values = np.asarray(self._batch(indices, points), dtype=np.float64)
        if counter is None:
            counter = self.counter if self._sink is None else self._sink
        counter.add(indices.shape[0])
        return values

    @contextmanager
    def diagnostics(self):
        """Charge every evaluation inside the block to ``diag_counter``."""
        previous, self._sink = self._sink, self.diag_counter
        try:
            yield self
        finally:
            self._sink = previous

    def evaluate(self, i: int, x) -> float:
        x = as_vector(x, self.d)
        return float(self.evaluate_batch(np.array([i]), x[None, :])[0])

    def mean_loss(self, x) -> float:
        """Full objective ``(1/n) sum_i f_i(x)``, charged to ``diag_counter``."""
        x = as_vector(x, self.d)
        idx = np.arange(self.n)
        vals = self.evaluate_batch(idx, np.broadcast_to(x, (self.n, self.d)),
                                   counter=self.diag_counter)
        return float(np.mean(vals))

    def __repr__(self):
        return f"BlackBoxProblem({self.name!r}, d={self.d}, n={self.n})"


def evaluate(p: BlackBoxProblem, i: int, x) -> float:
    """Return ``f_i(x)`` and charge one query."""
    return p.evaluate(i, x)


def from_function(
    fn: Callable[[int, np.ndarray], float],
    d: int,
    n: int = 1,
    true_gradient: Callable[[np.ndarray], np.ndarray] | None = None,
    L: float | None = None,
    name: str = "function",
) -> BlackBoxProblem:
    """Wrap a scalar ``fn(i, x)`` as a problem. Convenient, not fast."""

    def batch(indices, points):
        return np.array([fn(int(i), p) for i, p in zip(indices, points)], dtype=np.float64)

    return BlackBoxProblem(ProblemMetadata(d=d, n=n, L=L), batch, true_gradient, name)


def quartic_test_problem(d: int, box_halfwidth: float = 1.0) -> BlackBoxProblem:
    """``f(x) = sum_k x_k**4`` with one component.

    ``L = 12 r**2`` bounds the Hessian ``diag(12 x**2)`` on ``||x||_inf <= r``.
    """
    if d < 1:
        raise ValueError("d must be positive")
    if box_halfwidth <= 0:
        raise ValueError("box_halfwidth must be positive")

    def batch(indices, points):
        return np.sum(points ** 4, axis=1)

    def grad(x):
        x = np.asarray(x, dtype=np.float64)
        return 4.0 * x ** 3

    meta = ProblemMetadata(d=d, n=1, L=12.0 * box_halfwidth ** 2,
                           diameter_hint=2.0 * box_halfwidth * np.sqrt(d))
    return BlackBoxProblem(meta, batch, grad, name=f"quartic-d{d}")


def least_squares_problem(features, targets) -> BlackBoxProblem:
    """``f_i(x) = 0.5 * (a_i @ x - y_i)**2``; a convex quadratic test objective."""
    A = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise ValueError("features must be (n, d) and targets (n,)")
    n, d = A.shape

    def batch(indices, points):
        r = np.einsum("ij,ij->i", A[indices], points) - y[indices]
        return 0.5 * r * r

    def grad(x):
        return A.T @ (A @ x - y) / n

    L = float(np.max(np.sum(A * A, axis=1)))
    return BlackBoxProblem(ProblemMetadata(d=d, n=n, L=L), batch, grad, "least-squares")


def correntropy_problem(features, labels, sigma: float = 10.0) -> BlackBoxProblem:
    """Robust correntropy-induced classification loss.

    ``f_i(x) = (sigma**2 / 2) * (1 - exp(-(l_i - a_i @ x)**2 / sigma**2))``

    Writing ``phi(r) = (sigma**2/2)(1 - exp(-r**2/sigma**2))`` we have
    ``phi''(r) = exp(-r**2/sigma**2) (1 - 2 r**2/sigma**2)``, whose absolute
    value peaks at 1 (``r = 0``; the negative extremum is ``-2 e**-1.5``).
    Hence every ``f_i`` is ``L``-smooth with ``L = max_i ||a_i||**2``,
    independently of ``sigma``.
    """
    A = np.asarray(features, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.float64)
    if A.ndim != 2 or lab.shape != (A.shape[0],):
        raise ValueError("features must be (n, d) and labels (n,)")
    if not np.all(np.isfinite(A)):
        raise ValueError("features contain non-finite values")
    if not np.all(np.isin(lab, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    n, d = A.shape
    s2 = float(sigma) ** 2
    half_s2 = 0.5 * s2

    def batch(indices, points):
        r = lab[indices] - np.einsum("ij,ij->i", A[indices], points)
        return half_s2 * -np.expm1(-(r * r) / s2)

    def grad(x):
        r = lab - A @ x
        return -(A.T @ (np.exp(-(r * r) / s2) * r)) / n

    L = float(np.max(np.sum(A * A, axis=1)))
    meta = ProblemMetadata(d=d, n=n, L=L, delta_hint=half_s2)
    return BlackBoxProblem(meta, batch, grad, name=f"correntropy-sigma{sigma:g}")


class LinearSoftmaxModel:
    """``p(. | a) = softmax(W a + bias)`` with ``W`` of shape ``(K, d)``."""

    def __init__(self, weights, bias=None):
        W = np.asarray(weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] < 2:
            raise ValueError("weights must be (K, d) with K >= 2")
        self.weights = W
        self.bias = np.zeros(W.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64)
        if self.bias.shape != (W.shape[0],):
            raise ValueError("bias must have one entry per class")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def probabilities(self, inputs) -> np.ndarray:
        logits = np.atleast_2d(inputs) @ self.weights.T + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, inputs) -> np.ndarray:
        return np.argmax(self.probabilities(inputs), axis=1)

    @classmethod
    def load(cls, path: str | PathLike) -> LinearSoftmaxModel:
        """Read ``K d`` then ``K`` rows of ``d`` weights followed by a bias."""
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}: first line must be 'K d'")
            K, d = int(header[0]), int(header[1])
            rows = [line.split() for line in fh if line.strip()]
        if len(rows) != K or any(len(r) != d + 1 for r in rows):
            raise ValueError(f"{path}: expected {K} rows of {d + 1} values")
        M = np.array(rows, dtype=np.float64)
        return cls(M[:, :d], M[:, d])

    def save(self, path: str | PathLike) -> None:
        K, d = self.weights.shape
        with open(path, "w") as fh:
            fh.write(f"{K} {d}\n")
            for w, b in zip(self.weights, self.bias):
                fh.write(" ".join(f"{v:.17g}" for v in (*w, b)) + "\n")


def attack_problem(model: LinearSoftmaxModel, images, true_labels, epsilon: float):
    """Untargeted universal perturbation objective against ``model``.

    ``f_i(x)`` is the probability the model assigns to the true class of
    ``clip(a_i + x, 0, 1)``. With one image this is a single-image attack.

    Returns
    -------
    (BlackBoxProblem, LinfBall)
    """
    from .lmo import LinfBall

    imgs = np.atleast_2d(np.asarray(images, dtype=np.float64))
    y = np.asarray(true_labels, dtype=np.intp).reshape(-1)
    if imgs.shape[1] != model.d:
        raise ValueError(f"images have {imgs.shape[1]} pixels, model expects {model.d}")
    if y.shape[0] != imgs.shape[0]:
        raise ValueError("need one label per image")
    if np.any(imgs < 0) or np.any(imgs > 1):
        raise ValueError("image pixels must lie in [0, 1]")
    if np.any(y < 0) or np.any(y >= model.num_classes):
        raise ValueError("label outside the model's classes")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n, d = imgs.shape
    W, bias = model.weights, model.bias

    def batch(indices, points):
        z = np.clip(imgs[indices] + points, 0.0, 1.0)
        logits = z @ W.T + bias
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e[np.arange(len(indices)), y[indices]] / e.sum(axis=1)

    def grad(x):
        # derivative of the clip taken as 1 strictly inside (0, 1), else 0
        raw = imgs + x
        z = np.clip(raw, 0.0, 1.0)
        p = model.probabilities(z)
        pb = p[np.arange(n), y]
        dlogits = -pb[:, None] * p
        dlogits[np.arange(n), y] += pb
        g = (dlogits @ W) * ((raw > 0.0) & (raw < 1.0))
        return g.mean(axis=0)

    # ||Hessian of p_b wrt logits|| <= 1/2; the clip kinks are excluded
    L = 0.5 * float(np.linalg.norm(W, 2)) ** 2 or None
    meta = ProblemMetadata(d=d, n=n, L=L)
    kind = "sap" if n == 1 else "uap"
    return BlackBoxProblem(meta, batch, grad, name=f"attack-{kind}"), LinfBall(epsilon, d)
