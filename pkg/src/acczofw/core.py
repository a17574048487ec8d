"""Shared numeric helpers, seeded randomness and step-size schedules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np


class SeededRng:
    """Single-owner random stream.

    Wraps a :class:`numpy.random.Generator` built from a ``SeedSequence`` so
    that identical seeds give bit-identical streams and child streams can be
    split off without sharing state.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            if int(seed) < 0:
                raise ValueError("seed must be non-negative")
            self._seq = np.random.SeedSequence(int(seed))
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed(self):
        return self._seq.entropy

    def split(self, k: int = 1) -> list[SeededRng]:
        """Return ``k`` independent child streams."""
        return [SeededRng(child) for child in self._seq.spawn(k)]

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def choice(self, n: int, size: int, replace: bool):
        return self.gen.choice(n, size=size, replace=replace)

    def standard_normal(self, size=None):
        return self.gen.standard_normal(size)

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"


def as_vector(x, d: int | None = None, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array, optionally of length ``d``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if d is not None and arr.shape[0] != d:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


class Preset(str, enum.Enum):
    AccSZOFW_Theorem = "AccSZOFW_Theorem"
    AccSZOFWStar_Theorem = "AccSZOFWStar_Theorem"
    Experiment_UAP = "Experiment_UAP"
    Experiment_RobustClassification = "Experiment_RobustClassification"
    Experiment_SAP = "Experiment_SAP"


class StepParams(NamedTuple):
    alpha: float
    theta: float
    gamma: float
    eta: float
    rho: float


@dataclass(frozen=True)
class Schedule:
    """Step sizes, weights and batch sizes for one solver run.

    All sequences are evaluated by formula:

    * ``alpha(t) = 1/(t+1)``
    * ``theta(t) = 1/((t+1)(t+2))``
    * ``eta(t) = eta0 * (t+1)**(-eta_decay)`` (constant when ``eta_decay == 0``)
    * ``gamma(t) = gamma_multiplier * (1 + theta(t)) * eta(t)``
    * ``rho(t) = t**(-a)`` for ``t >= 1`` and ``rho(0) = 1``

    ``star_batch`` is the number of samples drawn per iteration by the
    STORM-type solver; ``rho_fixed`` pins ``rho`` to a constant.
    """

    T: int
    eta0: float
    mu: float
    beta: float
    q: int = 1
    b: int = 1
    b1: int = 1
    b2: int = 1
    a: float = 2.0 / 3.0
    gamma_multiplier: float = 1.0
    eta_decay: float = 0.0
    star_batch: int = 1
    rho_fixed: float | None = None
    name: str = "custom"

    def __post_init__(self):
        for field in ("T", "q", "b", "b1", "b2", "star_batch"):
            if int(getattr(self, field)) < 1:
                raise ValueError(f"{field} must be a positive integer")
        if not 0.0 < self.a <= 1.0:
            raise ValueError("a must lie in (0, 1]")
        if self.eta0 < 0 or self.mu <= 0 or self.beta <= 0:
            raise ValueError("eta0 must be >= 0 and mu, beta > 0")
        if self.gamma_multiplier <= 0:
            raise ValueError("gamma_multiplier must be positive")
        if self.eta_decay < 0:
            raise ValueError("eta_decay must be non-negative")
        if self.rho_fixed is not None and not 0.0 < self.rho_fixed <= 1.0:
            raise ValueError("rho_fixed must lie in (0, 1]")

    def alpha(self, t: int) -> float:
        return 1.0 / (t + 1)

    def theta(self, t: int) -> float:
        return 1.0 / ((t + 1) * (t + 2))

    def eta(self, t: int) -> float:
        if self.eta_decay == 0.0:
            return self.eta0
        return self.eta0 * (t + 1) ** (-self.eta_decay)

    def gamma(self, t: int) -> float:
        return self.gamma_multiplier * (1.0 + self.theta(t)) * self.eta(t)

    def rho(self, t: int) -> float:
        if self.rho_fixed is not None:
            return self.rho_fixed
        if t == 0:
            return 1.0
        return t ** (-self.a)

    def at(self, t: int) -> StepParams:
        return schedule_at(self, t)

    def validate(self) -> None:
        """Raise if some step size leaves (0, 1) on ``0 <= t < T``.

        ``eta`` and ``gamma`` are non-increasing in ``t`` so checking ``t = 0``
        suffices.
        """
        eta, gamma = self.eta(0), self.gamma(0)
        if not (0.0 < eta < 1.0 and 0.0 < gamma < 1.0):
            raise ValueError(
                f"schedule {self.name!r} with T={self.T} gives eta(0)={eta:.6g}, "
                f"gamma(0)={gamma:.6g}; both must lie in (0, 1)"
            )

    def with_(self, **changes) -> Schedule:
        return replace(self, **changes)


def schedule_at(s: Schedule, t: int) -> StepParams:
    """Evaluate every sequence of ``s`` at iteration ``t`` (``0 <= t < T``)."""
    if not 0 <= t < s.T:
        raise IndexError(f"iteration {t} outside [0, {s.T})")
    return StepParams(s.alpha(t), s.theta(t), s.gamma(t), s.eta(t), s.rho(t))


def make_schedule(
    preset: Preset | str,
    T: int,
    d: int,
    n: int,
    *,
    star: bool = False,
    estimator: str = "coo",
) -> Schedule:
    """Build one of the published parameter settings.

    Parameters
    ----------
    preset : Preset or str
        Which setting to reproduce.
    T, d, n : int
        Horizon, dimension and number of component functions.
    star : bool
        For the experiment presets, return the STORM-solver variant
        (``eta = T**(-2/3)``, ``gamma`` multiplier 6) instead of the
        SPIDER-solver one.
    estimator : {"coo", "uni"}
        Only affects the theorem preset's anchor batch: ``b1 = T`` for the
        coordinate estimator and ``ceil(T/d)`` for the sphere estimator.
    """
    preset = Preset(preset)
    if T < 1 or d < 1 or n < 1:
        raise ValueError("T, d and n must all be positive")
    if estimator not in ("coo", "uni"):
        raise ValueError("estimator must be 'coo' or 'uni'")

    half = T ** -0.5
    two_thirds = T ** (-2.0 / 3.0)
    if preset is Preset.AccSZOFW_Theorem:
        q = math.ceil(math.sqrt(n))
        b1 = T if estimator == "coo" else math.ceil(T / d)
        return Schedule(
            T=T, eta0=half, mu=d ** -0.5 * half, beta=half / d,
            q=q, b=q, b1=b1, b2=q, name=preset.value,
        )
    if preset is Preset.AccSZOFWStar_Theorem:
        return Schedule(
            T=T, eta0=two_thirds, mu=d ** -0.5 * two_thirds, beta=two_thirds / d,
            a=2.0 / 3.0, name=preset.value,
        )
    if preset is Preset.Experiment_SAP:
        return Schedule(
            T=T, eta0=half, mu=0.01, beta=0.01, gamma_multiplier=2.0,
            name=preset.value,
        )

    if preset is Preset.Experiment_UAP:
        b, b1 = 20, 300
    else:
        b, b1 = 100, 10000
    name = preset.value + ("/star" if star else "")
    if star:
        return Schedule(
            T=T, eta0=two_thirds, mu=d ** -0.5 * two_thirds, beta=two_thirds / d,
            q=b, b=b, b1=b1, b2=b, a=2.0 / 3.0, gamma_multiplier=6.0,
            star_batch=b, name=name,
        )
    return Schedule(
        T=T, eta0=half, mu=d ** -0.5 * half, beta=half / d,
        q=b, b=b, b1=b1, b2=b, star_batch=b, name=name,
    )
