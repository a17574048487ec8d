"""Accelerated zeroth-order Frank-Wolfe solvers.

All accelerated variants share the three-sequence momentum update::

    w_t     = lmo(v_t)
    x_{t+1} = x_t + gamma_t (w_t - x_t)
    y_{t+1} = z_t + eta_t   (w_t - z_t)
    z_{t+1} = (1 - alpha_{t+1}) y_{t+1} + alpha_{t+1} x_{t+1}

and differ only in how the gradient surrogate ``v_t`` is formed:

* ``AccZOFW``: full-batch coordinate estimate at every iteration.
* ``AccSZOFW_*``: SPIDER recursion. Every ``q`` iterations an anchor estimate
  (full batch in the finite-sum mode, ``b1`` samples in the stochastic mode);
  otherwise ``v_t = v_{t-1} + mean_j [g_j(z_t) - g_j(z_{t-1})]`` over ``b``
  (finite-sum) or ``b2`` (stochastic) samples.
* ``AccSZOFWStar_*``: STORM recursion
  ``v_t = g_xi(z_t) + (1 - rho_t) (v_{t-1} - g_xi(z_{t-1}))``.

``PlainZOFW_baseline`` is classic Frank-Wolfe on a fresh mini-batch estimate
with no momentum and no variance reduction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import Schedule, SeededRng, as_vector
from .estimators import CooGeEstimator, UniGeEstimator
from .lmo import ConstraintSet
from .oracle import BlackBoxProblem

FEAS_TOL = 1e-9


class Variant(str, enum.Enum):
    AccZOFW = "AccZOFW"
    AccSZOFW_CooGE = "AccSZOFW_CooGE"
    AccSZOFW_UniGE = "AccSZOFW_UniGE"
    AccSZOFWStar_CooGE = "AccSZOFWStar_CooGE"
    AccSZOFWStar_UniGE = "AccSZOFWStar_UniGE"
    PlainZOFW_baseline = "PlainZOFW_baseline"

    @property
    def uses_uni(self) -> bool:
        return self.value.endswith("UniGE")


class Mode(str, enum.Enum):
    FiniteSum = "FiniteSum"
    Stochastic = "Stochastic"


class GapMode(str, enum.Enum):
    TrueGradient = "TrueGradient"
    CooGEFull = "CooGEFull"


@dataclass(frozen=True)
class SolverConfig:
    """What to run and how to monitor it.

    ``eval_every`` sets the trace cadence; the last iteration is always
    recorded. ``gap_mode=None`` skips the gap diagnostic and
    ``record_loss=False`` skips the loss diagnostic. ``query_budget`` stops
    the run after the first iteration whose cumulative optimization queries
    reach the budget. ``baseline_estimator`` ("uni" or "coo") and
    ``baseline_step`` (fixed step overriding ``eta(t)``) only affect the
    baseline.
    """

    variant: Variant
    schedule: Schedule
    mode: Mode = Mode.Stochastic
    eval_every: int = 1
    gap_mode: GapMode | None = None
    record_loss: bool = True
    query_budget: int | None = None
    baseline_estimator: str = "uni"
    baseline_step: float | None = None
    gap_mu: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.gap_mode is not None:
            object.__setattr__(self, "gap_mode", GapMode(self.gap_mode))
        v, m = self.variant, self.mode
        if v is Variant.AccZOFW and m is not Mode.FiniteSum:
            raise ValueError("AccZOFW is the deterministic finite-sum method")
        if v is Variant.AccSZOFW_UniGE and m is Mode.FiniteSum:
            raise ValueError("the finite-sum SPIDER branch uses the coordinate estimator only")
        if v in (Variant.AccSZOFWStar_CooGE, Variant.AccSZOFWStar_UniGE) and m is not Mode.Stochastic:
            raise ValueError("the STORM solver is stochastic only")
        if self.eval_every < 1:
            raise ValueError("eval_every must be positive")
        if self.query_budget is not None and self.query_budget < 1:
            raise ValueError("query_budget must be positive")
        if self.baseline_estimator not in ("uni", "coo"):
            raise ValueError("baseline_estimator must be 'uni' or 'coo'")
        if self.baseline_step is not None and not 0.0 <= self.baseline_step <= 1.0:
            raise ValueError("baseline_step must lie in [0, 1]")

    @property
    def label(self) -> str:
        if self.variant is Variant.PlainZOFW_baseline:
            return f"PlainZOFW_{'UniGE' if self.baseline_estimator == 'uni' else 'CooGE'}"
        return self.variant.value

    def with_(self, **changes) -> SolverConfig:
        return replace(self, **changes)


@dataclass
class SolverState:
    t: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    v: np.ndarray | None
    z_prev: np.ndarray | None
    rng: SeededRng
    queries_at_start: int = 0


@dataclass(frozen=True)
class TraceRecord:
    t: int
    loss: float | None
    gap: float | None
    queries: int
    diag_queries: int
    dist_z_step: float
    dist_xz: float


@dataclass
class RunTrace:
    records: list[TraceRecord] = field(default_factory=list)
    solver: str = ""
    seed: object = None
    final_x: np.ndarray | None = None
    final_z: np.ndarray | None = None
    final_loss: float | None = None
    total_queries: int = 0
    total_diag_queries: int = 0

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def frank_wolfe_gap(cset: ConstraintSet, x, g) -> float:
    """``max_{w in X} <w - x, -g>``, attained at ``w = lmo(g)``."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    return float(np.dot(cset.lmo(g) - x, -g))


def fw_gap(
    p: BlackBoxProblem,
    cset: ConstraintSet,
    x,
    mode: GapMode | str = GapMode.TrueGradient,
    mu: float = 1e-5,
) -> float:
    """Frank-Wolfe gap at ``x``.

    ``TrueGradient`` uses the analytic gradient and no queries; ``CooGEFull``
    spends ``2 d n`` queries on a full-batch coordinate estimate.
    """
    mode = GapMode(mode)
    x = as_vector(x, p.d)
    if mode is GapMode.TrueGradient:
        if p.true_gradient is None:
            raise ValueError(f"{p.name} has no analytic gradient")
        g = p.true_gradient(x)
    else:
        g = CooGeEstimator(mu).estimate(p, np.arange(p.n), x)
    return frank_wolfe_gap(cset, x, g)


def momentum_step(
    state: SolverState,
    w,
    alpha: float,
    gamma: float,
    eta: float,
    cset: ConstraintSet | None = None,
) -> SolverState:
    """One update of the ``(x, y, z)`` triple toward the vertex ``w``.

    ``alpha`` is the weight for the *new* iterate (``alpha_{t+1}``).
    """
    if cset is not None and not cset.contains(w, FEAS_TOL):
        raise ValueError("momentum_step received an infeasible vertex")
    x = state.x + gamma * (w - state.x)
    y = state.z + eta * (w - state.z)
    z = (1.0 - alpha) * y + alpha * x
    return replace(state, t=state.t + 1, x=x, y=y, z=z, z_prev=state.z)


def spider_update(g_new, g_old, v_prev) -> np.ndarray:
    return (g_new - g_old) + v_prev


def storm_update(g_new, g_old, v_prev, rho: float) -> np.ndarray:
    return g_new + (1.0 - rho) * (v_prev - g_old)


def sample_batch(rng: SeededRng, n: int, size: int, mode: Mode) -> np.ndarray:
    """Without replacement in the finite-sum mode when ``size <= n``, else with."""
    if mode is Mode.FiniteSum and size <= n:
        return rng.choice(n, size, replace=False)
    return rng.integers(0, n, size)


def _estimator(cfg: SolverConfig):
    s = cfg.schedule
    if cfg.variant is Variant.PlainZOFW_baseline:
        uni = cfg.baseline_estimator == "uni"
    else:
        uni = cfg.variant.uses_uni
    return UniGeEstimator(s.beta) if uni else CooGeEstimator(s.mu)


def _estimate(est, p, batch, x, rng):
    if isinstance(est, UniGeEstimator):
        return est.estimate(p, batch, x, rng)
    return est.estimate(p, batch, x)


def iteration_cost(cfg: SolverConfig, d: int, n: int, t: int) -> int:
    """Optimization queries spent by iteration ``t``."""
    s = cfg.schedule
    per = 2 if isinstance(_estimator(cfg), UniGeEstimator) else 2 * d
    v = cfg.variant
    if v is Variant.AccZOFW:
        return per * n
    if v is Variant.PlainZOFW_baseline:
        return per * s.b
    if v in (Variant.AccSZOFWStar_CooGE, Variant.AccSZOFWStar_UniGE):
        return per * s.star_batch * (1 if t == 0 else 2)
    if t % s.q == 0:
        return per * (n if cfg.mode is Mode.FiniteSum else s.b1)
    return 2 * per * (s.b if cfg.mode is Mode.FiniteSum else s.b2)


def iterations_for_budget(cfg: SolverConfig, d: int, n: int, budget: int) -> int:
    """Smallest ``T`` whose cumulative cost reaches ``budget``."""
    total, t = 0, 0
    while total < budget:
        total += iteration_cost(cfg, d, n, t)
        t += 1
    return max(t, 1)


StepCallback = Callable[[SolverState, np.ndarray, SolverState], None]


def _drive(
    p: BlackBoxProblem,
    cset: ConstraintSet,
    cfg: SolverConfig,
    start,
    rng: SeededRng | int,
    surrogate: Callable[[SolverState], np.ndarray],
    plain: bool,
    callback: StepCallback | None,
) -> RunTrace:
    sched = cfg.schedule
    if not plain:
        sched.validate()
    x0 = as_vector(start, p.d, "start")
    if not cset.contains(x0, FEAS_TOL):
        raise ValueError("start point is infeasible")
    if cset.d != p.d:
        raise ValueError("constraint set and problem dimensions differ")
    rng = rng if isinstance(rng, SeededRng) else SeededRng(rng)

    q0, dq0 = p.counter.total, p.diag_counter.total
    state = SolverState(0, x0.copy(), x0.copy(), x0.copy(), None, None, rng, q0)
    trace = RunTrace(solver=cfg.label, seed=rng.seed)

    for t in range(sched.T):
        state.v = surrogate(state)
        spent = p.counter.total - q0
        last = t == sched.T - 1 or (cfg.query_budget is not None and spent >= cfg.query_budget)
        record = last or t % cfg.eval_every == 0
        loss = gap = None
        if record:
            loss, gap = _diagnostics(p, cset, cfg, state.z)

        w = cset.lmo(state.v)
        if plain:
            step = sched.eta(t) if cfg.baseline_step is None else cfg.baseline_step
            x = (1.0 - step) * state.x + step * w
            new = replace(state, t=t + 1, x=x, y=x, z=x, z_prev=state.z)
        else:
            new = momentum_step(state, w, sched.alpha(t + 1), sched.gamma(t), sched.eta(t))
        if callback is not None:
            callback(state, w, new)
        if record:
            trace.records.append(TraceRecord(
                t=t, loss=loss, gap=gap, queries=spent,
                diag_queries=p.diag_counter.total - dq0,
                dist_z_step=float(np.linalg.norm(new.z - state.z)),
                dist_xz=float(np.linalg.norm(new.x - new.z)),
            ))
        state = new
        if last:
            break

    trace.final_x, trace.final_z = state.x, state.z
    if cfg.record_loss:
        trace.final_loss = p.mean_loss(state.z)
    trace.total_queries = p.counter.total - q0
    trace.total_diag_queries = p.diag_counter.total - dq0
    return trace


def _diagnostics(p, cset, cfg, z):
    loss = p.mean_loss(z) if cfg.record_loss else None
    gap = None
    if cfg.gap_mode is GapMode.TrueGradient:
        gap = fw_gap(p, cset, z, GapMode.TrueGradient)
    elif cfg.gap_mode is GapMode.CooGEFull:
        with p.diagnostics():
            gap = fw_gap(p, cset, z, GapMode.CooGEFull, mu=cfg.gap_mu)
    return loss, gap


def _require(cfg: SolverConfig, *allowed: Variant):
    if cfg.variant not in allowed:
        raise ValueError(f"{cfg.variant.value} is not handled by this solver")


def run_acc_zo_fw(p, cset, cfg, start, rng=0, callback=None) -> RunTrace:
    """Deterministic accelerated method: full coordinate estimate at ``z_t``."""
    _require(cfg, Variant.AccZOFW)
    est = CooGeEstimator(cfg.schedule.mu)
    everyone = np.arange(p.n)
    return _drive(p, cset, cfg, start, rng,
                  lambda st: est.estimate(p, everyone, st.z), False, callback)


def run_acc_szofw(p, cset, cfg, start, rng=0, callback=None) -> RunTrace:
    """SPIDER-type accelerated method (finite-sum or stochastic)."""
    _require(cfg, Variant.AccSZOFW_CooGE, Variant.AccSZOFW_UniGE)
    s, mode = cfg.schedule, cfg.mode
    est = _estimator(cfg)
    everyone = np.arange(p.n)

    def surrogate(st: SolverState) -> np.ndarray:
        if st.t % s.q == 0:
            if mode is Mode.FiniteSum:
                return est.estimate(p, everyone, st.z)
            return _estimate(est, p, sample_batch(st.rng, p.n, s.b1, mode), st.z, st.rng)
        size = s.b if mode is Mode.FiniteSum else s.b2
        batch = sample_batch(st.rng, p.n, size, mode)
        g_new, g_old = est.pair(p, batch, st.z, st.z_prev, st.rng)
        return spider_update(g_new, g_old, st.v)

    return _drive(p, cset, cfg, start, rng, surrogate, False, callback)


def run_acc_szofw_star(p, cset, cfg, start, rng=0, callback=None) -> RunTrace:
    """STORM-type accelerated method with ``schedule.star_batch`` samples per step."""
    _require(cfg, Variant.AccSZOFWStar_CooGE, Variant.AccSZOFWStar_UniGE)
    s = cfg.schedule
    est = _estimator(cfg)

    def surrogate(st: SolverState) -> np.ndarray:
        batch = sample_batch(st.rng, p.n, s.star_batch, Mode.Stochastic)
        if st.t == 0:
            return _estimate(est, p, batch, st.z, st.rng)
        g_new, g_old = est.pair(p, batch, st.z, st.z_prev, st.rng)
        return storm_update(g_new, g_old, st.v, s.rho(st.t))

    return _drive(p, cset, cfg, start, rng, surrogate, False, callback)


def run_plain_zofw_baseline(p, cset, cfg, start, rng=0, callback=None) -> RunTrace:
    """Classic Frank-Wolfe on a fresh ``b``-sample estimate at ``x_t``.

    Steps with ``eta(t)`` unless ``cfg.baseline_step`` fixes it.
    """
    _require(cfg, Variant.PlainZOFW_baseline)
    s = cfg.schedule
    est = _estimator(cfg)

    def surrogate(st: SolverState) -> np.ndarray:
        batch = sample_batch(st.rng, p.n, s.b, cfg.mode)
        return _estimate(est, p, batch, st.x, st.rng)

    return _drive(p, cset, cfg, start, rng, surrogate, True, callback)


_RUNNERS = {
    Variant.AccZOFW: run_acc_zo_fw,
    Variant.AccSZOFW_CooGE: run_acc_szofw,
    Variant.AccSZOFW_UniGE: run_acc_szofw,
    Variant.AccSZOFWStar_CooGE: run_acc_szofw_star,
    Variant.AccSZOFWStar_UniGE: run_acc_szofw_star,
    Variant.PlainZOFW_baseline: run_plain_zofw_baseline,
}


def run_solver(p, cset, cfg: SolverConfig, start, rng=0, callback=None) -> RunTrace:
    """Dispatch on ``cfg.variant``."""
    return _RUNNERS[cfg.variant](p, cset, cfg, start, rng, callback)
