"""Accelerated zeroth-order Frank-Wolfe methods with exact query accounting."""

from .core import Preset, Schedule, SeededRng, StepParams, make_schedule, schedule_at
from .estimators import (
    CooGeEstimator,
    UniGeEstimator,
    coo_gradient,
    sample_unit_sphere,
    uni_gradient,
)
from .lmo import Box, ConstraintSet, L1Ball, LinfBall
from .oracle import (
    BlackBoxProblem,
    LinearSoftmaxModel,
    ProblemMetadata,
    QueryCounter,
    attack_problem,
    correntropy_problem,
    evaluate,
    least_squares_problem,
    quartic_test_problem,
)
from .solvers import (
    GapMode,
    Mode,
    RunTrace,
    SolverConfig,
    SolverState,
    TraceRecord,
    Variant,
    fw_gap,
    momentum_step,
    run_acc_szofw,
    run_acc_szofw_star,
    run_acc_zo_fw,
    run_plain_zofw_baseline,
    run_solver,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ConstraintSet",
    "L1Ball",
    "LinfBall",
    "BlackBoxProblem",
    "CooGeEstimator",
    "GapMode",
    "LinearSoftmaxModel",
    "Mode",
    "Preset",
    "ProblemMetadata",
    "QueryCounter",
    "RunTrace",
    "Schedule",
    "SeededRng",
    "SolverConfig",
    "SolverState",
    "StepParams",
    "TraceRecord",
    "UniGeEstimator",
    "Variant",
    "attack_problem",
    "coo_gradient",
    "correntropy_problem",
    "evaluate",
    "fw_gap",
    "least_squares_problem",
    "make_schedule",
    "momentum_step",
    "quartic_test_problem",
    "run_acc_szofw",
    "run_acc_szofw_star",
    "run_acc_zo_fw",
    "run_plain_zofw_baseline",
    "run_solver",
    "sample_unit_sphere",
    "schedule_at",
    "uni_gradient",
]
