"""Simulation workbench for trading-auction consensus.

A group of agents repeatedly bids on a shared board of offers and payments
until their profits for the surviving options agree to within a tolerance;
the package provides the exact-arithmetic engine, accelerated backends,
baseline mechanisms, scenario generators, evaluation metrics, and a CLI for
batch experiments.
"""

from .agent import AgentPrivate, best_response, profit_row
from .baselines import (
    ChoiceProblem,
    egalitarian,
    random_dictator,
    utilitarian,
    voting,
)
from .board import (
    CycleRecord,
    ExactAmount,
    PublicBoard,
    StateKey,
    apply_selection,
    exact,
    new_board,
    record_and_detect,
    reduce_trading_unit,
)
from .engine import (
    TacoConfig,
    TacoOutcome,
    TraceStep,
    check_termination,
    run_interrupted,
    run_taco,
    settle,
)
from .errors import (
    HistoryLimitError,
    MetricUndefinedError,
    NoTerminationError,
    ResourceLimitError,
    TacoError,
)
from .experiments import (
    ExperimentConfig,
    RunResult,
    bound_report,
    run_example,
    run_interrupt,
    run_montecarlo,
    run_scalability,
    run_sweep_gamma,
)
from .metrics import (
    TerminationBound,
    TrialResult,
    baseline_trial_result,
    cycle_spread_ratio,
    effective_costs,
    gini,
    optimality_gap,
    taco_trial_result,
    termination_bound,
)
from .scenario import (
    WaypointScenario,
    enumerate_options,
    example2_fixture,
    pava,
    random_problem,
    random_waypoint_problem,
    solve_ordering,
)
from ._fastpath import BACKENDS, ENV_VAR, NUMBA_AVAILABLE, resolve_backend

__version__ = "0.1.0"

__all__ = [
    "AgentPrivate",
    "BACKENDS",
    "ChoiceProblem",
    "CycleRecord",
    "ENV_VAR",
    "ExactAmount",
    "ExperimentConfig",
    "HistoryLimitError",
    "NUMBA_AVAILABLE",
    "MetricUndefinedError",
    "NoTerminationError",
    "PublicBoard",
    "ResourceLimitError",
    "RunResult",
    "StateKey",
    "TacoConfig",
    "TacoError",
    "TacoOutcome",
    "TerminationBound",
    "TraceStep",
    "TrialResult",
    "WaypointScenario",
    "apply_selection",
    "baseline_trial_result",
    "best_response",
    "bound_report",
    "check_termination",
    "cycle_spread_ratio",
    "effective_costs",
    "egalitarian",
    "enumerate_options",
    "exact",
    "example2_fixture",
    "gini",
    "new_board",
    "optimality_gap",
    "pava",
    "profit_row",
    "random_dictator",
    "random_problem",
    "random_waypoint_problem",
    "record_and_detect",
    "reduce_trading_unit",
    "resolve_backend",
    "run_example",
    "run_interrupt",
    "run_interrupted",
    "run_montecarlo",
    "run_scalability",
    "run_sweep_gamma",
    "run_taco",
    "settle",
    "solve_ordering",
    "taco_trial_result",
    "termination_bound",
    "utilitarian",
    "voting",
]
