"""Outcome metrics: optimality gap, Gini index, effective-cost accounting,
the analytic worst-case step bound, and the per-cycle profit-spread monitor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .baselines import ChoiceProblem, utilitarian
from .board import exact
from .engine import TacoOutcome
from .errors import MetricUndefinedError


def optimality_gap(costs, utilitarian_costs) -> float:
    """(total cost / total cost of the utilitarian option) - 1."""
    total = float(np.sum(costs))
    best = float(np.sum(utilitarian_costs))
    if not best > 0:
        raise MetricUndefinedError(
            f"optimality gap undefined: utilitarian total must be positive, got {best}"
        )
    return total / best - 1.0


def gini(costs) -> float:
    """Mean pairwise absolute difference normalized by twice the total.

    Defined for cost vectors with positive total; intended for nonnegative
    costs (settled costs can dip negative, in which case the usual [0, 1-1/n]
    range no longer applies).
    """
    c = np.asarray(costs, dtype=np.float64)
    total = float(c.sum())
    if not total > 0:
        raise MetricUndefinedError(
            f"gini undefined: total cost must be positive, got {total}"
        )
    diff = float(np.abs(c[:, None] - c[None, :]).sum())
    return diff / (2.0 * c.shape[0] * total)


def effective_costs(problem: ChoiceProblem, outcome: TacoOutcome, mode: str = "settled") -> np.ndarray:
    """Per-agent cost of the consensus choice, before or after transfers.

    raw ignores the settlement; settled subtracts each agent's valuation-
    weighted net receipt (equal to minus its final profit for the consensus
    choice).
    """
    j = outcome.consensus_choice
    raw = problem.C[:, j].astype(np.float64).copy()
    if mode == "raw":
        return raw
    if mode == "settled":
        receipts = np.array([float(p) for p in outcome.settlements], dtype=np.float64)
        return raw - problem.b * receipts
    raise ValueError(f"mode must be 'raw' or 'settled', got {mode!r}")


@dataclass(frozen=True)
class TerminationBound:
    """Worst-case step budget: cycle_count full cycles, per-cycle step count
    and total reported as natural logs (the counts overflow any float for
    realistic n, m)."""

    cycle_count: int
    log_per_cycle: float
    log_total: float


def termination_bound(n: int, m: int, gamma, epsilon: float, d0, b_max: float) -> TerminationBound:
    """Analytic bound on reductions and steps until guaranteed termination.

    cycle_count is the number of trading-unit reductions after which the
    profit-spread bound falls below epsilon: the smallest r with
    (m+1) * d0 * gamma^r * (n-1) * b_max <= epsilon, computed in exact
    rational arithmetic. Each constant-d window can visit at most
    n * ((m+1)(n-1))^(n*m) states.
    """
    if n < 2:
        raise ValueError("the bound is defined for n >= 2 (no trading with one agent)")
    if m < 1:
        raise ValueError(f"need at least one choice, got m={m}")
    g = exact(gamma)
    if not (0 < g < 1):
        raise ValueError(f"gamma must lie in (0, 1), got {g}")
    d0 = exact(d0)
    if d0 <= 0:
        raise ValueError(f"d0 must be positive, got {d0}")
    if not (epsilon > 0 and b_max > 0):
        raise ValueError("epsilon and b_max must be positive")
    eps = Fraction(epsilon)
    basis = (m + 1) * d0 * (n - 1) * Fraction(b_max)
    count = 0
    level = basis
    while level > eps:
        level *= g
        count += 1
    log_per_cycle = math.log(n) + n * m * math.log((m + 1) * (n - 1))
    log_total = math.log(count) + log_per_cycle if count > 0 else -math.inf
    return TerminationBound(cycle_count=count, log_per_cycle=log_per_cycle, log_total=log_total)


def cycle_spread_ratio(outcome: TacoOutcome, valuations) -> float:
    """Worst observed-spread-to-bound ratio over all detected cycles.

    For each cycle and agent, the observed spread (profits over active
    choices at the agent's own turns) is divided by its analytic ceiling
    (p+1) * d * (n-1) * b_i with p active choices and the pre-reduction d.
    Sound runs never exceed 1. Returns 0.0 when no cycle was detected or
    every bound is vacuous (single agent).
    """
    b = np.asarray(valuations, dtype=np.float64)
    n = b.shape[0]
    worst = 0.0
    for cyc in outcome.cycle_records:
        active = sorted(cyc.active_choices)
        p = len(active)
        d = float(cyc.d_at_detection)
        for i, rows in enumerate(cyc.agent_turn_profits):
            vals = np.concatenate([row[active] for row in rows])
            spread = float(vals.max() - vals.min())
            bound = (p + 1) * d * (n - 1) * float(b[i])
            if bound == 0.0:
                if spread > 0.0:
                    return math.inf
                continue
            worst = max(worst, spread / bound)
    return worst


@dataclass
class TrialResult:
    """One mechanism's outcome on one instance, with both cost accountings.

    Metrics that are undefined for a trial (e.g. Gini of a nonpositive
    settled total) are NaN. Baselines trade nothing, so their settled fields
    equal the raw ones and the cycle fields are zero.
    """

    mechanism: str
    chosen_option: int
    raw_costs: np.ndarray
    settled_costs: np.ndarray
    steps: int
    rounds: int
    cycles_detected: int
    og_raw: float
    og_settled: float
    gini_raw: float
    gini_settled: float
    max_cycle_spread_ratio: float


def _nan_safe(metric, *args) -> float:
    try:
        return float(metric(*args))
    except MetricUndefinedError:
        return math.nan


def taco_trial_result(problem: ChoiceProblem, outcome: TacoOutcome) -> TrialResult:
    util_costs = problem.C[:, utilitarian(problem)]
    raw = effective_costs(problem, outcome, "raw")
    settled = effective_costs(problem, outcome, "settled")
    return TrialResult(
        mechanism="taco",
        chosen_option=outcome.consensus_choice,
        raw_costs=raw,
        settled_costs=settled,
        steps=outcome.steps,
        rounds=outcome.rounds,
        cycles_detected=outcome.cycles_detected,
        og_raw=_nan_safe(optimality_gap, raw, util_costs),
        og_settled=_nan_safe(optimality_gap, settled, util_costs),
        gini_raw=_nan_safe(gini, raw),
        gini_settled=_nan_safe(gini, settled),
        max_cycle_spread_ratio=cycle_spread_ratio(outcome, problem.b),
    )


def baseline_trial_result(problem: ChoiceProblem, mechanism: str, choice: int) -> TrialResult:
    util_costs = problem.C[:, utilitarian(problem)]
    raw = problem.C[:, choice].astype(np.float64).copy()
    og = _nan_safe(optimality_gap, raw, util_costs)
    gi = _nan_safe(gini, raw)
    return TrialResult(
        mechanism=mechanism,
        chosen_option=int(choice),
        raw_costs=raw,
        settled_costs=raw.copy(),
        steps=0,
        rounds=0,
        cycles_detected=0,
        og_raw=og,
        og_settled=og,
        gini_raw=gi,
        gini_settled=gi,
        max_cycle_spread_ratio=0.0,
    )
