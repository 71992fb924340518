"""Auction orchestration: cyclic best-response turns, cycle detection,
trading-unit decay, epsilon-termination, consensus extraction, settlement.

Each turn the playing agent observes the board, selects its best response,
and the observed state (net matrix plus agent on turn) is checked against
the recorded history. A repeat observation is a cycle: the trading unit
shrinks, the history clears, and the termination test runs on the profits
agents saw at their own turns inside the cycle. On termination the final
turn's board update is never applied, so settlement reads the board the
detecting agent observed; otherwise that turn's update executes at the
reduced trading unit and play continues.

Three interchangeable backends produce the same runs. "exact" is the
reference: it advances the rational board one selection at a time through the
board-module operations. "numpy" and "numba" run whole constant-d windows
through the fast path (integer delta state, see _fastpath) and re-anchor the
exact board at each window boundary, so settlements and state keys stay exact
rationals on every backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _fastpath
from .agent import AgentPrivate, profit_row
from .board import (
    CycleRecord,
    PublicBoard,
    StateKey,
    apply_selection,
    exact,
    new_board,
    record_and_detect,
    reduce_trading_unit,
    span_counts,
)
from .errors import HistoryLimitError, NoTerminationError


@dataclass
class TacoConfig:
    """Run parameters: trading unit, decay factor, tolerance, safety caps.

    d0 and gamma must be exact rationals (or strings/ints coercible to one);
    epsilon is an absolute profit-spread tolerance. turn_order defaults to the
    identity permutation.
    """

    epsilon: float
    d0: int | str | Fraction = 1
    gamma: int | str | Fraction = Fraction(9, 10)
    max_steps: int = 10**6
    turn_order: tuple[int, ...] | None = None
    history_cap: int = 10**6

    def __post_init__(self) -> None:
        self.d0 = exact(self.d0)
        if self.d0 <= 0:
            raise ValueError(f"d0 must be positive, got {self.d0}")
        self.gamma = exact(self.gamma)
        if not (0 < self.gamma < 1):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        self.epsilon = float(self.epsilon)
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be a positive finite real, got {self.epsilon}")
        self.max_steps = int(self.max_steps)
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be at least 1, got {self.max_steps}")
        self.history_cap = int(self.history_cap)
        if self.history_cap < 2:
            raise ValueError(f"history_cap must be at least 2, got {self.history_cap}")
        if self.turn_order is not None:
            self.turn_order = tuple(int(i) for i in self.turn_order)


@dataclass
class TraceStep:
    """One executed turn: the profit row is the playing agent's, pre-update."""

    step: int
    agent: int
    selection: int
    profit_row: np.ndarray


@dataclass
class TacoOutcome:
    consensus_choice: int
    settlements: list[Fraction]
    steps: int
    rounds: int
    cycles_detected: int
    final_d: Fraction
    trace: list[TraceStep]
    terminated_naturally: bool
    cycle_records: list[CycleRecord]
    final_selections: list[int | None]
    final_board: PublicBoard


def run_taco(
    config: TacoConfig, agents: list[AgentPrivate], *, backend: str | None = None
) -> TacoOutcome:
    """Run the auction to natural termination (or raise NoTerminationError)."""
    return _run(config, agents, None, backend)


def run_interrupted(
    config: TacoConfig,
    agents: list[AgentPrivate],
    interrupt_step: int,
    *,
    backend: str | None = None,
) -> TacoOutcome:
    """Like run_taco, but stop after interrupt_step steps if still unresolved.

    An interrupted run takes consensus as the mode of the selections recorded
    so far and settles on the board as-is; terminated_naturally is False.
    """
    interrupt_step = int(interrupt_step)
    if interrupt_step < 1:
        raise ValueError(f"interrupt_step must be at least 1, got {interrupt_step}")
    return _run(config, agents, interrupt_step, backend)


def check_termination(cycle: CycleRecord, epsilon: float) -> bool:
    """True iff every agent's observed profit spread inside the cycle is < epsilon.

    The spread is over the cycle's active choices, pooled across the profit
    rows the agent saw at its own turns within the span.
    """
    if not (epsilon > 0):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    active = sorted(cycle.active_choices)
    for rows in cycle.agent_turn_profits:
        if not rows:
            raise ValueError("agent_turn_profits must be populated for every agent")
        lo = math.inf
        hi = -math.inf
        for row in rows:
            vals = row[active]
            lo = min(lo, float(vals.min()))
            hi = max(hi, float(vals.max()))
        if hi - lo >= epsilon:
            return False
    return True


def settle(board: PublicBoard, j_star: int) -> list[Fraction]:
    """Net receipt per agent for the consensus choice: offers minus pays, exact."""
    if not (0 <= j_star < board.m):
        raise ValueError(f"choice index {j_star} out of range for m={board.m}")
    return [board.offers[i][j_star] - board.pays[i][j_star] for i in range(board.n)]


def _prepare(config, agents):
    if not isinstance(config, TacoConfig):
        raise ValueError(f"config must be a TacoConfig, got {type(config).__name__}")
    n = len(agents)
    if n < 1:
        raise ValueError("need at least one agent")
    for pos, a in enumerate(agents):
        if a.index != pos:
            raise ValueError(
                f"agents must be listed in index order; agents[{pos}] has index {a.index}"
            )
    m = int(agents[0].cost_row.shape[0])
    if any(a.cost_row.shape[0] != m for a in agents):
        raise ValueError("all agents must share the same number of choices")
    if m < 1:
        raise ValueError("need at least one choice")
    C = np.stack([a.cost_row for a in agents]).astype(np.float64)
    b = np.array([a.valuation for a in agents], dtype=np.float64)
    if not (np.isfinite(C).all() and np.isfinite(b).all()):
        raise ValueError("costs and valuations must be finite")
    if config.turn_order is None:
        order = np.arange(n, dtype=np.int64)
    else:
        if sorted(config.turn_order) != list(range(n)):
            raise ValueError(
                f"turn_order must be a permutation of 0..{n - 1}, got {config.turn_order}"
            )
        order = np.array(config.turn_order, dtype=np.int64)
    return n, m, b, C, order


def _run(config, agents, interrupt_step, backend):
    resolved = _fastpath.resolve_backend(backend)
    if resolved == "exact":
        return _run_exact(config, agents, interrupt_step)
    return _run_windowed(config, agents, interrupt_step, resolved)


def _run_windowed(config, agents, interrupt_step, backend):
    n, m, b, C, order = _prepare(config, agents)
    board = new_board(n, m, config.d0)
    hard_cap = config.max_steps if interrupt_step is None else min(config.max_steps, interrupt_step)
    trace: list[TraceStep] = []
    selection_log: list[tuple[int, int]] = []
    cycles: list[CycleRecord] = []
    terminated = False
    while len(trace) < hard_cap:
        g0 = len(trace)
        win = _fastpath.run_window(
            backend,
            board.net_float(),
            float(board.d),
            b,
            C,
            order,
            g0 % n,
            hard_cap - g0,
            config.history_cap,
        )
        if win.status == "history_cap":
            raise HistoryLimitError(
                f"state-key history exceeded {config.history_cap} entries "
                f"near step {g0 + win.steps}"
            )
        for k in range(win.steps):
            a_k = int(win.players[k])
            c_k = int(win.choices[k])
            trace.append(TraceStep(g0 + k + 1, a_k, c_k, win.profit_rows[k]))
            selection_log.append((a_k, c_k))
            board.selections[a_k] = c_k
        if win.status != "detected":
            _advance_board(board, win.selcount, win.steps)
            break
        # The detection turn's update is pending; absorb the rest exactly.
        _advance_board(board, win.selcount, win.steps - 1)
        start = g0 + win.s0_rel + 1
        end = len(trace)
        counts, active = span_counts(selection_log, start, end, n, m)
        cyc = CycleRecord(
            start_step=start,
            end_step=end,
            active_choices=active,
            choice_counts=counts,
            agent_turn_profits=[[] for _ in range(n)],
            d_at_detection=board.d,
        )
        for ts in trace[start - 1 : end]:
            cyc.agent_turn_profits[ts.agent].append(ts.profit_row)
        _check_cycle_structure(cyc, n)
        cycles.append(cyc)
        reduce_trading_unit(board, config.gamma)
        if check_termination(cyc, config.epsilon):
            terminated = True
            break
        a_t, c_t = selection_log[-1]
        apply_selection(board, a_t, c_t)
    return _finish(config, board, trace, cycles, terminated, interrupt_step)


def _run_exact(config, agents, interrupt_step):
    n, m, b, C, order = _prepare(config, agents)
    board = new_board(n, m, config.d0)
    hard_cap = config.max_steps if interrupt_step is None else min(config.max_steps, interrupt_step)
    history: dict[StateKey, int] = {}
    trace: list[TraceStep] = []
    selection_log: list[tuple[int, int]] = []
    cycles: list[CycleRecord] = []
    terminated = False
    while len(trace) < hard_cap:
        i = int(order[len(trace) % n])
        prow = profit_row(agents[i], board)
        j = int(np.argmax(prow))
        trace.append(TraceStep(len(trace) + 1, i, j, prow))
        selection_log.append((i, j))
        board.selections[i] = j
        key = StateKey.from_board(board, i)
        cyc = record_and_detect(history, key, selection_log, config.history_cap)
        if cyc is None:
            apply_selection(board, i, j)
            continue
        cyc.d_at_detection = board.d
        for ts in trace[cyc.start_step - 1 : cyc.end_step]:
            cyc.agent_turn_profits[ts.agent].append(ts.profit_row)
        _check_cycle_structure(cyc, n)
        cycles.append(cyc)
        reduce_trading_unit(board, config.gamma)
        history.clear()
        if check_termination(cyc, config.epsilon):
            terminated = True
            break
        apply_selection(board, i, j)
    return _finish(config, board, trace, cycles, terminated, interrupt_step)


def _advance_board(board: PublicBoard, selcount: np.ndarray, steps: int) -> None:
    """Apply a window's worth of selections to the exact board in one pass.

    Equivalent to apply_selection per step: each selection of choice j adds d
    to the whole offer column and n*d to the selector's pay entry, so only the
    per-(agent, choice) counts matter, not the order.
    """
    d = board.d
    n = board.n
    col_totals = selcount.sum(axis=0)
    for j in range(board.m):
        cj = int(col_totals[j])
        if cj:
            inc = d * cj
            for i in range(n):
                board.offers[i][j] += inc
    for i in range(n):
        for j in range(board.m):
            c = int(selcount[i, j])
            if c:
                board.pays[i][j] += n * d * c
    board.step += steps


def _check_cycle_structure(cyc: CycleRecord, n: int) -> None:
    # Guaranteed by construction (cyclic turns + state-key agent component);
    # violations would mean a detector bug, so fail loudly.
    if cyc.length <= 0 or cyc.length % n != 0:
        raise AssertionError(f"cycle length {cyc.length} is not a positive multiple of n={n}")
    counts = cyc.choice_counts
    if n > 1 and not (counts == counts[0]).all():
        raise AssertionError("cycle choice counts differ across agents")


def _mode_lowest(values: list[int]) -> int:
    counts: dict[int, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return max(counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]


def _finish(config, board, trace, cycles, terminated, interrupt_step):
    steps = len(trace)
    if not terminated:
        interrupted = interrupt_step is not None and steps >= interrupt_step
        if not interrupted:
            raise NoTerminationError(
                f"no termination within max_steps={config.max_steps}", steps, trace
            )
    voted = [s for s in board.selections if s is not None]
    consensus = _mode_lowest(voted)
    return TacoOutcome(
        consensus_choice=consensus,
        settlements=settle(board, consensus),
        steps=steps,
        rounds=-(-steps // board.n),
        cycles_detected=len(cycles),
        final_d=board.d,
        trace=trace,
        terminated_naturally=terminated,
        cycle_records=cycles,
        final_selections=list(board.selections),
        final_board=board,
    )
