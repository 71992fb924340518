"""Comparison mechanisms: plurality voting, random dictator, utilitarian,
egalitarian. Each maps a full cost matrix to one chosen option.

Unlike the auction, these mechanisms read the whole cost matrix centrally;
they exist to benchmark outcome quality, not to model decentralization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agent import AgentPrivate


@dataclass
class ChoiceProblem:
    """One generated instance: cost matrix, valuations, optional labels."""

    n: int
    m: int
    C: np.ndarray
    b: np.ndarray
    option_labels: list[str] | None = None

    def __post_init__(self) -> None:
        self.C = np.asarray(self.C, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.C.shape != (self.n, self.m):
            raise ValueError(f"C has shape {self.C.shape}, expected ({self.n}, {self.m})")
        if self.b.shape != (self.n,):
            raise ValueError(f"b has shape {self.b.shape}, expected ({self.n},)")
        if not (self.b > 0).all():
            raise ValueError("valuations b must be positive elementwise")
        if not (np.isfinite(self.C).all() and np.isfinite(self.b).all()):
            raise ValueError("C and b must be finite")
        if self.option_labels is not None and len(self.option_labels) != self.m:
            raise ValueError("option_labels length must equal m")

    def agents(self) -> list[AgentPrivate]:
        """Split the instance into per-agent private views for the auction."""
        return [
            AgentPrivate(index=i, valuation=float(self.b[i]), cost_row=self.C[i].copy())
            for i in range(self.n)
        ]


def voting(problem: ChoiceProblem, rng: np.random.Generator) -> int:
    """Plurality: each agent votes its own cheapest option, most votes wins.

    Personal ties go to the lowest option index; ties between winning options
    are broken uniformly at random (rng is consumed only in that case).
    """
    votes = np.zeros(problem.m, dtype=np.int64)
    for i in range(problem.n):
        votes[int(np.argmin(problem.C[i]))] += 1
    winners = np.flatnonzero(votes == votes.max())
    if winners.size == 1:
        return int(winners[0])
    return int(winners[int(rng.integers(winners.size))])


def random_dictator(problem: ChoiceProblem, rng: np.random.Generator) -> int:
    """A uniformly chosen agent imposes its own cheapest option."""
    dictator = int(rng.integers(problem.n))
    return int(np.argmin(problem.C[dictator]))


def utilitarian(problem: ChoiceProblem) -> int:
    """Option minimizing the total cost across agents (lowest index on ties)."""
    return int(np.argmin(problem.C.sum(axis=0)))


def egalitarian(problem: ChoiceProblem) -> int:
    """Option minimizing the worst single-agent cost (lowest index on ties)."""
    return int(np.argmin(problem.C.max(axis=0)))
