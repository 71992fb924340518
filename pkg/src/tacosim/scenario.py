"""Instance generators.

The waypoint-merging scenario turns an aircraft-sequencing problem into a
discrete choice problem: every arrival ordering is one option, and its cost
vector comes from solving the ordering's chain-constrained quadratic program
exactly. A random-matrix generator and the two-agent running example cover
the remaining experiment families.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .baselines import ChoiceProblem
from .errors import ResourceLimitError


@dataclass(frozen=True)
class WaypointScenario:
    """Aircraft merging at a shared waypoint.

    e[i] is aircraft i's estimated arrival time, k[i] > 0 its urgency weight,
    and D > 0 the minimum separation between consecutive arrivals. A speed
    adjustment x shifts arrival i to e[i] + x[i] at cost k[i] * x[i]**2.
    """

    e: np.ndarray
    k: np.ndarray
    D: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "e", np.asarray(self.e, dtype=np.float64))
        object.__setattr__(self, "k", np.asarray(self.k, dtype=np.float64))
        object.__setattr__(self, "D", float(self.D))
        if self.e.ndim != 1 or self.k.shape != self.e.shape:
            raise ValueError("e and k must be equal-length vectors")
        if not (self.k > 0).all():
            raise ValueError("urgency weights k must be positive")
        if not self.D > 0:
            raise ValueError(f"separation D must be positive, got {self.D}")

    @property
    def n(self) -> int:
        return int(self.e.shape[0])


def pava(targets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted isotonic regression by pool-adjacent-violators.

    Returns the unique nondecreasing minimizer of sum w_t * (v_t - targets_t)^2.
    Merged blocks take the weighted mean of their targets.
    """
    t = np.asarray(targets, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if t.ndim != 1 or t.shape != w.shape:
        raise ValueError("targets and weights must be equal-length vectors")
    if not (w > 0).all():
        raise ValueError("weights must be positive")
    # Each block is (weighted mean, total weight, member count).
    means: list[float] = []
    wsums: list[float] = []
    sizes: list[int] = []
    for ti, wi in zip(t, w):
        means.append(float(ti))
        wsums.append(float(wi))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            wm = wsums[-2] + wsums[-1]
            means[-2] = (means[-2] * wsums[-2] + means[-1] * wsums[-1]) / wm
            wsums[-2] = wm
            sizes[-2] += sizes[-1]
            means.pop()
            wsums.pop()
            sizes.pop()
    return np.repeat(means, sizes)


def solve_ordering(scenario: WaypointScenario, order) -> np.ndarray:
    """Cheapest adjustment vector x for a fixed arrival ordering.

    order[t] is the agent arriving in position t. Substituting
    v_t = e[order[t]] + x[order[t]] - t*D turns the chained separation
    constraints into "v nondecreasing", a weighted isotonic regression on
    targets e[order[t]] - t*D with weights k[order[t]].
    """
    n = scenario.n
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order must be a permutation of 0..{n - 1}, got {order}")
    idx = np.array(order, dtype=np.intp)
    shift = np.arange(n, dtype=np.float64) * scenario.D
    v = pava(scenario.e[idx] - shift, scenario.k[idx])
    x = np.empty(n, dtype=np.float64)
    x[idx] = v + shift - scenario.e[idx]
    return x


def enumerate_options(scenario: WaypointScenario, b, max_agents: int = 7) -> ChoiceProblem:
    """One option per arrival ordering, in lexicographic order; m = n!.

    The caller supplies the valuation vector b; option j's cost for agent i is
    k[i] * x[i]**2 under ordering j's optimal adjustment.
    """
    n = scenario.n
    if n > max_agents:
        raise ResourceLimitError(
            f"n={n} yields {math.factorial(n)} orderings, above the n<={max_agents} cap"
        )
    columns = []
    labels = []
    for perm in itertools.permutations(range(n)):
        x = solve_ordering(scenario, perm)
        columns.append(scenario.k * x**2)
        labels.append("order(" + ",".join(str(i) for i in perm) + ")")
    C = np.column_stack(columns)
    return ChoiceProblem(n=n, m=C.shape[1], C=C, b=np.asarray(b, dtype=np.float64),
                         option_labels=labels)


def random_problem(n: int, m: int, rng: np.random.Generator) -> ChoiceProblem:
    """Uniform(0,1) cost matrix and valuations; C is drawn first, then b.

    Exact zero draws for b are redrawn to keep valuations strictly positive.
    """
    C = rng.random((n, m))
    b = rng.random(n)
    while (b == 0).any():
        b[b == 0] = rng.random(int((b == 0).sum()))
    return ChoiceProblem(n=n, m=m, C=C, b=b)


def random_waypoint_problem(
    n: int,
    rng: np.random.Generator,
    D: float = 1.0,
    k_range: tuple[float, float] = (0.5, 2.0),
    b_range: tuple[float, float] = (0.5, 1.5),
    max_agents: int = 7,
) -> ChoiceProblem:
    """Sampled waypoint instance with the documented default ranges.

    ETAs are Uniform(0, n*D), so arrivals genuinely conflict. Degenerate
    instances whose best ordering needs no adjustment at all (total cost 0,
    where the optimality gap is undefined) are resampled.
    """
    while True:
        e = rng.uniform(0.0, n * D, size=n)
        k = rng.uniform(k_range[0], k_range[1], size=n)
        b = rng.uniform(b_range[0], b_range[1], size=n)
        problem = enumerate_options(WaypointScenario(e=e, k=k, D=D), b, max_agents)
        if problem.C.sum(axis=0).min() > 0:
            return problem


def example2_fixture() -> ChoiceProblem:
    """The two-agent, two-option running example used by the golden trace."""
    return ChoiceProblem(
        n=2,
        m=2,
        C=np.array([[10.0, 4.0], [7.0, 9.0]]),
        b=np.array([0.8, 1.2]),
        option_labels=["option-1", "option-2"],
    )
