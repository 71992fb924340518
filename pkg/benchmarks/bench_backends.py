"""Benchmark the engine backends against each other.

Two workloads:
  batch  - many short seeded waypoint instances, the shape the Monte Carlo
           experiments hammer all day
  long   - one two-agent run with a tiny trading unit, which forces the
           window detector to grow its hash table several times

Every backend replays the same instances, and the script cross-checks that
step counts and consensus choices agree before reporting timings.

Usage:
    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --trials 500 --repeat 5 --exact
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from tacosim import NUMBA_AVAILABLE
from tacosim.engine import TacoConfig, run_taco
from tacosim.scenario import example2_fixture, random_waypoint_problem


def batch_workload(trials: int, seed: int):
    """Seeded short instances: four agents merging at a waypoint."""
    instances = []
    for t in range(trials):
        rng = np.random.default_rng((seed, t))
        problem = random_waypoint_problem(4, rng)
        epsilon = 1e-3 * float(problem.C.mean())
        config = TacoConfig(epsilon=epsilon, d0=Fraction(1, 50), gamma=Fraction(9, 10))
        instances.append((config, problem))
    return instances


def long_workload(denominator: int):
    """One long run: a small trading unit stretches the first cycle out to
    thousands of steps, so the detector's buffers double repeatedly."""
    problem = example2_fixture()
    config = TacoConfig(epsilon=1e-6, d0=Fraction(1, denominator), gamma=Fraction(9, 10))
    return [(config, problem)]


def run_backend(backend: str, instances) -> tuple[float, list[tuple[int, int]]]:
    t0 = time.perf_counter()
    facts = []
    for config, problem in instances:
        outcome = run_taco(config, problem.agents(), backend=backend)
        facts.append((outcome.steps, outcome.consensus_choice))
    return time.perf_counter() - t0, facts


def bench(name: str, instances, backends, repeat: int) -> None:
    print(f"\n[{name}] {len(instances)} run(s), best of {repeat}")
    reference = None
    baseline = None
    for backend in backends:
        best = float("inf")
        facts = None
        for _ in range(repeat):
            elapsed, facts = run_backend(backend, instances)
            best = min(best, elapsed)
        if reference is None:
            reference = facts
        elif facts != reference:
            raise SystemExit(f"{backend} disagrees with {backends[0]} on {name}")
        if baseline is None:
            baseline = best
        steps = sum(s for s, _ in facts)
        print(
            f"  {backend:<6} {best * 1000:>10.1f} ms"
            f"  {steps / best:>12.0f} steps/s"
            f"  x{baseline / best:.2f} vs {backends[0]}"
        )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=200, help="batch instance count")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--repeat", type=int, default=3, help="timings per backend, best kept")
    parser.add_argument(
        "--long-denominator", type=int, default=2000,
        help="long run uses trading unit 1/DENOM",
    )
    parser.add_argument(
        "--exact", action="store_true",
        help="also time the exact-arithmetic engine (slow on the long run)",
    )
    args = parser.parse_args(argv)

    backends = ["numpy"]
    if NUMBA_AVAILABLE:
        backends.insert(0, "numba")
    else:
        print("numba not installed, timing the numpy fallback only")
    if args.exact:
        backends.append("exact")

    # Warm up once per backend so the numba JIT compile stays out of the timings.
    warm = batch_workload(2, args.seed + 1)
    for backend in backends:
        run_backend(backend, warm)

    bench("batch", batch_workload(args.trials, args.seed), backends, args.repeat)
    bench("long", long_workload(args.long_denominator), backends, args.repeat)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
