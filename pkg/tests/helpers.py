"""Shared fixtures for the test suite: random timestep cases and acceptance logging."""

import itertools
from dataclasses import dataclass

import numpy as np

from coolopt.plant_model import PlantParams, SubloopLoads, proportional_fractions
from coolopt.topology import (
    Partition,
    balanced_assignment,
    enumerate_partitions,
    subloop_loads,
    worst_case_assignment,
)

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int | str, ok: bool | None, detail: str) -> bool | None:
    """Log one acceptance line; ``ok=None`` marks a skipped criterion."""
    verdict = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"{verdict} criterion {criterion!s:>2}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@dataclass(frozen=True)
class Case:
    partition: Partition
    loads: SubloopLoads
    fractions: tuple
    baseline_t_sup: float
    baseline_flow: float


def random_cases(n: int, seed: int = 1, max_spread: float = 0.4,
                 params: PlantParams = PlantParams()) -> list[Case]:
    """Random timesteps over K in 2..6, load spreads up to *max_spread*."""
    rng = np.random.default_rng(seed)
    by_k = {k: enumerate_partitions(25, k) for k in range(2, 7)}
    cases = []
    for _ in range(n):
        k = int(rng.integers(2, 7))
        part = by_k[k][int(rng.integers(len(by_k[k])))]
        spread = rng.uniform(0.0, max_spread)
        q = 1.0 + spread * rng.uniform(0.0, 1.0, 25)
        q *= rng.uniform(0.4, 1.3) * params.q_rej_nom / q.sum()
        policy = (balanced_assignment, worst_case_assignment)[int(rng.integers(2))]
        loads = subloop_loads(policy(part, q), q)
        t_base = float(rng.uniform(25.0, 35.0))
        flow = loads.q_tot * 1000.0 / (params.cp * 12.0)
        cases.append(Case(part, loads, proportional_fractions(part), t_base, flow))
    return cases


def brute_force(n: int, k: int) -> set[tuple[int, ...]]:
    """All compositions of n into k parts via cut points, sorted descending, deduplicated."""
    out = set()
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0,) + cuts + (n,)
        out.add(tuple(sorted((b - a for a, b in zip(bounds, bounds[1:])), reverse=True)))
    return out
