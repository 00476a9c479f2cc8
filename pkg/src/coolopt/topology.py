"""Layer-1 design space: CDU partitions, CDU-to-subloop assignment, load mapping."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ContractError, DomainError
from .plant_model import SubloopLoads


class Partition(tuple):
    """Non-increasing tuple of positive CDU counts, one per subloop.

    Renders as ``(19, 6)`` and parses back with :meth:`parse`.
    """

    def __new__(cls, counts: Sequence[int]) -> "Partition":
        counts = tuple(counts)
        if not counts:
            raise DomainError("a partition needs at least one part")
        for c in counts:
            if int(c) != c or c < 1:
                raise DomainError(f"partition parts must be positive integers, got {counts}")
        counts = tuple(int(c) for c in counts)
        if any(a < b for a, b in zip(counts, counts[1:])):
            raise DomainError(f"partition parts must be non-increasing, got {counts}")
        return super().__new__(cls, counts)

    @property
    def k(self) -> int:
        return len(self)

    @property
    def n(self) -> int:
        return sum(self)

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self) + ")"

    def __repr__(self) -> str:
        return f"Partition({tuple(self)!r})"

    @classmethod
    def parse(cls, text: str) -> "Partition":
        body = text.strip()
        if not (body.startswith("(") and body.endswith(")")):
            raise DomainError(f"cannot parse partition {text!r}")
        parts = [p.strip() for p in body[1:-1].split(",") if p.strip()]
        try:
            return cls(int(p) for p in parts)
        except ValueError as exc:
            raise DomainError(f"cannot parse partition {text!r}") from exc


def parse_partition_list(text: str) -> list[Partition]:
    """Parse ``"(19,6),(14,6,5)"`` into partitions."""
    groups = re.findall(r"\([^()]*\)", text)
    leftover = re.sub(r"\([^()]*\)", "", text).replace(",", "").strip()
    if not groups or leftover:
        raise DomainError(f"cannot parse partition list {text!r}")
    return [Partition.parse(g) for g in groups]


def _parts(n: int, k: int, largest: int) -> Iterator[tuple[int, ...]]:
    # parts of n into exactly k pieces, each <= largest, largest-first
    if k == 1:
        if 1 <= n <= largest:
            yield (n,)
        return
    for first in range(min(largest, n - k + 1), 0, -1):
        if first * k < n:
            break
        for rest in _parts(n - first, k - 1, first):
            yield (first,) + rest


def enumerate_partitions(n: int, k: int) -> list[Partition]:
    """All partitions of *n* into exactly *k* parts, lexicographically descending."""
    if n < 1 or k < 1:
        raise DomainError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if k > n:
        return []
    return [Partition(p) for p in _parts(n, k, n)]


def design_space(n: int, k_min: int = 2, k_max: int = 6) -> list[Partition]:
    """Every partition of *n* for subloop counts ``k_min..k_max``, grouped by K."""
    out: list[Partition] = []
    for k in range(k_min, k_max + 1):
        out.extend(enumerate_partitions(n, k))
    return out


@dataclass(frozen=True)
class CduAssignment:
    """``subloop_of[j]`` is the subloop index of CDU *j*."""

    subloop_of: tuple[int, ...]
    partition: Partition

    def __post_init__(self) -> None:
        counts = [0] * self.partition.k
        for s in self.subloop_of:
            if not 0 <= s < self.partition.k:
                raise ContractError(f"subloop index {s} out of range")
            counts[s] += 1
        if tuple(counts) != tuple(self.partition):
            raise ContractError(
                f"assignment puts {tuple(counts)} CDUs per subloop, "
                f"partition requires {tuple(self.partition)}"
            )

    def members(self, k: int) -> list[int]:
        return [j for j, s in enumerate(self.subloop_of) if s == k]


def _hottest_first(cdu_mean_loads: Sequence[float]) -> list[int]:
    loads = list(cdu_mean_loads)
    # stable: equal loads keep index order
    return sorted(range(len(loads)), key=lambda j: -loads[j])


def _check_length(partition: Partition, cdu_mean_loads: Sequence[float]) -> None:
    if len(cdu_mean_loads) != partition.n:
        raise ContractError(
            f"{len(cdu_mean_loads)} CDU loads for a partition of {partition.n}"
        )


def balanced_assignment(partition: Partition,
                        cdu_mean_loads: Sequence[float]) -> CduAssignment:
    """Serpentine deal of CDUs, hottest first, across subloops with free slots.

    Each pass visits the subloops that still have room in index order, and the
    direction reverses every pass, so hot and cold CDUs interleave.
    """
    _check_length(partition, cdu_mean_loads)
    remaining = list(partition)
    subloop_of = [0] * partition.n
    order = _hottest_first(cdu_mean_loads)
    forward = True
    pos = 0
    while pos < len(order):
        open_loops = [k for k in range(partition.k) if remaining[k] > 0]
        if not forward:
            open_loops.reverse()
        for k in open_loops:
            if pos == len(order):
                break
            subloop_of[order[pos]] = k
            remaining[k] -= 1
            pos += 1
        forward = not forward
    return CduAssignment(tuple(subloop_of), partition)


def worst_case_assignment(partition: Partition,
                          cdu_mean_loads: Sequence[float]) -> CduAssignment:
    """Contiguous blocks of the hottest CDUs, smallest subloop first.

    Among equal-size subloops the higher index takes the hotter block.
    """
    _check_length(partition, cdu_mean_loads)
    order = _hottest_first(cdu_mean_loads)
    fill_order = sorted(range(partition.k), key=lambda k: (partition[k], -k))
    subloop_of = [0] * partition.n
    pos = 0
    for k in fill_order:
        for j in order[pos:pos + partition[k]]:
            subloop_of[j] = k
        pos += partition[k]
    return CduAssignment(tuple(subloop_of), partition)


def subloop_loads(assignment: CduAssignment, cdu_loads_t: Sequence[float]) -> SubloopLoads:
    """Sum per-CDU loads into per-subloop loads."""
    if len(cdu_loads_t) != len(assignment.subloop_of):
        raise ContractError(
            f"{len(cdu_loads_t)} CDU loads for {len(assignment.subloop_of)} CDUs"
        )
    sums = [0.0] * assignment.partition.k
    for load, k in zip(cdu_loads_t, assignment.subloop_of):
        sums[k] += float(load)
    return SubloopLoads(tuple(sums))


def subloop_load_matrix(assignment: CduAssignment, cdu_loads: np.ndarray) -> np.ndarray:
    """Vectorised :func:`subloop_loads` over a ``(T, N)`` load matrix -> ``(T, K)``."""
    cdu_loads = np.asarray(cdu_loads, dtype=float)
    if cdu_loads.ndim != 2 or cdu_loads.shape[1] != len(assignment.subloop_of):
        raise ContractError(f"expected (T, {len(assignment.subloop_of)}) loads")
    cols = [cdu_loads[:, assignment.members(k)].sum(axis=1)
            for k in range(assignment.partition.k)]
    return np.column_stack(cols)


def equalize_workload(cdu_loads_t, alpha: float):
    """Blend per-CDU loads toward their mean: ``(1 - alpha) * q + alpha * mean(q)``.

    Accepts a single timestep (1-D) or a ``(T, N)`` matrix, blending each row
    toward its own mean.  Returns the same shape as the input.
    """
    if not (0.0 <= alpha <= 1.0) or math.isnan(alpha):
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    q = np.asarray(cdu_loads_t, dtype=float)
    if alpha == 0.0:
        return q.copy()
    mean = q.mean(axis=-1, keepdims=True)
    return (1.0 - alpha) * q + alpha * mean
