"""Design-space sweep: annual energy per partition, strategy and assignment.

Each cell of the sweep is one :class:`EvalSpec`.  A cell chains
:func:`~coolopt.solver.solve_timestep` through the dataset in time order
(warm-starting each step from the previous one), sums energy, and reports
savings against the model-evaluated baseline.  Cells are independent, so
they are farmed out to a process pool; results are reduced in canonical
order, so the outcome does not depend on the worker count.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
import multiprocessing
import os
import statistics
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ContractError, DatasetError, DomainError
from .plant_model import PlantParams, SubloopLoads, ct_fan_power, proportional_fractions, pump_power
from .solver import (
    CONSTRAINT_TOL,
    SolverConfig,
    Status,
    Strategy,
    min_residual,
    solve_timestep,
)
from .telemetry import Dataset
from .topology import (
    Partition,
    balanced_assignment,
    equalize_workload,
    subloop_load_matrix,
    worst_case_assignment,
)

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ["partition", "K", "assignment", "strategy", "fraction_mode", "alpha",
                 "energy_kwh", "savings", "recovery", "infeasible", "fallback",
                 "violations", "max_violation", "guarded", "n_steps"]
SPREAD_DEFINITION = ("within_k: largest best-minus-worst savings range inside one K; "
                     "between_k: range of the per-K best savings; "
                     "total: best minus worst over all partitions")


class Assignment(str, enum.Enum):
    BALANCED = "balanced"
    WORST_CASE = "worst_case"

    def __str__(self) -> str:
        return self.value


class FractionMode(str, enum.Enum):
    PROPORTIONAL = "proportional"
    OPTIMIZED = "optimized"

    def __str__(self) -> str:
        return self.value


_ASSIGNERS = {Assignment.BALANCED: balanced_assignment,
              Assignment.WORST_CASE: worst_case_assignment}
_STRATEGY_ORDER = {Strategy.A: 0, Strategy.B: 1, Strategy.C: 2}


@dataclass(frozen=True)
class EvalSpec:
    """One sweep cell.

    Strategy C with proportional fractions is the fixed-split comparison case;
    it is solved exactly like strategy B.
    """

    partition: Partition
    assignment: Assignment = Assignment.BALANCED
    strategy: Strategy = Strategy.C
    fraction_mode: FractionMode = FractionMode.OPTIMIZED
    alpha: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "partition", Partition(self.partition))
        object.__setattr__(self, "assignment", Assignment(self.assignment))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "fraction_mode", FractionMode(self.fraction_mode))
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.fraction_mode is FractionMode.OPTIMIZED and self.strategy is not Strategy.C:
            raise DomainError("optimized fractions are only available with strategy C")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def solve_strategy(self) -> Strategy:
        if self.strategy is Strategy.C and self.fraction_mode is FractionMode.PROPORTIONAL:
            return Strategy.B
        return self.strategy

    def sort_key(self):
        return (self.partition.k, tuple(-c for c in self.partition),
                list(Assignment).index(self.assignment), _STRATEGY_ORDER[self.strategy],
                list(FractionMode).index(self.fraction_mode), self.alpha)

    def label(self) -> str:
        return (f"{self.partition} {self.assignment} {self.strategy}/{self.fraction_mode}"
                f" alpha={self.alpha:g}")


@dataclass(frozen=True)
class BaselineEnergy:
    pump_kwh: float
    fan_kwh: float
    excluded: tuple[int, ...] = ()

    @property
    def total_kwh(self) -> float:
        return self.pump_kwh + self.fan_kwh


@dataclass(frozen=True)
class AnnualResult:
    energy_kwh: float
    baseline_energy_kwh: float
    savings_fraction: float
    infeasible_count: int = 0
    fallback_count: int = 0
    violation_count: int = 0
    max_violation: float = 0.0
    guarded_count: int = 0
    n_steps: int = 0


@dataclass
class SweepResult:
    results: dict[EvalSpec, AnnualResult]
    baseline: BaselineEnergy
    failed: dict[EvalSpec, str] = field(default_factory=dict)
    elapsed_s: float = field(default=0.0, compare=False)
    cell_seconds: dict[EvalSpec, float] = field(default_factory=dict, compare=False)

    def ordered(self) -> list[tuple[EvalSpec, AnnualResult]]:
        return sorted(self.results.items(), key=lambda kv: kv[0].sort_key())

    def partitions(self) -> list[Partition]:
        seen = {spec.partition for spec in self.results}
        return sorted(seen, key=lambda p: (p.k, tuple(-c for c in p)))

    def savings(self, partition: Partition, strategy: Strategy | str,
                fraction_mode: FractionMode | str = FractionMode.PROPORTIONAL,
                assignment: Assignment | str = Assignment.BALANCED,
                alpha: float = 0.0) -> float | None:
        spec = EvalSpec(partition, assignment, strategy, fraction_mode, alpha)
        res = self.results.get(spec)
        return None if res is None else res.savings_fraction


def baseline_energy(dataset: Dataset, params: PlantParams) -> BaselineEnergy:
    """Model energy of the measured operating points, split into pump and fan.

    Timesteps the model cannot evaluate are excluded and listed by index.
    """
    if len(dataset) == 0:
        raise DatasetError("empty dataset")
    pump, fan, excluded = [], [], []
    totals = dataset.loads.sum(axis=1)
    for i, rec in enumerate(dataset.records):
        try:
            p = pump_power(rec.baseline_flow, params)
            f = ct_fan_power(float(totals[i]), rec.baseline_t_sup, params)
        except DomainError:
            excluded.append(i)
            continue
        pump.append(p)
        fan.append(f)
    scale = dataset.dt / 3600.0
    return BaselineEnergy(math.fsum(pump) * scale, math.fsum(fan) * scale, tuple(excluded))


def _savings(energy: float, baseline: float) -> float:
    return 1.0 - energy / baseline


def evaluate_partition(spec: EvalSpec, dataset: Dataset, params: PlantParams,
                       cfg: SolverConfig = SolverConfig(), *,
                       baseline: BaselineEnergy | None = None,
                       debug_path: str | Path | None = None,
                       powers_out: list | None = None) -> AnnualResult:
    """Annual energy of one sweep cell.

    The CDU assignment is fixed from annual-mean loads; per-timestep loads are
    equalised by ``spec.alpha`` before they are summed into subloops.
    Infeasible and fallback timesteps are counted, never fatal.  With
    *debug_path* a per-timestep CSV trace is written.
    """
    if spec.partition.n != dataset.n_cdus:
        raise ContractError(
            f"partition {spec.partition} covers {spec.partition.n} CDUs, "
            f"dataset has {dataset.n_cdus}"
        )
    if baseline is None:
        baseline = baseline_energy(dataset, params)
    skip = set(baseline.excluded)
    assignment = _ASSIGNERS[spec.assignment](spec.partition, dataset.mean_cdu_loads())
    loads = equalize_workload(dataset.loads, spec.alpha)
    q = subloop_load_matrix(assignment, loads)
    fractions = proportional_fractions(spec.partition)
    strategy = spec.solve_strategy
    free_f = strategy is Strategy.C

    powers: list[float] = []
    infeasible = fallback = violations = guarded = 0
    worst = 0.0
    warm = None
    trace = [] if debug_path is not None else None
    for i in range(len(dataset)):
        if i in skip:
            continue
        sub = SubloopLoads(tuple(q[i].tolist()))
        res = solve_timestep(strategy, sub, float(dataset.baseline_t_sup[i]), params, warm, cfg,
                             fractions=fractions,
                             baseline_flow=float(dataset.baseline_flow[i]))
        powers.append(res.power)
        if res.status is Status.CLAMPED_INFEASIBLE:
            infeasible += 1
        elif res.status is Status.FALLBACK_PREVIOUS:
            fallback += 1
        else:
            gap = -min_residual(res.op, sub, params, free_f, fractions)
            if gap > CONSTRAINT_TOL:
                violations += 1
            worst = max(worst, gap)
        guarded += res.guarded
        warm = res.op
        if trace is not None:
            trace.append([dataset.records[i].timestamp, strategy.value, repr(res.op.flow),
                          repr(res.op.t_sup), *map(repr, res.op.fractions), repr(res.power),
                          res.status.value, res.iterations, repr(res.max_return_temp)])
    if powers_out is not None:
        powers_out.extend(powers)
    energy = math.fsum(powers) * dataset.dt / 3600.0
    if trace is not None:
        _write_trace(debug_path, spec.partition.k, trace)
    return AnnualResult(energy, baseline.total_kwh, _savings(energy, baseline.total_kwh),
                        infeasible, fallback, violations, worst, guarded, len(powers))


def _write_trace(path, k: int, rows: list) -> None:
    header = (["t", "strategy", "flow", "t_sup"] + [f"f_{j + 1}" for j in range(k)]
              + ["power_kw", "status", "iters", "max_tret"])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# -- sweep driver -----------------------------------------------------------

def build_grid(partitions: Iterable[Partition],
               strategies: Sequence[Strategy | str] = ("A", "B", "C"),
               assignments: Sequence[Assignment | str] = ("balanced", "worst_case"),
               fraction_modes: Sequence[FractionMode | str] = ("proportional", "optimized"),
               alphas: Sequence[float] = (0.0,)) -> list[EvalSpec]:
    """Every valid cell, in canonical order.

    Strategy A and B only come in the proportional mode; a requested
    ``optimized`` mode is simply not generated for them.
    """
    strategies = [Strategy(s) for s in strategies]
    modes = [FractionMode(m) for m in fraction_modes]
    specs = []
    for part in partitions:
        for asg in assignments:
            for strat in strategies:
                strat_modes = modes if strat is Strategy.C else [FractionMode.PROPORTIONAL]
                for mode in strat_modes:
                    for alpha in alphas:
                        specs.append(EvalSpec(part, asg, strat, mode, alpha))
    return sorted(set(specs), key=EvalSpec.sort_key)


def _solve_key(spec: EvalSpec) -> EvalSpec:
    # C with proportional fractions is the same computation as B
    if spec.solve_strategy is Strategy.B:
        return EvalSpec(spec.partition, spec.assignment, Strategy.B,
                        FractionMode.PROPORTIONAL, spec.alpha)
    return spec


_WORKER: dict = {}


def _init_worker(dataset, params, cfg, baseline) -> None:
    _WORKER.update(dataset=dataset, params=params, cfg=cfg, baseline=baseline)


def _run_cell(spec: EvalSpec) -> tuple[EvalSpec, AnnualResult, float]:
    t0 = time.perf_counter()
    res = evaluate_partition(spec, _WORKER["dataset"], _WORKER["params"], _WORKER["cfg"],
                             baseline=_WORKER["baseline"])
    return spec, res, time.perf_counter() - t0


def fingerprint(dataset: Dataset, params: PlantParams, cfg: SolverConfig) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(dataset.loads).tobytes())
    h.update(np.ascontiguousarray(dataset.baseline_flow).tobytes())
    h.update(np.ascontiguousarray(dataset.baseline_t_sup).tobytes())
    h.update(json.dumps([params.to_dict(), asdict(cfg)], sort_keys=True).encode())
    return h.hexdigest()


def _default_workers() -> int:
    env = os.environ.get("COOLOPT_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def run_sweep(partitions: Sequence[Partition], dataset: Dataset, params: PlantParams,
              cfg: SolverConfig = SolverConfig(), parallelism: int | None = None, *,
              strategies: Sequence[Strategy | str] = ("A", "B", "C"),
              assignments: Sequence[Assignment | str] = ("balanced", "worst_case"),
              fraction_modes: Sequence[FractionMode | str] = ("proportional", "optimized"),
              alphas: Sequence[float] = (0.0,),
              checkpoint: str | Path | None = None, resume: bool = False,
              progress: Callable[[int, int, EvalSpec], None] | None = None) -> SweepResult:
    """Evaluate every cell of the requested grid.

    With *checkpoint* each finished cell is appended to that CSV as soon as
    it completes; ``resume=True`` reloads it and only evaluates missing cells.
    A cell that raises is retried once and then recorded in
    ``SweepResult.failed``.  *progress* is called as ``(done, total, spec)``.
    """
    partitions = [Partition(p) for p in partitions]
    if not partitions:
        raise DomainError("no partitions to evaluate")
    workers = _default_workers() if parallelism is None else int(parallelism)
    if workers < 1:
        raise DomainError("parallelism must be >= 1")
    specs = build_grid(partitions, strategies, assignments, fraction_modes, alphas)
    baseline = baseline_energy(dataset, params)
    if baseline.excluded:
        log.warning("%d baseline timesteps excluded from the energy sums", len(baseline.excluded))

    done: dict[EvalSpec, AnnualResult] = {}
    ckpt = Path(checkpoint) if checkpoint is not None else None
    fp = fingerprint(dataset, params, cfg)
    if ckpt is not None:
        done = _open_checkpoint(ckpt, fp, baseline, resume)

    jobs: dict[EvalSpec, list[EvalSpec]] = {}
    for spec in specs:
        if spec in done:
            continue
        jobs.setdefault(_solve_key(spec), []).append(spec)
    for key, members in list(jobs.items()):
        if key in done:
            for m in members:
                done[m] = done[key]
            del jobs[key]

    results = dict(done)
    failed: dict[EvalSpec, str] = {}
    seconds: dict[EvalSpec, float] = {}
    total = len(specs)
    t_start = time.perf_counter()

    def record(key: EvalSpec, res: AnnualResult, dt_s: float) -> None:
        for member in jobs[key]:
            results[member] = res
            seconds[member] = dt_s
            if ckpt is not None:
                _append_checkpoint(ckpt, member, res)
            if progress is not None:
                progress(len(results), total, member)

    keys = sorted(jobs, key=EvalSpec.sort_key)
    if workers == 1 or len(keys) <= 1:
        _init_worker(dataset, params, cfg, baseline)
        for key in keys:
            for attempt in (1, 2):
                try:
                    _, res, dt_s = _run_cell(key)
                except Exception as exc:  # noqa: BLE001 - surfaced as a failed cell
                    if attempt == 2:
                        failed[key] = f"{type(exc).__name__}: {exc}"
                        log.error("cell %s failed: %s", key.label(), exc)
                    continue
                record(key, res, dt_s)
                break
    else:
        _run_pool(keys, workers, (dataset, params, cfg, baseline), record, failed)

    for key, msg in list(failed.items()):
        for member in jobs[key]:
            failed[member] = msg
    return SweepResult(results, baseline, failed, time.perf_counter() - t_start, seconds)


def _run_pool(keys, workers, initargs, record, failed) -> None:
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else "spawn")
    attempts = {k: 0 for k in keys}
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                             initializer=_init_worker, initargs=initargs) as pool:
        pending = {}
        try:
            for key in keys:
                pending[pool.submit(_run_cell, key)] = key
                attempts[key] += 1
            while pending:
                finished, _ = wait(pending, return_when=FIRST_COMPLETED)
                for fut in sorted(finished, key=lambda f: pending[f].sort_key()):
                    key = pending.pop(fut)
                    try:
                        _, res, dt_s = fut.result()
                    except Exception as exc:  # noqa: BLE001 - retried, then surfaced
                        if attempts[key] < 2:
                            attempts[key] += 1
                            pending[pool.submit(_run_cell, key)] = key
                        else:
                            failed[key] = f"{type(exc).__name__}: {exc}"
                            log.error("cell %s failed: %s", key.label(), exc)
                        continue
                    record(key, res, dt_s)
        except BaseException:
            for fut in pending:
                fut.cancel()
            raise


# -- persistence --------------------------------------------------------------

def _row(spec: EvalSpec, res: AnnualResult, recovery: float | None = None) -> list[str]:
    return [str(spec.partition), str(spec.partition.k), spec.assignment.value,
            spec.strategy.value, spec.fraction_mode.value, repr(spec.alpha),
            repr(res.energy_kwh), repr(res.savings_fraction),
            "" if recovery is None else repr(recovery), str(res.infeasible_count),
            str(res.fallback_count), str(res.violation_count), repr(res.max_violation),
            str(res.guarded_count), str(res.n_steps)]


def _parse_row(row: Mapping[str, str], baseline_kwh: float) -> tuple[EvalSpec, AnnualResult]:
    spec = EvalSpec(Partition.parse(row["partition"]), row["assignment"], row["strategy"],
                    row["fraction_mode"], float(row["alpha"]))
    energy = float(row["energy_kwh"])
    res = AnnualResult(energy, baseline_kwh, _savings(energy, baseline_kwh),
                       int(row["infeasible"]), int(row["fallback"]), int(row["violations"]),
                       float(row["max_violation"]), int(row["guarded"]), int(row["n_steps"]))
    return spec, res


def _meta_path(ckpt: Path) -> Path:
    return ckpt.with_name(ckpt.name + ".meta.json")


def _open_checkpoint(ckpt: Path, fp: str, baseline: BaselineEnergy,
                     resume: bool) -> dict[EvalSpec, AnnualResult]:
    meta = _meta_path(ckpt)
    if resume and ckpt.exists():
        if meta.exists() and json.loads(meta.read_text())["fingerprint"] != fp:
            raise ContractError(f"{ckpt} was written for a different dataset or configuration")
        done = {}
        with ckpt.open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                spec, res = _parse_row(row, baseline.total_kwh)
                done[spec] = res
        return done
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    with ckpt.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerow(SWEEP_COLUMNS)
    meta.write_text(json.dumps({"fingerprint": fp}))
    return {}


def _append_checkpoint(ckpt: Path, spec: EvalSpec, res: AnnualResult) -> None:
    with ckpt.open("a", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerow(_row(spec, res))
        fh.flush()


def write_sweep_csv(sweep: SweepResult, path: str | Path) -> None:
    """Long-format results, one row per cell, canonical order."""
    recov = recovery_table(sweep)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for spec, res in sweep.ordered():
            r = None
            if spec.strategy is Strategy.C and spec.fraction_mode is FractionMode.OPTIMIZED:
                r = recov.get((spec.partition, spec.assignment, spec.alpha))
            writer.writerow(_row(spec, res, r))


def read_sweep_csv(path: str | Path, baseline: BaselineEnergy) -> SweepResult:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing sweep results file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames[:11]) != SWEEP_COLUMNS[:11]:
            raise DatasetError(f"{path}: not a sweep results file")
        results = dict(_parse_row(row, baseline.total_kwh) for row in reader)
    return SweepResult(results, baseline)


# -- metrics ------------------------------------------------------------------

def recovery_table(sweep: SweepResult) -> dict[tuple, float | None]:
    """``s_C / s_B`` keyed by ``(partition, assignment, alpha)``; None if ``s_B <= 0``."""
    out = {}
    for spec, res in sweep.results.items():
        if spec.strategy is not Strategy.C or spec.fraction_mode is not FractionMode.OPTIMIZED:
            continue
        b = sweep.results.get(EvalSpec(spec.partition, spec.assignment, Strategy.B,
                                       FractionMode.PROPORTIONAL, spec.alpha))
        if b is None:
            b = sweep.results.get(EvalSpec(spec.partition, spec.assignment, Strategy.C,
                                           FractionMode.PROPORTIONAL, spec.alpha))
        if b is None:
            continue
        s_b = b.savings_fraction
        out[(spec.partition, spec.assignment, spec.alpha)] = (
            res.savings_fraction / s_b if s_b > 0 else None)
    return out


def recovery_ratios(sweep: SweepResult, alpha: float = 0.0) -> dict[Partition, float | None]:
    """Recovery ratio per partition under balanced assignment."""
    return {p: r for (p, asg, a), r in recovery_table(sweep).items()
            if asg is Assignment.BALANCED and a == alpha}


def savings_by_k(sweep: SweepResult, strategy: Strategy | str = Strategy.C,
                 fraction_mode: FractionMode | str = FractionMode.OPTIMIZED,
                 assignment: Assignment | str = Assignment.BALANCED,
                 alpha: float = 0.0) -> dict[int, dict[Partition, float]]:
    strategy, fraction_mode = Strategy(strategy), FractionMode(fraction_mode)
    assignment = Assignment(assignment)
    out: dict[int, dict[Partition, float]] = {}
    for spec, res in sweep.ordered():
        if (spec.strategy, spec.fraction_mode, spec.assignment, spec.alpha) == (
                strategy, fraction_mode, assignment, alpha):
            out.setdefault(spec.partition.k, {})[spec.partition] = res.savings_fraction
    return out


def best_per_k(sweep: SweepResult, alpha: float = 0.0) -> list[dict]:
    """Best strategy-C (optimised, balanced) partition for each K, with s_A/s_B/s_C."""
    rows = []
    for k, table in savings_by_k(sweep, alpha=alpha).items():
        best = max(table, key=lambda p: (table[p], tuple(p)))
        s_a = sweep.savings(best, Strategy.A, alpha=alpha)
        s_b = sweep.savings(best, Strategy.B, alpha=alpha)
        if s_b is None:
            s_b = sweep.savings(best, Strategy.C, FractionMode.PROPORTIONAL, alpha=alpha)
        rows.append({"K": k, "partition": str(best), "n_partitions": len(table),
                     "s_A": s_a, "s_B": s_b, "s_C": table[best],
                     "recovery": (table[best] / s_b) if s_b else None})
    return rows


def assignment_gap(sweep: SweepResult,
                   fraction_mode: FractionMode | str = FractionMode.OPTIMIZED,
                   alpha: float = 0.0) -> tuple[dict[Partition, float], dict[int, dict]]:
    """Balanced minus worst-case strategy-C savings, per partition and per-K summary."""
    bal = savings_by_k(sweep, Strategy.C, fraction_mode, Assignment.BALANCED, alpha)
    wc = savings_by_k(sweep, Strategy.C, fraction_mode, Assignment.WORST_CASE, alpha)
    per_partition: dict[Partition, float] = {}
    per_k: dict[int, dict] = {}
    for k in sorted(bal):
        gaps = [bal[k][p] - wc[k][p] for p in bal[k] if p in wc.get(k, {})]
        for p in bal[k]:
            if p in wc.get(k, {}):
                per_partition[p] = bal[k][p] - wc[k][p]
        if gaps:
            per_k[k] = {"mean": statistics.fmean(gaps), "max": max(gaps), "min": min(gaps)}
    return per_partition, per_k


def spread_decomposition(sweep: SweepResult,
                         fraction_mode: FractionMode | str = FractionMode.OPTIMIZED,
                         assignment: Assignment | str = Assignment.BALANCED,
                         alpha: float = 0.0) -> dict[str, float]:
    """Spread of strategy-C savings across the design space.

    ``within_k`` is the largest best-minus-worst range inside any single K,
    ``between_k`` the range of the per-K bests, ``total`` best minus worst over
    all partitions.  ``*_mwh`` give the same spreads as annual energy.
    """
    table = savings_by_k(sweep, Strategy.C, fraction_mode, assignment, alpha)
    if not table:
        raise DomainError("no strategy-C results for the requested mode")
    within = max(max(v.values()) - min(v.values()) for v in table.values())
    bests = [max(v.values()) for v in table.values()]
    every = [s for v in table.values() for s in v.values()]
    base_mwh = sweep.baseline.total_kwh / 1000.0
    out = {"within_k": within, "between_k": max(bests) - min(bests),
           "total": max(every) - min(every)}
    out.update({f"{k}_mwh": v * base_mwh for k, v in list(out.items())})
    return out


def summary(sweep: SweepResult) -> dict:
    """JSON-ready digest: baseline, Table-1 style best-per-K, recovery, gaps, spreads."""
    out: dict = {
        "baseline_kwh": {"pump": sweep.baseline.pump_kwh, "fan": sweep.baseline.fan_kwh,
                         "total": sweep.baseline.total_kwh,
                         "excluded_timesteps": len(sweep.baseline.excluded)},
        "cells": len(sweep.results),
        "failed_cells": {s.label(): msg for s, msg in sorted(
            sweep.failed.items(), key=lambda kv: kv[0].sort_key())},
        "partitions": len(sweep.partitions()),
        "infeasible_timesteps": sum(r.infeasible_count for r in sweep.results.values()),
        "fallback_timesteps": sum(r.fallback_count for r in sweep.results.values()),
        "violations": sum(r.violation_count for r in sweep.results.values()),
        "elapsed_s": sweep.elapsed_s,
    }
    alphas = sorted({s.alpha for s in sweep.results})
    out["alphas"] = alphas
    if not alphas:
        return out
    a0 = 0.0 if 0.0 in alphas else alphas[0]
    have_c = any(s.strategy is Strategy.C and s.fraction_mode is FractionMode.OPTIMIZED
                 for s in sweep.results)
    if have_c:
        out["best_per_k"] = best_per_k(sweep, a0)
        ratios = [r for r in recovery_ratios(sweep, a0).values() if r is not None]
        if ratios:
            out["recovery"] = {
                "mean": statistics.fmean(ratios), "median": statistics.median(ratios),
                "fraction_ge_1": sum(r >= 1.0 for r in ratios) / len(ratios),
                "fraction_ge_1_minus_1e-4": sum(r >= 1.0 - 1e-4 for r in ratios) / len(ratios),
                "undefined": sum(r is None for r in recovery_ratios(sweep, a0).values()),
            }
    gaps, spreads = {}, {}
    for mode in FractionMode:
        if any(s.strategy is Strategy.C and s.fraction_mode is mode for s in sweep.results):
            _, per_k = assignment_gap(sweep, mode, a0)
            if per_k:
                gaps[mode.value] = {str(k): v for k, v in per_k.items()}
            spreads[mode.value] = spread_decomposition(sweep, mode, alpha=a0)
    out["assignment_gap"] = gaps
    out["spread_decomposition"] = spreads
    if spreads:
        out["spread_decomposition_definition"] = SPREAD_DEFINITION
    return out


def write_summary_json(sweep: SweepResult, path: str | Path, extra: Mapping | None = None) -> None:
    data = summary(sweep)
    if extra:
        data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def read_summary_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing sweep summary file: {path}")
    return json.loads(path.read_text(encoding="utf-8"))
