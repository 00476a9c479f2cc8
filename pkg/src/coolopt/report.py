"""Plot-ready data series derived from a finished sweep.

Each writer emits one CSV; :data:`REPORT_FILES` lists the file names with
their headers.  Only data is produced, no rendering.
"""

from __future__ import annotations

import csv
import statistics
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .solver import Strategy
from .sweep import (
    Assignment,
    FractionMode,
    SweepResult,
    assignment_gap,
    recovery_ratios,
    savings_by_k,
    spread_decomposition,
)

REPORT_FILES = {
    "fig2_savings_by_k.csv": ["assignment", "K", "partition", "savings"],
    "fig3_strategy_comparison.csv": ["K", "partition", "s_A", "s_B", "s_C"],
    "fig4_fixed_vs_optimized.csv": ["kind", "fraction_mode", "K", "statistic", "value"],
    "fig5_assignment_gap.csv": ["K", "fraction_mode", "mean_gap", "max_gap", "min_gap"],
    "fig6_top_partitions.csv": ["rank", "K", "partition", "balanced", "worst_case", "gap"],
    "fig7_alpha_sensitivity.csv": ["alpha", "fraction_mode", "mean_savings", "min_savings",
                                   "max_savings", "n_partitions"],
    "fig8_recovery_histogram.csv": ["bin_lo", "bin_hi", "count"],
}

TOP_N = 15
HIST_BINS = 20


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _alpha0(sweep: SweepResult) -> float:
    alphas = sorted({s.alpha for s in sweep.results})
    return 0.0 if 0.0 in alphas else alphas[0]


def _modes(sweep: SweepResult) -> list[FractionMode]:
    return [m for m in FractionMode
            if any(s.strategy is Strategy.C and s.fraction_mode is m for s in sweep.results)]


def fig2_rows(sweep: SweepResult):
    a0 = _alpha0(sweep)
    for asg in Assignment:
        for k, table in savings_by_k(sweep, Strategy.C, FractionMode.OPTIMIZED, asg, a0).items():
            for part, s in table.items():
                yield asg.value, k, str(part), s


def fig3_rows(sweep: SweepResult):
    a0 = _alpha0(sweep)
    for part in sweep.partitions():
        s_a = sweep.savings(part, Strategy.A, alpha=a0)
        s_b = sweep.savings(part, Strategy.B, alpha=a0)
        if s_b is None:
            s_b = sweep.savings(part, Strategy.C, FractionMode.PROPORTIONAL, alpha=a0)
        s_c = sweep.savings(part, Strategy.C, FractionMode.OPTIMIZED, alpha=a0)
        if (s_a, s_b, s_c) != (None, None, None):
            yield part.k, str(part), s_a, s_b, s_c


def fig4_rows(sweep: SweepResult):
    """Box statistics per K and mode, then the spread decomposition.

    ``within_k`` is the widest best-to-worst range inside one K and
    ``between_k`` the range of the per-K best savings; both in savings
    fraction and in MWh per dataset period.
    """
    a0 = _alpha0(sweep)
    for mode in _modes(sweep):
        for k, table in savings_by_k(sweep, Strategy.C, mode, Assignment.BALANCED, a0).items():
            vals = np.array(sorted(table.values()))
            q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
            stats = {"min": vals[0], "q1": q1, "median": med, "q3": q3, "max": vals[-1],
                     "mean": statistics.fmean(vals)}
            for name, v in stats.items():
                yield "box", mode.value, k, name, float(v)
    for mode in _modes(sweep):
        try:
            spread = spread_decomposition(sweep, mode, alpha=a0)
        except ValueError:
            continue
        for kind in ("within_k", "between_k", "total"):
            yield kind, mode.value, "", "fraction", spread[kind]
            yield kind, mode.value, "", "mwh", spread[f"{kind}_mwh"]


def fig5_rows(sweep: SweepResult):
    a0 = _alpha0(sweep)
    for mode in _modes(sweep):
        _, per_k = assignment_gap(sweep, mode, a0)
        for k, g in per_k.items():
            yield k, mode.value, g["mean"], g["max"], g["min"]


def fig6_rows(sweep: SweepResult, top_n: int = TOP_N):
    a0 = _alpha0(sweep)
    bal = savings_by_k(sweep, Strategy.C, FractionMode.OPTIMIZED, Assignment.BALANCED, a0)
    wc = savings_by_k(sweep, Strategy.C, FractionMode.OPTIMIZED, Assignment.WORST_CASE, a0)
    flat = [(s, p) for table in bal.values() for p, s in table.items()]
    flat.sort(key=lambda sp: (-sp[0], sp[1].k, tuple(-c for c in sp[1])))
    for rank, (s, p) in enumerate(flat[:top_n], start=1):
        w = wc.get(p.k, {}).get(p)
        yield rank, p.k, str(p), s, w, (None if w is None else s - w)


def fig7_rows(sweep: SweepResult):
    cells: dict[tuple[float, str], list[float]] = {}
    for spec, res in sweep.results.items():
        if spec.strategy is Strategy.C and spec.assignment is Assignment.BALANCED:
            cells.setdefault((spec.alpha, spec.fraction_mode.value), []).append(
                res.savings_fraction)
    for (alpha, mode), vals in sorted(cells.items()):
        yield alpha, mode, statistics.fmean(vals), min(vals), max(vals), len(vals)


def fig8_rows(sweep: SweepResult, bins: int = HIST_BINS):
    ratios = [r for r in recovery_ratios(sweep, _alpha0(sweep)).values() if r is not None]
    if not ratios:
        return
    lo, hi = min(ratios), max(ratios)
    if hi == lo:
        hi = lo + 1e-6
    counts, edges = np.histogram(ratios, bins=bins, range=(lo, hi))
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        yield float(a), float(b), int(c)


_BUILDERS = {
    "fig2_savings_by_k.csv": fig2_rows,
    "fig3_strategy_comparison.csv": fig3_rows,
    "fig4_fixed_vs_optimized.csv": fig4_rows,
    "fig5_assignment_gap.csv": fig5_rows,
    "fig6_top_partitions.csv": fig6_rows,
    "fig7_alpha_sensitivity.csv": fig7_rows,
    "fig8_recovery_histogram.csv": fig8_rows,
}


def write_report(sweep: SweepResult, out_dir: str | Path) -> list[Path]:
    """Write all figure CSVs into *out_dir*; returns their paths in figure order."""
    if not sweep.results:
        raise DatasetError("sweep output holds no finished cells")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, header in REPORT_FILES.items():
        path = out / name
        _write(path, header, _BUILDERS[name](sweep))
        paths.append(path)
    return paths

