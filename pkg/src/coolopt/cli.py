"""``coolopt`` command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal failure.
The default worker count for ``sweep`` comes from ``COOLOPT_WORKERS``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from . import __version__
from ._slsqp import backend
from .config import RunConfig, load_config, with_overrides
from .errors import ContractError, DatasetError, DomainError
from .oracles import oracle_reduced_1d, oracle_strategy_a
from .plant_model import OperatingPoint, PlantParams, SubloopLoads, proportional_fractions
from .solver import solve_timestep
from .sweep import (
    BaselineEnergy,
    EvalSpec,
    evaluate_partition,
    read_summary_json,
    read_sweep_csv,
    run_sweep,
    write_summary_json,
    write_sweep_csv,
)
from .telemetry import (
    Dataset,
    format_rejections,
    generate_synthetic,
    read_dataset,
    write_dataset,
)
from .topology import Partition, enumerate_partitions

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("coolopt")


class UsageError(Exception):
    pass


# -- argument types -------------------------------------------------------------

def _spread(text: str) -> float:
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError(f"spread must lie in [0, 1), got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a value > 0, got {text}")
    return v


def _unit_float(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return v


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(" ", "").strip("()").split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _k_range(text: str) -> list[int]:
    """``3``, ``2..6`` or ``2,4,5``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            ks = list(range(int(lo), int(hi) + 1))
        else:
            ks = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected K, K1..K2 or K1,K2,..., got {text!r}")
    if not ks:
        raise argparse.ArgumentTypeError(f"empty K range {text!r}")
    return ks


def _csv_list(choices):
    def parse(text: str) -> tuple[str, ...]:
        items = tuple(t.strip() for t in text.split(",") if t.strip())
        bad = [t for t in items if t not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(
                f"choose from {', '.join(choices)}; got {text!r}")
        return items
    return parse


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coolopt",
        description="Partition design-space sweeps for multi-subloop cooling plants.")
    parser.add_argument("--version", action="version", version=f"coolopt {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def with_config(p):
        p.add_argument("--config", help="JSON run configuration; flags override it")
        return p

    def solver_flags(p):
        p.add_argument("--ftol", type=float, help="SLSQP function tolerance (default 1e-8)")
        p.add_argument("--max-iter", type=_positive_int, help="SLSQP iteration cap (default 200)")
        p.add_argument("--no-guard", action="store_true",
                       help="disable the oracle cross-check on converged solves")

    def data_flags(p):
        p.add_argument("--data", help="canonical telemetry CSV (default: synthetic)")
        p.add_argument("--steps", type=_positive_int, help="synthetic timesteps (default 1000)")
        p.add_argument("--spread", type=_spread, help="synthetic load spread (default 0.24)")
        p.add_argument("--seed", type=int, help="synthetic seed (default 7)")
        p.add_argument("--design-rise", type=_positive_float,
                       help="synthetic baseline supply-return rise in K (default 12)")

    g = with_config(sub.add_parser("gen-data", help="write a synthetic telemetry file"))
    g.add_argument("--steps", type=_positive_int)
    g.add_argument("--cdus", type=_positive_int)
    g.add_argument("--spread", type=_spread)
    g.add_argument("--seed", type=int)
    g.add_argument("--design-rise", type=_positive_float,
                   help="baseline supply-return rise in K (default 12)")
    g.add_argument("-o", "--out", default="telemetry.csv")

    e = sub.add_parser("enumerate", help="list or count partitions of N CDUs")
    e.add_argument("--n", type=_positive_int, default=25)
    e.add_argument("--k", type=_k_range, default=[2, 3, 4, 5, 6], help="K, K1..K2 or list")
    e.add_argument("--count-only", action="store_true")

    s = with_config(sub.add_parser("solve", help="solve a single timestep"))
    s.add_argument("--strategy", choices=["A", "B", "C"], default="C")
    s.add_argument("--loads", type=_floats, required=True, help="subloop loads in kW, e.g. 4000,3000")
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--fractions", type=_floats, help="fixed flow split (default equal)")
    grp.add_argument("--partition", help="derive the proportional split from CDU counts")
    s.add_argument("--t-sup", type=float, default=30.0, help="baseline supply temperature")
    s.add_argument("--flow", type=float, help="baseline flow (cold-start seed)")
    s.add_argument("--oracle", action="store_true", help="also print the reference solution")
    s.add_argument("--json", action="store_true")
    solver_flags(s)

    v = with_config(sub.add_parser("evaluate", help="annual energy of one partition"))
    v.add_argument("--partition", required=True)
    v.add_argument("--strategy", choices=["A", "B", "C"], default="C")
    v.add_argument("--assignment", choices=["balanced", "worst_case"], default="balanced")
    v.add_argument("--fraction-mode", choices=["proportional", "optimized"])
    v.add_argument("--alpha", type=_unit_float, default=0.0)
    v.add_argument("--trace", help="write a per-timestep CSV trace here")
    data_flags(v)
    solver_flags(v)

    w = with_config(sub.add_parser("sweep", help="evaluate the partition design space"))
    data_flags(w)
    solver_flags(w)
    w.add_argument("--out-dir")
    w.add_argument("--partitions", help='explicit list, e.g. "(19,6),(14,6,5)"')
    w.add_argument("--k-min", type=_positive_int)
    w.add_argument("--k-max", type=_positive_int)
    w.add_argument("--strategies", type=_csv_list(["A", "B", "C"]))
    w.add_argument("--assignments", type=_csv_list(["balanced", "worst_case"]))
    w.add_argument("--fraction-modes", type=_csv_list(["proportional", "optimized"]))
    w.add_argument("--alphas", type=_floats)
    w.add_argument("--workers", type=_positive_int, help="default: $COOLOPT_WORKERS or 1")
    w.add_argument("--resume", action="store_true", help="reuse finished cells from a checkpoint")

    r = sub.add_parser("report", help="emit per-figure CSVs from sweep output")
    r.add_argument("--sweep-dir", default="coolopt-out")
    r.add_argument("--out-dir", help="default: <sweep-dir>/report")
    return parser


# -- helpers --------------------------------------------------------------------------

def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    solver = {}
    if getattr(args, "ftol", None) is not None:
        solver["ftol"] = args.ftol
    if getattr(args, "max_iter", None) is not None:
        solver["max_iter"] = args.max_iter
    if getattr(args, "no_guard", False):
        solver["guard"] = False
    synthetic = {k: getattr(args, k, None)
                 for k in ("steps", "spread", "seed", "design_rise")}
    return with_overrides(cfg, solver=solver, synthetic=synthetic,
                          data=getattr(args, "data", None))


def _load_data(cfg: RunConfig) -> tuple[Dataset, PlantParams, list]:
    params = cfg.plant
    if cfg.data:
        dataset, rejections = read_dataset(cfg.data, params)
        if rejections:
            log.warning("%d rows rejected from %s", len(rejections), cfg.data)
        return dataset, params, rejections
    syn = cfg.synthetic
    log.info("no --data given: synthetic dataset, %d steps, spread %g, seed %d",
             syn.steps, syn.spread, syn.seed)
    return _synthetic(syn, params.n_cdus, params), params, []


def _synthetic(syn, n_cdus: int, params: PlantParams) -> Dataset:
    return generate_synthetic(syn.steps, n_cdus, syn.spread, syn.seed, params,
                              delta_t_design=syn.design_rise)


def _parse_partition(text: str) -> Partition:
    try:
        return Partition.parse(text)
    except (DomainError, ValueError) as exc:
        raise UsageError(f"bad partition {text!r}: {exc}") from None


def _out(line: str = "") -> None:
    sys.stdout.write(line + "\n")


# -- commands -------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = _config(args)
    syn = cfg.synthetic
    params = cfg.plant
    if args.cdus is not None and args.cdus != params.n_cdus:
        params = PlantParams.from_dict({**params.to_dict(), "n_cdus": args.cdus})
    ds = _synthetic(syn, params.n_cdus, params)
    write_dataset(ds, args.out)
    _out(f"wrote {len(ds)} timesteps x {ds.n_cdus} CDUs to {args.out}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if any(k < 2 for k in args.k):
        raise UsageError("K=1 is degenerate: a single subloop has no CDU allocation to "
                         "choose, so it is not part of the design space (use K >= 2)")
    total = 0
    counts = []
    for k in args.k:
        parts = enumerate_partitions(args.n, k)
        counts.append(len(parts))
        total += len(parts)
        if not args.count_only:
            for p in parts:
                _out(str(p))
    if args.count_only:
        for k, c in zip(args.k, counts):
            _out(f"K={k}: {c}")
        _out(f"total: {total}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _config(args)
    params = cfg.plant
    loads = SubloopLoads(args.loads)
    if args.partition:
        part = _parse_partition(args.partition)
        if part.k != loads.k:
            raise UsageError(f"partition has {part.k} parts but {loads.k} loads were given")
        fractions = proportional_fractions(part)
    elif args.fractions:
        fractions = args.fractions
        if len(fractions) != loads.k:
            raise UsageError(f"{len(fractions)} fractions for {loads.k} loads")
        OperatingPoint(params.flow_nom, args.t_sup, fractions)
    else:
        fractions = (1.0 / loads.k,) * loads.k
    res = solve_timestep(args.strategy, loads, args.t_sup, params, None, cfg.solver,
                         fractions=fractions, baseline_flow=args.flow)
    rows = {"solver": {"flow": res.op.flow, "t_sup": res.op.t_sup,
                       "fractions": list(res.op.fractions), "power_kw": res.power,
                       "status": res.status.value, "iterations": res.iterations,
                       "max_return_temp": res.max_return_temp}}
    if args.oracle:
        if args.strategy == "A":
            ref = oracle_strategy_a(loads, fractions, args.t_sup, params)
        else:
            ref = oracle_reduced_1d(args.strategy, loads, fractions, params)
        t_ret = [ref.op.t_sup + q * 1000.0 / (f * ref.op.flow * params.cp)
                 for q, f in zip(loads.q, ref.op.fractions)]
        rows["oracle"] = {"flow": ref.op.flow, "t_sup": ref.op.t_sup,
                          "fractions": list(ref.op.fractions), "power_kw": ref.power,
                          "status": "feasible" if ref.feasible else "infeasible",
                          "iterations": None, "max_return_temp": max(t_ret)}
    if args.json:
        _out(json.dumps(rows, indent=2))
        return EXIT_OK
    names = list(rows)
    _out(f"{'':18}" + "".join(f"{n:>22}" for n in names))
    for key in ("flow", "t_sup", "fractions", "power_kw", "max_return_temp", "status",
                "iterations"):
        cells = []
        for n in names:
            v = rows[n][key]
            if isinstance(v, float):
                v = f"{v:.6g}" if key != "flow" else f"{v:.3f}"
            elif isinstance(v, list):
                v = ",".join(f"{x:.4f}" for x in v)
            cells.append(f"{'-' if v is None else v:>22}")
        _out(f"{key:18}" + "".join(cells))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    dataset, params, _ = _load_data(cfg)
    part = _parse_partition(args.partition)
    mode = args.fraction_mode or ("optimized" if args.strategy == "C" else "proportional")
    try:
        spec = EvalSpec(part, args.assignment, args.strategy, mode, args.alpha)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    if part.n != dataset.n_cdus:
        raise UsageError(f"partition {part} covers {part.n} CDUs, dataset has {dataset.n_cdus}")
    t0 = time.perf_counter()
    res = evaluate_partition(spec, dataset, params, cfg.solver, debug_path=args.trace)
    _out(f"spec              {spec.label()}")
    _out(f"energy_kwh        {res.energy_kwh:.3f}")
    _out(f"baseline_kwh      {res.baseline_energy_kwh:.3f}")
    _out(f"savings           {100 * res.savings_fraction:.4f} %")
    _out(f"infeasible        {res.infeasible_count}")
    _out(f"fallback          {res.fallback_count}")
    _out(f"violations        {res.violation_count}")
    _out(f"timesteps         {res.n_steps}")
    _out(f"elapsed_s         {time.perf_counter() - t0:.2f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    sweep_over = {"partitions": args.partitions, "k_min": args.k_min, "k_max": args.k_max,
                  "strategies": args.strategies, "assignments": args.assignments,
                  "fraction_modes": args.fraction_modes, "alphas": args.alphas}
    cfg = with_overrides(cfg, sweep=sweep_over, out_dir=args.out_dir, parallelism=args.workers)
    dataset, params, rejections = _load_data(cfg)
    partitions = cfg.sweep.resolve_partitions(dataset.n_cdus)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if rejections:
        (out / "rejections.csv").write_text("line_no,reason\n" + format_rejections(rejections))
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")

    last = [0.0]

    def progress(done: int, total: int, spec: EvalSpec) -> None:
        now = time.perf_counter()
        if done == total or now - last[0] > 2.0:
            last[0] = now
            sys.stderr.write(f"\r{done}/{total} cells")
            if done == total:
                sys.stderr.write("\n")
            sys.stderr.flush()

    sweep = run_sweep(partitions, dataset, params, cfg.solver, cfg.parallelism,
                      strategies=cfg.sweep.strategies, assignments=cfg.sweep.assignments,
                      fraction_modes=cfg.sweep.fraction_modes, alphas=cfg.sweep.alphas,
                      checkpoint=out / "sweep.partial.csv", resume=args.resume,
                      progress=progress)
    write_sweep_csv(sweep, out / "sweep.csv")
    write_summary_json(sweep, out / "summary.json", {
        "dataset": {"source": cfg.data or "synthetic", "timesteps": len(dataset),
                    "n_cdus": dataset.n_cdus, "rejected_rows": len(rejections)},
        "solver_backend": backend(),
    })
    summ = read_summary_json(out / "summary.json")
    _out(f"{len(partitions)} partitions, {len(sweep.results)} cells, "
         f"{len(sweep.failed)} failed, {sweep.elapsed_s:.1f} s")
    _out(f"baseline {sweep.baseline.total_kwh:.1f} kWh "
         f"(pump {sweep.baseline.pump_kwh:.1f}, fan {sweep.baseline.fan_kwh:.1f})")
    rows = summ.get("best_per_k", [])
    if rows:
        _out(f"{'K':>2}  {'best partition':<22}{'s_A %':>9}{'s_B %':>9}{'s_C %':>9}{'r %':>9}")

        def pct(v):
            return f"{100 * v:9.3f}" if v is not None else f"{'-':>9}"
        for row in rows:
            _out(f"{row['K']:>2}  {row['partition']:<22}{pct(row['s_A'])}{pct(row['s_B'])}"
                 f"{pct(row['s_C'])}{pct(row['recovery'])}")
    _out(f"results in {out}/sweep.csv and {out}/summary.json")
    return EXIT_OK if not sweep.failed else EXIT_INTERNAL


def cmd_report(args) -> int:
    from .report import write_report

    src = Path(args.sweep_dir)
    for name in ("sweep.csv", "summary.json"):
        if not (src / name).exists():
            raise DatasetError(f"missing sweep output: {src / name} (run `coolopt sweep` first)")
    summ = read_summary_json(src / "summary.json")
    base = summ["baseline_kwh"]
    sweep = read_sweep_csv(src / "sweep.csv", BaselineEnergy(base["pump"], base["fan"]))
    out = Path(args.out_dir) if args.out_dir else src / "report"
    for path in write_report(sweep, out):
        _out(str(path))
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "enumerate": cmd_enumerate, "solve": cmd_solve,
            "evaluate": cmd_evaluate, "sweep": cmd_sweep, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"coolopt {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except DatasetError as exc:
        sys.stderr.write(f"coolopt {args.command}: data error: {exc}\n")
        return EXIT_DATA
    except (DomainError, ContractError) as exc:
        sys.stderr.write(f"coolopt {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except KeyboardInterrupt:
        sys.stderr.write("\ninterrupted; finished cells are kept in the checkpoint, "
                         "rerun with --resume\n")
        return 130
    except Exception as exc:  # noqa: BLE001 - reported as an internal failure
        log.debug("internal failure", exc_info=True)
        sys.stderr.write(f"coolopt {args.command}: internal error: "
                         f"{type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
