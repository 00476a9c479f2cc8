"""Timestep telemetry: canonical CSV schema, validated ingestion, synthetic years.

Canonical layout (UTF-8, one header row)::

    timestamp,q_cdu_01,...,q_cdu_NN,baseline_flow_kg_s,baseline_t_sup_c

Loads are per-CDU heat rates in kW.  Rows that break a record invariant are
dropped and reported, never repaired.  To ingest another layout, convert it to
this schema first (see ``README.md``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetError, DomainError, ParseError
from .plant_model import PlantParams

# 2023-01-01T00:00:00Z
DEFAULT_START = 1672531200

MISSING = "missing value"
NON_NUMERIC = "non-numeric value"
BAD_LOAD = "non-positive or negative load"
BAD_BASELINE = "out-of-bounds baseline"
BAD_TIMESTAMP = "timestamp out of sequence"


def cdu_column(j: int, n_cdus: int) -> str:
    width = max(2, len(str(n_cdus)))
    return f"q_cdu_{j + 1:0{width}d}"


def header_for(n_cdus: int) -> list[str]:
    return (["timestamp"] + [cdu_column(j, n_cdus) for j in range(n_cdus)]
            + ["baseline_flow_kg_s", "baseline_t_sup_c"])


@dataclass(frozen=True)
class TimestepRecord:
    timestamp: float
    cdu_loads: tuple[float, ...]
    baseline_flow: float
    baseline_t_sup: float

    @property
    def q_tot(self) -> float:
        return math.fsum(self.cdu_loads)


@dataclass(frozen=True)
class Rejection:
    line_no: int
    reason: str

    def __str__(self) -> str:
        return f"{self.line_no},{self.reason}"


@dataclass(frozen=True)
class Dataset:
    """Time-ordered, validated records with a fixed step length.

    Timestamps are strictly increasing; gaps left by filtering are whole
    multiples of ``dt``.
    """

    records: tuple[TimestepRecord, ...]
    dt: float
    n_cdus: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise DatasetError("a dataset needs at least one record")
        prev = None
        for rec in self.records:
            if len(rec.cdu_loads) != self.n_cdus:
                raise DatasetError(f"record has {len(rec.cdu_loads)} loads, expected {self.n_cdus}")
            if prev is not None and not _on_grid(prev, rec.timestamp, self.dt):
                raise DatasetError(f"timestamp {rec.timestamp} out of sequence after {prev}")
            prev = rec.timestamp

    def __len__(self) -> int:
        return len(self.records)

    @cached_property
    def loads(self) -> np.ndarray:
        """``(T, N)`` per-CDU loads in kW."""
        arr = np.array([r.cdu_loads for r in self.records], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def baseline_flow(self) -> np.ndarray:
        arr = np.array([r.baseline_flow for r in self.records], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def baseline_t_sup(self) -> np.ndarray:
        arr = np.array([r.baseline_t_sup for r in self.records], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.records], dtype=float)

    def mean_cdu_loads(self) -> np.ndarray:
        return self.loads.mean(axis=0)


def _on_grid(prev: float, ts: float, dt: float) -> bool:
    gap = ts - prev
    if gap <= 0:
        return False
    steps = round(gap / dt)
    return steps >= 1 and abs(gap - steps * dt) <= 1e-6 * dt


def check_record(rec: TimestepRecord, params: PlantParams) -> str | None:
    """Reason code if *rec* breaks a record invariant, else None."""
    values = (rec.timestamp, rec.baseline_flow, rec.baseline_t_sup) + rec.cdu_loads
    if any(not math.isfinite(v) for v in values):
        return NON_NUMERIC
    if any(q < 0 for q in rec.cdu_loads) or not any(q > 0 for q in rec.cdu_loads):
        return BAD_LOAD
    if not params.flow_min <= rec.baseline_flow <= params.flow_max:
        return BAD_BASELINE
    # the fan model is undefined at or below the approach offset
    lo = max(params.t_sup_min, params.approach_base)
    if not (params.t_sup_min <= rec.baseline_t_sup <= params.t_sup_max
            and rec.baseline_t_sup > lo):
        return BAD_BASELINE
    return None


def read_dataset(path: str | Path,
                 params: PlantParams) -> tuple[Dataset, list[Rejection]]:
    """Read a canonical telemetry CSV, dropping invalid rows.

    Returns the surviving records (in file order) and one :class:`Rejection`
    per dropped row.  Structural problems raise :class:`ParseError`.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", 1) from None
        except (csv.Error, UnicodeDecodeError) as exc:
            raise ParseError(str(exc), 1) from exc
        n_cdus = len(header) - 3
        if n_cdus < 1 or [h.strip() for h in header] != header_for(n_cdus):
            raise ParseError("malformed header, expected timestamp,q_cdu_01,...,"
                             "baseline_flow_kg_s,baseline_t_sup_c", 1)
        if n_cdus != params.n_cdus:
            raise ParseError(f"file has {n_cdus} CDU columns, plant has {params.n_cdus}", 1)

        records: list[TimestepRecord] = []
        rejections: list[Rejection] = []
        line_no = 1
        try:
            for row in reader:
                line_no = reader.line_num
                if not row:
                    continue
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} columns, got {len(row)}", line_no)
                rec, reason = _parse_row(row, params)
                if reason is None and records and not _on_grid(
                        records[-1].timestamp, rec.timestamp, params.dt):
                    reason = BAD_TIMESTAMP
                if reason is None:
                    records.append(rec)
                else:
                    rejections.append(Rejection(line_no, reason))
        except (csv.Error, UnicodeDecodeError) as exc:
            raise ParseError(str(exc), line_no + 1) from exc
    if not records:
        raise DatasetError(f"{path}: no valid records ({len(rejections)} rejected)")
    return Dataset(tuple(records), params.dt, n_cdus), rejections


def _parse_row(row: Sequence[str], params: PlantParams):
    cells = [c.strip() for c in row]
    if any(c == "" for c in cells):
        return None, MISSING
    try:
        values = [float(c) for c in cells]
    except ValueError:
        return None, NON_NUMERIC
    ts = values[0]
    rec = TimestepRecord(
        timestamp=int(ts) if ts.is_integer() else ts,
        cdu_loads=tuple(values[1:-2]),
        baseline_flow=values[-2],
        baseline_t_sup=values[-1],
    )
    return rec, check_record(rec, params)


def _fmt(value: float) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write *dataset* in the canonical layout; floats use shortest round-trip form."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header_for(dataset.n_cdus))
        for rec in dataset.records:
            writer.writerow([_fmt(rec.timestamp)] + [_fmt(q) for q in rec.cdu_loads]
                            + [_fmt(rec.baseline_flow), _fmt(rec.baseline_t_sup)])


def format_rejections(rejections: Iterable[Rejection]) -> str:
    """Line-oriented ``line_no,reason`` report."""
    return "".join(f"{r}\n" for r in rejections)


def generate_synthetic(n_timesteps: int, n_cdus: int, spread: float, seed: int,
                       params: PlantParams, *, delta_t_design: float = 12.0,
                       t_sup_base: float = 30.0,
                       start: int = DEFAULT_START) -> Dataset:
    """Deterministic synthetic year standing in for measured telemetry.

    Per-CDU base loads are linearly spaced with ``max = min * (1 + spread)``
    and scaled so the plant total averages ``q_rej_nom``.  A daily sinusoid
    (15 % amplitude) and independent +/-5 % multiplicative noise per CDU and
    step are applied.  The baseline controller holds ``t_sup_base`` and sets
    flow for a ``delta_t_design`` rise, clamped to the flow bounds.  At the
    default 12 K rise and 30 degC supply the mixed return sits on the limit;
    a smaller rise (6 K) oversupplies flow the way fixed-setpoint plants do.
    """
    if int(n_timesteps) != n_timesteps or n_timesteps < 1:
        raise DomainError(f"n_timesteps must be an integer >= 1, got {n_timesteps}")
    if int(n_cdus) != n_cdus or n_cdus < 2:
        raise DomainError(f"n_cdus must be an integer >= 2, got {n_cdus}")
    if not 0.0 <= spread < 1.0:
        raise DomainError(f"spread must lie in [0, 1), got {spread}")
    if delta_t_design <= 0:
        raise DomainError("delta_t_design must be > 0")
    if not params.t_sup_min <= t_sup_base <= params.t_sup_max:
        raise DomainError("t_sup_base outside the supply temperature bounds")

    rng = np.random.default_rng(seed)
    base = 1.0 + spread * np.linspace(0.0, 1.0, n_cdus)
    base = base[rng.permutation(n_cdus)]
    base *= params.q_rej_nom / base.sum()

    steps = np.arange(n_timesteps)
    period = 86400.0 / params.dt
    profile = 1.0 + 0.15 * np.sin(2.0 * np.pi * steps / period)
    noise = rng.uniform(-0.05, 0.05, size=(n_timesteps, n_cdus))
    loads = base[None, :] * profile[:, None] * (1.0 + noise)

    totals = loads.sum(axis=1)
    flows = np.clip(totals * 1000.0 / (params.cp * delta_t_design),
                    params.flow_min, params.flow_max)

    records = tuple(
        TimestepRecord(
            timestamp=int(start + i * params.dt) if float(params.dt).is_integer()
            else start + i * params.dt,
            cdu_loads=tuple(float(v) for v in loads[i]),
            baseline_flow=float(flows[i]),
            baseline_t_sup=float(t_sup_base),
        )
        for i in range(n_timesteps)
    )
    return Dataset(records, params.dt, n_cdus)


def with_n_cdus(params: PlantParams, n_cdus: int) -> PlantParams:
    """Copy of *params* sized for *n_cdus* CDUs."""
    return PlantParams.from_dict({**params.to_dict(), "n_cdus": n_cdus})
