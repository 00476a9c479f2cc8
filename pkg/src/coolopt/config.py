"""Run configuration: JSON file, schema validation, and flag overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .errors import DomainError
from .plant_model import PlantParams
from .solver import SolverConfig
from .topology import Partition, design_space, parse_partition_list


def schema() -> dict:
    text = resources.files("coolopt").joinpath("config_schema.json").read_text("utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class SweepSettings:
    k_min: int = 2
    k_max: int = 6
    partitions: str | None = None  # explicit list, e.g. "(19,6),(14,6,5)"
    strategies: tuple[str, ...] = ("A", "B", "C")
    assignments: tuple[str, ...] = ("balanced", "worst_case")
    fraction_modes: tuple[str, ...] = ("proportional", "optimized")
    alphas: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if not 2 <= self.k_min <= self.k_max:
            raise DomainError(f"need 2 <= k_min <= k_max, got {self.k_min}..{self.k_max}")
        for name in ("strategies", "assignments", "fraction_modes", "alphas"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def resolve_partitions(self, n: int) -> list[Partition]:
        if self.partitions:
            parts = parse_partition_list(self.partitions)
            bad = [p for p in parts if p.n != n]
            if bad:
                raise DomainError(f"partition {bad[0]} does not cover {n} CDUs")
            return parts
        return design_space(n, self.k_min, self.k_max)


@dataclass(frozen=True)
class SyntheticSettings:
    steps: int = 1000
    spread: float = 0.24
    seed: int = 7
    design_rise: float = 12.0  # K, baseline controller's supply-return rise


@dataclass(frozen=True)
class RunConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    synthetic: SyntheticSettings = field(default_factory=SyntheticSettings)
    data: str | None = None
    out_dir: str = "coolopt-out"
    parallelism: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "plant": self.plant.to_dict(),
            "solver": asdict(self.solver),
            "sweep": {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in asdict(self.sweep).items() if v is not None},
            "synthetic": asdict(self.synthetic),
            "io": {k: v for k, v in (("data", self.data), ("out_dir", self.out_dir))
                   if v is not None},
            **({"parallelism": self.parallelism} if self.parallelism else {}),
        }


def _merge(base, overrides: Mapping[str, Any]):
    known = {f.name for f in fields(base)}
    unknown = set(overrides) - known
    if unknown:
        raise DomainError(f"unknown setting(s): {sorted(unknown)}")
    return replace(base, **overrides)


def from_mapping(data: Mapping[str, Any]) -> RunConfig:
    """Build a RunConfig from a mapping shaped like the JSON schema."""
    try:
        jsonschema.validate(dict(data), schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise DomainError(f"invalid config at {where}: {exc.message}") from None
    io = data.get("io", {})
    return RunConfig(
        plant=PlantParams.from_dict(data.get("plant", {})),
        solver=_merge(SolverConfig(), data.get("solver", {})),
        sweep=_merge(SweepSettings(), data.get("sweep", {})),
        synthetic=_merge(SyntheticSettings(), data.get("synthetic", {})),
        data=io.get("data"),
        out_dir=io.get("out_dir", RunConfig.out_dir),
        parallelism=data.get("parallelism"),
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DomainError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: not valid JSON ({exc})") from None
    return from_mapping(data)


def with_overrides(cfg: RunConfig, *, plant: Mapping[str, Any] | None = None,
                   solver: Mapping[str, Any] | None = None,
                   sweep: Mapping[str, Any] | None = None,
                   synthetic: Mapping[str, Any] | None = None,
                   **top: Any) -> RunConfig:
    """Apply flag values on top of *cfg*; ``None`` values leave settings untouched."""
    def clean(m):
        return {k: v for k, v in (m or {}).items() if v is not None}

    merged = dict(asdict(cfg.plant))
    merged.update(clean(plant))
    return replace(
        cfg,
        plant=PlantParams.from_dict(merged),
        solver=_merge(cfg.solver, clean(solver)),
        sweep=_merge(cfg.sweep, clean(sweep)),
        synthetic=_merge(cfg.synthetic, clean(synthetic)),
        **clean(top),
    )
