"""Reduced-order thermal-hydraulic model of a multi-subloop cooling plant.

Three sub-models make up the plant:

* aggregate pump power from the affinity law, ``P_pump = P_nom * (m / m_nom)**n_p``
* cooling-tower fan power, linear in rejected heat and inversely proportional
  to the approach ``T_sup - approach_base``
* a steady-state energy balance per subloop for the return temperature,
  ``T_ret,k = T_sup + Q_k / (f_k * m * c_p)``

Heat loads are in kW, flows in kg/s, temperatures in degC.  Only temperature
differences enter the physics.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ContractError, DomainError

# Bound checks on operating points tolerate solver round-off of this size.
BOUND_TOL = 1e-9
FRACTION_SUM_TOL = 1e-9


@dataclass(frozen=True)
class PlantParams:
    """Calibrated plant constants and actuator bounds.

    ``min_approach`` keeps the fan model away from its singularity: the
    lowest admissible supply temperature is ``approach_base + min_approach``
    whenever that is above ``t_sup_min``.
    """

    pump_power_nom: float = 17.18  # kW
    flow_nom: float = 190.0  # kg/s
    pump_exponent: float = 3.0
    ct_power_nom: float = 950.13  # kW
    q_rej_nom: float = 9170.7  # kW
    approach_nom: float = 4.0  # K
    approach_base: float = 23.5  # degC
    cp: float = 3500.0  # J/(kg K)
    t_limit: float = 42.0  # degC
    flow_min: float = 50.0
    flow_max: float = 450.0
    t_sup_min: float = 10.0
    t_sup_max: float = 35.0
    f_min: float = 0.05
    f_max: float = 0.95
    n_cdus: int = 25
    dt: float = 600.0  # s
    min_approach: float = 1.0  # K

    def __post_init__(self) -> None:
        positive = ("pump_power_nom", "flow_nom", "pump_exponent", "ct_power_nom",
                    "q_rej_nom", "approach_nom", "cp", "dt", "min_approach")
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if not self.flow_min < self.flow_nom < self.flow_max:
            raise DomainError("require flow_min < flow_nom < flow_max")
        if not self.t_sup_min < self.t_sup_max < self.t_limit:
            raise DomainError("require t_sup_min < t_sup_max < t_limit")
        if not 0 < self.f_min < self.f_max < 1:
            raise DomainError("require 0 < f_min < f_max < 1")
        if self.f_min * 2 > 1:
            raise DomainError("f_min too large for a two-subloop plant")
        if self.t_sup_max <= self.t_sup_floor:
            raise DomainError(
                "t_sup_max must exceed approach_base + min_approach "
                f"({self.t_sup_floor})"
            )
        if int(self.n_cdus) != self.n_cdus or self.n_cdus < 2:
            raise DomainError("n_cdus must be an integer >= 2")

    @property
    def t_sup_floor(self) -> float:
        """Lowest supply temperature at which the fan model is evaluable."""
        return max(self.t_sup_min, self.approach_base + self.min_approach)

    def supports(self, k: int) -> bool:
        """True if the fraction bounds admit a feasible split over *k* subloops."""
        return k * self.f_min <= 1.0 <= k * self.f_max

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PlantParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown plant parameter(s): {sorted(unknown)}")
        return cls(**dict(data))


@dataclass(frozen=True)
class OperatingPoint:
    """Decision variables at one timestep: total flow, supply temperature, fractions."""

    flow: float
    t_sup: float
    fractions: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if not self.fractions:
            raise ContractError("an operating point needs at least one fraction")
        if abs(math.fsum(self.fractions) - 1.0) > FRACTION_SUM_TOL:
            raise ContractError(f"fractions must sum to 1, got {math.fsum(self.fractions)!r}")

    @property
    def k(self) -> int:
        return len(self.fractions)

    def check(self, params: PlantParams, fraction_bounds: bool = False) -> None:
        """Raise ContractError if the point violates the actuator bounds.

        Fractions must always lie in ``(0, 1]``; the tighter ``[f_min, f_max]``
        box applies only to optimised splits and is checked when
        *fraction_bounds* is set.  A fixed proportional split ``n_k / N`` may
        fall below ``f_min`` for single-CDU subloops.
        """
        if not (params.flow_min - BOUND_TOL <= self.flow <= params.flow_max + BOUND_TOL):
            raise ContractError(
                f"flow {self.flow} outside [{params.flow_min}, {params.flow_max}]"
            )
        if not (params.t_sup_min - BOUND_TOL <= self.t_sup <= params.t_sup_max + BOUND_TOL):
            raise ContractError(
                f"t_sup {self.t_sup} outside [{params.t_sup_min}, {params.t_sup_max}]"
            )
        for f in self.fractions:
            if not 0.0 < f <= 1.0:
                raise ContractError(f"fraction {f} outside (0, 1]")
            if fraction_bounds and not (params.f_min - BOUND_TOL <= f
                                        <= params.f_max + BOUND_TOL):
                raise ContractError(f"fraction {f} outside [{params.f_min}, {params.f_max}]")


def fraction_box(params: PlantParams, k: int,
                 commissioned: Sequence[float] | None = None
                 ) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Per-subloop ``(lower, upper)`` bounds for an optimised split.

    The box is ``[f_min, f_max]``, widened where needed so that it contains the
    *commissioned* split: a fixed ``n_k / N`` split is hydraulically realisable
    by construction, so optimising the valves may always keep it.
    """
    lo = [params.f_min] * k
    hi = [params.f_max] * k
    if commissioned is not None:
        if len(commissioned) != k:
            raise ContractError(f"{len(commissioned)} commissioned fractions for {k} subloops")
        lo = [min(a, float(c)) for a, c in zip(lo, commissioned)]
        hi = [max(b, float(c)) for b, c in zip(hi, commissioned)]
    return tuple(lo), tuple(hi)


@dataclass(frozen=True)
class SubloopLoads:
    """Heat load per subloop (kW) and their total."""

    q: tuple[float, ...]
    q_tot: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        q = tuple(float(v) for v in self.q)
        object.__setattr__(self, "q", q)
        if any(not math.isfinite(v) or v < 0 for v in q):
            raise DomainError(f"subloop loads must be finite and >= 0, got {q}")
        total = math.fsum(q)
        if math.isnan(self.q_tot):
            object.__setattr__(self, "q_tot", total)
        elif abs(self.q_tot - total) > 1e-9 * max(abs(total), 1.0):
            raise ContractError(f"q_tot {self.q_tot} does not match sum of loads {total}")

    @property
    def k(self) -> int:
        return len(self.q)


def pump_power(flow: float, params: PlantParams) -> float:
    """Aggregate pump power in kW at total mass flow *flow* (kg/s)."""
    if flow < 0:
        raise DomainError(f"flow must be >= 0, got {flow}")
    return params.pump_power_nom * (flow / params.flow_nom) ** params.pump_exponent


def ct_fan_power(q_rej: float, t_sup: float, params: PlantParams) -> float:
    """Cooling-tower fan power in kW for rejected heat *q_rej* (kW) at *t_sup* (degC)."""
    approach = t_sup - params.approach_base
    if approach <= 0:
        raise DomainError(
            f"t_sup {t_sup} must exceed approach_base {params.approach_base}"
        )
    if q_rej < 0:
        raise DomainError(f"q_rej must be >= 0, got {q_rej}")
    return (params.ct_power_nom * (q_rej / params.q_rej_nom)
            * (params.approach_nom / approach))


def _check_dims(op: OperatingPoint, loads: SubloopLoads) -> None:
    if op.k != loads.k:
        raise ContractError(f"{op.k} fractions but {loads.k} subloop loads")


def subloop_return_temps(op: OperatingPoint, loads: SubloopLoads,
                         params: PlantParams) -> np.ndarray:
    """Return temperature of each subloop (degC)."""
    op.check(params)
    _check_dims(op, loads)
    f = np.asarray(op.fractions)
    sub_flow = f * op.flow
    if np.any(sub_flow <= 0):
        raise DomainError("every subloop needs positive flow")
    return op.t_sup + np.asarray(loads.q) * 1000.0 / (sub_flow * params.cp)


def total_power(op: OperatingPoint, loads: SubloopLoads, params: PlantParams) -> float:
    """Pump plus fan power (kW); the tower rejects the summed subloop load."""
    op.check(params)
    _check_dims(op, loads)
    return pump_power(op.flow, params) + ct_fan_power(loads.q_tot, op.t_sup, params)


def power_partials(flow: float, t_sup: float, q_tot: float,
                   params: PlantParams) -> tuple[float, float]:
    """(dP/dflow, dP/dt_sup) of the total power, in kW/(kg/s) and kW/K."""
    n = params.pump_exponent
    d_flow = n * params.pump_power_nom * flow ** (n - 1) / params.flow_nom ** n
    approach = t_sup - params.approach_base
    d_tsup = (-params.ct_power_nom * (q_tot / params.q_rej_nom)
              * params.approach_nom / approach ** 2)
    return d_flow, d_tsup


def objective_gradient(op: OperatingPoint, loads: SubloopLoads,
                       params: PlantParams) -> np.ndarray:
    """Gradient of total power over ``(flow, t_sup, f_1..f_K)``.

    The objective does not depend on the fractions, so their entries are zero.
    """
    op.check(params)
    _check_dims(op, loads)
    if op.t_sup <= params.approach_base:
        raise DomainError(f"t_sup {op.t_sup} must exceed approach_base")
    grad = np.zeros(op.k + 2)
    grad[0], grad[1] = power_partials(op.flow, op.t_sup, loads.q_tot, params)
    return grad


def proportional_fractions(counts: Sequence[int]) -> tuple[float, ...]:
    """Fixed hydraulic split ``f_k = n_k / N``."""
    total = sum(counts)
    return tuple(n / total for n in counts)
