"""Per-timestep constrained minimisation of plant power.

At each timestep the plant chooses total flow ``m``, supply temperature
``T_sup`` and (strategy C only) subloop flow fractions ``f`` to minimise
pump + fan power subject to

* ``T_sup + Q_k / (f_k m c_p) <= T_limit`` for every subloop,
* actuator bounds on ``m`` and ``T_sup``,
* ``f_min <= f_k <= f_max`` and ``sum f = 1``, the box widened where the
  commissioned proportional split lies outside it.

Strategy A holds ``T_sup`` at the measured value and ``f`` proportional to the
CDU counts; strategy B frees ``T_sup``; strategy C also frees ``f``.  The NLP
is solved by SLSQP with analytical gradients.  Variables are scaled to O(1):
``(m / m_nom, T_sup / 10, f)``, objective divided by the nominal plant power.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _slsqp
from .errors import ContractError, DomainError
from .oracles import equalized_fractions, oracle_reduced_1d, oracle_strategy_a
from .plant_model import (
    OperatingPoint,
    PlantParams,
    SubloopLoads,
    ct_fan_power,
    fraction_box,
    power_partials,
    pump_power,
)

T_SCALE = 10.0
CONSTRAINT_TOL = 1e-6


class Strategy(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"

    def __str__(self) -> str:
        return self.value


class Status(str, enum.Enum):
    CONVERGED = "converged"
    FALLBACK_PREVIOUS = "fallback_previous"
    CLAMPED_INFEASIBLE = "clamped_infeasible"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SolverConfig:
    """SLSQP settings.

    ``guard`` cross-checks every converged solve against the 1-D oracle and
    adopts the oracle point when it is cheaper by more than ``guard_rtol``.
    """

    ftol: float = 1e-8
    max_iter: int = 200
    warm_start: bool = True
    guard: bool = True
    guard_rtol: float = 1e-7

    def __post_init__(self) -> None:
        if not self.ftol > 0:
            raise DomainError("ftol must be > 0")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise DomainError("max_iter must be an integer >= 1")
        if self.guard_rtol < 0:
            raise DomainError("guard_rtol must be >= 0")


@dataclass(frozen=True)
class SolveResult:
    op: OperatingPoint
    power: float
    status: Status
    iterations: int
    max_return_temp: float
    guarded: bool = False


def return_temps(op: OperatingPoint, loads: SubloopLoads, params: PlantParams) -> np.ndarray:
    f = np.asarray(op.fractions)
    return op.t_sup + np.asarray(loads.q) * 1000.0 / (f * op.flow * params.cp)


def constraint_values(op: OperatingPoint, loads: SubloopLoads, params: PlantParams,
                      commissioned: Sequence[float] | None = None) -> np.ndarray:
    """Residuals of every constraint; all ``>= 0`` (equality ``~ 0``) iff feasible.

    Layout: ``T_limit - T_ret,k`` for each k, then flow lower/upper slack,
    ``T_sup`` lower/upper slack, each ``f_k`` lower/upper slack, and finally
    ``1 - sum f``.  Violations are reported as negative values, never masked.
    The fraction box is :func:`fraction_box` around *commissioned*.
    """
    if op.k != loads.k:
        raise ContractError(f"{op.k} fractions but {loads.k} subloop loads")
    f = np.asarray(op.fractions)
    thermal = params.t_limit - return_temps(op, loads, params)
    bounds = [op.flow - params.flow_min, params.flow_max - op.flow,
              op.t_sup - params.t_sup_min, params.t_sup_max - op.t_sup]
    lo, hi = fraction_box(params, op.k, commissioned)
    frac = np.column_stack([f - np.asarray(lo), np.asarray(hi) - f]).ravel()
    return np.concatenate([thermal, bounds, frac, [1.0 - math.fsum(op.fractions)]])


def min_residual(op: OperatingPoint, loads: SubloopLoads, params: PlantParams,
                 fraction_bounds: bool = True,
                 commissioned: Sequence[float] | None = None) -> float:
    """Most negative residual from :func:`constraint_values` (equality as ``-|r|``).

    Fixed splits (strategies A and B) are exempt from the fraction box, so
    pass ``fraction_bounds=False`` for them.
    """
    r = constraint_values(op, loads, params, commissioned)
    k = loads.k
    keep = r[:k + 4] if not fraction_bounds else r[:-1]
    return float(min(keep.min(), -abs(r[-1])))


class _Problem:
    """Scaled NLP for one timestep and strategy."""

    def __init__(self, strategy: Strategy, loads: SubloopLoads, fixed_f: Sequence[float] | None,
                 fixed_t: float | None, params: PlantParams,
                 commissioned: Sequence[float] | None = None):
        self.strategy = strategy
        self.params = params
        self.q = np.asarray(loads.q, float)
        self.q_tot = loads.q_tot
        self.k = loads.k
        self.p_ref = params.pump_power_nom + params.ct_power_nom
        self.heat = self.q * 1000.0 / params.cp  # K kg/s per subloop
        self.fixed_f = None if fixed_f is None else np.asarray(fixed_f, float)
        self.fixed_t = fixed_t
        p = params
        self.n_var = {Strategy.A: 1, Strategy.B: 2, Strategy.C: 2 + self.k}[strategy]
        lo = [p.flow_min / p.flow_nom]
        hi = [p.flow_max / p.flow_nom]
        if strategy is not Strategy.A:
            lo.append(p.t_sup_floor / T_SCALE)
            hi.append(p.t_sup_max / T_SCALE)
        if strategy is Strategy.C:
            f_lo, f_hi = fraction_box(p, self.k, commissioned)
            lo += f_lo
            hi += f_hi
        self.xl = np.array(lo)
        self.xu = np.array(hi)
        self.meq = 1 if strategy is Strategy.C else 0

    def unpack(self, x: np.ndarray) -> tuple[float, float, np.ndarray]:
        m = x[0] * self.params.flow_nom
        t = self.fixed_t if self.strategy is Strategy.A else x[1] * T_SCALE
        f = x[2:] if self.strategy is Strategy.C else self.fixed_f
        return m, t, f

    def pack(self, op: OperatingPoint) -> np.ndarray:
        x = [op.flow / self.params.flow_nom]
        if self.strategy is not Strategy.A:
            x.append(op.t_sup / T_SCALE)
        if self.strategy is Strategy.C:
            x.extend(op.fractions)
        return np.array(x, float)

    def objective(self, x: np.ndarray) -> float:
        m, t, _ = self.unpack(x)
        p = self.params
        return (pump_power(m, p) + ct_fan_power(self.q_tot, t, p)) / self.p_ref

    def gradient(self, x: np.ndarray) -> np.ndarray:
        m, t, _ = self.unpack(x)
        d_m, d_t = power_partials(m, t, self.q_tot, self.params)
        g = np.zeros(self.n_var)
        g[0] = d_m * self.params.flow_nom / self.p_ref
        if self.strategy is not Strategy.A:
            g[1] = d_t * T_SCALE / self.p_ref
        return g

    def constraints(self, x: np.ndarray) -> np.ndarray:
        m, t, f = self.unpack(x)
        thermal = self.params.t_limit - t - self.heat / (f * m)
        if self.meq:
            return np.concatenate([[x[2:].sum() - 1.0], thermal])
        return thermal

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        m, t, f = self.unpack(x)
        rise = self.heat / (f * m)
        k = self.k
        jac = np.zeros((self.meq + k, self.n_var))
        rows = slice(self.meq, self.meq + k)
        jac[rows, 0] = rise / x[0]
        if self.strategy is not Strategy.A:
            jac[rows, 1] = -T_SCALE
        if self.strategy is Strategy.C:
            jac[0, 2:] = 1.0
            jac[self.meq + np.arange(k), 2 + np.arange(k)] = rise / f
        return jac

    def to_point(self, x: np.ndarray) -> OperatingPoint:
        x = np.clip(x, self.xl, self.xu)
        m, t, f = self.unpack(x)
        if self.strategy is Strategy.C:
            f = _normalise(f, self.xl[2:], self.xu[2:])
        return OperatingPoint(float(m), float(t), tuple(f))


def _normalise(f: Sequence[float], lo: np.ndarray, hi: np.ndarray) -> tuple[float, ...]:
    f = np.clip(np.asarray(f, float), lo, hi)
    f = f / f.sum()
    f = np.clip(f, lo, hi)
    out = [float(v) for v in f]
    slack = 1.0 - math.fsum(out)
    i = max(range(len(out)), key=lambda j: (lo[j] <= out[j] + slack <= hi[j], out[j]))
    out[i] += slack
    return tuple(out)


def _finish(op: OperatingPoint, loads: SubloopLoads, params: PlantParams, status: Status,
            iterations: int, guarded: bool = False) -> SolveResult:
    power = pump_power(op.flow, params) + ct_fan_power(loads.q_tot, op.t_sup, params)
    t_ret = return_temps(op, loads, params)
    return SolveResult(op, power, status, iterations, float(t_ret.max()), guarded)


def _in_bounds(op: OperatingPoint, prob: _Problem) -> bool:
    x = prob.pack(op)
    return bool(np.all(x >= prob.xl - 1e-12) and np.all(x <= prob.xu + 1e-12))


def _capacity_point(strategy: Strategy, loads: SubloopLoads, fixed_f,
                    baseline_t_sup: float, params: PlantParams) -> OperatingPoint:
    """Most cooling the plant can deliver: flow_max, coldest supply, best split."""
    if strategy is Strategy.C:
        f = equalized_fractions(loads.q, *fraction_box(params, loads.k, fixed_f))
    else:
        f = tuple(fixed_f)
    t = baseline_t_sup if strategy is Strategy.A else params.t_sup_floor
    return OperatingPoint(params.flow_max, t, f)


def solve_timestep(strategy: Strategy | str, loads: SubloopLoads, baseline_t_sup: float,
                   params: PlantParams, warm: OperatingPoint | None = None,
                   cfg: SolverConfig = SolverConfig(), *,
                   fractions: Sequence[float] | None = None,
                   baseline_flow: float | None = None) -> SolveResult:
    """Minimise plant power at one timestep under *strategy*.

    *fractions* are the fixed (proportional) split used by strategies A and B.
    For C they are the cold-start split, and C's fraction box is widened to
    contain them so that C can always do at least as well as B.  *warm* is the previous timestep's
    point: it seeds the iterate when it lies inside the current bounds and is
    returned with status ``fallback_previous`` if SLSQP fails from both the
    warm and the cold start.  Without a previous point the 1-D oracle point
    stands in for it.  A genuinely infeasible timestep returns the
    maximum-cooling point with status ``clamped_infeasible``.
    """
    strategy = Strategy(strategy)
    if not loads.q_tot > 0:
        raise DomainError(f"total load must be positive, got {loads.q_tot}")
    k = loads.k
    if not params.supports(k):
        raise DomainError(f"fraction bounds admit no split over {k} subloops")
    if warm is not None and warm.k != k:
        raise ContractError(f"warm point has {warm.k} fractions, loads have {k} subloops")
    if fractions is None:
        if strategy is not Strategy.C:
            raise ContractError(f"strategy {strategy} needs fixed fractions")
        fractions = (1.0 / k,) * k
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != k:
        raise ContractError(f"{len(fractions)} fractions for {k} subloops")
    if strategy is Strategy.A:
        t_fixed = baseline_t_sup
        if not params.t_sup_min <= t_fixed <= params.t_sup_max:
            raise DomainError(f"baseline t_sup {t_fixed} outside supply bounds")
        if t_fixed <= params.approach_base:
            raise DomainError(f"baseline t_sup {t_fixed} at or below approach_base")
    else:
        t_fixed = None

    # infeasible even at maximum cooling: report the clamped point and move on
    cap = _capacity_point(strategy, loads, fractions, baseline_t_sup, params)
    free_f = strategy is Strategy.C
    if min_residual(cap, loads, params, free_f, fractions) < -CONSTRAINT_TOL:
        return _finish(cap, loads, params, Status.CLAMPED_INFEASIBLE, 0)

    prob = _Problem(strategy, loads, fractions if strategy is not Strategy.C else None,
                    t_fixed, params, fractions)
    cold_flow = baseline_flow if baseline_flow is not None else params.flow_nom
    cold_flow = min(max(cold_flow, params.flow_min), params.flow_max)
    cold_t = min(max(baseline_t_sup, params.t_sup_floor), params.t_sup_max)
    if strategy is Strategy.A:
        cold_t = baseline_t_sup
    cold = OperatingPoint(cold_flow, cold_t, fractions)

    starts = []
    if warm is not None and cfg.warm_start:
        seed = OperatingPoint(warm.flow, cold_t if strategy is Strategy.A else warm.t_sup,
                              warm.fractions if strategy is Strategy.C else fractions)
        if _in_bounds(seed, prob):
            starts.append(seed)
    starts.append(cold)

    iterations = 0
    for start in starts:
        out = _slsqp.minimize_slsqp(prob.objective, prob.gradient, prob.constraints,
                                    prob.jacobian, prob.pack(start), prob.xl, prob.xu,
                                    prob.meq, ftol=cfg.ftol, maxiter=cfg.max_iter)
        iterations += out.nit
        if not out.success:
            continue
        op = prob.to_point(out.x)
        if min_residual(op, loads, params, free_f, fractions) < -CONSTRAINT_TOL:
            continue
        result = _finish(op, loads, params, Status.CONVERGED, iterations)
        if cfg.guard and strategy is not Strategy.A:
            ref = oracle_reduced_1d(strategy.value, loads, fractions, params)
            if ref.feasible and ref.power < result.power * (1.0 - cfg.guard_rtol):
                result = _finish(ref.op, loads, params, Status.CONVERGED, iterations, True)
        elif cfg.guard and strategy is Strategy.A:
            ref = oracle_strategy_a(loads, fractions, baseline_t_sup, params)
            if ref.feasible and ref.power < result.power * (1.0 - cfg.guard_rtol):
                result = _finish(ref.op, loads, params, Status.CONVERGED, iterations, True)
        return result

    if warm is not None:
        fallback = warm
        if strategy is Strategy.A:
            fallback = replace(warm, t_sup=baseline_t_sup, fractions=fractions)
        elif strategy is Strategy.B:
            fallback = replace(warm, fractions=fractions)
    elif strategy is Strategy.A:
        fallback = oracle_strategy_a(loads, fractions, baseline_t_sup, params).op
    else:
        fallback = oracle_reduced_1d(strategy.value, loads, fractions, params).op
    return _finish(fallback, loads, params, Status.FALLBACK_PREVIOUS, iterations)
