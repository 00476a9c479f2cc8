"""Closed-form and one-dimensional reference solutions for the timestep problem.

These do not share code with the NLP path in :mod:`coolopt.solver`; they
exploit the structure of the problem instead.  Power does not depend on the
fractions, and fan power falls as supply temperature rises, so at the optimum
the hottest subloop sits exactly on the return-temperature limit (or the
supply temperature sits on its upper bound).  For a fixed effective intensity
``I = max_k Q_k / f_k`` that leaves a convex function of total flow alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import DomainError, InfeasibleError
from .plant_model import (
    OperatingPoint,
    PlantParams,
    SubloopLoads,
    ct_fan_power,
    fraction_box,
    pump_power,
)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class OracleResult:
    op: OperatingPoint
    power: float
    feasible: bool


def golden_section(f: Callable[[float], float], a: float, b: float,
                   tol: float = 1e-6) -> tuple[float, float]:
    """Minimise a unimodal *f* on ``[a, b]``; returns ``(x, f(x))``.

    The bracket is shrunk until narrower than *tol*; the best of the bracket
    midpoint and both original endpoints is returned so that minima on a
    bound are hit exactly.
    """
    lo, hi = min(a, b), max(a, b)
    f_lo, f_hi = f(lo), f(hi)
    h = hi - lo
    if h > tol:
        c = lo + INV_PHI2 * h
        d = lo + INV_PHI * h
        yc, yd = f(c), f(d)
        a_, b_ = lo, hi
        while b_ - a_ > tol:
            if yc < yd:
                b_, d, yd = d, c, yc
                c = a_ + INV_PHI2 * (b_ - a_)
                yc = f(c)
            else:
                a_, c, yc = c, d, yd
                d = a_ + INV_PHI * (b_ - a_)
                yd = f(d)
        mid = 0.5 * (a_ + b_)
        candidates = [(f(mid), mid), (f_lo, lo), (f_hi, hi)]
    else:
        candidates = [(f_lo, lo), (f_hi, hi)]
    fx, x = min(candidates)
    return x, fx


def equalized_fractions(q: Sequence[float], f_min: float | Sequence[float],
                        f_max: float | Sequence[float]) -> tuple[float, ...]:
    """Fractions minimising ``max_k q_k / f_k`` under box bounds and ``sum f = 1``.

    Bounds are scalars or one value per subloop.  The optimum is
    ``f_k = clip(q_k / lam, lo_k, hi_k)`` with *lam* chosen so the fractions
    sum to one.  The sum is piecewise ``a + b / lam`` between the breakpoints
    ``q_k / hi_k`` and ``q_k / lo_k``, so *lam* is solved exactly on the
    bracketing segment.
    """
    k = len(q)
    lo = _per_subloop(f_min, k)
    hi = _per_subloop(f_max, k)
    if any(a > b for a, b in zip(lo, hi)) or not math.fsum(lo) <= 1.0 <= math.fsum(hi):
        raise DomainError(f"bounds [{f_min}, {f_max}] admit no split over {k} subloops")
    if math.fsum(q) <= 0:
        raise DomainError("need a positive total load")

    def clipped(lam: float) -> list[float]:
        return [min(max(v / lam, a), b) for v, a, b in zip(q, lo, hi)]

    breaks = sorted({v / f for v, a, b in zip(q, lo, hi) if v > 0 for f in (a, b)})
    prev = 0.0
    for bp in breaks:
        if math.fsum(clipped(bp)) <= 1.0:
            break
        prev = bp
    else:
        bp = breaks[-1]
    probe = 0.5 * (prev + bp) if prev > 0 else 0.5 * bp
    n_fixed = 0.0
    q_free = 0.0
    for v, a, b in zip(q, lo, hi):
        r = v / probe
        if r <= a:
            n_fixed += a
        elif r >= b:
            n_fixed += b
        else:
            q_free += v
    room = 1.0 - n_fixed
    lam = q_free / room if q_free > 0 and room > 0 else bp
    f = clipped(lam)
    # absorb rounding in the largest fraction that stays inside its bounds
    slack = 1.0 - math.fsum(f)
    i_big = max(range(k), key=lambda i: (lo[i] <= f[i] + slack <= hi[i], f[i]))
    f[i_big] += slack
    return tuple(f)


def _per_subloop(bound: float | Sequence[float], k: int) -> tuple[float, ...]:
    if isinstance(bound, (int, float)):
        return (float(bound),) * k
    out = tuple(float(b) for b in bound)
    if len(out) != k:
        raise DomainError(f"{len(out)} bounds for {k} subloops")
    return out


def max_intensity(q: Sequence[float], fractions: Sequence[float]) -> float:
    return max(v / f for v, f in zip(q, fractions))


def oracle_strategy_a(loads: SubloopLoads, fractions: Sequence[float],
                      baseline_t_sup: float, params: PlantParams) -> OracleResult:
    """Minimum feasible flow at the measured supply temperature.

    ``flow = clamp(max_k Q_k / (f_k c_p (T_limit - T_sup)), flow_min, flow_max)``;
    ``feasible`` is False when the unclamped flow exceeds ``flow_max``.
    """
    rise = params.t_limit - baseline_t_sup
    if rise <= 0:
        raise InfeasibleError(
            f"baseline t_sup {baseline_t_sup} is not below T_limit {params.t_limit}"
        )
    needed = max_intensity(loads.q, fractions) * 1000.0 / (params.cp * rise)
    flow = min(max(needed, params.flow_min), params.flow_max)
    op = OperatingPoint(flow, baseline_t_sup, tuple(fractions))
    power = pump_power(flow, params) + ct_fan_power(loads.q_tot, baseline_t_sup, params)
    return OracleResult(op, power, needed <= params.flow_max)


def oracle_reduced_1d(strategy: str, loads: SubloopLoads,
                      fractions: Sequence[float] | None, params: PlantParams,
                      tol: float = 1e-6) -> OracleResult:
    """One-dimensional reduction of the supply-temperature/flow problem.

    Strategy ``"B"`` uses the given fixed *fractions*; ``"C"`` replaces them by
    :func:`equalized_fractions` over :func:`fraction_box`, widened to contain
    *fractions* when those are given.  With ``I`` the resulting peak intensity, the
    supply temperature is pushed to ``min(T_limit - I / (m c_p), t_sup_max)``
    and pump plus fan power is minimised over total flow ``m`` by golden
    section.  An infeasible problem returns the ``(flow_max, t_sup_floor)``
    point with ``feasible=False``.
    """
    strategy = str(getattr(strategy, "value", strategy))
    if loads.q_tot <= 0:
        raise DomainError("total load must be positive")
    if strategy == "C":
        lo, hi = fraction_box(params, loads.k, fractions)
        fractions = equalized_fractions(loads.q, lo, hi)
    elif strategy == "B":
        if fractions is None:
            raise DomainError("strategy B needs fixed fractions")
        fractions = tuple(fractions)
    else:
        raise DomainError(f"1-D reduction covers strategies B and C, not {strategy!r}")

    intensity = max_intensity(loads.q, fractions)
    coeff = intensity * 1000.0 / params.cp  # K * kg/s
    t_floor = params.t_sup_floor
    m_feasible = coeff / (params.t_limit - t_floor)
    lo = max(params.flow_min, m_feasible)
    if lo > params.flow_max:
        op = OperatingPoint(params.flow_max, t_floor, fractions)
        power = pump_power(params.flow_max, params) + ct_fan_power(loads.q_tot, t_floor, params)
        return OracleResult(op, power, False)

    def t_of(m: float) -> float:
        return min(max(params.t_limit - coeff / m, t_floor), params.t_sup_max)

    def g(m: float) -> float:
        return pump_power(m, params) + ct_fan_power(loads.q_tot, t_of(m), params)

    m_best, p_best = golden_section(g, lo, params.flow_max, tol)
    return OracleResult(OperatingPoint(m_best, t_of(m_best), fractions), p_best, True)
