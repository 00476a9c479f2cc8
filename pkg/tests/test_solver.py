import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coolopt.errors import ContractError, DomainError
from coolopt.oracles import equalized_fractions, oracle_reduced_1d
from coolopt.plant_model import (
    OperatingPoint,
    PlantParams,
    SubloopLoads,
    fraction_box,
    objective_gradient,
    proportional_fractions,
    total_power,
)
from coolopt.solver import (
    T_SCALE,
    SolverConfig,
    Status,
    Strategy,
    _Problem,
    constraint_values,
    min_residual,
    return_temps,
    solve_timestep,
)
from coolopt.telemetry import generate_synthetic
from coolopt.topology import Partition, balanced_assignment, subloop_load_matrix
from helpers import random_cases

P = PlantParams()
RAW = SolverConfig(guard=False)
CASES = random_cases(200, seed=11)


def rel(a, b):
    return abs(a - b) / abs(b)


class TestExamples:
    def test_strategy_a_symmetric(self):
        r = solve_timestep("A", SubloopLoads((2000.0, 2000.0)), 30.0, P, fractions=(0.5, 0.5))
        assert r.status is Status.CONVERGED
        assert r.op.flow == pytest.approx(95.238095, rel=1e-6)
        assert r.op.t_sup == 30.0

    def test_strategy_a_flow_floor(self):
        r = solve_timestep("A", SubloopLoads((100.0, 100.0)), 30.0, P, fractions=(0.5, 0.5))
        assert r.op.flow == pytest.approx(50.0, abs=1e-9)

    def test_strategy_c_worked_example(self):
        r = solve_timestep("C", SubloopLoads((4000.0, 3000.0)), 30.0, P, cfg=RAW)
        assert r.status is Status.CONVERGED
        assert r.op.fractions == pytest.approx((0.5714, 0.4286), abs=1e-4)
        assert r.op.flow == pytest.approx(278.6, abs=0.05)
        assert r.op.t_sup == pytest.approx(34.8, abs=0.05)
        ref = oracle_reduced_1d("C", SubloopLoads((4000.0, 3000.0)), None, P)
        assert rel(r.power, ref.power) < 1e-6

    @pytest.mark.parametrize("part", [(19, 6), (14, 6, 5), (5, 5, 5, 5, 5)])
    def test_b_equals_c_when_intensity_uniform(self, part):
        f = proportional_fractions(part)
        loads = SubloopLoads(tuple(350.0 * n for n in part))
        b = solve_timestep("B", loads, 30.0, P, fractions=f, cfg=RAW)
        c = solve_timestep("C", loads, 30.0, P, fractions=f, cfg=RAW)
        assert rel(b.power, c.power) < 1e-8


class TestErrorsAndStatuses:
    def test_zero_load(self):
        with pytest.raises(DomainError):
            solve_timestep("C", SubloopLoads((0.0, 0.0)), 30.0, P)

    def test_warm_dimension_mismatch(self):
        warm = OperatingPoint(200.0, 30.0, (0.4, 0.3, 0.3))
        with pytest.raises(ContractError):
            solve_timestep("C", SubloopLoads((1.0, 1.0)), 30.0, P, warm)

    def test_fixed_split_required(self):
        with pytest.raises(ContractError):
            solve_timestep("B", SubloopLoads((1.0, 1.0)), 30.0, P)

    def test_strategy_a_baseline_domain(self):
        with pytest.raises(DomainError):
            solve_timestep("A", SubloopLoads((1.0, 1.0)), 23.0, P, fractions=(0.5, 0.5))

    def test_infeasible_clamps(self):
        loads = SubloopLoads((40000.0, 3000.0))
        r = solve_timestep("C", loads, 30.0, P)
        assert r.status is Status.CLAMPED_INFEASIBLE
        assert (r.op.flow, r.op.t_sup) == (P.flow_max, P.t_sup_floor)
        assert r.op.fractions == equalized_fractions(loads.q, P.f_min, P.f_max)
        assert r.max_return_temp > P.t_limit
        assert r.power == pytest.approx(total_power(r.op, loads, P), rel=1e-12)

    def test_fallback_to_previous(self):
        warm = OperatingPoint(250.0, 33.0, (0.55, 0.45))
        r = solve_timestep("C", SubloopLoads((4000.0, 3000.0)), 30.0, P, warm,
                           SolverConfig(max_iter=1, guard=False))
        assert r.status is Status.FALLBACK_PREVIOUS
        assert r.op == warm

    def test_fallback_without_previous_uses_reference(self):
        r = solve_timestep("C", SubloopLoads((4000.0, 3000.0)), 30.0, P, None,
                           SolverConfig(max_iter=1, guard=False))
        assert r.status is Status.FALLBACK_PREVIOUS
        ref = oracle_reduced_1d("C", SubloopLoads((4000.0, 3000.0)), None, P)
        assert r.op == ref.op

    def test_config_validation(self):
        for bad in (dict(ftol=0.0), dict(max_iter=0), dict(max_iter=1.5), dict(guard_rtol=-1)):
            with pytest.raises(DomainError):
                SolverConfig(**bad)


class TestConstraintValues:
    loads = SubloopLoads((2000.0, 2000.0))

    def test_feasible_nominal(self):
        r = constraint_values(OperatingPoint(190.0, 30.0, (0.5, 0.5)), self.loads, P)
        assert len(r) == 2 + 4 + 4 + 1
        assert np.all(r[:-1] >= 0) and abs(r[-1]) <= 1e-9

    def test_on_the_limit(self):
        op = OperatingPoint(2000e3 / (0.5 * 3500 * 12), 30.0, (0.5, 0.5))
        r = constraint_values(op, self.loads, P)
        assert abs(r[0]) < 1e-12 and abs(r[1]) < 1e-12

    def test_overload_reported(self):
        r = constraint_values(OperatingPoint(60.0, 34.0, (0.5, 0.5)), self.loads, P)
        assert r[0] < 0 and r[1] < 0
        assert min_residual(OperatingPoint(60.0, 34.0, (0.5, 0.5)), self.loads, P) == r[0]

    def test_fixed_split_exempt_from_box(self):
        op = OperatingPoint(300.0, 30.0, (0.96, 0.04))
        loads = SubloopLoads((960.0, 40.0))
        assert min_residual(op, loads, P, fraction_bounds=True) < 0
        assert min_residual(op, loads, P, fraction_bounds=False) >= 0


class TestCommissionedSplit:
    # one CDU of 25 gets 0.04 < f_min under the fixed split
    part = (10, 5, 5, 4, 1)
    loads = SubloopLoads((2600.0, 1250.0, 1300.0, 900.0, 310.0))

    def test_box_widened_to_contain_fixed_split(self):
        f = proportional_fractions(self.part)
        lo, hi = fraction_box(P, 5, f)
        assert lo == (0.05, 0.05, 0.05, 0.05, 0.04) and hi == (0.95,) * 5
        assert min_residual(OperatingPoint(300.0, 30.0, f), self.loads, P, True, f) >= 0

    def test_c_never_worse_than_b(self):
        f = proportional_fractions(self.part)
        b = solve_timestep("B", self.loads, 30.0, P, fractions=f, cfg=RAW)
        c = solve_timestep("C", self.loads, 30.0, P, fractions=f, cfg=RAW)
        assert c.power <= b.power * (1 + 1e-8)
        assert c.op.fractions[-1] >= 0.04 - 1e-12


class TestInvariants:
    @pytest.mark.parametrize("case", CASES[:120])
    def test_converged_results_are_feasible_and_consistent(self, case):
        for s in Strategy:
            r = solve_timestep(s, case.loads, case.baseline_t_sup, P, None, RAW,
                               fractions=case.fractions, baseline_flow=case.baseline_flow)
            assert rel(r.power, total_power(r.op, case.loads, P)) < 1e-9
            assert r.max_return_temp == pytest.approx(
                return_temps(r.op, case.loads, P).max(), rel=1e-12)
            if r.status is Status.CONVERGED:
                assert min_residual(r.op, case.loads, P, s is Strategy.C, case.fractions) >= -1e-6

    @pytest.mark.parametrize("case", CASES[:120])
    def test_nesting(self, case):
        res = {s: solve_timestep(s, case.loads, case.baseline_t_sup, P, None, RAW,
                                 fractions=case.fractions, baseline_flow=case.baseline_flow)
               for s in Strategy}
        if any(r.status is Status.CLAMPED_INFEASIBLE for r in res.values()):
            return
        a, b, c = (res[s].power for s in Strategy)
        assert a >= b * (1 - 1e-6)
        assert b >= c * (1 - 1e-6)

    @pytest.mark.parametrize("case", CASES[120:140])
    def test_start_point_invariance(self, case):
        rng = np.random.default_rng(hash(case.partition) % 2**32)
        ref = solve_timestep("C", case.loads, 30.0, P, None, RAW, fractions=case.fractions)
        if ref.status is not Status.CONVERGED:
            return
        k = case.loads.k
        for _ in range(10):
            f = P.f_min + (1 - k * P.f_min) * rng.dirichlet(np.ones(k))
            if f.max() > P.f_max:
                continue
            f = tuple(f / f.sum())
            start = OperatingPoint(rng.uniform(P.flow_min, P.flow_max),
                                   rng.uniform(P.t_sup_floor, P.t_sup_max), f)
            r = solve_timestep("C", case.loads, 30.0, P, start, RAW, fractions=case.fractions)
            assert rel(r.power, ref.power) < 1e-6

    @pytest.mark.parametrize("case", CASES[140:200])
    def test_interior_fractions_equalise_return_temps(self, case):
        r = solve_timestep("C", case.loads, 30.0, P, None, RAW, fractions=case.fractions)
        f = np.asarray(r.op.fractions)
        if r.status is not Status.CONVERGED or np.any(f <= P.f_min + 1e-6) \
                or np.any(f >= P.f_max - 1e-6):
            return
        t = return_temps(r.op, case.loads, P)
        if t.max() < P.t_limit - 1e-6:
            return  # supply on its upper bound, thermal limit slack
        assert np.ptp(t) < 1e-4

    @given(st.floats(55.0, 445.0), st.floats(24.6, 34.9),
           st.lists(st.floats(100.0, 4000.0), min_size=2, max_size=6))
    def test_internal_gradient_matches_model(self, flow, t_sup, q):
        loads = SubloopLoads(q)
        k = loads.k
        f = (1.0 / k,) * k
        op = OperatingPoint(flow, t_sup, f)
        prob = _Problem(Strategy.C, loads, None, None, P)
        g_internal = prob.gradient(prob.pack(op))
        g_model = objective_gradient(op, loads, P)
        scale = np.r_[P.flow_nom, T_SCALE, np.ones(k)] / prob.p_ref
        assert np.allclose(g_internal, g_model * scale, rtol=1e-14, atol=0)

    def test_jacobian_matches_finite_differences(self):
        loads = SubloopLoads((2500.0, 1800.0, 900.0))
        prob = _Problem(Strategy.C, loads, None, None, P)
        x = np.array([1.3, 3.1, 0.45, 0.35, 0.2])
        h = 1e-6
        fd = np.column_stack([(prob.constraints(x + h * e) - prob.constraints(x - h * e)) / (2 * h)
                              for e in np.eye(x.size)])
        assert np.allclose(prob.jacobian(x), fd, rtol=1e-6, atol=1e-7)

    def test_warm_and_cold_agree_over_a_year(self):
        ds = generate_synthetic(300, 25, 0.24, 3, P)
        part = Partition((14, 6, 5))
        q = subloop_load_matrix(balanced_assignment(part, ds.mean_cdu_loads()), ds.loads)
        f = proportional_fractions(part)
        for strategy in (Strategy.B, Strategy.C):
            warm = None
            for t in range(len(ds)):
                loads = SubloopLoads(tuple(q[t]))
                hot = solve_timestep(strategy, loads, 30.0, P, warm, RAW, fractions=f,
                                     baseline_flow=float(ds.baseline_flow[t]))
                cold = solve_timestep(strategy, loads, 30.0, P, None,
                                      SolverConfig(guard=False, warm_start=False), fractions=f,
                                      baseline_flow=float(ds.baseline_flow[t]))
                assert rel(hot.power, cold.power) < 1e-6
                warm = hot.op

    def test_guard_never_worse(self):
        for case in CASES[:60]:
            for s in (Strategy.B, Strategy.C):
                raw = solve_timestep(s, case.loads, 30.0, P, None, RAW, fractions=case.fractions)
                guarded = solve_timestep(s, case.loads, 30.0, P, None, fractions=case.fractions)
                assert guarded.power <= raw.power * (1 + 1e-12)
                assert math.isfinite(guarded.max_return_temp)
