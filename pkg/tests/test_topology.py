import math
import time
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coolopt.errors import ContractError, DomainError
from coolopt.topology import (
    CduAssignment,
    Partition,
    balanced_assignment,
    design_space,
    enumerate_partitions,
    equalize_workload,
    parse_partition_list,
    subloop_load_matrix,
    subloop_loads,
    worst_case_assignment,
)
from helpers import brute_force


@lru_cache(maxsize=None)
def count_recurrence(n, k):
    # p(n, k) = p(n - 1, k - 1) + p(n - k, k)
    if k == 0:
        return 1 if n == 0 else 0
    if n < k:
        return 0
    return count_recurrence(n - 1, k - 1) + count_recurrence(n - k, k)


class TestEnumeration:
    def test_design_space_cardinalities(self):
        counts = [len(enumerate_partitions(25, k)) for k in range(2, 7)]
        assert counts == [12, 52, 120, 192, 235]
        assert len(design_space(25)) == 611

    def test_two_subloop_examples(self):
        parts = enumerate_partitions(25, 2)
        assert (19, 6) in parts and (13, 12) in parts
        assert parts[0] == (24, 1)

    def test_small_cases(self):
        assert enumerate_partitions(3, 3) == [(1, 1, 1)]
        assert enumerate_partitions(6, 3) == [(4, 1, 1), (3, 2, 1), (2, 2, 2)]

    def test_k_above_n_is_empty(self):
        assert enumerate_partitions(3, 4) == []

    @pytest.mark.parametrize("n,k", [(0, 1), (5, 0), (-1, 2)])
    def test_invalid(self, n, k):
        with pytest.raises(DomainError):
            enumerate_partitions(n, k)

    def test_matches_brute_force(self):
        for n in range(1, 21):
            for k in range(1, 9):
                got = enumerate_partitions(n, k)
                assert set(got) == brute_force(n, k), (n, k)
                assert len(got) == len(set(got))

    def test_counts_match_recurrence_to_30(self):
        for n in range(1, 31):
            for k in range(1, 9):
                assert len(enumerate_partitions(n, k)) == count_recurrence(n, k), (n, k)

    def test_design_space_matches_brute_force(self):
        for k in range(2, 7):
            assert set(enumerate_partitions(25, k)) == brute_force(25, k)

    def test_lexicographically_descending(self):
        for k in range(2, 7):
            parts = [tuple(p) for p in enumerate_partitions(25, k)]
            assert parts == sorted(parts, reverse=True)

    def test_fast(self):
        t0 = time.perf_counter()
        design_space(25)
        assert time.perf_counter() - t0 < 1.0


class TestPartition:
    def test_render_and_parse(self):
        p = Partition((19, 6))
        assert str(p) == "(19, 6)"
        assert Partition.parse(str(p)) == p
        assert Partition.parse("(14,6,5)") == (14, 6, 5)

    def test_list(self):
        assert parse_partition_list("(19,6),(14,6,5)") == [(19, 6), (14, 6, 5)]

    @pytest.mark.parametrize("bad", [(), (3, 4), (2, 0), (1.5, 1)])
    def test_invalid(self, bad):
        with pytest.raises(DomainError):
            Partition(bad)

    @pytest.mark.parametrize("text", ["19,6", "(a, b)", "(6, 19)"])
    def test_unparseable(self, text):
        with pytest.raises(DomainError):
            Partition.parse(text)


class TestAssignment:
    def test_balanced_examples(self):
        loads = (4.0, 3.0, 2.0, 1.0)
        a = balanced_assignment(Partition((2, 2)), loads)
        assert subloop_loads(a, loads).q == (5.0, 5.0)
        b = balanced_assignment(Partition((3, 1)), loads)
        single = subloop_loads(b, loads).q[1]
        assert abs(single - np.mean(loads)) <= 0.5

    def test_worst_case_examples(self):
        loads = (4.0, 3.0, 2.0, 1.0)
        assert subloop_loads(worst_case_assignment(Partition((3, 1)), loads), loads).q == (6.0, 4.0)
        assert subloop_loads(worst_case_assignment(Partition((2, 2)), loads), loads).q == (3.0, 7.0)

    def test_uniform_loads_proportional(self):
        for part in design_space(25)[::37]:
            for policy in (balanced_assignment, worst_case_assignment):
                q = subloop_loads(policy(part, [2.0] * 25), [2.0] * 25).q
                assert q == tuple(2.0 * n for n in part)

    def test_invalid_assignment(self):
        with pytest.raises(ContractError):
            CduAssignment((0, 0, 0), Partition((2, 1)))
        with pytest.raises(ContractError):
            CduAssignment((0, 2, 0), Partition((2, 1)))

    def test_wrong_length(self):
        with pytest.raises(ContractError):
            balanced_assignment(Partition((2, 1)), [1.0, 2.0])

    @given(st.integers(0, 610), st.lists(st.floats(0.0, 100.0), min_size=25, max_size=25))
    def test_policies_valid_and_ordered(self, idx, loads):
        part = design_space(25)[idx]
        bal = balanced_assignment(part, loads)
        wc = worst_case_assignment(part, loads)
        for a in (bal, wc):
            assert [len(a.members(k)) for k in range(part.k)] == list(part)

        def peak(a):
            q = subloop_loads(a, loads).q
            return max(v / n for v, n in zip(q, part))

        assert peak(wc) >= peak(bal) - 1e-9

    def test_single_hot_cdu(self):
        loads = [0.0] * 25
        loads[7] = 50.0
        a = balanced_assignment(Partition((19, 6)), loads)
        q = subloop_loads(a, loads)
        assert q.q[a.subloop_of[7]] == 50.0 and q.q_tot == 50.0

    def test_zero_loads(self):
        a = balanced_assignment(Partition((19, 6)), [1.0] * 25)
        assert subloop_loads(a, [0.0] * 25).q == (0.0, 0.0)

    @given(st.lists(st.floats(0.0, 1000.0), min_size=25, max_size=25))
    def test_mass_balance(self, loads):
        a = worst_case_assignment(Partition((14, 6, 5)), loads)
        assert math.isclose(subloop_loads(a, loads).q_tot, math.fsum(loads),
                            rel_tol=1e-9, abs_tol=1e-9)

    def test_matrix_matches_rows(self):
        rng = np.random.default_rng(3)
        loads = rng.uniform(100, 500, (20, 25))
        a = balanced_assignment(Partition((9, 8, 8)), loads.mean(axis=0))
        mat = subloop_load_matrix(a, loads)
        for t in range(20):
            assert np.allclose(mat[t], subloop_loads(a, loads[t]).q, rtol=1e-13)


class TestEqualize:
    def test_examples(self):
        q = [10.0, 20.0]
        assert np.array_equal(equalize_workload(q, 0.0), q)
        assert np.array_equal(equalize_workload(q, 1.0), [15.0, 15.0])
        assert np.allclose(equalize_workload(q, 0.5), [12.5, 17.5])

    @pytest.mark.parametrize("alpha", [-0.1, 1.1, float("nan")])
    def test_domain(self, alpha):
        with pytest.raises(DomainError):
            equalize_workload([1.0, 2.0], alpha)

    @given(st.lists(st.floats(1.0, 1000.0), min_size=2, max_size=30), st.floats(0.0, 1.0),
           st.floats(0.0, 1.0))
    def test_total_affine_and_spread(self, q, a, b):
        q0 = np.asarray(q)
        qa = equalize_workload(q0, a)
        assert math.isclose(qa.sum(), q0.sum(), rel_tol=1e-9)
        # affine in alpha
        mid = equalize_workload(q0, 0.5 * (a + b))
        assert np.allclose(mid, 0.5 * (qa + equalize_workload(q0, b)), rtol=1e-12, atol=1e-9)
        spread0 = (q0.max() - q0.min()) / q0.mean()
        assert math.isclose((qa.max() - qa.min()) / qa.mean(), (1 - a) * spread0,
                            rel_tol=1e-9, abs_tol=1e-12)

    def test_rows_blend_to_own_mean(self):
        m = np.array([[1.0, 3.0], [10.0, 30.0]])
        assert np.array_equal(equalize_workload(m, 1.0), [[2.0, 2.0], [20.0, 20.0]])
