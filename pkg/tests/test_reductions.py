import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mifsim.algorithms import DetBitmap, OracleList, RtMif, SeedBlock, constant_mif, custom_rt_params
from mifsim.analysis import oracle_lb
from mifsim.reductions import (
    AvoidInstance, OutputFunction, ThresholdMatrix, avoid_exhaustive, avoid_from_mif, avoid_lb,
    canonical_min_missing, custom_fco_params, fco, fco_params, noisy, phase_length,
)


# AVOID

def test_avoid_lb_examples():
    assert avoid_lb(AvoidInstance(100, 10, 10)) == pytest.approx(100 / (100 * math.log(2)))
    assert avoid_lb(AvoidInstance(100, 10, 10)) == pytest.approx(1.4427, abs=1e-4)
    half = avoid_lb(AvoidInstance(100, 10, 10, 0.5))
    assert half == pytest.approx(avoid_lb(AvoidInstance(100, 10, 10)) - 1)
    with pytest.raises(ValueError):
        avoid_lb(AvoidInstance(10, 2, 2, 1.0))


def test_avoid_instance_preconditions():
    with pytest.raises(ValueError):
        AvoidInstance(8, 0, 2)
    with pytest.raises(ValueError):
        AvoidInstance(4, 3, 2)


@given(st.integers(3, 12).map(lambda e: 1 << e), st.data())
def test_avoid_split_reproduces_the_oracle_formula(n, data):
    ell = data.draw(st.integers(2, min(n - 2, 400)))
    delta = data.draw(st.sampled_from([0.0, 0.1, 0.5]))
    a, b = math.ceil(ell / 2), ell // 2 + 1
    via_avoid = avoid_lb(AvoidInstance(n, a, b, delta))
    direct = oracle_lb(n, ell, delta)
    # a * b >= ell^2 / 4, and exceeds it by at most ell + 1
    assert direct <= via_avoid + 1e-12
    assert via_avoid - direct <= (ell + 1) / (n * math.log(2)) + 1e-12


def test_avoid_with_det_bitmap_is_always_disjoint():
    inst = AvoidInstance(8, 2, 2)
    summary = avoid_exhaustive(avoid_from_mif(DetBitmap(8, 4), inst))
    assert summary.runs == 28 and summary.failures == 0
    assert summary.message_bits == 5
    assert summary.lower_bound == pytest.approx(4 / (8 * math.log(2)))
    assert summary.message_bits >= summary.lower_bound


def test_avoid_protocol_rejects_mismatched_universe():
    with pytest.raises(ValueError):
        avoid_from_mif(DetBitmap(9, 4), AvoidInstance(8, 2, 2))


def test_avoid_with_a_constant_automaton_always_fails():
    summary = avoid_exhaustive(avoid_from_mif(constant_mif(6, 1), AvoidInstance(6, 2, 2)))
    assert summary.failure_rate == 1.0 and summary.lower_bound is None


def test_avoid_oracle_list_and_seed_block_runs():
    inst = AvoidInstance(10, 2, 2)
    for a in (OracleList(10, 4), SeedBlock(10, 4, 4, 2, 5)):
        summary = avoid_exhaustive(avoid_from_mif(a, inst), seeds=range(5))
        assert summary.runs == 45 * 5
        assert summary.failure_rate < 1
        assert summary.message_bits >= summary.lower_bound
    ol = avoid_exhaustive(avoid_from_mif(OracleList(10, 4), inst), seeds=range(5))
    assert ol.failures == 0


def test_avoid_csv_rows():
    summary = avoid_exhaustive(avoid_from_mif(DetBitmap(6, 4), AvoidInstance(6, 2, 2)))
    lines = summary.to_csv().splitlines()
    assert lines[0] == "alice,seed,bob,message_bits,disjoint,aborted"
    assert lines[1] == "1 2,0,3 4,5,1,0"
    assert len(lines) == 1 + 15


def test_avoid_runs_are_reproducible():
    a = RtMif(custom_rt_params(8, 4, (2, 2), (4, 2)), check=False)
    p = avoid_from_mif(a, AvoidInstance(8, 2, 2))
    assert p.run((3, 5), seed=4) == p.run((3, 5), seed=4)


# output functions

def test_min_missing_and_noise_examples():
    B = canonical_min_missing(5, 2)
    assert B((1, 2)) == 3
    assert B((2, 3)) == 1
    same = noisy(B, 0.0)
    assert all(same(s) == B(s) for s in [(1, 2), (4, 5), (1, 1)])
    flip = noisy(canonical_min_missing(2, 1), 1.0, seed=3)
    assert flip((2,)) == 2 and flip((1,)) == 1


def test_noisy_is_a_function():
    B = noisy(canonical_min_missing(10, 3), 0.5, seed=9)
    assert all(B((1, 2, 3)) == B((1, 2, 3)) for _ in range(5))
    with pytest.raises(ValueError):
        B((1, 2))


def test_threshold_matrix_is_lazy_and_seeded():
    C, D = ThresholdMatrix(4), ThresholdMatrix(4)
    assert C[2, 1] == D[2, 1]
    assert 1 <= C[2, 1] < 2 and C[2, 1] != C[2, 2]
    assert ThresholdMatrix(fixed=1.5)[3, 3] == 1.5


# FCO parameters

def test_fco_phase_length_example():
    assert phase_length(1, 1) == 9


def test_fco_params_structure():
    prm = fco_params(1 << 20, 2000, 1, 0.0)
    assert prm.p == 1
    assert prm.d == 1 + 2000 // 18
    assert set(prm.t[1:]) == {9}
    assert prm.t[0] == 2000 - 9 * (prm.d - 1) and 2 * prm.t[0] >= 2000
    assert prm.w[0] == prm.t[0] + 1
    assert all(prm.w[k] == 2 * prm.w[k - 1] for k in range(1, prm.d))
    assert prm.eps_k(1) == prm.w[0] * prm.eps


def test_fco_params_with_noise():
    prm = fco_params(1 << 16, 4096, 2, 0.01)
    assert prm.p >= 1
    assert all(tk <= 9 * prm.z * prm.p for tk in prm.t[1:])
    assert prm.eps == pytest.approx(0.02 ** (prm.p / 30))
    with pytest.raises(ValueError):
        fco_params(100, 10, 1, 0.5)


@given(st.integers(1, 5000), st.integers(1, 4), st.sampled_from([0.0, 1e-6, 0.01, 0.3]))
def test_fco_params_keep_the_first_interval_long(ell, z, delta):
    prm = fco_params(1 << 20, ell, z, delta)
    assert 2 * prm.t[0] >= ell
    assert sum(prm.t) == ell
    assert len(set(prm.t[1:])) <= 1


# FCO runs

def test_fco_base_case_hand_trace():
    # the padding gives e_0 = 2, ..., e_5 = 7; the last stream is unpadded
    # and misses 1
    prm = custom_fco_params(20, 6, (6,))
    res = fco(canonical_min_missing(20, 6), ThresholdMatrix(0), (), 1, prm)
    assert res.items == frozenset(range(1, 8)) and not res.failed


def test_fco_base_case_with_a_prefix():
    prm = custom_fco_params(64, 16, (12, 4))
    x = (5, 9, 2, 40)
    res = fco(canonical_min_missing(64, 16), ThresholdMatrix(0), x, 1, prm)
    assert len(res.items) == 13 and not res.failed
    assert not res.items & set(x)
    assert res.trace_csv().splitlines()[0] == "k,prefix,round,q_size,w_k,failed"


def test_fco_rejects_wrong_prefix_length():
    prm = custom_fco_params(64, 16, (12, 4))
    with pytest.raises(ValueError):
        fco(canonical_min_missing(64, 16), ThresholdMatrix(0), (1, 2), 1, prm)


def test_fco_level_two_micro_run():
    n = 12
    prm = custom_fco_params(n, 5, (2, 3))
    B = canonical_min_missing(n, 5)
    res = fco(B, ThresholdMatrix(1), (), 2, prm)
    assert len(res.items) == prm.w[1] == 6
    assert not res.failed and res.failures == 0
    assert res.items <= set(prm.S)


def test_fco_failure_returns_smallest_items():
    prm = custom_fco_params(10, 4, (4,))
    stuck = OutputFunction(10, 4, lambda s: 7, "sampled")
    res = fco(stuck, ThresholdMatrix(0), (), 1, prm)
    assert res.failed and res.items == frozenset(range(1, 6))


@given(st.integers(0, 1 << 20), st.floats(0, 1), st.lists(st.integers(1, 12), min_size=2, max_size=2))
def test_fco_always_returns_w_k_items(seed, eps, x):
    n = 12
    prm = custom_fco_params(n, 7, (3, 2, 2))
    B = noisy(canonical_min_missing(n, 7), eps, seed)
    for k, prefix in ((1, tuple(x) + (1, 2)), (2, tuple(x))):
        res = fco(B, ThresholdMatrix(seed), prefix, k, prm)
        assert len(res.items) == prm.w[k - 1]
        assert res.items <= set(prm.S)
