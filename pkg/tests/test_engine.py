import pickle

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mifsim import (
    ABORT, Instance, Oracle, RandomnessMode, Transcript, check_transcript,
    estimate_error, run_game,
)
from mifsim import _bits
from mifsim.algorithms import DetBitmap, constant_mif, custom_rt_params, RtMif, rt_mif, rt_params
from mifsim.adversaries import echo_adversary, mixed_adversary, random_adversary, replay_adversary
from mifsim.engine import (
    AdversaryError, Automaton, SpaceContractViolation, TableAutomaton, relabel,
    tape_as_oracle, wilson_half_width,
)

from oracles import naive_violations, wilson_interval


def test_instance_validation():
    Instance(4, 4)
    with pytest.raises(ValueError):
        Instance(4, 5)
    with pytest.raises(ValueError):
        Instance(4, 0)
    with pytest.raises(ValueError):
        Instance(4, 2, 1.5)


def test_abort_is_a_singleton():
    assert pickle.loads(pickle.dumps(ABORT)) is ABORT
    assert repr(ABORT) == "ABORT"


outputs_strategy = st.one_of(st.integers(1, 9), st.just(ABORT))


@given(st.lists(st.tuples(st.integers(1, 9), st.integers(1, 9)), max_size=20),
       st.booleans())
def test_transcript_text_round_trip(pairs, end_with_abort):
    t = Transcript()
    for item, out in pairs:
        t.append(item, out)
    if end_with_abort:
        t.append(1, ABORT)
    back = Transcript.from_text(t.to_text())
    assert back.inputs == t.inputs
    assert back.outputs == t.outputs
    assert back.to_text() == t.to_text()


def test_transcript_refuses_steps_after_abort():
    t = Transcript()
    t.append(1, ABORT)
    with pytest.raises(ValueError):
        t.append(2, 3)


@given(st.lists(st.tuples(st.integers(1, 6), outputs_strategy), max_size=15))
def test_check_transcript_matches_naive_scan(pairs):
    t = Transcript([p[0] for p in pairs], [p[1] for p in pairs])
    assert check_transcript(t) == naive_violations(t.inputs, t.outputs)


@given(st.lists(st.integers(2, 40), min_size=1, max_size=6), st.data())
def test_pack_unpack_round_trip(radices, data):
    digits = [data.draw(st.integers(0, r - 1)) for r in radices]
    code = _bits.pack(digits, radices)
    assert _bits.unpack(code, radices) == digits
    assert code.bit_length() <= _bits.width(radices)


@given(st.integers(1, 1 << 40))
def test_ceil_log2_is_exact(x):
    c = _bits.ceil_log2(x)
    assert 2 ** c >= x and (c == 0 or 2 ** (c - 1) < x)


@given(st.integers(0, 1 << 20))
def test_lowest_zero(mask):
    z = _bits.lowest_zero(mask)
    assert not mask >> z & 1
    assert all(mask >> i & 1 for i in range(z))


def test_wilson_half_width_matches_closed_form():
    for k, n in [(0, 100), (5, 100), (50, 100), (1, 2000), (1999, 2000)]:
        lo, hi = wilson_interval(k, n)
        assert wilson_half_width(k, n) == pytest.approx((hi - lo) / 2, rel=1e-9)


def test_oracle_reads_are_reproducible():
    a, b = Oracle(7), Oracle(7)
    assert a.word("x", 3) == b.word("x", 3)
    assert a.word("x", 3) != a.word("y", 3)
    assert a.word("x", 300) == b.word("x", 300)
    assert a.generator("g").integers(1 << 30) == b.generator("g").integers(1 << 30)
    assert a.child(0).word("x", 0) != a.child(1).word("x", 0)
    assert 0 <= a.uniform("x", 0) < 1


def test_run_game_is_a_function_of_the_seed():
    inst = Instance(4096, 64, 0.1)
    a = rt_mif(rt_params(inst))
    t1, r1 = run_game(a, mixed_adversary(0.5), inst, seed=11)
    t2, r2 = run_game(a, mixed_adversary(0.5), inst, seed=11)
    t3, _ = run_game(a, mixed_adversary(0.5), inst, seed=12)
    assert t1.to_text() == t2.to_text()
    assert r1 == r2
    assert t1.to_text() != t3.to_text()


def test_mistake_does_not_end_the_game():
    inst = Instance(5, 3)
    t, r = run_game(constant_mif(5, 2), replay_adversary([1, 2, 3]), inst)
    assert r.verdict.kind == "mistake" and r.verdict.step == 2
    assert len(t) == 3


def test_abort_ends_the_game():
    inst = Instance(3, 3)
    a = TableAutomaton(3, [1, ABORT], [[1, 1], [0, 1], [0, 1]])
    t, r = run_game(a, replay_adversary([1, 2, 3]), inst)
    assert r.verdict.kind == "abort" and r.verdict.step == 1
    assert t.outputs == [ABORT]


def test_first_failure_event_is_the_verdict():
    inst = Instance(4, 3)
    a = TableAutomaton(4, [2, ABORT], [[1, 1], [0, 1], [0, 1], [0, 1]])
    t, r = run_game(a, replay_adversary([2, 1]), inst)
    assert r.verdict.kind == "mistake" and r.verdict.step == 1
    assert t.outputs[-1] is ABORT


def test_adversary_may_stop_early():
    inst = Instance(10, 5)
    t, r = run_game(DetBitmap(10, 5), replay_adversary([3, 4]), inst)
    assert len(t) == 2 and r.rounds == 2 and r.verdict.kind == "ok"


def test_out_of_range_input_is_rejected():
    with pytest.raises(AdversaryError):
        run_game(DetBitmap(10, 5), replay_adversary([11]), Instance(10, 5))


class _Liar(Automaton):
    n = 4
    state_bits = 2
    name = "liar"

    def initial_state(self, rand=None):
        return 0

    def transition(self, state, item, rand=None):
        return state + 1

    def output(self, state, oracle=None):
        return 4

    def encode(self, state):
        return state


def test_space_contract_is_enforced_every_step():
    inst = Instance(4, 4)
    with pytest.raises(SpaceContractViolation):
        run_game(_Liar(), replay_adversary([1, 1, 1, 1]), inst)
    _, r = run_game(_Liar(), replay_adversary([1, 1, 1]), inst)
    assert r.space.max_observed_bits == 2


def test_observed_bits_never_exceed_declared():
    inst = Instance(1024, 8, 0.1)
    a = rt_mif(rt_params(inst))
    est = estimate_error(a, random_adversary(), inst, 50, seed=2)
    assert 0 < est.max_observed_bits <= a.state_bits


@given(st.integers(2, 12), st.data())
def test_relabelled_deterministic_automaton_plays_identically(n, data):
    ell = data.draw(st.integers(1, n - 1))
    stream = data.draw(st.lists(st.integers(1, n), min_size=ell, max_size=ell))
    base = DetBitmap(n, ell)
    inst = Instance(n, ell)
    ref, _ = run_game(base, replay_adversary(stream), inst, seed=0)
    for mode in RandomnessMode:
        t, _ = run_game(relabel(base, mode), replay_adversary(stream), inst, seed=5)
        assert t.outputs == ref.outputs


def test_tape_as_oracle_costs_a_step_counter():
    for ell in (5, 8, 9):
        p = custom_rt_params(64, ell, (3, 2), (16, 2))
        inner = RtMif(p, check=False)
        wrapped = tape_as_oracle(inner, ell)
        assert wrapped.mode is RandomnessMode.RANDOM_ORACLE
        assert wrapped.state_bits == inner.state_bits + _bits.ceil_log2(ell)
        inst = Instance(64, ell)
        est = estimate_error(wrapped, mixed_adversary(0.5), inst, 40, seed=1)
        assert est.mistakes == 0
        assert est.max_observed_bits <= wrapped.state_bits


def test_tape_as_oracle_rejects_other_modes():
    with pytest.raises(ValueError):
        tape_as_oracle(DetBitmap(8, 3), 3)


def test_threads_do_not_change_results():
    inst = Instance(1024, 8, 0.1)
    a = rt_mif(rt_params(inst))
    one = estimate_error(a, mixed_adversary(0.5), inst, 60, seed=4)
    many = estimate_error(a, mixed_adversary(0.5), inst, 60, seed=4, threads=4)
    assert one == many


def test_estimate_error_counts():
    inst = Instance(5, 2)
    est = estimate_error(constant_mif(5, 1), echo_adversary(), inst, 10)
    assert est.mistakes == 10 and est.mistake_rate == 1.0
    assert est.failure_half_width == pytest.approx(wilson_half_width(10, 10))


def test_table_automaton_mode_inference():
    det = TableAutomaton(3, [1], [[0], [0], [0]])
    seed = TableAutomaton(3, [1, 2], [[0, 1]] * 3, init={0: 0.5, 1: 0.5})
    tape = TableAutomaton(3, [1, 2], [[{0: 0.5, 1: 0.5}, 1]] * 3)
    assert det.mode is RandomnessMode.DETERMINISTIC
    assert seed.mode is RandomnessMode.RANDOM_SEED
    assert tape.mode is RandomnessMode.RANDOM_TAPE
    assert tape.state_bits == 1
    with pytest.raises(ValueError):
        TableAutomaton(3, [1], [[0]] * 2)


def test_seed_sequence_is_accepted():
    inst = Instance(10, 4)
    ss = np.random.SeedSequence(3)
    t1, _ = run_game(DetBitmap(10, 4), random_adversary(), inst, ss)
    t2, _ = run_game(DetBitmap(10, 4), random_adversary(), inst, np.random.SeedSequence(3))
    assert t1.to_text() == t2.to_text()


def test_reusing_a_seed_sequence_object_replays_the_game():
    inst = Instance(10, 4)
    ss = np.random.SeedSequence(8)
    t1, _ = run_game(DetBitmap(10, 4), random_adversary(), inst, ss)
    t2, _ = run_game(DetBitmap(10, 4), random_adversary(), inst, ss)
    assert t1.to_text() == t2.to_text()


def test_spec_examples_for_the_game_runner():
    for n, ell in [(5, 4), (9, 3)]:
        _, r = run_game(DetBitmap(n, ell), echo_adversary(), Instance(n, ell))
        assert r.verdict.kind == "ok"
    _, r = run_game(constant_mif(2, 1), echo_adversary(), Instance(2, 1))
    assert (r.verdict.kind, r.verdict.step) == ("mistake", 1)
    from mifsim.algorithms import oracle_list_mif
    for seed in range(10):
        _, r = run_game(oracle_list_mif(Instance(8, 3)), echo_adversary(), Instance(8, 3), seed)
        assert r.verdict.kind == "ok"
    est = estimate_error(constant_mif(2, 1), echo_adversary(), Instance(2, 1), 100)
    assert est.mistake_rate == 1.0


def test_check_transcript_examples():
    assert check_transcript(Transcript([1, 2], [2, 3])) == []
    assert check_transcript(Transcript([1, 2], [3, 1])) == [2]
    assert check_transcript(Transcript()) == []
