"""Streaming automata, randomness contracts and the game runner.

An automaton processes a stream of items from 1..n and, after every item,
reports an item it believes has not appeared yet (or ABORT).  Space is the
width of an explicit fixed-width state encoding, and the runner measures
that width after every transition.
"""

from __future__ import annotations

import copy
import enum
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from ._bits import ceil_log2


class SpaceContractViolation(RuntimeError):
    """A state serialized wider than the automaton's declared bit budget."""


class AdversaryError(RuntimeError):
    """An adversary produced an item outside the universe."""


class BudgetExceeded(RuntimeError):
    """An exact search ran out of its node budget."""


class NotEnumerable(RuntimeError):
    """The automaton does not expose an enumerable state space."""


class _Abort:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABORT"

    def __reduce__(self):
        return (_Abort, ())


ABORT = _Abort()


class RandomnessMode(enum.Enum):
    DETERMINISTIC = "deterministic"
    RANDOM_SEED = "seed"
    RANDOM_TAPE = "tape"
    RANDOM_ORACLE = "oracle"


@dataclass(frozen=True)
class Instance:
    n: int
    ell: int
    delta: float = 0.0

    def __post_init__(self):
        if not 1 <= self.ell <= self.n:
            raise ValueError(f"need 1 <= ell <= n, got n={self.n} ell={self.ell}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


def _consumer_key(consumer):
    digest = hashlib.blake2b(repr(consumer).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Oracle:
    """A reproducible, lazily evaluated random string.

    Reads are addressed by ``(consumer, offset)``.  The same address always
    returns the same value, so automata can re-read the oracle instead of
    storing what they read.
    """

    BLOCK = 256

    def __init__(self, seed=0, _path=()):
        if isinstance(seed, np.random.SeedSequence):
            self._entropy = seed.entropy
            self._path = tuple(seed.spawn_key) + tuple(_path)
        else:
            self._entropy = int(seed)
            self._path = tuple(_path)
        self._blocks = {}
        self._memo = {}

    def _sequence(self, consumer, *extra):
        key = self._path + (_consumer_key(consumer),) + tuple(extra)
        return np.random.SeedSequence(self._entropy, spawn_key=key)

    def generator(self, consumer):
        """A fresh generator over this consumer's stream; every call replays it."""
        return np.random.default_rng(self._sequence(consumer))

    def word(self, consumer, offset):
        block, pos = divmod(offset, self.BLOCK)
        key = (consumer, block)
        words = self._blocks.get(key)
        if words is None:
            words = self._sequence(consumer, block).generate_state(self.BLOCK, np.uint64)
            self._blocks[key] = words
        return int(words[pos])

    def uniform(self, consumer, offset):
        return (self.word(consumer, offset) >> 11) * 2.0**-53

    def memo(self, key, factory):
        """Cache a value derived deterministically from the oracle."""
        if key not in self._memo:
            self._memo[key] = factory(self)
        return self._memo[key]

    def child(self, index):
        return Oracle(self._entropy, self._path + (_consumer_key(("child", index)),))


class Automaton:
    """Base class for streaming automata.

    Subclasses set ``mode``, ``n`` and ``state_bits`` and implement
    ``initial_state``, ``transition``, ``output`` and ``encode``.  The
    randomness argument depends on the mode: a numpy Generator for seed and
    tape modes at init, the tape Generator on every tape transition, the
    Oracle handle for oracle mode, and None otherwise.

    Exact analyses additionally need ``initial_distribution`` and
    ``transition_distribution``; deterministic transitions get these for
    free, random ones must override them.
    """

    mode = RandomnessMode.DETERMINISTIC
    name = "automaton"
    n = 0
    state_bits = 0

    def initial_state(self, rand=None):
        raise NotImplementedError

    def transition(self, state, item, rand=None):
        raise NotImplementedError

    def output(self, state, oracle=None):
        raise NotImplementedError

    def encode(self, state):
        raise NotImplementedError

    def initial_distribution(self):
        if self.mode is RandomnessMode.DETERMINISTIC:
            return {self.initial_state(None): 1.0}
        raise NotEnumerable(f"{self.name} has no enumerable initial distribution")

    def transition_distribution(self, state, item):
        if self.mode in (RandomnessMode.DETERMINISTIC, RandomnessMode.RANDOM_SEED):
            return {self.transition(state, item, None): 1.0}
        raise NotEnumerable(f"{self.name} has no enumerable transitions")


class TableAutomaton(Automaton):
    """An explicit micro-scale automaton given by tables.

    States are 0..S-1.  ``outputs[s]`` is an item or ABORT.  ``transitions``
    is indexed ``[item - 1][s]`` and holds either a next state or a dict of
    next-state probabilities.  ``init`` is a state or a dict of probabilities.
    """

    def __init__(self, n, outputs, transitions, init=0, mode=None, name="table"):
        self.n = n
        self.outputs = list(outputs)
        self.name = name
        num = len(self.outputs)
        self._trans = []
        random_steps = False
        for item_row in transitions:
            row = []
            for entry in item_row:
                dist = entry if isinstance(entry, dict) else {entry: 1.0}
                random_steps |= len(dist) > 1
                row.append(dist)
            self._trans.append(row)
        if len(self._trans) != n or any(len(r) != num for r in self._trans):
            raise ValueError("transition table must be n x S")
        self._init = init if isinstance(init, dict) else {init: 1.0}
        if mode is None:
            if random_steps:
                mode = RandomnessMode.RANDOM_TAPE
            elif len(self._init) > 1:
                mode = RandomnessMode.RANDOM_SEED
            else:
                mode = RandomnessMode.DETERMINISTIC
        self.mode = mode
        self.state_bits = ceil_log2(num)

    @staticmethod
    def _draw(dist, rng):
        if len(dist) == 1:
            return next(iter(dist))
        keys = list(dist)
        probs = np.array([dist[k] for k in keys], dtype=float)
        return keys[int(rng.choice(len(keys), p=probs / probs.sum()))]

    def initial_state(self, rand=None):
        return self._draw(self._init, rand)

    def transition(self, state, item, rand=None):
        return self._draw(self._trans[item - 1][state], rand)

    def output(self, state, oracle=None):
        return self.outputs[state]

    def encode(self, state):
        return state

    def initial_distribution(self):
        return dict(self._init)

    def transition_distribution(self, state, item):
        return dict(self._trans[item - 1][state])


class _Relabeled(Automaton):
    def __init__(self, inner, mode):
        if inner.mode is not RandomnessMode.DETERMINISTIC:
            raise ValueError("only deterministic automata can be relabeled")
        self.inner = inner
        self.mode = mode
        self.n = inner.n
        self.state_bits = inner.state_bits
        self.name = f"{inner.name}@{mode.value}"

    def initial_state(self, rand=None):
        return self.inner.initial_state(None)

    def transition(self, state, item, rand=None):
        return self.inner.transition(state, item, None)

    def output(self, state, oracle=None):
        return self.inner.output(state, None)

    def encode(self, state):
        return self.inner.encode(state)

    def initial_distribution(self):
        return self.inner.initial_distribution()

    def transition_distribution(self, state, item):
        return self.inner.transition_distribution(state, item)


def relabel(a, mode):
    """View a deterministic automaton as one in another randomness mode."""
    return _Relabeled(a, mode)


class _TapeViaOracle(Automaton):
    mode = RandomnessMode.RANDOM_ORACLE

    def __init__(self, inner, ell):
        if inner.mode is not RandomnessMode.RANDOM_TAPE:
            raise ValueError("expected a random tape automaton")
        self.inner = inner
        self.ell = ell
        self.n = inner.n
        self.counter_bits = ceil_log2(ell)
        self.state_bits = inner.state_bits + self.counter_bits
        self.name = f"{inner.name}@oracle"

    def initial_state(self, rand=None):
        return (self.inner.initial_state(rand.generator("init")), 0)

    def transition(self, state, item, rand=None):
        inner, step = state
        rng = rand.generator(("step", step))
        return (self.inner.transition(inner, item, rng), (step + 1) % self.ell)

    def output(self, state, oracle=None):
        return self.inner.output(state[0], None)

    def encode(self, state):
        inner, step = state
        return (self.inner.encode(inner) << self.counter_bits) | step


def tape_as_oracle(a, ell):
    """Replace fresh tape randomness by oracle reads indexed by a step counter.

    The counter is stored modulo ell, which costs ceil(log2 ell) extra bits.
    """
    return _TapeViaOracle(a, ell)


@dataclass
class Transcript:
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def __len__(self):
        return len(self.inputs)

    def append(self, item, out):
        if self.outputs and self.outputs[-1] is ABORT:
            raise ValueError("transcript already ended with ABORT")
        self.inputs.append(item)
        self.outputs.append(out)

    @property
    def last_output(self):
        return self.outputs[-1] if self.outputs else None

    def to_text(self):
        lines = ["step,input,output"]
        for step, (item, out) in enumerate(zip(self.inputs, self.outputs), 1):
            lines.append(f"{step},{item},{'ABORT' if out is ABORT else out}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        t = cls()
        for line in text.strip().splitlines()[1:]:
            _, item, out = line.split(",")
            t.append(int(item), ABORT if out == "ABORT" else int(out))
        return t


@dataclass(frozen=True)
class Verdict:
    kind: str  # "ok", "mistake" or "abort"
    step: int | None = None

    def __str__(self):
        return self.kind if self.step is None else f"{self.kind}({self.step})"


@dataclass(frozen=True)
class SpaceReport:
    declared_bits: int
    max_observed_bits: int


@dataclass(frozen=True)
class GameResult:
    verdict: Verdict
    space: SpaceReport
    rounds: int


def as_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def derive_seeds(seed, count):
    """The first ``count`` children of ``seed``, without touching its spawn counter.

    ``SeedSequence.spawn`` is stateful, so calling it twice on one object
    gives different children; this keeps runs a pure function of the seed.
    """
    ss = as_seed_sequence(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (i,),
                                   pool_size=ss.pool_size)
            for i in range(count)]


def _measure(a, state):
    code = a.encode(state)
    if not isinstance(code, (int, np.integer)) or code < 0:
        raise SpaceContractViolation(f"{a.name}: encoding must be a non-negative int")
    bits = int(code).bit_length()
    if bits > a.state_bits:
        raise SpaceContractViolation(
            f"{a.name}: state needs {bits} bits, declared {a.state_bits}")
    return bits


def run_game(a, adv, inst, seed=0):
    """Play one game of ``a`` against ``adv`` on ``inst``.

    Returns ``(transcript, result)``.  The run is a pure function of the
    arguments.  The adversary may end the stream early by returning None.
    """
    if a.n != inst.n:
        raise ValueError(f"automaton universe {a.n} != instance universe {inst.n}")
    a_seed, adv_seed, oracle_seed = derive_seeds(seed, 3)
    mode = a.mode
    rng = oracle = None
    if mode in (RandomnessMode.RANDOM_SEED, RandomnessMode.RANDOM_TAPE):
        rng = np.random.default_rng(a_seed)
        init_rand = rng
    elif mode is RandomnessMode.RANDOM_ORACLE:
        oracle = Oracle(oracle_seed)
        init_rand = oracle
    else:
        init_rand = None
    step_rand = rng if mode is RandomnessMode.RANDOM_TAPE else oracle

    state = a.initial_state(init_rand)
    max_bits = _measure(a, state)
    adv.reset(inst, np.random.default_rng(adv_seed))
    transcript = Transcript()
    seen = set()
    verdict = Verdict("ok")
    for step in range(1, inst.ell + 1):
        item = adv.next_input(transcript)
        if item is None:
            break
        if not isinstance(item, (int, np.integer)) or not 1 <= item <= inst.n:
            raise AdversaryError(f"{adv.kind} produced {item!r} outside [1, {inst.n}]")
        item = int(item)
        state = a.transition(state, item, step_rand)
        max_bits = max(max_bits, _measure(a, state))
        out = a.output(state, oracle)
        if mode is RandomnessMode.RANDOM_TAPE and a.output(state, oracle) != out:
            raise RuntimeError(f"{a.name}: output is not a function of the state")
        seen.add(item)
        transcript.append(item, out)
        if out is ABORT:
            if verdict.kind == "ok":
                verdict = Verdict("abort", step)
            break
        if out in seen and verdict.kind == "ok":
            verdict = Verdict("mistake", step)
    adv.finish(transcript)
    space = SpaceReport(a.state_bits, max_bits)
    return transcript, GameResult(verdict, space, len(transcript))


def wilson_half_width(successes, trials):
    ci = binomtest(successes, trials).proportion_ci(0.95, method="wilson")
    return float(ci.high - ci.low) / 2


@dataclass(frozen=True)
class ErrorEstimate:
    trials: int
    mistakes: int
    aborts: int
    mistake_rate: float
    abort_rate: float
    failure_rate: float
    mistake_half_width: float
    abort_half_width: float
    failure_half_width: float
    max_observed_bits: int
    verdicts: tuple = ()


def estimate_error(a, adv, inst, trials, seed=0, threads=1):
    """Monte Carlo mistake and abort rates with Wilson 95% half-widths."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = derive_seeds(seed, trials)

    def one(s):
        return run_game(a, copy.deepcopy(adv) if threads > 1 else adv, inst, s)[1]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    mistakes = sum(r.verdict.kind == "mistake" for r in results)
    aborts = sum(r.verdict.kind == "abort" for r in results)
    return ErrorEstimate(
        trials=trials,
        mistakes=mistakes,
        aborts=aborts,
        mistake_rate=mistakes / trials,
        abort_rate=aborts / trials,
        failure_rate=(mistakes + aborts) / trials,
        mistake_half_width=wilson_half_width(mistakes, trials),
        abort_half_width=wilson_half_width(aborts, trials),
        failure_half_width=wilson_half_width(mistakes + aborts, trials),
        max_observed_bits=max(r.space.max_observed_bits for r in results),
        verdicts=tuple(r.verdict for r in results),
    )


def check_transcript(t):
    """Steps (1-based) whose output repeats an input seen so far."""
    seen = set()
    bad = []
    for step, (item, out) in enumerate(zip(t.inputs, t.outputs), 1):
        seen.add(item)
        if out is not ABORT and out in seen:
            bad.append(step)
    return bad
