"""One-way AVOID protocols built from MIF automata, and the recursive
common-output finder used against pseudo-deterministic algorithms."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .engine import ABORT, Oracle, RandomnessMode, _measure, derive_seeds


@dataclass(frozen=True)
class AvoidInstance:
    m: int
    a: int
    b: int
    delta: float = 0.0

    def __post_init__(self):
        if self.a < 1 or self.b < 1:
            raise ValueError("AVOID needs a, b >= 1")
        if self.a + self.b > self.m:
            raise ValueError("AVOID needs a + b <= m")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


def avoid_lb(inst):
    """Message bits any protocol with failure probability delta must send."""
    if inst.delta >= 1:
        raise ValueError("the bound is undefined at delta = 1")
    return inst.a * inst.b / (inst.m * math.log(2)) + math.log2(1 - inst.delta)


@dataclass(frozen=True)
class AvoidRun:
    alice: tuple
    bob: tuple
    message_bits: int
    disjoint: bool
    aborted: bool


class AvoidProtocol:
    """Alice streams her sorted set into the automaton and sends the state;
    Bob reads an output, echoes it back, and repeats until he holds b items."""

    def __init__(self, a, inst):
        if a.n != inst.m:
            raise ValueError("automaton universe must equal m")
        self.automaton = a
        self.inst = inst

    def run(self, alice, seed=0):
        a, inst = self.automaton, self.inst
        alice = tuple(sorted(alice))
        if len(set(alice)) != inst.a or not all(1 <= v <= inst.m for v in alice):
            raise ValueError("Alice's set must hold a distinct items of [m]")
        a_seed, oracle_seed = derive_seeds(seed, 2)
        rng = oracle = None
        if a.mode in (RandomnessMode.RANDOM_SEED, RandomnessMode.RANDOM_TAPE):
            rng = np.random.default_rng(a_seed)
        elif a.mode is RandomnessMode.RANDOM_ORACLE:
            oracle = Oracle(oracle_seed)
        step_rand = rng if a.mode is RandomnessMode.RANDOM_TAPE else oracle
        state = a.initial_state(rng if rng is not None else oracle)
        for item in alice:
            state = a.transition(state, item, step_rand)
        _measure(a, state)  # the message is the encoded state
        bob = []
        out = a.output(state, oracle)
        aborted = False
        while True:
            if out is ABORT:
                aborted = True
                break
            bob.append(out)
            if len(bob) == inst.b:
                break
            state = a.transition(state, out, step_rand)
            out = a.output(state, oracle)
        disjoint = (not aborted and len(set(bob)) == inst.b and not set(bob) & set(alice))
        return AvoidRun(alice, tuple(bob), a.state_bits, disjoint, aborted)


def avoid_from_mif(a, inst):
    return AvoidProtocol(a, inst)


@dataclass(frozen=True)
class AvoidSummary:
    message_bits: int
    runs: int
    failures: int
    failure_rate: float
    lower_bound: float | None
    rows: tuple = ()

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alice", "seed", "bob", "message_bits", "disjoint", "aborted"])
        for seed, r in self.rows:
            w.writerow([" ".join(map(str, r.alice)), seed, " ".join(map(str, r.bob)),
                        r.message_bits, int(r.disjoint), int(r.aborted)])
        return buf.getvalue()


def avoid_exhaustive(protocol, seeds=(0,)):
    """Run the protocol on every Alice set, once per seed."""
    inst = protocol.inst
    rows = []
    for alice in itertools.combinations(range(1, inst.m + 1), inst.a):
        for seed in seeds:
            rows.append((seed, protocol.run(alice, seed)))
    failures = sum(not r.disjoint for _, r in rows)
    rate = failures / len(rows)
    lb = None
    if rate < 1:
        lb = avoid_lb(AvoidInstance(inst.m, inst.a, inst.b, rate))
    return AvoidSummary(protocol.automaton.state_bits, len(rows), failures, rate, lb, tuple(rows))


# common-output finder


class OutputFunction:
    """A total map from length-ell streams over [n] to an item of [n]."""

    def __init__(self, n, ell, fn, tag="canonical"):
        self.n, self.ell, self.fn, self.tag = n, ell, fn, tag
        self.calls = 0

    def __call__(self, stream):
        stream = tuple(stream)
        if len(stream) != self.ell:
            raise ValueError(f"expected a stream of length {self.ell}, got {len(stream)}")
        self.calls += 1
        return self.fn(stream)


def canonical_min_missing(n, ell):
    def least_missing(stream):
        seen = set(stream)
        return next(i for i in range(1, n + 2) if i not in seen)

    return OutputFunction(n, ell, least_missing, "canonical")


def noisy(B, eps, seed=0):
    """Replace B's answer by a uniform wrong item with probability eps.

    The coin for each argument is derived from (seed, argument), so the
    result is again a function.
    """
    n = B.n

    def corrupted(stream):
        truth = B.fn(stream)
        if eps <= 0:
            return truth
        rng = np.random.default_rng(np.random.SeedSequence([seed, *stream]))
        if rng.random() >= eps:
            return truth
        pick = int(rng.integers(1, n))
        return pick + (pick >= truth)

    return OutputFunction(n, B.ell, corrupted, "sampled")


class ThresholdMatrix:
    """Entries C[k, h] uniform in [1, 2), drawn lazily from a seed."""

    def __init__(self, seed=0, fixed=None):
        self.seed = seed
        self.fixed = fixed
        self._cache = {}

    def __getitem__(self, kh):
        if self.fixed is not None:
            return self.fixed
        if kh not in self._cache:
            k, h = kh
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, k, h]))
            self._cache[kh] = 1.0 + rng.random()
        return self._cache[kh]


@dataclass(frozen=True)
class FcoParams:
    n: int
    ell: int
    z: int
    delta: float
    p: int
    d: int
    t: tuple  # t[0] = t_1, ..., t[d-1] = t_d
    w: tuple  # w[0] = w_1, ...
    eps: float
    S: tuple

    def eps_k(self, k):
        return self.w[k - 1] * (64 * len(self.S)) ** (k - 1) * self.eps

    def prefix_length(self, k):
        return sum(self.t[k:])


def phase_length(z, p):
    return math.ceil(4 * math.log(2) * (z * p + 2))


def vote_copies(ell, z, delta, s_size):
    """Number of majority-vote copies p, at least 1."""
    if delta == 0:
        return 1
    lg = math.log2(1 / (2 * delta))
    logs = math.log2(64 * s_size)
    return max(1, math.ceil(max(math.sqrt(10 * ell * logs / (3 * z * lg)), 30 * logs / lg)))


def fco_params(n, ell, z, delta, s_size=None, p=None):
    if delta > 1 / 3:
        raise ValueError("delta must be at most 1/3")
    if z < 1:
        raise ValueError("z must be >= 1")
    s_size = n if s_size is None else s_size
    if p is None:
        p = vote_copies(ell, z, delta, s_size)
    d = 1 + ell // (18 * z * p)
    tk = phase_length(z, p)
    t1 = ell - (d - 1) * tk
    if 2 * t1 < ell:
        raise ValueError(f"t_1 = {t1} < ell/2; z={z} is outside the supported range")
    if d > 1 and tk > 9 * z * p:
        raise AssertionError("phase length above 9zp")
    t = (t1,) + (tk,) * (d - 1)
    return custom_fco_params(n, ell, t, S=range(1, s_size + 1), z=z, delta=delta, p=p)


def custom_fco_params(n, ell, t, S=None, z=1, delta=0.0, p=1):
    """Parameters with hand-set interval lengths (micro-scale runs)."""
    t = tuple(t)
    if sum(t) != ell:
        raise ValueError("interval lengths must sum to ell")
    w = tuple(2 ** (k - 1) * (t[0] + 1) for k in range(1, len(t) + 1))
    S = tuple(range(1, n + 1)) if S is None else tuple(S)
    eps = (2 * delta) ** (p / 30) if delta > 0 else 0.0
    return FcoParams(n, ell, z, delta, p, len(t), t, w, eps, S)


@dataclass
class FcoResult:
    items: frozenset
    failed: bool
    failures: int
    trace: list = field(default_factory=list)

    def trace_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "prefix", "round", "q_size", "w_k", "failed"])
        for row in self.trace:
            w.writerow(row)
        return buf.getvalue()


class _Fco:
    def __init__(self, B, C, prm):
        self.B, self.C, self.prm = B, C, prm
        self.memo = {}
        self.trace = []
        self.failures = 0

    def smallest(self, k):
        return frozenset(sorted(self.prm.S)[: self.prm.w[k - 1]])

    def run(self, x, k):
        key = (x, k)
        if key in self.memo:
            return self.memo[key]
        result = self._base(x) if k == 1 else self._step(x, k)
        self.memo[key] = result
        return result

    def _base(self, x):
        t1 = self.prm.t[0]
        chain = []
        for i in range(t1 + 1):
            stream = x + tuple(chain) + (1,) * (t1 - i)
            chain.append(self.B(stream))
        ok = len(set(chain)) == t1 + 1
        if not ok:
            self.failures += 1
            self.trace.append((1, " ".join(map(str, x)), 0, len(set(chain)), t1 + 1, 1))
            return self.smallest(1), True
        self.trace.append((1, " ".join(map(str, x)), 0, t1 + 1, t1 + 1, 0))
        return frozenset(chain), False

    def _step(self, x, k):
        prm = self.prm
        tk = prm.t[k - 1]
        wk, wprev = prm.w[k - 1], prm.w[k - 2]
        S = sorted(prm.S)
        Q = set(self.run(x + tuple(range(1, tk + 1)), k - 1)[0])
        label = " ".join(map(str, x))
        for h in range(1, 5):
            counts = dict.fromkeys(S, 0)
            for y in itertools.combinations(sorted(Q), tk):
                for j in self.run(x + y, k - 1)[0]:
                    if j in counts:
                        counts[j] += 1
            theta = self.C[k, h] * wprev / (16 * len(S))
            cutoff = theta * comb(len(Q), tk)
            Q |= {j for j in S if counts[j] >= cutoff}
            self.trace.append((k, label, h, len(Q), wk, 0))
            if len(Q) >= wk:
                return frozenset(sorted(Q)[:wk]), False
        self.failures += 1
        self.trace.append((k, label, 5, len(Q), wk, 1))
        return self.smallest(k), True


def fco(B, C, x, k, prm):
    """Find w_k items that B outputs for many continuations of prefix x."""
    x = tuple(x)
    if len(x) != prm.prefix_length(k):
        raise ValueError(f"prefix must have length {prm.prefix_length(k)}")
    if len(prm.S) < prm.w[k - 1]:
        raise ValueError("valid-output set smaller than w_k")
    runner = _Fco(B, C, prm)
    items, failed = runner.run(x, k)
    return FcoResult(items, failed, runner.failures, runner.trace)
