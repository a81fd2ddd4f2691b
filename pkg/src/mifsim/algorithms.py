"""MIF algorithms: deterministic bitmap, oracle list, seeded blocks,
the recursive random-tape construction, and a majority-vote combinator."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from math import perm, prod

import numpy as np

from . import _bits
from ._bits import ceil_log2, lowest_zero
from .engine import ABORT, Automaton, NotEnumerable, RandomnessMode, TableAutomaton

ABORTED = "aborted"


class DetBitmap(Automaton):
    """Watch the candidates 1..ell+1 and report the least one not yet seen."""

    mode = RandomnessMode.DETERMINISTIC

    def __init__(self, n, ell):
        if not ell < n:
            raise ValueError("det_bitmap needs ell < n")
        self.n, self.ell = n, ell
        self.state_bits = ell + 1
        self.name = "det_bitmap"

    def initial_state(self, rand=None):
        return 0

    def transition(self, state, item, rand=None):
        if item <= self.ell + 1:
            state |= 1 << (item - 1)
        return state

    def output(self, state, oracle=None):
        pos = lowest_zero(state)
        return ABORT if pos > self.ell else pos + 1

    def encode(self, state):
        return state


def det_bitmap_mif(inst):
    return DetBitmap(inst.n, inst.ell)


class OracleList(Automaton):
    """Report the first entry of an oracle-supplied list not yet covered.

    The list holds ell+1 distinct items and lives in the oracle, so only
    the covered positions J are stored (as an (ell+1)-bit mask).
    """

    mode = RandomnessMode.RANDOM_ORACLE

    def __init__(self, n, ell):
        if not ell < n:
            raise ValueError("oracle_list needs ell < n")
        self.n, self.ell = n, ell
        self.state_bits = ell + 1
        self.name = "oracle_list"

    def candidates(self, oracle):
        def build(o):
            items = o.generator("oracle_list").choice(self.n, self.ell + 1, replace=False) + 1
            items = tuple(int(v) for v in items)
            return items, {v: i for i, v in enumerate(items)}

        return oracle.memo(("oracle_list", self.n, self.ell), build)

    def initial_state(self, rand=None):
        return 0

    def transition(self, state, item, rand=None):
        pos = self.candidates(rand)[1].get(item)
        if pos is not None:
            state |= 1 << pos
        return state

    def output(self, state, oracle=None):
        pos = lowest_zero(state)
        if pos > self.ell:
            return ABORT
        return self.candidates(oracle)[0][pos]

    def encode(self, state):
        return state


def oracle_list_mif(inst):
    return OracleList(inst.n, inst.ell)


def _pow2_at_least(x):
    return 1 << ceil_log2(x)


class SeedBlock(Automaton):
    """Seeded list of blocks, each served by a small deterministic bitmap.

    The universe is cut into ``s`` consecutive blocks.  At init a random
    list of ``k`` distinct blocks is drawn and stored.  The active block
    runs an inner bitmap over its first r+1 items, r = ceil(ell/t); once the
    inner bitmap has taken r inputs it is replaced and the next uncovered
    listed block becomes active.

    State: (L, J, c, inner_mask, inner_count) or ABORTED.
    """

    mode = RandomnessMode.RANDOM_SEED

    def __init__(self, n, ell, t, k, s):
        if not 1 <= t <= ell:
            raise ValueError("need 1 <= t <= ell")
        if not 1 <= k <= s:
            raise ValueError("need 1 <= k <= s")
        if s > n:
            raise ValueError("more blocks than items")
        self.n, self.ell, self.t, self.k, self.s = n, ell, t, k, s
        self.block_size = -(-n // s)
        last = n - (s - 1) * self.block_size
        if last < 1:
            raise ValueError(f"n={n} cannot be cut into s={s} blocks of size {self.block_size}")
        self.budget = -(-ell // t)
        if min(last, self.block_size) < self.budget + 1:
            raise ValueError("blocks too small for the inner bitmap; lower s or raise t")
        self._radices = [s] * k + [1 << k, k, 1 << (self.budget + 1), self.budget + 1]
        self.state_bits = _bits.width([2] + self._radices)
        self.name = "seed_block"

    def _fresh(self, blocks):
        return (tuple(blocks), 0, 0, 0, 0)

    def initial_state(self, rand=None):
        return self._fresh(int(b) for b in rand.choice(self.s, self.k, replace=False))

    def initial_distribution(self):
        total = perm(self.s, self.k)
        return {self._fresh(p): 1 / total
                for p in itertools.permutations(range(self.s), self.k)}

    def transition(self, state, item, rand=None):
        if state == ABORTED:
            return state
        blocks, covered, c, mask, count = state
        h, x = divmod(item - 1, self.block_size)
        if h in blocks:
            covered |= 1 << blocks.index(h)
        if h == blocks[c]:
            if x < self.budget + 1:
                mask |= 1 << x
            count += 1
            if count == self.budget:
                c += 1
                while c < self.k and covered >> c & 1:
                    c += 1
                if c == self.k:
                    return ABORTED
                mask = count = 0
        return (blocks, covered, c, mask, count)

    def output(self, state, oracle=None):
        if state == ABORTED:
            return ABORT
        blocks, _, c, mask, _ = state
        return blocks[c] * self.block_size + lowest_zero(mask) + 1

    def encode(self, state):
        if state == ABORTED:
            return 1
        blocks, covered, c, mask, count = state
        return 2 * _bits.pack(list(blocks) + [covered, c, mask, count], self._radices)


def seed_block_mif(inst, t=None, k=None, s=None):
    n, ell = inst.n, inst.ell
    if t is None:
        t = max(1, min(ell, math.ceil(ell * ell / n + math.sqrt(ell))))
    if k is None:
        k = 2 * t
    if s is None:
        s = _pow2_at_least(4 * ell)
    return SeedBlock(n, ell, t, k, s)


def fract_power_round(alpha, k):
    """Number u of rounded-up factors so that
    alpha**k <= ceil(alpha)**u * floor(alpha)**(k-u) <= 2 * alpha**k."""
    lo, hi = math.floor(alpha), math.ceil(alpha)
    if lo < 1:
        raise ValueError("alpha must be >= 1")
    if lo == hi:
        return 0
    target = alpha**k
    u = min(k, max(0, math.ceil(k * math.log(alpha / lo) / math.log(hi / lo))))
    # nudge away from float ties so the bounds hold as evaluated
    while u > 0 and hi ** (u - 1) * lo ** (k - u + 1) >= target:
        u -= 1
    while u < k and hi**u * lo ** (k - u) < target:
        u += 1
    return u


def _snap(x, tol=1e-9):
    r = round(x)
    return float(r) if abs(x - r) <= tol * max(1.0, abs(x)) else x


@dataclass(frozen=True)
class RtParams:
    n: int
    ell: int
    delta: float
    d: int
    alpha: float
    u: int
    b: tuple
    w: tuple

    @property
    def strides(self):
        return tuple(prod(self.w[i + 1:]) for i in range(self.d))

    @property
    def range_size(self):
        return prod(self.w)

    def iota(self, digits):
        """Mixed-radix index map from 0-based digits to an item in 1..prod(w)."""
        return 1 + sum(v * s for v, s in zip(digits, self.strides))

    def iota_inverse(self, item):
        return tuple(_bits.unpack(item - 1, list(self.w)))

    def exact_bits(self):
        return sum(b * math.log2(2 * w) for b, w in zip(self.b, self.w))

    def check(self):
        """Assert the size and product conditions on b and w; returns self."""
        inner = prod(self.b[1:])
        if self.range_size > self.n:
            raise AssertionError(f"prod w = {self.range_size} > n = {self.n}")
        if not self.ell / self.alpha <= inner <= 4 * self.ell / self.alpha:
            raise AssertionError(f"prod b_2..b_d = {inner} outside [ell/alpha, 4 ell/alpha]")
        for i in range(self.d):
            if self.b[i] > self.w[i]:
                raise AssertionError("list longer than its range")
        return self

    def to_text(self):
        rows = [
            ("n", self.n), ("ell", self.ell), ("delta", repr(self.delta)),
            ("d", self.d), ("alpha", repr(self.alpha)), ("u", self.u),
            ("b", " ".join(map(str, self.b))), ("w", " ".join(map(str, self.w))),
            ("prod_w", self.range_size), ("prod_b_tail", prod(self.b[1:])),
            ("exact_bits", repr(self.exact_bits())),
        ]
        return "".join(f"{k} = {v}\n" for k, v in rows)


def rt_depth(n, ell):
    by_length = ceil_log2(ell)
    # largest d with (16 ell)^d <= (n/4)^2, done in integers
    by_universe = 0
    while 16 * (16 * ell) ** (by_universe + 1) <= n * n:
        by_universe += 1
    return max(2, min(by_length, by_universe)), by_length < by_universe


def rt_params(inst):
    n, ell, delta = inst.n, inst.ell, inst.delta
    if ell < 4 or 64 * ell > n:
        raise ValueError(
            f"random-tape parameters need 4 <= ell <= n/64 (got n={n}, ell={ell}); "
            "use det_bitmap_mif for this instance")
    d, small = rt_depth(n, ell)
    if small:
        alpha = 2.0
    else:
        alpha = _snap((4 * ell) ** (2 / (d - 1)) / (n / 4) ** (2 / (d * (d - 1))))
    lo, hi = math.floor(alpha), math.ceil(alpha)
    u = fract_power_round(alpha, d - 2)
    middle = [hi] * u + [lo] * (d - 2 - u)
    if delta == 0:
        b1 = ell + 1
    else:
        b1 = min(ell + 1, math.ceil(8 * alpha) + math.ceil(3 * math.log2(1 / delta)))
    bd = math.ceil(_snap(ell / alpha ** (d - 1)))
    b = (b1, *middle, bd)
    w = (16 * ell,) + tuple(prod(b[i:]) for i in range(1, d))
    return RtParams(n, ell, delta, d, alpha, u, b, w).check()


def _distinct_sequence(rng, w, b):
    """Partial Fisher-Yates: b distinct values from range(w), uniformly ordered."""
    picks = rng.integers(np.arange(b), w)
    swapped = {}
    out = []
    for i, j in enumerate(picks.tolist()):
        vi = swapped.get(i, i)
        out.append(swapped.get(j, j))
        swapped[j] = vi
    return tuple(out)


class RtMif(Automaton):
    """Recursive random-tape algorithm.

    Level i keeps a random list L_i of b_i distinct values in range(w_i)
    and a bit mask x_i of entries known to be unsafe or used up.  Outputs
    are the index-map image of the current entries on all levels.

    State: (Ls, xs) with Ls a tuple of tuples and xs a tuple of int masks,
    or ABORTED.
    """

    mode = RandomnessMode.RANDOM_TAPE

    def __init__(self, params, check=True):
        if check:
            params.check()
        self.params = params
        self.n = params.n
        self.d = params.d
        self.b, self.w = params.b, params.w
        self._full = tuple((1 << b) - 1 for b in self.b)
        self._radices = []
        for b, w in zip(self.b, self.w):
            self._radices += [w] * b + [1 << b]
        self.state_bits = _bits.width([2] + self._radices)
        self.name = "rt_mif"

    def initial_state(self, rand=None):
        Ls = tuple(_distinct_sequence(rand, w, b) for b, w in zip(self.b, self.w))
        return (Ls, (0,) * self.d)

    def _update(self, state, item):
        """Deterministic part of an update: new state and levels to resample."""
        if state == ABORTED or item > self.params.range_size:
            return state, ()
        Ls, xs = state
        v = self.params.iota_inverse(item)
        cursor = [lowest_zero(x) for x in xs]
        xs = list(xs)
        mismatch = next((i for i in range(self.d) if v[i] != Ls[i][cursor[i]]), None)
        if mismatch is None:
            redo = []
            for i in range(self.d - 1, -1, -1):
                xs[i] |= 1 << cursor[i]
                if xs[i] != self._full[i]:
                    break
                if i == 0:
                    return ABORTED, ()
                xs[i] = 0
                redo.append(i)
            return (Ls, tuple(xs)), tuple(redo)
        j = mismatch
        if v[j] in Ls[j]:
            xs[j] |= 1 << Ls[j].index(v[j])
        return (Ls, tuple(xs)), ()

    def transition(self, state, item, rand=None):
        state, redo = self._update(state, item)
        if redo:
            Ls = list(state[0])
            for i in redo:
                Ls[i] = _distinct_sequence(rand, self.w[i], self.b[i])
            state = (tuple(Ls), state[1])
        return state

    def _check_small(self):
        count = prod(perm(w, b) for b, w in zip(self.b, self.w))
        if count > 1 << 16:
            raise NotEnumerable("rt_mif state space too large to enumerate")

    def initial_distribution(self):
        self._check_small()
        lists = [list(itertools.permutations(range(w), b)) for b, w in zip(self.b, self.w)]
        total = prod(len(x) for x in lists)
        return {(Ls, (0,) * self.d): 1 / total for Ls in itertools.product(*lists)}

    def transition_distribution(self, state, item):
        self._check_small()
        state, redo = self._update(state, item)
        if not redo:
            return {state: 1.0}
        Ls, xs = state
        options = [list(itertools.permutations(range(self.w[i]), self.b[i])) for i in redo]
        total = prod(len(x) for x in options)
        dist = {}
        for choice in itertools.product(*options):
            new = list(Ls)
            for i, seq in zip(redo, choice):
                new[i] = seq
            key = (tuple(new), xs)
            dist[key] = dist.get(key, 0.0) + 1 / total
        return dist

    def output(self, state, oracle=None):
        if state == ABORTED:
            return ABORT
        Ls, xs = state
        return self.params.iota([L[lowest_zero(x)] for L, x in zip(Ls, xs)])

    def encode(self, state):
        if state == ABORTED:
            return 1
        Ls, xs = state
        digits = []
        for L, x in zip(Ls, xs):
            digits += list(L) + [x]
        return 2 * _bits.pack(digits, self._radices)


def rt_mif(params):
    return RtMif(params)


def custom_rt_params(n, ell, b, w=None, delta=0.0):
    """Hand-set parameters, e.g. deliberately under-provisioned micro runs.

    ``w`` defaults to the usual rule; pass it explicitly to shrink level 1.
    The size and product checks are skipped.
    """
    b = tuple(b)
    d = len(b)
    if w is None:
        w = (16 * ell,) + tuple(prod(b[i:]) for i in range(1, d))
    params = RtParams(n, ell, delta, d, float("nan"), 0, b, tuple(w))
    if params.range_size > n:
        raise ValueError("index map does not fit in the universe")
    return params


class MajorityVote(Automaton):
    """Run p copies side by side and report their most common output."""

    def __init__(self, inner, p):
        if p < 1 or p % 2 == 0:
            raise ValueError("p must be a positive odd number")
        self.inner, self.p = inner, p
        self.mode = inner.mode
        self.n = inner.n
        self.state_bits = p * inner.state_bits
        self.name = f"majority{p}({inner.name})"

    def _child_rand(self, rand, i):
        if self.mode is RandomnessMode.RANDOM_ORACLE:
            return rand.child(i)
        return rand

    def initial_state(self, rand=None):
        return tuple(self.inner.initial_state(self._child_rand(rand, i)) for i in range(self.p))

    def transition(self, state, item, rand=None):
        return tuple(self.inner.transition(s, item, self._child_rand(rand, i))
                     for i, s in enumerate(state))

    def output(self, state, oracle=None):
        votes = Counter(self.inner.output(s, self._child_rand(oracle, i) if oracle else None)
                        for i, s in enumerate(state))
        return min(votes, key=lambda o: (-votes[o], o is ABORT, 0 if o is ABORT else o))

    def encode(self, state):
        code = 0
        for s in state:
            code = (code << self.inner.state_bits) | self.inner.encode(s)
        return code


def majority_amplify(a, p):
    return MajorityVote(a, p)


class CorruptedOutputs(Automaton):
    """Tape automaton that follows a deterministic one but, after each step,
    replaces its output by a uniform wrong item with probability eps."""

    mode = RandomnessMode.RANDOM_TAPE

    def __init__(self, inner, eps):
        if inner.mode is not RandomnessMode.DETERMINISTIC:
            raise ValueError("corruption wraps a deterministic automaton")
        self.inner, self.eps = inner, eps
        self.n = inner.n
        self._slot = ceil_log2(self.n + 1)
        self.state_bits = inner.state_bits + self._slot
        self.name = f"corrupt({inner.name})"

    def initial_state(self, rand=None):
        return (self.inner.initial_state(None), 0)

    def transition(self, state, item, rand=None):
        inner = self.inner.transition(state[0], item, None)
        override = 0
        if rand.random() < self.eps:
            truth = self.inner.output(inner)
            pick = int(rand.integers(1, self.n))
            override = pick + (truth is not ABORT and pick >= truth)
        return (inner, override)

    def output(self, state, oracle=None):
        return state[1] or self.inner.output(state[0])

    def encode(self, state):
        return (self.inner.encode(state[0]) << self._slot) | state[1]


def corrupt_outputs(a, eps):
    return CorruptedOutputs(a, eps)


def constant_mif(n, value):
    """One-state automaton that always reports ``value``."""
    return TableAutomaton(n, [value], [[0] for _ in range(n)], name=f"constant{value}")


def random_output_mif(n, outputs):
    """Tape automaton jumping to a uniform random state on every input;
    state s reports outputs[s]."""
    num = len(outputs)
    uniform = {s: 1 / num for s in range(num)}
    return TableAutomaton(n, outputs, [[dict(uniform) for _ in range(num)] for _ in range(n)],
                          init=dict(uniform), mode=RandomnessMode.RANDOM_TAPE,
                          name=f"random_output{num}")


__all__ = [
    "ABORTED", "DetBitmap", "OracleList", "SeedBlock", "RtParams", "RtMif",
    "MajorityVote", "CorruptedOutputs", "det_bitmap_mif", "oracle_list_mif",
    "seed_block_mif", "rt_params", "rt_mif", "custom_rt_params",
    "fract_power_round", "majority_amplify", "corrupt_outputs",
    "constant_mif", "random_output_mif",
]
