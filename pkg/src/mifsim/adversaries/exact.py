"""Exact analysis of micro-scale automata.

Everything here works on the enumerated reachable state space: Bayes
filtering of the state given a transcript, the per-state sets of items
that were unlikely to appear in a random prefix, the search for phase
strategies whose outputs rule out half of a candidate state set, and exact
backward induction for the worst-case mistake probability.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import sparse

from ..engine import ABORT, BudgetExceeded, NotEnumerable

DEFAULT_CAP = 1 << 16
DEFAULT_BUDGET = 2_000_000
TOL = 1e-12


class StateSpace:
    """Reachable states of an automaton with per-item transition matrices."""

    def __init__(self, a, cap=DEFAULT_CAP):
        self.automaton = a
        self.n = a.n
        init = a.initial_distribution()
        self.states = list(init)
        self.index = {s: i for i, s in enumerate(self.states)}
        rows = [[] for _ in range(self.n)]
        queue = deque(range(len(self.states)))
        while queue:
            i = queue.popleft()
            s = self.states[i]
            for item in range(1, self.n + 1):
                for nxt, p in a.transition_distribution(s, item).items():
                    j = self.index.get(nxt)
                    if j is None:
                        j = len(self.states)
                        if j >= cap:
                            raise NotEnumerable(f"more than {cap} reachable states")
                        self.states.append(nxt)
                        self.index[nxt] = j
                        queue.append(j)
                    rows[item - 1].append((j, i, p))
        size = len(self.states)
        self.size = size
        self.init = np.zeros(size)
        for s, p in init.items():
            self.init[self.index[s]] += p
        # forward[item-1] maps a belief column vector to the next belief
        self.forward = []
        for entries in rows:
            if entries:
                r, c, v = zip(*entries)
            else:
                r = c = v = ()
            self.forward.append(sparse.csr_matrix((v, (r, c)), shape=(size, size)))
        outs = [a.output(s) for s in self.states]
        self.outputs = outs
        self.codes = np.array([0 if o is ABORT else int(o) for o in outs], dtype=np.int64)

    def step(self, belief, item):
        return self.forward[item - 1] @ belief

    def split(self, belief):
        """Partition a belief by the output its states report."""
        nz = np.flatnonzero(belief > 0)
        parts = {}
        for code in np.unique(self.codes[nz]).tolist():
            part = np.zeros_like(belief)
            sel = nz[self.codes[nz] == code]
            part[sel] = belief[sel]
            parts[code] = part
        return parts


def _space(a, cap=DEFAULT_CAP):
    return a if isinstance(a, StateSpace) else StateSpace(a, cap)


@dataclass
class Posterior:
    space: StateSpace
    probs: np.ndarray

    def support(self):
        return set(np.flatnonzero(self.probs > 0).tolist())

    def as_dict(self):
        return {self.space.states[i]: float(self.probs[i]) for i in self.support()}


def filter_belief(space, belief, inputs, outputs):
    for item, out in zip(inputs, outputs):
        belief = space.step(belief, item)
        code = 0 if out is ABORT else out
        belief = np.where(space.codes == code, belief, 0.0)
        total = belief.sum()
        if total <= 0:
            raise ValueError("transcript has probability zero under this automaton")
        belief = belief / total
    return belief


def posterior_update(a, transcript, cap=DEFAULT_CAP):
    """Exact distribution of the state given the observed transcript."""
    space = _space(a, cap)
    probs = filter_belief(space, space.init, transcript.inputs, transcript.outputs)
    return Posterior(space, probs)


@dataclass
class HSets:
    """Per-state sets of items unlikely to have been in a random q-prefix."""

    q: int
    threshold: float
    sets: dict  # state index -> frozenset of items
    reach: np.ndarray  # Pr[F(X) = state]
    conditional: np.ndarray  # Pr[i in X | F(X) = state], shape (states, n)
    mode: str = "exact"
    samples: int = 0

    def __getitem__(self, state_index):
        return self.sets[state_index]


def compute_H(a, q, mode="exact", samples=100_000, seed=0, cap=DEFAULT_CAP):
    """Sets H_s = {i : Pr[i in X | F(X) = s] <= q/(4n)}, X a uniform sorted q-subset.

    Only states reachable after some prefix get a set.  In sampling mode the
    prefixes are drawn at random and the state distribution after each
    drawn prefix is still propagated exactly.
    """
    space = _space(a, cap)
    n = space.n
    if not 0 <= q <= n:
        raise ValueError("need 0 <= q <= n")
    joint = np.zeros((space.size, n))
    reach = np.zeros(space.size)
    if mode == "exact":
        weight = 1.0 / comb(n, q)

        def walk(belief, start, chosen):
            if len(chosen) == q:
                reach[:] += weight * belief
                for i in chosen:
                    joint[:, i - 1] += weight * belief
                return
            for item in range(start, n - (q - len(chosen)) + 2):
                chosen.append(item)
                walk(space.step(belief, item), item + 1, chosen)
                chosen.pop()

        walk(space.init, 1, [])
    elif mode == "samples":
        if samples < 1:
            raise ValueError("sampling mode needs samples >= 1")
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            chosen = np.sort(rng.choice(n, q, replace=False)) + 1
            belief = space.init
            for item in chosen.tolist():
                belief = space.step(belief, item)
            reach += belief / samples
            joint[:, chosen - 1] += belief[:, None] / samples
    else:
        raise ValueError("mode must be 'exact' or 'samples'")
    threshold = q / (4 * n)
    conditional = np.zeros_like(joint)
    live = reach > TOL
    conditional[live] = joint[live] / reach[live, None]
    sets = {}
    for s in np.flatnonzero(live).tolist():
        sets[s] = frozenset((np.flatnonzero(conditional[s] <= threshold + TOL) + 1).tolist())
    return HSets(q, threshold, sets, reach, conditional, mode, samples if mode == "samples" else 0)


class _Counter:
    def __init__(self, budget):
        self.budget = budget
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExceeded(f"search exceeded {self.budget} nodes")


def is_divisive(outputs, Q, H):
    """True when at most half of Q has every output inside its H set."""
    if any(o is ABORT for o in outputs):
        return True
    ys = set(outputs)
    count = sum(1 for s in Q if ys <= H[s])
    return 2 * count <= len(Q)


@dataclass
class Splitting:
    probability: float
    policy: object  # callable: tuple of phase outputs -> input
    mode: str  # "exact" or "non-adaptive"
    nodes: int


class _TablePolicy:
    def __init__(self, table, default):
        self.table = table
        self.default = default

    def __call__(self, outputs):
        return self.table.get(tuple(outputs), self.default)


class _SequencePolicy:
    def __init__(self, seq):
        self.seq = tuple(seq)

    def __call__(self, outputs):
        return self.seq[len(outputs)]


def find_splitting(space, belief, Q, H, t, budget=DEFAULT_BUDGET, items=None):
    """Best deterministic t-step strategy for producing divisive outputs.

    Returns a Splitting when the best found strategy makes the outputs
    divisive for Q (ABORT counts as divisive) with probability >= 1/2, and
    None otherwise.  Adaptive strategies are searched exactly within the
    node budget; past it, non-adaptive input sequences are tried instead.
    """
    if t < 1:
        raise ValueError("phase length must be >= 1")
    Q = frozenset(Q)
    items = list(range(1, space.n + 1)) if items is None else list(items)
    half = len(Q) / 2
    hmap = {s: H[s] for s in Q}
    counter = _Counter(budget)
    memo = {}

    def shrink(alive, code):
        return frozenset(s for s in alive if code in hmap[s])

    def value(b, alive, depth):
        if len(alive) <= half:
            return b.sum()
        if depth == t:
            return 0.0
        key = (b.tobytes(), alive, depth)
        hit = memo.get(key)
        if hit is not None:
            return hit[0]
        counter.tick()
        best, choice = -1.0, items[0]
        for item in items:
            v = 0.0
            for code, part in space.split(space.step(b, item)).items():
                v += part.sum() if code == 0 else value(part, shrink(alive, code), depth + 1)
            if v > best + TOL:
                best, choice = v, item
        memo[key] = (best, choice)
        return best

    try:
        prob = value(belief, Q, 0)
    except BudgetExceeded:
        return _non_adaptive(space, belief, Q, hmap, t, budget, items, counter.nodes)
    table = {}

    def walk(b, alive, depth, prefix):
        if len(alive) <= half or depth == t:
            return
        choice = memo[(b.tobytes(), alive, depth)][1]
        table[prefix] = choice
        for code, part in space.split(space.step(b, choice)).items():
            if code:
                walk(part, shrink(alive, code), depth + 1, prefix + (code,))

    walk(belief, Q, 0, ())
    if prob < 0.5 - TOL:
        return None
    return Splitting(float(prob), _TablePolicy(table, items[0]), "exact", counter.nodes)


def _non_adaptive(space, belief, Q, hmap, t, budget, items, used):
    half = len(Q) / 2
    best, best_seq = -1.0, None
    for count, seq in enumerate(itertools.product(items, repeat=t)):
        if count >= budget:
            break
        layer = [(belief, Q)]
        done = 0.0
        for item in seq:
            nxt = []
            for b, alive in layer:
                for code, part in space.split(space.step(b, item)).items():
                    if code == 0:
                        done += part.sum()
                        continue
                    alive2 = frozenset(s for s in alive if code in hmap[s])
                    if len(alive2) <= half:
                        done += part.sum()
                    else:
                        nxt.append((part, alive2))
            layer = nxt
        if done > best + TOL:
            best, best_seq = done, seq
    if best_seq is None or best < 0.5 - TOL:
        return None
    return Splitting(float(best), _SequencePolicy(best_seq), "non-adaptive", used + budget)


@dataclass
class GameValue:
    mistake: float
    abort: float
    depth: int
    policy: object
    nodes: int


def solve_game(space, belief, steps, items=None, valid=None, seen=frozenset(),
               objective="mistake", budget=DEFAULT_BUDGET):
    """Backward induction over deterministic adaptive adversaries.

    The automaton starts from ``belief``.  Each step the adversary picks an
    input from ``items``; an output in ``seen`` plus the inputs so far is a
    mistake, an ABORT (or an output outside ``valid`` when given) is an
    abort, and either ends the branch.  ``objective`` selects which
    probability is maximized first; the other breaks ties.
    """
    items = list(range(1, space.n + 1)) if items is None else list(items)
    valid = None if valid is None else frozenset(valid)
    counter = _Counter(budget)
    memo = {}
    first = 0 if objective == "mistake" else 1

    def better(a, b):
        if a[first] > b[first] + TOL:
            return True
        return abs(a[first] - b[first]) <= TOL and a[1 - first] > b[1 - first] + TOL

    def outcome(code, seen_now):
        if code == 0 or (valid is not None and code not in valid):
            return "abort"
        return "mistake" if code in seen_now else "go"

    def value(b, seen_now, left):
        if left == 0:
            return (0.0, 0.0, 0)
        key = (b.tobytes(), seen_now, left)
        hit = memo.get(key)
        if hit is not None:
            return hit[0]
        counter.tick()
        best, choice = None, items[0]
        for item in items:
            seen2 = seen_now | {item}
            m = ab = 0.0
            depth = 1
            for code, part in space.split(space.step(b, item)).items():
                kind = outcome(code, seen2)
                if kind == "abort":
                    ab += part.sum()
                elif kind == "mistake":
                    m += part.sum()
                else:
                    sub = value(part, seen2, left - 1)
                    m += sub[0]
                    ab += sub[1]
                    if sub[2]:
                        depth = max(depth, 1 + sub[2])
            cand = (m, ab, depth)
            if best is None or better(cand, best):
                best, choice = cand, item
        memo[key] = (best, choice)
        return best

    m, ab, depth = value(belief, frozenset(seen), steps)
    table = {}

    def walk(b, seen_now, left, prefix):
        if left == 0:
            return
        choice = memo[(b.tobytes(), seen_now, left)][1]
        table[prefix] = choice
        seen2 = seen_now | {choice}
        for code, part in space.split(space.step(b, choice)).items():
            if outcome(code, seen2) == "go":
                walk(part, seen2, left - 1, prefix + (code,))

    walk(belief, frozenset(seen), steps, ())
    return GameValue(float(m), float(ab), depth, _TablePolicy(table, items[0]), counter.nodes)


@dataclass
class MinimaxResult:
    mistake: float
    abort: float
    induced_abort: float
    depth: int
    policy: object
    nodes: int = 0

    def as_pair(self):
        return (self.mistake, self.abort)


def minimax_worst_error(a, inst, budget=DEFAULT_BUDGET, cap=DEFAULT_CAP):
    """Worst-case mistake probability over all adversaries, exactly.

    ``abort`` is the worst-case abort probability (maximized separately);
    ``induced_abort`` is the abort probability under the mistake-maximizing
    adversary.
    """
    space = _space(a, cap)
    if space.n != inst.n:
        raise ValueError("automaton universe does not match the instance")
    worst = solve_game(space, space.init, inst.ell, objective="mistake", budget=budget)
    aborts = solve_game(space, space.init, inst.ell, objective="abort", budget=budget)
    return MinimaxResult(worst.mistake, aborts.abort, worst.abort, worst.depth,
                         worst.policy, worst.nodes + aborts.nodes)
