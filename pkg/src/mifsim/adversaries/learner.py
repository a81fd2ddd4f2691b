"""Adaptive adversary that learns the state of a random-tape automaton.

It opens with a random sorted prefix, then works in phases of t inputs.
While some phase strategy has at least an even chance of ruling out half
of the remaining candidate states, it plays that strategy and shrinks the
candidate set.  Otherwise the candidates mostly agree on which items were
unlikely to have been seen; it restricts itself to those items and plays
the strategy that maximizes the chance of a mistake there.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ..engine import ABORT
from .basic import Adversary
from .exact import (
    DEFAULT_BUDGET, StateSpace, compute_H, filter_belief, find_splitting,
    is_divisive, solve_game,
)


@dataclass
class Phase:
    h: int
    kind: str  # "split", "extract" or "fail"
    q_before: int
    q_after: int | None = None
    divisive: bool | None = None
    w_size: int | None = None
    inputs: int = 0
    mode: str = ""
    note: str = ""


PHASE_FIELDS = ["run", "h", "kind", "q_before", "q_after", "divisive", "w_size", "inputs", "mode", "note"]


def learner_parameters(z, n, ell, w=None, t=None, h_max=None):
    """Defaults w = 2*floor(32 z n / ell), h_max = 32 z, t = floor(ell / (2 h_max)).

    Overriding t alone caps h_max so the phases fit in the second half of
    the stream.
    """
    q = math.ceil(ell / 2)
    if w is None:
        w = 2 * math.floor(32 * z * n / ell)
    if t is None:
        if h_max is None:
            h_max = 32 * z
        t = ell // (2 * h_max)
    elif h_max is None:
        h_max = min(32 * z, (ell - q) // t) if t else 32 * z
    if q + t * h_max > ell:
        raise ValueError(f"prefix {q} plus {h_max} phases of {t} exceeds ell={ell}")
    return q, w, t, h_max


class LearningAdversary(Adversary):
    kind = "learner"
    deterministic = False

    def __init__(self, a, inst, *, w=None, t=None, h_max=None, budget=DEFAULT_BUDGET,
                 space=None, H=None):
        self.automaton = a
        self.inst = inst
        self.z = a.state_bits
        self.q, self.w, self.t, self.h_max = learner_parameters(
            self.z, inst.n, inst.ell, w, t, h_max)
        self.budget = budget
        self.space = space or StateSpace(a)
        self.H = H or compute_H(self.space, self.q)
        self.Q0 = frozenset(s for s, hs in self.H.sets.items() if 2 * len(hs) <= self.w)
        self._split_cache = {}
        self._game_cache = {}
        self.runs = []

    # per-game bookkeeping
    def reset(self, inst, rng):
        super().reset(inst, rng)
        self.prefix = (np.sort(rng.choice(inst.n, self.q, replace=False)) + 1).tolist()
        self.log = []
        self.Q = self.Q0
        self.h = 0
        self.phase = None  # (kind, policy, start index)
        self.done = False
        self.W = None

    def _belief(self, transcript):
        return filter_belief(self.space, self.space.init, transcript.inputs, transcript.outputs)

    def _start_phase(self, transcript):
        self.h += 1
        if self.h > self.h_max:
            self.log.append(Phase(self.h, "fail", len(self.Q), note="phase limit reached"))
            self.done = True
            return
        if self.t == 0:
            self._extract(transcript, None)
            return
        key = (tuple(transcript.inputs), tuple(transcript.outputs), self.Q)
        if key not in self._split_cache:
            belief = self._belief(transcript)
            self._split_cache[key] = find_splitting(
                self.space, belief, self.Q, self.H, self.t, self.budget)
        found = self._split_cache[key]
        if found is not None:
            self.log.append(Phase(self.h, "split", len(self.Q), mode=found.mode))
            self.phase = ("split", found.policy, len(transcript))
        else:
            self._extract(transcript, key)

    def _extract(self, transcript, key):
        n = self.inst.n
        counts = {}
        for s in self.Q:
            for i in self.H[s]:
                counts[i] = counts.get(i, 0) + 1
        W = sorted(i for i, c in counts.items() if 2 * c >= len(self.Q))
        if len(W) > self.w:
            raise AssertionError(f"|W| = {len(W)} exceeds w = {self.w}")
        padded = list(W)
        chosen = set(W)
        for i in range(1, n + 1):
            if len(padded) >= min(self.w, n):
                break
            if i not in chosen:
                padded.append(i)
        self.W = sorted(padded)
        self.log.append(Phase(self.h, "extract", len(self.Q), w_size=len(W)))
        if self.t == 0:
            self.done = True
            return
        gkey = (key, tuple(self.W))
        if gkey not in self._game_cache:
            belief = self._belief(transcript)
            self._game_cache[gkey] = solve_game(
                self.space, belief, self.t, items=self.W, valid=self.W, budget=self.budget)
        game = self._game_cache[gkey]
        self.log[-1].mode = f"target={game.mistake:.6g}"
        self.phase = ("extract", game.policy, len(transcript))

    def _end_split(self, transcript):
        start = self.phase[2]
        outputs = transcript.outputs[start:]
        entry = self.log[-1]
        entry.inputs = len(outputs)
        entry.divisive = is_divisive(outputs, self.Q, self.H)
        keep = frozenset(s for s in self.Q if set(outputs) <= self.H[s])
        if entry.divisive and 2 * len(keep) > len(self.Q):
            raise AssertionError("divisive phase failed to halve the candidate set")
        self.Q = keep
        entry.q_after = len(keep)
        self.phase = None
        if not keep:
            self.log.append(Phase(self.h, "fail", 0, note="no candidate state left"))
            self.done = True

    def next_input(self, transcript):
        k = len(transcript)
        if k < self.q:
            return self.prefix[k]
        while not self.done:
            if self.phase is None:
                self._start_phase(transcript)
                continue
            kind, policy, start = self.phase
            if k - start < self.t:
                return policy(tuple(transcript.outputs[start:]))
            if kind == "extract":
                self.log[-1].inputs = k - start
                self.done = True
            else:
                self._end_split(transcript)
        return None

    def finish(self, transcript):
        if self.phase is not None and self.log:
            entry = self.log[-1]
            start = self.phase[2]
            entry.inputs = len(transcript) - start
            if transcript.outputs and transcript.outputs[-1] is ABORT and entry.kind == "split":
                entry.divisive = True
                entry.note = "aborted"
        self.runs.append(list(self.log))

    def phase_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PHASE_FIELDS)
        for run, log in enumerate(self.runs):
            for p in log:
                writer.writerow([run, p.h, p.kind, p.q_before,
                                 "" if p.q_after is None else p.q_after,
                                 "" if p.divisive is None else int(p.divisive),
                                 "" if p.w_size is None else p.w_size,
                                 p.inputs, p.mode, p.note])
        return buf.getvalue()


def learning_adversary(a, inst, **overrides):
    return LearningAdversary(a, inst, **overrides)
