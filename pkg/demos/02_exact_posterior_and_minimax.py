"""Exact analysis of small automata: Bayes filtering and the minimax game.

A three-state random-tape automaton is filtered along a short transcript,
then solved exactly against every adaptive adversary.
"""
from mifsim import ABORT, Instance, Transcript
from mifsim.adversaries import StateSpace, compute_H, minimax_worst_error, posterior_update
from mifsim.algorithms import DetBitmap, constant_mif, random_output_mif
from mifsim.engine import TableAutomaton

n = 4
# state 0 says 1, state 1 says 2, state 2 gives up.  Seeing the item it
# currently outputs pushes it to the other item, mostly.
def row(item):
    if item == 1:
        return [{1: 0.8, 2: 0.2}, {1: 1.0}, {2: 1.0}]
    if item == 2:
        return [{0: 1.0}, {0: 0.8, 2: 0.2}, {2: 1.0}]
    return [{0: 0.9, 1: 0.1}, {1: 0.9, 0: 0.1}, {2: 1.0}]


a = TableAutomaton(n, [1, 2, ABORT], [row(i) for i in range(1, n + 1)],
                   init={0: 0.5, 1: 0.5}, name="wobbly")

t = Transcript()
t.append(3, 1)
t.append(4, 2)
post = posterior_update(a, t)
print("posterior after inputs 3, 4 with outputs 1, 2:", post.as_dict())

space = StateSpace(a)
H = compute_H(space, 2)
for s in range(len(space.states)):
    print(f"H for state {space.states[s]!r}: {sorted(H[s])}")

print("\nminimax worst case (mistake, abort) on MIF(4, 2):")
for name, auto in [("wobbly", a), ("det_bitmap", DetBitmap(4, 2)),
                   ("constant 2", constant_mif(4, 2)),
                   ("random of {1,2}", random_output_mif(4, [1, 2]))]:
    res = minimax_worst_error(auto, Instance(4, 2))
    print(f"  {name:16} {res.mistake:.4f} {res.abort:.4f}  (depth {res.depth}, {res.nodes} nodes)")
