"""One-way AVOID protocols built from missing-item algorithms.

Alice streams her set into the automaton and sends its state; Bob echoes
outputs back until he holds his own set.  The message length is compared
with the lower bound at the measured failure rate.
"""
from mifsim.algorithms import DetBitmap, OracleList, SeedBlock
from mifsim.analysis import oracle_lb
from mifsim.reductions import AvoidInstance, avoid_exhaustive, avoid_from_mif, avoid_lb

print("lower bound for a random-oracle MIF(100, 20):", round(oracle_lb(100, 20, 0), 4))
print("AVOID(100, 10, 10) at zero error:", round(avoid_lb(AvoidInstance(100, 10, 10)), 4))
print()

inst = AvoidInstance(10, 2, 2)
for name, a, seeds in [("det_bitmap", DetBitmap(10, 4), (0,)),
                       ("oracle_list", OracleList(10, 4), range(10)),
                       ("seed_block", SeedBlock(10, 4, 4, 3, 5), range(10))]:
    s = avoid_exhaustive(avoid_from_mif(a, inst), seeds=seeds)
    bound = "n/a" if s.lower_bound is None else f"{s.lower_bound:.3f}"
    print(f"{name:12} runs={s.runs:4d} failure={s.failure_rate:.3f} "
          f"message={s.message_bits} bits, bound={bound}")
