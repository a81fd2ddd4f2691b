"""Finding items a canonical output function keeps returning.

The recursive search explores continuations of a prefix and collects
items that the output function commits to, then repeats under noise.
"""
import numpy as np

from mifsim.reductions import (
    ThresholdMatrix, canonical_min_missing, custom_fco_params, fco, fco_params, noisy,
)

prm = custom_fco_params(64, 16, (12, 4))
B = canonical_min_missing(64, 16)
x = (5, 9, 2, 40)
res = fco(B, ThresholdMatrix(0), x, 1, prm)
print("prefix", x, "->", sorted(res.items))
print(res.trace_csv())

# with a 1% chance of a wrong answer per call
rng = np.random.default_rng(3)
changed = 0
for seed in range(200):
    x = tuple(int(v) for v in rng.choice(np.arange(1, 65), 4, replace=False))
    clean = fco(B, ThresholdMatrix(seed), x, 1, prm).items
    dirty = fco(noisy(B, 0.01, seed), ThresholdMatrix(seed), x, 1, prm).items
    changed += clean != dirty
print(f"noisy runs differing from the clean run: {changed}/200")

# a level-two run on a tiny universe
prm2 = custom_fco_params(12, 5, (2, 3))
res2 = fco(canonical_min_missing(12, 5), ThresholdMatrix(1), (), 2, prm2)
print("level two, empty prefix ->", sorted(res2.items), "failed:", res2.failed)

full = fco_params(1 << 20, 2000, 1, 0.0)
print(f"\nfull-size parameters for n=2^20, ell=2000: d={full.d}, t_1={full.t[0]}, "
      f"w_d={full.w[-1]}")
