"""Play each missing-item algorithm against the three static adversaries.

Prints Monte Carlo mistake and abort rates with Wilson half-widths, and the
largest state encoding seen next to the declared width.
"""
from mifsim import Instance, estimate_error
from mifsim.adversaries import echo_adversary, mixed_adversary, random_adversary
from mifsim.algorithms import (
    det_bitmap_mif, oracle_list_mif, rt_mif, rt_params, seed_block_mif,
)

inst = Instance(4096, 64, 0.1)
algorithms = {
    "det_bitmap": det_bitmap_mif(inst),
    "oracle_list": oracle_list_mif(inst),
    "seed_block": seed_block_mif(inst),
    "rt": rt_mif(rt_params(inst)),
}
adversaries = {
    "echo": echo_adversary,
    "random": random_adversary,
    "mixed(0.5)": lambda: mixed_adversary(0.5),
}

print(f"MIF(n={inst.n}, ell={inst.ell}), 300 games per pair\n")
print(f"{'algorithm':12} {'adversary':11} {'mistake':>8} {'abort':>8} {'+-':>7} {'bits':>11}")
for name, a in algorithms.items():
    for adv_name, make in adversaries.items():
        est = estimate_error(a, make(), inst, 300, seed=7)
        print(f"{name:12} {adv_name:11} {est.mistake_rate:8.3f} {est.abort_rate:8.3f} "
              f"{est.failure_half_width:7.3f} {est.max_observed_bits:5d}/{a.state_bits:<5d}")

# the random-tape parameters behind the last row
print()
print(rt_params(inst).to_text())
