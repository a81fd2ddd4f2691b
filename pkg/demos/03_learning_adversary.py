"""The learning adversary against an under-provisioned random-tape algorithm.

The adversary infers the hidden state from outputs, shrinking its set of
candidate states phase by phase.  It beats a non-adaptive random stream.
"""
from mifsim import Instance, estimate_error
from mifsim.adversaries import learning_adversary, random_adversary
from mifsim.algorithms import RtMif, custom_rt_params

inst = Instance(8, 6)
a = RtMif(custom_rt_params(8, 6, (2, 2), (4, 2)), check=False)
learner = learning_adversary(a, inst, t=1)
print(f"learner: prefix q={learner.q}, w={learner.w}, phase length t={learner.t}, "
      f"h_max={learner.h_max}, |Q0|={len(learner.Q0)}")

vs_learner = estimate_error(a, learner, inst, 500, seed=1)
vs_random = estimate_error(a, random_adversary(), inst, 500, seed=1)
print(f"failure rate vs learner {vs_learner.failure_rate:.3f} +- {vs_learner.failure_half_width:.3f}")
print(f"failure rate vs random  {vs_random.failure_rate:.3f} +- {vs_random.failure_half_width:.3f}")

print("\nphase log of the first three games:")
lines = learner.phase_csv().splitlines()
print("\n".join(line for line in lines if line.split(",")[0] in ("run", "0", "1", "2")))
