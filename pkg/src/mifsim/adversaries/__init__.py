"""Adversaries: static strategies, exact micro-scale analysis, and the learner."""

from .basic import (
    Adversary, Echo, Mixed, Policy, Replay, UniformFresh,
    echo_adversary, mixed_adversary, random_adversary, replay_adversary,
)
from .exact import (
    HSets, MinimaxResult, Posterior, Splitting, StateSpace, compute_H,
    find_splitting, is_divisive, minimax_worst_error, posterior_update, solve_game,
)
from .learner import LearningAdversary, learner_parameters, learning_adversary

__all__ = [
    "Adversary", "Echo", "Mixed", "Policy", "Replay", "UniformFresh",
    "echo_adversary", "mixed_adversary", "random_adversary", "replay_adversary",
    "HSets", "MinimaxResult", "Posterior", "Splitting", "StateSpace", "compute_H",
    "find_splitting", "is_divisive", "minimax_worst_error", "posterior_update",
    "solve_game", "LearningAdversary", "learner_parameters", "learning_adversary",
]
