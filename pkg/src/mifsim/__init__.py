"""Missing item finding under four randomness models."""

from .engine import (
    ABORT, Instance, RandomnessMode, Automaton, Oracle, Transcript, Verdict,
    GameResult, SpaceReport, run_game, estimate_error, check_transcript,
)

__version__ = "0.1.0"
