"""Bridges human scores and synthetic test oracles to the engine's objective.

The engine minimizes; people rate melodies on a "higher is better" scale.
A submitted score s is stored as fitness -s, which preserves every pairwise
comparison selection will ever make.  Synthetic oracles stand in for the
human during automated runs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .genome import validate_genome

DEFAULT_MIN_SCORE = 0.0
DEFAULT_MAX_SCORE = 10.0


@dataclass(frozen=True)
class HumanScore:
    candidate_id: str
    score: float
    submitted_at: str = ""


class ScoreBook:
    """Per-round score intake with range checking and last-write-wins.

    A round is opened with the candidate ids eligible for scoring; submitting
    twice for one candidate simply overwrites.  Stored values are negated
    scores, i.e. engine-ready fitness.
    """

    def __init__(
        self,
        round_ids: list[str],
        min_score: float = DEFAULT_MIN_SCORE,
        max_score: float = DEFAULT_MAX_SCORE,
    ):
        if max_score <= min_score:
            raise ValueError("score range must be non-empty")
        self.min_score = float(min_score)
        self.max_score = float(max_score)
        self.round_ids = list(round_ids)
        self.fitness: dict[str, float] = {}

    def ingest_score(self, s: HumanScore) -> None:
        if s.candidate_id not in self.round_ids:
            raise KeyError(f"unknown candidate {s.candidate_id!r}")
        if not (self.min_score <= s.score <= self.max_score):
            raise ValueError(
                f"score {s.score} outside allowed range "
                f"[{self.min_score}, {self.max_score}]"
            )
        self.fitness[s.candidate_id] = -float(s.score)

    def pending(self) -> list[str]:
        """Candidates still awaiting a score, in slot order."""
        return [cid for cid in self.round_ids if cid not in self.fitness]

    def complete(self) -> bool:
        return not self.pending()


@dataclass(frozen=True)
class SyntheticOracle:
    """Deterministic stand-in fitness for automated runs.

    ``sphere`` is the squared norm; ``hidden_target`` is squared distance
    from a fixed reference genome (its minimum plays the role of the melody
    the imaginary user wants).
    """

    kind: str
    target: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("sphere", "hidden_target"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.kind == "hidden_target":
            if self.target is None:
                raise ValueError("hidden_target oracle needs a reference genome")
            object.__setattr__(self, "target", validate_genome(self.target))
        elif self.target is not None:
            raise ValueError("sphere oracle takes no reference genome")


def eval_oracle(oracle: SyntheticOracle, genes: np.ndarray) -> float:
    g = validate_genome(genes)
    if oracle.kind == "sphere":
        return float(np.sum(g * g))
    if g.shape != oracle.target.shape:
        raise ValueError(
            f"genome has {g.shape[0]} dims, oracle expects {oracle.target.shape[0]}"
        )
    diff = g - oracle.target
    return float(np.sum(diff * diff))
