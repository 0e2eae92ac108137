"""Resumable human-in-the-loop evolution sessions.

A session owns one evolving population and walks a fixed lifecycle:

    scoring_initial --(all scored)--> scoring_trials <--> ready_to_advance
                                                  ...  --> finished

Generation 0 is a scoring round of its own; the moment its last score lands,
the first trial round is proposed.  Each ``advance`` consumes a fully scored
trial round (selection), proposes the next one, and appends to the history
log.  Already-scored genomes are recognized by value and never re-offered
for scoring.

Everything that influences evolution is recorded: the seed, the config, the
ordered score log, and how many RNG streams have been consumed.  A session
saved to its JSON document and loaded back behaves identically to one that
never left memory, and the whole run can be replayed from the log.
"""
from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import engine, genome
from .engine import DEConfig, Population, TrialCandidate
from .expression import EnvelopeSpec, ExpressionProfile, apply_expression
from .fitness import DEFAULT_MAX_SCORE, DEFAULT_MIN_SCORE, HumanScore, ScoreBook
from .genome import DurationGrid, MelodyPhrase, ScaleContext, decode_genome, melody_bounds
from .midi_io import DEFAULT_TPQN, SmfConfig, write_smf

SCHEMA_VERSION = 1

SCORING_INITIAL = "scoring_initial"
SCORING_TRIALS = "scoring_trials"
READY_TO_ADVANCE = "ready_to_advance"
FINISHED = "finished"


class SessionError(ValueError):
    """Base for lifecycle violations."""


class PendingScoresError(SessionError):
    """Raised when advancing is blocked by unscored candidates."""

    def __init__(self, pending: list[str]):
        super().__init__(f"cannot advance; pending scores for: {', '.join(pending)}")
        self.pending = list(pending)


class SessionLoadError(SessionError):
    """Raised when a session document cannot be restored."""


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session needs: evolution, decoding, tempo, rendering."""

    de: DEConfig = DEConfig()
    scale: ScaleContext = ScaleContext(key_root=0, mode="major", low_bound=60, high_bound=84)
    grid: DurationGrid = DurationGrid()
    bpm: float = 120.0
    profile: ExpressionProfile = ExpressionProfile()
    min_score: float = DEFAULT_MIN_SCORE
    max_score: float = DEFAULT_MAX_SCORE

    def __post_init__(self):
        if self.de.D % genome.GENES_PER_NOTE != 0:
            raise ValueError(
                f"genome dimensionality {self.de.D} is not a multiple of "
                f"{genome.GENES_PER_NOTE} (three genes per note)"
            )
        if self.bpm <= 0:
            raise ValueError(f"bpm must be positive, got {self.bpm}")
        if self.max_score <= self.min_score:
            raise ValueError("score range must be non-empty")


@dataclass
class Candidate:
    """One scoreable melody in the current round."""

    candidate_id: str
    slot: int
    genes: np.ndarray
    fitness: float | None = None

    @property
    def pending(self) -> bool:
        return self.fitness is None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Session:
    """Mutable session state; one writer at a time (callers serialize)."""

    def __init__(self, cfg: SessionConfig, session_id: str | None = None):
        self.cfg = cfg
        self.session_id = session_id or uuid.uuid4().hex
        self.created_at = _now()
        bounds = melody_bounds(cfg.scale, cfg.grid, cfg.de.D // genome.GENES_PER_NOTE)
        self.population = engine.init_population(
            cfg.de, bounds, engine.derive_stream(cfg.de.seed, 0)
        )
        self.rng_position = 1
        self.round_index = 0
        self.state = SCORING_INITIAL
        self.score_log: list[dict] = []
        self.history: list[dict] = []
        self._cache: dict[bytes, float] = {}
        self.candidates = [
            Candidate(f"r0-s{i}", i, self.population.members[i].copy())
            for i in range(self.population.size)
        ]
        self.book = self._open_book()

    # -- round plumbing ---------------------------------------------------

    def _open_book(self) -> ScoreBook:
        book = ScoreBook(
            [c.candidate_id for c in self.candidates],
            min_score=self.cfg.min_score,
            max_score=self.cfg.max_score,
        )
        for c in self.candidates:
            if c.fitness is not None:
                book.fitness[c.candidate_id] = c.fitness
        return book

    def pending(self) -> list[str]:
        return self.book.pending()

    def _propose_round(self) -> None:
        trials = engine.propose_trials(
            self.population, self.cfg.de, engine.derive_stream(self.cfg.de.seed, self.rng_position)
        )
        self.rng_position += 1
        self.round_index += 1
        self.candidates = []
        for t in trials:
            cached = self._cache.get(t.trial.tobytes())
            self.candidates.append(
                Candidate(
                    f"r{self.round_index}-s{t.target_index}",
                    t.target_index,
                    t.trial,
                    fitness=cached,
                )
            )
        self.book = self._open_book()
        self.state = SCORING_TRIALS if self.book.pending() else READY_TO_ADVANCE

    # -- lifecycle operations ---------------------------------------------

    def submit_score(self, candidate_id: str, score: float, submitted_at: str | None = None):
        """Record one human score; completing a round unlocks the next step."""
        if self.state == FINISHED:
            raise SessionError("session is finished; no further scoring")
        stamp = submitted_at or _now()
        self.book.ingest_score(HumanScore(candidate_id, score, stamp))
        for c in self.candidates:
            if c.candidate_id == candidate_id:
                c.fitness = -float(score)
                self._cache[c.genes.tobytes()] = c.fitness
        self.score_log.append(
            {
                "round": self.round_index,
                "candidate_id": candidate_id,
                "score": float(score),
                "submitted_at": stamp,
            }
        )
        if self.book.complete():
            if self.state == SCORING_INITIAL:
                self.population = self.population.with_fitness(
                    [c.fitness for c in self.candidates]
                )
                self._propose_round()
            elif self.state == SCORING_TRIALS:
                self.state = READY_TO_ADVANCE

    def advance(self) -> None:
        """Apply selection to the scored trial round and propose the next."""
        if self.state == FINISHED:
            raise SessionError("session is finished; cannot advance")
        if self.state in (SCORING_INITIAL, SCORING_TRIALS):
            raise PendingScoresError(self.pending())
        trials = [
            TrialCandidate(c.slot, c.genes, fitness=c.fitness) for c in self.candidates
        ]
        before = self.population
        self.population = engine.step_generation(before, trials, self.cfg.de)
        self.history.append(
            {
                "generation": self.population.generation,
                "selections": [
                    bool(np.array_equal(self.population.members[i], trials[i].trial))
                    for i in range(before.size)
                ],
                "best_fitness": min(self.population.fitness),
            }
        )
        self._propose_round()

    def finish(self, export_dir: str | None = None, tpqn: int = DEFAULT_TPQN) -> dict:
        """Freeze the session and rank the population, best score first.

        With ``export_dir`` set, one SMF per member is written there; calling
        twice yields the identical manifest (and identical bytes).
        """
        self.state = FINISHED
        order = sorted(
            range(self.population.size),
            key=lambda i: (
                self.population.fitness[i] is None,
                self.population.fitness[i] if self.population.fitness[i] is not None else 0.0,
                i,
            ),
        )
        entries = []
        for rank, slot in enumerate(order):
            f = self.population.fitness[slot]
            genes = self.population.members[slot]
            phrase = self.phrase_for(genes)
            filename = f"rank{rank:02d}_slot{slot:02d}.mid"
            entries.append(
                {
                    "rank": rank,
                    "slot": slot,
                    "candidate_id": f"pop-s{slot}",
                    "fitness": f,
                    "score": None if f is None else -f,
                    "notes": phrase_notes(phrase),
                    "midi_file": filename,
                }
            )
            if export_dir is not None:
                os.makedirs(export_dir, exist_ok=True)
                data = self.render_smf(genes, tpqn=tpqn)
                with open(os.path.join(export_dir, filename), "wb") as fh:
                    fh.write(data)
        return {
            "session_id": self.session_id,
            "generation": self.population.generation,
            "bpm": self.cfg.bpm,
            "entries": entries,
        }

    # -- candidate access ---------------------------------------------------

    def candidate_genes(self, candidate_id: str) -> np.ndarray:
        """Genome for a round candidate id, or ``pop-s<i>`` population ids."""
        for c in self.candidates:
            if c.candidate_id == candidate_id:
                return c.genes
        if candidate_id.startswith("pop-s"):
            try:
                slot = int(candidate_id[len("pop-s"):])
            except ValueError:
                raise KeyError(f"unknown candidate {candidate_id!r}") from None
            if 0 <= slot < self.population.size:
                return self.population.members[slot]
        raise KeyError(f"unknown candidate {candidate_id!r}")

    def phrase_for(self, genes: np.ndarray) -> MelodyPhrase:
        return decode_genome(genes, self.cfg.scale, self.cfg.grid, self.cfg.bpm)

    def render_smf(self, genes: np.ndarray, tpqn: int = DEFAULT_TPQN) -> bytes:
        events = apply_expression(self.phrase_for(genes), self.cfg.profile, tpqn)
        return write_smf(events, SmfConfig(tpqn=tpqn, bpm=self.cfg.bpm))

    def summary(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "state": self.state,
            "generation": self.population.generation,
            "round": self.round_index,
            "population_size": self.population.size,
            "pending_count": len(self.pending()),
        }

    def round_view(self) -> dict:
        pending = set(self.pending())
        return {
            **self.summary(),
            "bpm": self.cfg.bpm,
            "advance_enabled": self.state == READY_TO_ADVANCE,
            "candidates": [
                {
                    "candidate_id": c.candidate_id,
                    "slot": c.slot,
                    "pending": c.candidate_id in pending,
                    "score": None if c.fitness is None else -c.fitness,
                    "notes": phrase_notes(self.phrase_for(c.genes)),
                }
                for c in self.candidates
            ],
        }


def phrase_notes(phrase: MelodyPhrase) -> list[dict]:
    """JSON-ready note list: pitch, duration/onset in whole-note fractions."""
    return [
        {
            "pitch": n.pitch,
            "duration": float(n.duration),
            "velocity": n.velocity,
            "onset": float(n.onset),
        }
        for n in phrase.notes
    ]


def create_session(cfg: SessionConfig, session_id: str | None = None) -> Session:
    return Session(cfg, session_id=session_id)


# -- persistence ------------------------------------------------------------


def _profile_doc(p: ExpressionProfile) -> dict:
    return {
        "velocity_gain": p.velocity_gain,
        "velocity_jitter": p.velocity_jitter,
        "aftertouch": {"attack": p.aftertouch.attack, "decay": p.aftertouch.decay},
        "vibrato_rate_hz": p.vibrato_rate_hz,
        "vibrato_depth_cents": p.vibrato_depth_cents,
        "vibrato_delay": p.vibrato_delay,
        "brightness_range": list(p.brightness_range) if p.brightness_range else None,
        "release_velocity": p.release_velocity,
        "release_jitter": p.release_jitter,
        "jitter_seed": p.jitter_seed,
    }


def _profile_from_doc(doc: dict) -> ExpressionProfile:
    return ExpressionProfile(
        velocity_gain=doc["velocity_gain"],
        velocity_jitter=doc["velocity_jitter"],
        aftertouch=EnvelopeSpec(**doc["aftertouch"]),
        vibrato_rate_hz=doc["vibrato_rate_hz"],
        vibrato_depth_cents=doc["vibrato_depth_cents"],
        vibrato_delay=doc["vibrato_delay"],
        brightness_range=tuple(doc["brightness_range"]) if doc["brightness_range"] else None,
        release_velocity=doc["release_velocity"],
        release_jitter=doc["release_jitter"],
        jitter_seed=doc["jitter_seed"],
    )


def config_doc(cfg: SessionConfig) -> dict:
    return {
        "population_size": cfg.de.population_size,
        "F": cfg.de.F,
        "Cr": cfg.de.Cr,
        "D": cfg.de.D,
        "seed": cfg.de.seed,
        "key_root": cfg.scale.key_root,
        "mode": cfg.scale.mode,
        "low_bound": cfg.scale.low_bound,
        "high_bound": cfg.scale.high_bound,
        "grid": [str(d) for d in cfg.grid.allowed],
        "bpm": cfg.bpm,
        "min_score": cfg.min_score,
        "max_score": cfg.max_score,
        "expression": _profile_doc(cfg.profile),
    }


def config_from_doc(doc: dict) -> SessionConfig:
    return SessionConfig(
        de=DEConfig(
            population_size=doc["population_size"],
            F=doc["F"],
            Cr=doc["Cr"],
            D=doc["D"],
            seed=doc["seed"],
        ),
        scale=ScaleContext(
            key_root=doc["key_root"],
            mode=doc["mode"],
            low_bound=doc["low_bound"],
            high_bound=doc["high_bound"],
        ),
        grid=DurationGrid(tuple(Fraction(d) for d in doc["grid"])),
        bpm=doc["bpm"],
        profile=_profile_from_doc(doc["expression"]),
        min_score=doc["min_score"],
        max_score=doc["max_score"],
    )


def save(session: Session) -> str:
    """Serialize to the versioned JSON session document."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "session_id": session.session_id,
        "created_at": session.created_at,
        "config": config_doc(session.cfg),
        "state": session.state,
        "rng_position": session.rng_position,
        "round_index": session.round_index,
        "population": {
            "generation": session.population.generation,
            "members": [list(map(float, row)) for row in session.population.members],
            "fitness": list(session.population.fitness),
        },
        "candidates": [
            {
                "candidate_id": c.candidate_id,
                "slot": c.slot,
                "genes": list(map(float, c.genes)),
                "fitness": c.fitness,
            }
            for c in session.candidates
        ],
        "score_log": session.score_log,
        "history": session.history,
        "cache": [[list(map(float, np.frombuffer(k))), v] for k, v in session._cache.items()],
    }
    return json.dumps(doc, indent=2)


def load(text: str | bytes) -> Session:
    """Restore a session from its document; behaviorally lossless."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SessionLoadError(f"malformed session document: {e}") from e
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise SessionLoadError("not a session document (missing schema_version)")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SessionLoadError(
            f"unsupported schema version {doc['schema_version']}; expected {SCHEMA_VERSION}"
        )
    try:
        cfg = config_from_doc(doc["config"])
        session = Session.__new__(Session)
        session.cfg = cfg
        session.session_id = doc["session_id"]
        session.created_at = doc["created_at"]
        session.state = doc["state"]
        session.rng_position = doc["rng_position"]
        session.round_index = doc["round_index"]
        pop = doc["population"]
        session.population = Population(
            generation=pop["generation"],
            members=np.array(pop["members"], dtype=np.float64),
            fitness=tuple(pop["fitness"]),
        )
        session.candidates = [
            Candidate(
                c["candidate_id"],
                c["slot"],
                np.array(c["genes"], dtype=np.float64),
                fitness=c["fitness"],
            )
            for c in doc["candidates"]
        ]
        session.score_log = list(doc["score_log"])
        session.history = list(doc["history"])
        session._cache = {
            np.array(genes, dtype=np.float64).tobytes(): v for genes, v in doc["cache"]
        }
        session.book = session._open_book()
        return session
    except (KeyError, TypeError, ValueError) as e:
        raise SessionLoadError(f"invalid session document: {e}") from e


def save_to_path(session: Session, path: str) -> None:
    """Atomic save: write a sibling temp file, then rename over the target."""
    text = save(session)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_from_path(path: str) -> Session:
    with open(path) as fh:
        return load(fh.read())


# -- replay verification ------------------------------------------------------


def replay(cfg: SessionConfig, score_log: list[dict], n_advances: int,
           session_id: str | None = None) -> Session:
    """Rebuild a session from scratch by re-applying the ordered score log."""
    session = Session(cfg, session_id=session_id)
    for entry in score_log:
        while session.round_index < entry["round"]:
            session.advance()
        session.submit_score(
            entry["candidate_id"], entry["score"], submitted_at=entry["submitted_at"]
        )
    while len(session.history) < n_advances:
        session.advance()
    return session


def verify_replay(session: Session) -> list[str]:
    """Replay a session from its own log and report any divergence."""
    fresh = replay(session.cfg, session.score_log, len(session.history),
                   session_id=session.session_id)
    problems = []
    if fresh.population.generation != session.population.generation:
        problems.append(
            f"generation mismatch: replay {fresh.population.generation} "
            f"vs stored {session.population.generation}"
        )
    else:
        for i in range(session.population.size):
            if not np.array_equal(fresh.population.members[i], session.population.members[i]):
                problems.append(f"slot {i}: genome mismatch")
            if fresh.population.fitness[i] != session.population.fitness[i]:
                problems.append(
                    f"slot {i}: fitness mismatch (replay {fresh.population.fitness[i]} "
                    f"vs stored {session.population.fitness[i]})"
                )
    if fresh.state != session.state and session.state != FINISHED:
        problems.append(f"state mismatch: replay {fresh.state} vs stored {session.state}")
    return problems
