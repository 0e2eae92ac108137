"""Melody genomes and their decoding into scale-constrained note sequences.

A melody of N notes is encoded as a flat vector of 3*N unconstrained reals,
three genes per note: pitch, duration, velocity.  Genes carry no bounds of
their own; musical constraints (key signature, duration grid, velocity range)
are applied only when a genome is decoded, by clamping and snapping each gene
to the nearest legal value.  This keeps the evolutionary operators working in
plain real-vector arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

# Pitch-class interval sets, semitones above the key root.
MODE_INTERVALS: dict[str, tuple[int, ...]] = {
    "major": (0, 2, 4, 5, 7, 9, 11),
    "natural_minor": (0, 2, 3, 5, 7, 8, 10),
    "harmonic_minor": (0, 2, 3, 5, 7, 8, 11),
    "dorian": (0, 2, 3, 5, 7, 9, 10),
    "mixolydian": (0, 2, 4, 5, 7, 9, 10),
    "pentatonic_major": (0, 2, 4, 7, 9),
    "pentatonic_minor": (0, 3, 5, 7, 10),
}

DEFAULT_GRID_FRACTIONS = (
    Fraction(1, 16),
    Fraction(1, 8),
    Fraction(3, 16),
    Fraction(1, 4),
    Fraction(3, 8),
    Fraction(1, 2),
    Fraction(1, 1),
)

DEFAULT_NOTE_COUNT = 16

GENES_PER_NOTE = 3

VELOCITY_MIN = 1
VELOCITY_MAX = 127


@dataclass(frozen=True)
class ScaleContext:
    """Key signature and register that bound decoded pitches.

    ``key_root`` is a pitch class (0=C .. 11=B); ``mode`` selects an interval
    set from :data:`MODE_INTERVALS`; ``low_bound``/``high_bound`` are inclusive
    MIDI note numbers delimiting the playable register.
    """

    key_root: int
    mode: str
    low_bound: int
    high_bound: int

    def __post_init__(self):
        if not 0 <= self.key_root <= 11:
            raise ValueError(f"key_root must be in [0, 11], got {self.key_root}")
        if self.mode not in MODE_INTERVALS:
            raise ValueError(
                f"unknown mode {self.mode!r}; expected one of {sorted(MODE_INTERVALS)}"
            )
        for name, v in (("low_bound", self.low_bound), ("high_bound", self.high_bound)):
            if not 0 <= v <= 127:
                raise ValueError(f"{name} must be a MIDI note in [0, 127], got {v}")
        if not self.low_bound < self.high_bound:
            raise ValueError(
                f"low_bound must be below high_bound, got [{self.low_bound}, {self.high_bound}]"
            )
        if len(scale_pitches(self)) == 0:
            raise ValueError("no scale pitches fall within the given bounds")


@dataclass(frozen=True)
class DurationGrid:
    """Ordered set of permitted note lengths, as fractions of a whole note."""

    allowed: tuple[Fraction, ...] = DEFAULT_GRID_FRACTIONS

    def __post_init__(self):
        if len(self.allowed) == 0:
            raise ValueError("duration grid must be non-empty")
        for d in self.allowed:
            if not 0 < d <= 4:
                raise ValueError(f"grid durations must lie in (0, 4], got {d}")
        if any(b <= a for a, b in zip(self.allowed, self.allowed[1:])):
            raise ValueError("grid durations must be strictly increasing")


@dataclass(frozen=True)
class Note:
    """One decoded note: MIDI pitch, grid duration, velocity, phrase onset."""

    pitch: int
    duration: Fraction
    velocity: int
    onset: Fraction = Fraction(0)


@dataclass(frozen=True)
class MelodyPhrase:
    """Sequential decoded notes plus the tempo they are meant to play at."""

    notes: tuple[Note, ...]
    bpm: float


@dataclass(frozen=True)
class GeneBounds:
    """Per-component sampling intervals used to draw random genomes."""

    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        lows = np.asarray(self.lows, dtype=np.float64)
        highs = np.asarray(self.highs, dtype=np.float64)
        if lows.shape != highs.shape or lows.ndim != 1:
            raise ValueError("bounds must be two equal-length 1-d arrays")
        if not (np.isfinite(lows).all() and np.isfinite(highs).all()):
            raise ValueError("bounds must be finite")
        if np.any(highs < lows):
            raise ValueError("each high bound must be >= its low bound")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)

    @property
    def dims(self) -> int:
        return self.lows.shape[0]


def validate_genome(genes: np.ndarray) -> np.ndarray:
    """Check basic genome invariants and return the vector as float64."""
    g = np.asarray(genes, dtype=np.float64)
    if g.ndim != 1 or g.shape[0] < 1:
        raise ValueError("genome must be a non-empty 1-d vector")
    if not np.isfinite(g).all():
        raise ValueError("genome contains non-finite genes")
    return g


def scale_pitches(ctx: ScaleContext) -> tuple[int, ...]:
    """All MIDI notes within the register whose pitch class is in the mode."""
    classes = {(ctx.key_root + step) % 12 for step in MODE_INTERVALS[ctx.mode]}
    return tuple(
        n for n in range(ctx.low_bound, ctx.high_bound + 1) if n % 12 in classes
    )


def decode_pitch(gene: float, ctx: ScaleContext) -> int:
    """Clamp the gene into the register, then snap to the nearest scale pitch.

    Equidistant candidates resolve to the lower pitch so that decoding is
    reproducible bit for bit.
    """
    x = min(max(float(gene), ctx.low_bound), ctx.high_bound)
    best = None
    best_dist = None
    for p in scale_pitches(ctx):
        d = abs(x - p)
        if best_dist is None or d < best_dist:
            best, best_dist = p, d
    return best


def decode_duration(gene: float, grid: DurationGrid) -> Fraction:
    """Snap the gene to the nearest grid duration; ties pick the shorter one."""
    x = float(gene)
    best = None
    best_dist = None
    for d in grid.allowed:
        dist = abs(x - float(d))
        if best_dist is None or dist < best_dist:
            best, best_dist = d, dist
    return best


def decode_velocity(gene: float) -> int:
    """Round the gene and clamp into the MIDI velocity range [1, 127]."""
    return min(max(round(float(gene)), VELOCITY_MIN), VELOCITY_MAX)


def decode_genome(
    genes: np.ndarray, ctx: ScaleContext, grid: DurationGrid, bpm: float
) -> MelodyPhrase:
    """Decode a genome into a phrase of sequential notes.

    Gene triple (3k, 3k+1, 3k+2) becomes note k; onsets are the running sum
    of preceding durations.
    """
    g = validate_genome(genes)
    if g.shape[0] % GENES_PER_NOTE != 0:
        raise ValueError(
            f"genome length {g.shape[0]} is not a multiple of {GENES_PER_NOTE}"
        )
    if bpm <= 0:
        raise ValueError(f"bpm must be positive, got {bpm}")
    notes = []
    onset = Fraction(0)
    for k in range(g.shape[0] // GENES_PER_NOTE):
        duration = decode_duration(g[3 * k + 1], grid)
        notes.append(
            Note(
                pitch=decode_pitch(g[3 * k], ctx),
                duration=duration,
                velocity=decode_velocity(g[3 * k + 2]),
                onset=onset,
            )
        )
        onset += duration
    return MelodyPhrase(notes=tuple(notes), bpm=float(bpm))


def melody_bounds(
    ctx: ScaleContext, grid: DurationGrid, n_notes: int = DEFAULT_NOTE_COUNT
) -> GeneBounds:
    """Sampling intervals for melody genomes: register for pitch genes, the
    grid's extremes for duration genes, full MIDI range for velocity genes."""
    if n_notes < 1:
        raise ValueError("a melody needs at least one note")
    lows = np.empty(GENES_PER_NOTE * n_notes)
    highs = np.empty(GENES_PER_NOTE * n_notes)
    lows[0::3], highs[0::3] = ctx.low_bound, ctx.high_bound
    lows[1::3], highs[1::3] = float(grid.allowed[0]), float(grid.allowed[-1])
    lows[2::3], highs[2::3] = VELOCITY_MIN, VELOCITY_MAX
    return GeneBounds(lows=lows, highs=highs)


def uniform_bounds(dims: int, low: float, high: float) -> GeneBounds:
    """One identical sampling interval for every component."""
    return GeneBounds(lows=np.full(dims, float(low)), highs=np.full(dims, float(high)))


def random_genome(rng, bounds: GeneBounds) -> np.ndarray:
    """Draw one genome, each gene uniform over its component interval."""
    return np.asarray(rng.uniform(bounds.lows, bounds.highs), dtype=np.float64)


def midi_to_frequency(note: int) -> float:
    """Equal-tempered frequency in Hz of a MIDI note (A4 = 69 = 440 Hz)."""
    return 440.0 * 2.0 ** ((note - 69) / 12.0)
