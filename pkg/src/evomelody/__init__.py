"""Interactive differential-evolution melody composer.

Melodies are flat real vectors evolved by DE/rand/1/bin; a human (through
the web API) or a synthetic oracle (in tests and CLI runs) supplies the
fitness signal; winners render to Standard MIDI Files with optional
articulation curves.
"""

from .engine import DEConfig, Population, TrialCandidate, derive_stream
from .expression import EnvelopeSpec, ExpressionProfile, apply_expression, plain_events
from .fitness import HumanScore, ScoreBook, SyntheticOracle, eval_oracle
from .genome import (
    DurationGrid,
    GeneBounds,
    MelodyPhrase,
    Note,
    ScaleContext,
    decode_genome,
    melody_bounds,
    midi_to_frequency,
    random_genome,
    scale_pitches,
    uniform_bounds,
)
from .midi_io import MidiEvent, SmfConfig, write_smf
from .session import Session, SessionConfig, create_session, load, replay, save

__version__ = "0.1.0"

__all__ = [
    "DEConfig",
    "Population",
    "TrialCandidate",
    "derive_stream",
    "EnvelopeSpec",
    "ExpressionProfile",
    "apply_expression",
    "plain_events",
    "HumanScore",
    "ScoreBook",
    "SyntheticOracle",
    "eval_oracle",
    "DurationGrid",
    "GeneBounds",
    "MelodyPhrase",
    "Note",
    "ScaleContext",
    "decode_genome",
    "melody_bounds",
    "midi_to_frequency",
    "random_genome",
    "scale_pitches",
    "uniform_bounds",
    "MidiEvent",
    "SmfConfig",
    "write_smf",
    "Session",
    "SessionConfig",
    "create_session",
    "load",
    "replay",
    "save",
    "__version__",
]
