"""Instrument-articulation curves rendered over a decoded phrase.

Five modulation features turn a bare note list into an expressive event
stream: per-note velocity shaping with seeded humanization, an aftertouch
pressure envelope, sine vibrato via pitch bend, a brightness (CC74) ramp
across the phrase, and jittered release velocities.  Every feature defaults
to off; the all-default profile renders exactly the plain note stream.

Continuous controllers (pressure, pitch bend) are sampled on a 1/32-note
grid by default.  All emitted values are clamped into their MIDI ranges, so
rendering is total over any valid phrase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .genome import MelodyPhrase
from .midi_io import (
    CONTROL_CHANGE,
    NOTE_OFF,
    NOTE_ON,
    PITCH_BEND,
    PITCH_BEND_CENTER,
    PITCH_BEND_RANGE_SEMITONES,
    PRESSURE,
    MidiEvent,
    sort_events,
)

BRIGHTNESS_CC = 74
DEFAULT_RELEASE_VELOCITY = 64
ATTACK_END = 0.1  # envelope reaches its peak at this fraction of the note


@dataclass(frozen=True)
class EnvelopeSpec:
    """Attack-decay shape: linear ramp to ``attack`` by t=0.1, then
    exponential decay at ``decay`` per unit of note time."""

    attack: float = 1.0
    decay: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.attack <= 1.0:
            raise ValueError(f"attack level must lie in [0, 1], got {self.attack}")
        if self.decay < 0.0:
            raise ValueError(f"decay rate must be >= 0, got {self.decay}")


def eval_envelope(spec: EnvelopeSpec, t: float) -> float:
    """Envelope level at note-relative time t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t <= ATTACK_END:
        return spec.attack * (t / ATTACK_END)
    return spec.attack * math.exp(-spec.decay * (t - ATTACK_END))


@dataclass(frozen=True)
class ExpressionProfile:
    """Parameters for the five modulation features; defaults disable all.

    Jitter amplitudes are maximum absolute deviations; draws come from a
    dedicated stream seeded by ``jitter_seed``, so a profile renders the
    same events every time.
    """

    velocity_gain: float = 1.0
    velocity_jitter: float = 0.0
    aftertouch: EnvelopeSpec = EnvelopeSpec(attack=0.0)
    vibrato_rate_hz: float = 0.0
    vibrato_depth_cents: float = 0.0
    vibrato_delay: float = 0.0
    brightness_range: tuple[int, int] | None = None
    release_velocity: int = DEFAULT_RELEASE_VELOCITY
    release_jitter: float = 0.0
    jitter_seed: int = 0

    def __post_init__(self):
        if self.velocity_gain < 0.0 or self.velocity_jitter < 0.0:
            raise ValueError("velocity gain and jitter must be >= 0")
        if not 0.0 <= self.vibrato_rate_hz <= 12.0:
            raise ValueError(f"vibrato rate must lie in [0, 12] Hz, got {self.vibrato_rate_hz}")
        if not 0.0 <= self.vibrato_depth_cents <= 200.0:
            raise ValueError(
                f"vibrato depth must lie in [0, 200] cents, got {self.vibrato_depth_cents}"
            )
        if not 0.0 <= self.vibrato_delay <= 1.0:
            raise ValueError("vibrato onset delay is a fraction of the note in [0, 1]")
        if self.brightness_range is not None:
            for v in self.brightness_range:
                if not 0 <= v <= 127:
                    raise ValueError(f"brightness CC values must lie in [0, 127], got {v}")
        if not 1 <= self.release_velocity <= 127:
            raise ValueError("release velocity base must lie in [1, 127]")
        if self.release_jitter < 0.0:
            raise ValueError("release jitter must be >= 0")


def cents_to_bend(cents: float) -> int:
    """14-bit pitch-bend value for a deviation in cents (range +/-2 semitones)."""
    span = PITCH_BEND_RANGE_SEMITONES * 100.0
    raw = PITCH_BEND_CENTER + round(cents / span * PITCH_BEND_CENTER)
    return min(max(raw, 0), 16383)


def _clamp7(value: int) -> int:
    return min(max(value, 0), 127)


def _tick(position: Fraction, tpqn: int) -> int:
    # Phrase positions convert exactly: whole note = 4 * tpqn ticks.
    return round(position * 4 * tpqn)


def plain_events(phrase: MelodyPhrase, tpqn: int) -> list[MidiEvent]:
    """Bare rendering: note on/off only, default release velocity."""
    events = []
    for n in phrase.notes:
        on = _tick(n.onset, tpqn)
        off = _tick(n.onset + n.duration, tpqn)
        events.append(MidiEvent(tick=on, kind=NOTE_ON, pitch=n.pitch, value=n.velocity))
        events.append(
            MidiEvent(tick=off, kind=NOTE_OFF, pitch=n.pitch, value=DEFAULT_RELEASE_VELOCITY)
        )
    return sort_events(events)


def apply_expression(
    phrase: MelodyPhrase,
    profile: ExpressionProfile,
    tpqn: int,
    controller_division: int = 32,
) -> list[MidiEvent]:
    """Render the phrase with all enabled modulation features, tick-sorted.

    Controller curves are sampled every 1/``controller_division`` of a whole
    note, from each note's start up to (not including) its end.  Vibrato
    phase starts at zero once the onset delay has elapsed and the bend wheel
    recenters at note off.
    """
    if tpqn < 24:
        raise ValueError(f"tpqn must be >= 24, got {tpqn}")
    if controller_division < 1:
        raise ValueError("controller_division must be >= 1")
    jitter = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(profile.jitter_seed))
    )
    step = _tick(Fraction(1, controller_division), tpqn)
    seconds_per_tick = 60.0 / (phrase.bpm * tpqn)
    total_ticks = _tick(
        sum((n.duration for n in phrase.notes), Fraction(0)), tpqn
    )

    events: list[MidiEvent] = []
    for n in phrase.notes:
        on = _tick(n.onset, tpqn)
        off = _tick(n.onset + n.duration, tpqn)
        note_ticks = off - on
        u_vel = jitter.uniform(-1.0, 1.0)
        u_rel = jitter.uniform(-1.0, 1.0)

        velocity = min(
            max(round(n.velocity * profile.velocity_gain + u_vel * profile.velocity_jitter), 1),
            127,
        )

        if profile.brightness_range is not None:
            b0, b1 = profile.brightness_range
            pos = on / total_ticks if total_ticks > 0 else 0.0
            events.append(
                MidiEvent(
                    tick=on,
                    kind=CONTROL_CHANGE,
                    controller=BRIGHTNESS_CC,
                    value=_clamp7(round(b0 + (b1 - b0) * pos)),
                )
            )

        events.append(MidiEvent(tick=on, kind=NOTE_ON, pitch=n.pitch, value=velocity))

        if profile.aftertouch.attack > 0.0:
            for tau in range(0, note_ticks, step):
                level = eval_envelope(profile.aftertouch, tau / note_ticks)
                events.append(
                    MidiEvent(tick=on + tau, kind=PRESSURE, value=_clamp7(round(127 * level)))
                )

        if profile.vibrato_depth_cents > 0.0:
            delay_ticks = profile.vibrato_delay * note_ticks
            for tau in range(0, note_ticks, step):
                if tau < delay_ticks:
                    continue
                t_sec = (tau - delay_ticks) * seconds_per_tick
                cents = profile.vibrato_depth_cents * math.sin(
                    2.0 * math.pi * profile.vibrato_rate_hz * t_sec
                )
                events.append(
                    MidiEvent(tick=on + tau, kind=PITCH_BEND, value=cents_to_bend(cents))
                )
            events.append(
                MidiEvent(tick=off, kind=PITCH_BEND, value=PITCH_BEND_CENTER)
            )

        release = min(
            max(round(profile.release_velocity + u_rel * profile.release_jitter), 1), 127
        )
        events.append(MidiEvent(tick=off, kind=NOTE_OFF, pitch=n.pitch, value=release))

    return sort_events(events)
