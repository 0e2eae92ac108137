"""Standard MIDI File (format 0) serialization.

Defines the timed-event vocabulary (one record kind per channel voice message
used by the renderer) and writes event streams as a single-track SMF: MThd
header, one MTrk with a Set Tempo meta event, an optional pitch-bend-range
RPN declaration, the channel messages with variable-length delta times, and
End of Track.  Output is byte-deterministic: same events, same config, same
file.

Note-off messages always use explicit 0x80 status (never note-on velocity 0)
because they carry a meaningful release velocity.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

DEFAULT_TPQN = 480
PITCH_BEND_RANGE_SEMITONES = 2
PITCH_BEND_CENTER = 8192

NOTE_ON = "note_on"
NOTE_OFF = "note_off"
PRESSURE = "channel_pressure"
PITCH_BEND = "pitch_bend"
CONTROL_CHANGE = "control_change"

# Within one tick: controller state first, then releases, then attacks.
_KIND_ORDER = {CONTROL_CHANGE: 0, PRESSURE: 1, PITCH_BEND: 2, NOTE_OFF: 3, NOTE_ON: 4}


@dataclass(frozen=True)
class MidiEvent:
    """One timed channel message.

    ``value`` holds the velocity for note events, the 0-127 amount for
    pressure and control change, and the 14-bit amount for pitch bend.
    """

    tick: int
    kind: str
    pitch: int | None = None
    value: int = 0
    controller: int | None = None


def sort_events(events: list[MidiEvent]) -> list[MidiEvent]:
    """Stable tick sort with a fixed same-tick ordering across kinds."""
    return sorted(events, key=lambda ev: (ev.tick, _KIND_ORDER[ev.kind]))


@dataclass(frozen=True)
class SmfConfig:
    tpqn: int = DEFAULT_TPQN
    bpm: float = 120.0
    channel: int = 0

    def __post_init__(self):
        if not 24 <= self.tpqn <= 960:
            raise ValueError(f"tpqn must lie in [24, 960], got {self.tpqn}")
        if not 0 < self.bpm < 1000:
            raise ValueError(f"bpm must lie in (0, 1000), got {self.bpm}")
        if not 0 <= self.channel <= 15:
            raise ValueError(f"channel must lie in [0, 15], got {self.channel}")


def encode_vlq(value: int) -> bytes:
    """Variable-length quantity: 7 data bits per byte, high bit chains."""
    if not 0 <= value <= 0x0FFFFFFF:
        raise ValueError(f"VLQ value out of range [0, 2^28-1]: {value}")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(chunks))


def decode_vlq(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Inverse of :func:`encode_vlq`; returns (value, next offset)."""
    value = 0
    for i in range(offset, min(offset + 4, len(data))):
        byte = data[i]
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, i + 1
    raise ValueError("truncated or overlong variable-length quantity")


def ticks_for(duration: Fraction | float, tpqn: int) -> int:
    """Ticks for a duration given as a fraction of a whole note (4 quarters)."""
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    return round(duration * 4 * tpqn)


def tempo_meta(bpm: float) -> int:
    """Microseconds per quarter note for the Set Tempo meta event."""
    if bpm <= 0:
        raise ValueError(f"bpm must be positive, got {bpm}")
    return round(60_000_000 / bpm)


def _check(value: int, hi: int, what: str) -> int:
    if not 0 <= value <= hi:
        raise ValueError(f"{what} out of MIDI range [0, {hi}]: {value}")
    return value


def _channel_message(ev: MidiEvent, channel: int) -> bytes:
    if ev.kind == NOTE_ON:
        return bytes(
            [0x90 | channel, _check(ev.pitch, 127, "pitch"), _check(ev.value, 127, "velocity")]
        )
    if ev.kind == NOTE_OFF:
        return bytes(
            [0x80 | channel, _check(ev.pitch, 127, "pitch"), _check(ev.value, 127, "release velocity")]
        )
    if ev.kind == PRESSURE:
        return bytes([0xD0 | channel, _check(ev.value, 127, "pressure")])
    if ev.kind == CONTROL_CHANGE:
        return bytes(
            [0xB0 | channel, _check(ev.controller, 127, "controller"), _check(ev.value, 127, "CC value")]
        )
    if ev.kind == PITCH_BEND:
        v = _check(ev.value, 16383, "pitch bend")
        return bytes([0xE0 | channel, v & 0x7F, (v >> 7) & 0x7F])
    raise ValueError(f"unknown event kind {ev.kind!r}")


def _bend_range_rpn(channel: int) -> bytes:
    """RPN 0,0 declaration pinning the pitch-bend range, then RPN null."""
    cc = 0xB0 | channel
    return bytes(
        [
            0x00, cc, 101, 0,
            0x00, cc, 100, 0,
            0x00, cc, 6, PITCH_BEND_RANGE_SEMITONES,
            0x00, cc, 38, 0,
            0x00, cc, 101, 127,
            0x00, cc, 100, 127,
        ]
    )


def write_smf(events: list[MidiEvent], cfg: SmfConfig) -> bytes:
    """Serialize tick-sorted events into a complete format-0 SMF byte string."""
    track = bytearray()
    track += b"\x00\xff\x51\x03" + struct.pack(">I", tempo_meta(cfg.bpm))[1:]
    if any(ev.kind == PITCH_BEND for ev in events):
        track += _bend_range_rpn(cfg.channel)
    last_tick = 0
    for ev in events:
        if ev.tick < last_tick:
            raise ValueError("events must be tick-sorted")
        track += encode_vlq(ev.tick - last_tick)
        track += _channel_message(ev, cfg.channel)
        last_tick = ev.tick
    track += b"\x00\xff\x2f\x00"
    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, cfg.tpqn)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)
