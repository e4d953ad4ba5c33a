"""Bit-exact packet codec and simulated wireless acquisition device.

Wire frame, little-endian throughout:

    magic       u16   0xA55A
    version     u8    1
    channel_count u8
    samples_per_channel u8
    sequence    u32   wrapping
    timestamp_us u64
    payload     u16 * (samples_per_channel * channel_count), sample-major;
                bits 0-14 hold the ADC code in offset binary (code + 16384),
                bit 15 of the FIRST word only carries the trigger-line state
                at the packet's first frame
    crc16       u16   CRC-16/CCITT-FALSE over all preceding bytes

The simulator emits 20-frame packets by default (20 ms cadence at 1 kSps) and
models loss as independent whole-packet drops; sequence numbers count packets
before loss so receivers can detect gaps.
"""

from __future__ import annotations

import binascii
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    PacketCrcError,
    PacketLengthError,
    PacketMagicError,
    PacketPayloadError,
    PacketVersionError,
    ShortBufferError,
    StreamFormatError,
)

PACKET_MAGIC = 0xA55A
PACKET_VERSION = 1
_HEADER = struct.Struct("<HBBBIQ")  # magic, version, cc, spc, sequence, timestamp_us
_CRC = struct.Struct("<H")
_TRIGGER_BIT = 0x8000
_CODE_OFFSET = 16384
_SEQ_MOD = 1 << 32

MIN_PACKET_SIZE = _HEADER.size + 2 + _CRC.size  # smallest valid: 1 channel x 1 sample

# Table-1 radio budget; the simulator asserts against it rather than modelling BLE.
WIRE_RATE_BUDGET_BPS = 2_000_000

TRIGGER_KINDS = ("prompt_wait", "prompt_word", "prompt_end")


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection)."""
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True, eq=False)
class DevicePacket:
    """One decoded wire frame; samples are signed codes, shape (channels, frames)."""

    samples: np.ndarray  # int16, (channel_count, samples_per_channel)
    sequence: int
    timestamp_us: int
    trigger: bool = False

    def __post_init__(self):
        s = self.samples
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError("packet samples must be 2-D (channels, frames), both >= 1")
        if s.shape[0] > 255 or s.shape[1] > 255:
            raise ValueError("channel_count and samples_per_channel must fit in u8")
        if s.min() < -_CODE_OFFSET or s.max() > _CODE_OFFSET - 1:
            raise ValueError("ADC codes out of signed 15-bit range")
        if not 0 <= self.sequence < _SEQ_MOD:
            raise ValueError("sequence must fit in u32")
        s.setflags(write=False)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def samples_per_channel(self) -> int:
        return self.samples.shape[1]

    @property
    def encoded_size(self) -> int:
        return _HEADER.size + 2 * self.samples.size + _CRC.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DevicePacket):
            return NotImplemented
        return (
            self.sequence == other.sequence
            and self.timestamp_us == other.timestamp_us
            and self.trigger == other.trigger
            and np.array_equal(self.samples, other.samples)
        )

    def __hash__(self):
        return hash((self.sequence, self.timestamp_us, self.trigger))


@dataclass(frozen=True)
class TriggerEvent:
    kind: str  # one of TRIGGER_KINDS
    sample_index: int
    timestamp_us: int

    def __post_init__(self):
        if self.kind not in TRIGGER_KINDS:
            raise ValueError(f"kind must be one of {TRIGGER_KINDS}, got {self.kind!r}")


@dataclass
class StreamStats:
    packets_received: int = 0
    packets_lost: int = 0  # inferred from sequence gaps only
    crc_failures: int = 0

    def to_dict(self) -> dict:
        return {
            "packets_received": self.packets_received,
            "packets_lost": self.packets_lost,
            "crc_failures": self.crc_failures,
        }


def encode_packet(p: DevicePacket) -> bytes:
    words = (p.samples.T.astype(np.int32).ravel() + _CODE_OFFSET).astype(np.uint16)
    if p.trigger:
        words[0] |= _TRIGGER_BIT
    body = _HEADER.pack(
        PACKET_MAGIC,
        PACKET_VERSION,
        p.channel_count,
        p.samples_per_channel,
        p.sequence,
        p.timestamp_us,
    ) + words.astype("<u2").tobytes()
    return body + _CRC.pack(crc16(body))


def decode_packet(buf: bytes) -> DevicePacket:
    """Decode one frame. Every byte array either decodes or raises one classified error."""
    if len(buf) < MIN_PACKET_SIZE:
        raise ShortBufferError(f"frame of {len(buf)} bytes is below the {MIN_PACKET_SIZE}-byte minimum")
    if int.from_bytes(buf[0:2], "little") != PACKET_MAGIC:
        raise PacketMagicError(f"bad packet magic 0x{int.from_bytes(buf[0:2], 'little'):04X}")
    if crc16(buf[:-2]) != _CRC.unpack_from(buf, len(buf) - 2)[0]:
        raise PacketCrcError("CRC-16 mismatch")
    _, version, cc, spc, sequence, timestamp_us = _HEADER.unpack_from(buf)
    if version != PACKET_VERSION:
        raise PacketVersionError(f"packet version {version} not supported")
    if cc < 1 or spc < 1:
        raise PacketPayloadError("channel_count and samples_per_channel must be >= 1")
    expected = _HEADER.size + 2 * cc * spc + _CRC.size
    if len(buf) != expected:
        raise PacketLengthError(f"frame is {len(buf)} bytes, header implies {expected}")
    words = np.frombuffer(buf, dtype="<u2", offset=_HEADER.size, count=cc * spc).copy()
    trigger = bool(words[0] & _TRIGGER_BIT)
    words[0] &= 0x7FFF
    if np.any(words[1:] & _TRIGGER_BIT):
        raise PacketPayloadError("trigger bit set outside the first payload word")
    codes = (words.astype(np.int32) - _CODE_OFFSET).astype(np.int16)
    samples = np.ascontiguousarray(codes.reshape(spc, cc).T)
    return DevicePacket(samples=samples, sequence=sequence, timestamp_us=timestamp_us, trigger=trigger)


def wire_rate_bps(channel_count: int, samples_per_channel: int, sample_rate_hz: int) -> float:
    """Encoded bits per second for a continuous stream of this shape."""
    size = _HEADER.size + 2 * channel_count * samples_per_channel + _CRC.size
    return size * 8 * sample_rate_hz / samples_per_channel


def simulate_device(
    samples: np.ndarray,
    *,
    triggers: Sequence[int] = (),
    loss_rate: float = 0.0,
    seed: int = 0,
    samples_per_channel: int = 20,
    sample_rate_hz: int = 1000,
    start_timestamp_us: int = 0,
    start_sequence: int = 0,
) -> Iterator[DevicePacket]:
    """Packetize a (channels, time) block, dropping packets independently at loss_rate.

    ``triggers`` are sample indices; the trigger flag is raised on the packet
    whose first frame is the first packet boundary at/after each index.
    Sequence numbers advance for dropped packets too.
    """
    if not 0.0 <= loss_rate < 1.0:
        raise ValueError("loss_rate must be in [0, 1)")
    samples = np.asarray(samples, dtype=np.int16)
    if samples.ndim != 2:
        raise ValueError("samples must be (channels, time)")
    cc, total = samples.shape
    spc = samples_per_channel
    if total % spc != 0:
        raise ValueError(f"source length {total} is not a multiple of samples_per_channel={spc}")
    rate = wire_rate_bps(cc, spc, sample_rate_hz)
    if rate > WIRE_RATE_BUDGET_BPS:
        raise ValueError(f"stream would need {rate:.0f} bps, over the {WIRE_RATE_BUDGET_BPS} bps radio budget")
    trigger_packets = {-(-int(t) // spc) for t in triggers}  # ceil division
    rng = np.random.default_rng(seed)
    for k in range(total // spc):
        drop = loss_rate > 0.0 and rng.random() < loss_rate
        if not drop:
            yield DevicePacket(
                samples=np.ascontiguousarray(samples[:, k * spc:(k + 1) * spc]),
                sequence=(start_sequence + k) % _SEQ_MOD,
                timestamp_us=start_timestamp_us + k * spc * 1_000_000 // sample_rate_hz,
                trigger=k in trigger_packets,
            )


def fill_gaps(packets: Iterable[DevicePacket]) -> Iterator[DevicePacket]:
    """Insert zero-sample stand-in packets at sequence gaps.

    Keeps consumers that count samples (e.g. the session engine) aligned with
    the device timeline when packets were lost. Stand-ins reuse the timestamp
    of the packet that revealed the gap.
    """
    expected = None
    shape = None
    for pkt in packets:
        if expected is None:
            expected = pkt.sequence
            shape = (pkt.channel_count, pkt.samples_per_channel)
        gap = (pkt.sequence - expected) % _SEQ_MOD
        for g in range(gap):
            yield DevicePacket(
                samples=np.zeros(shape, dtype=np.int16),
                sequence=(expected + g) % _SEQ_MOD,
                timestamp_us=pkt.timestamp_us,
                trigger=False,
            )
        yield pkt
        expected = (pkt.sequence + 1) % _SEQ_MOD


def reassemble(
    packets: Iterable[DevicePacket | bytes],
) -> tuple[np.ndarray, list[TriggerEvent], StreamStats]:
    """Concatenate packet payloads in sequence order, zero-filling gaps.

    Accepts decoded packets or raw frames; frames failing the CRC check are
    counted in ``crc_failures`` and skipped. Trigger bits become TriggerEvents
    whose kinds cycle wait/word/end in the session protocol's fixed order.
    """
    stats = StreamStats()
    chunks: list[np.ndarray] = []
    events: list[TriggerEvent] = []
    cc = spc = None
    expected_seq = None
    position = 0  # frames emitted so far
    for item in packets:
        if isinstance(item, (bytes, bytearray, memoryview)):
            try:
                pkt = decode_packet(bytes(item))
            except PacketCrcError:
                stats.crc_failures += 1
                continue
        else:
            pkt = item
        if cc is None:
            cc, spc = pkt.channel_count, pkt.samples_per_channel
            expected_seq = pkt.sequence
        elif pkt.channel_count != cc:
            raise StreamFormatError(
                f"channel count changed mid-stream: {cc} -> {pkt.channel_count}"
            )
        elif pkt.samples_per_channel != spc:
            raise StreamFormatError(
                f"samples_per_channel changed mid-stream: {spc} -> {pkt.samples_per_channel}"
            )
        gap = (pkt.sequence - expected_seq) % _SEQ_MOD
        if gap:
            stats.packets_lost += gap
            chunks.append(np.zeros((cc, gap * spc), dtype=np.int16))
            position += gap * spc
        if pkt.trigger:
            events.append(TriggerEvent(
                kind=TRIGGER_KINDS[len(events) % len(TRIGGER_KINDS)],
                sample_index=position,
                timestamp_us=pkt.timestamp_us,
            ))
        chunks.append(pkt.samples)
        position += spc
        stats.packets_received += 1
        expected_seq = (pkt.sequence + 1) % _SEQ_MOD
    if not chunks:
        return np.zeros((0, 0), dtype=np.int16), events, stats
    return np.concatenate(chunks, axis=1), events, stats
