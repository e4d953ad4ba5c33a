"""Corpus schema and on-disk formats.

An utterance is one 1.5 s multichannel EMG slice stored as signed 15-bit ADC
codes in int16 containers. A corpus directory holds one ``<id>.emg`` binary
file per utterance, a ``manifest.jsonl`` (one JSON object per line:
``{id, speaker, word, file}``), and a ``dataset.json`` sidecar carrying
channel roles and provenance.

"EMG1" binary layout, little-endian:

    magic       4 bytes  b"EMG1"
    version     u8       1
    channel_count u16
    sample_rate_hz u32
    sample_count  u64    samples per channel
    volts_per_lsb f64
    payload     i16 * (sample_count * channel_count), sample-major
                (t0c0, t0c1, ..., t1c0, ...)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    ChannelSelectionError,
    ManifestMismatchError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from .words import WordLabel, word_by_text

# Table-1 derived scale: 100 mVpp input range over 15-bit resolution.
VOLTS_PER_LSB_DEFAULT = 0.1 / 2**15

ADC_CODE_MIN = -16384
ADC_CODE_MAX = 16383

EMG_MAGIC = b"EMG1"
EMG_VERSION = 1
_EMG_HEADER = struct.Struct("<4sBHIQd")

NECK = "neck"
FACE = "face"


def default_channel_roles(channel_count: int) -> tuple[str, ...]:
    """Fixed role map: channels 0-9 are neck electrodes, 10+ are face."""
    if channel_count < 1:
        raise ValueError("channel_count must be >= 1")
    return tuple(NECK if c < 10 else FACE for c in range(channel_count))


@dataclass(frozen=True, eq=False)
class Utterance:
    """One labelled 1.5 s recording slice; immutable after construction."""

    id: str
    speaker: int
    word: WordLabel
    sample_rate_hz: int
    samples: np.ndarray  # int16, shape (channel_count, duration_samples)
    volts_per_lsb: float = VOLTS_PER_LSB_DEFAULT

    def __post_init__(self):
        s = self.samples
        if s.ndim != 2:
            raise ValueError(f"samples must be 2-D [channel][time], got ndim={s.ndim}")
        if s.dtype != np.int16:
            raise ValueError(f"samples must be int16 ADC codes, got {s.dtype}")
        if s.size and (s.min() < ADC_CODE_MIN or s.max() > ADC_CODE_MAX):
            raise ValueError("ADC codes out of signed 15-bit range [-16384, 16383]")
        if self.speaker not in (1, 2):
            raise ValueError(f"speaker must be 1 or 2, got {self.speaker}")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        s.setflags(write=False)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.duration_samples / self.sample_rate_hz

    def volts(self) -> np.ndarray:
        """Samples converted to volts, float64."""
        return self.samples.astype(np.float64) * self.volts_per_lsb

    def __eq__(self, other) -> bool:
        if not isinstance(other, Utterance):
            return NotImplemented
        return (
            self.id == other.id
            and self.speaker == other.speaker
            and self.word == other.word
            and self.sample_rate_hz == other.sample_rate_hz
            and self.volts_per_lsb == other.volts_per_lsb
            and np.array_equal(self.samples, other.samples)
        )

    def __hash__(self):
        return hash(self.id)


@dataclass(frozen=True, eq=False)
class Dataset:
    """A balanced labelled corpus plus channel-role metadata."""

    utterances: tuple[Utterance, ...]
    channel_roles: tuple[str, ...]
    provenance: str = "ingested"

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        object.__setattr__(self, "channel_roles", tuple(self.channel_roles))
        for r in self.channel_roles:
            if r not in (NECK, FACE):
                raise ValueError(f"channel role must be 'neck' or 'face', got {r!r}")
        ids = [u.id for u in self.utterances]
        if len(set(ids)) != len(ids):
            raise ValueError("utterance ids must be unique")
        for u in self.utterances:
            if u.channel_count != len(self.channel_roles):
                raise ValueError(
                    f"utterance {u.id} has {u.channel_count} channels, roles describe {len(self.channel_roles)}"
                )

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    @property
    def channel_count(self) -> int:
        return len(self.channel_roles)

    @property
    def neck_channels(self) -> tuple[int, ...]:
        return tuple(c for c, r in enumerate(self.channel_roles) if r == NECK)

    @property
    def face_channels(self) -> tuple[int, ...]:
        return tuple(c for c, r in enumerate(self.channel_roles) if r == FACE)

    def speakers(self) -> tuple[int, ...]:
        return tuple(sorted({u.speaker for u in self.utterances}))

    def by_cell(self) -> dict[tuple[int, int], list[int]]:
        """Utterance indices grouped by (word id, speaker), in corpus order."""
        cells: dict[tuple[int, int], list[int]] = {}
        for i, u in enumerate(self.utterances):
            cells.setdefault((u.word.id, u.speaker), []).append(i)
        return cells

    def is_balanced(self) -> bool:
        counts = {len(v) for v in self.by_cell().values()}
        return len(counts) <= 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.channel_roles == other.channel_roles
            and self.utterances == other.utterances
        )

    def __hash__(self):
        return hash((self.channel_roles, tuple(u.id for u in self.utterances)))


# -- binary utterance file ----------------------------------------------------

def encode_utterance_file(u: Utterance) -> bytes:
    header = _EMG_HEADER.pack(
        EMG_MAGIC,
        EMG_VERSION,
        u.channel_count,
        u.sample_rate_hz,
        u.duration_samples,
        u.volts_per_lsb,
    )
    # Sample-major interleaving matches the streaming packet order.
    payload = np.ascontiguousarray(u.samples.T).astype("<i2").tobytes()
    return header + payload


def decode_utterance_file(data: bytes, *, id: str, speaker: int, word: WordLabel) -> Utterance:
    if len(data) < 4 or data[:4] != EMG_MAGIC:
        raise BadMagicError(f"not an EMG1 file (magic={data[:4]!r})")
    if len(data) < _EMG_HEADER.size:
        raise TruncatedPayloadError(f"EMG1 header truncated at {len(data)} bytes")
    _, version, cc, rate, n, vpl = _EMG_HEADER.unpack_from(data)
    if version != EMG_VERSION:
        raise UnsupportedVersionError(f"EMG1 version {version} not supported")
    expected = _EMG_HEADER.size + 2 * n * cc
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"EMG1 payload truncated: expected {expected} bytes, have {len(data)}"
        )
    if len(data) > expected:
        raise TruncatedPayloadError(
            f"EMG1 file has {len(data) - expected} trailing bytes"
        )
    flat = np.frombuffer(data, dtype="<i2", offset=_EMG_HEADER.size)
    samples = flat.reshape(n, cc).T.astype(np.int16)
    return Utterance(
        id=id, speaker=speaker, word=word, sample_rate_hz=rate,
        samples=samples, volts_per_lsb=vpl,
    )


# -- corpus directory ---------------------------------------------------------

def save_dataset(ds: Dataset, directory: str | Path) -> Path:
    """Write a corpus directory; returns the manifest path. Round-trip is byte-exact."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for u in ds.utterances:
        fname = f"{u.id}.emg"
        (directory / fname).write_bytes(encode_utterance_file(u))
        lines.append(json.dumps(
            {"id": u.id, "speaker": u.speaker, "word": u.word.text, "file": fname},
            ensure_ascii=False,
        ))
    manifest = directory / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    meta = {
        "schema_version": 1,
        "channel_roles": list(ds.channel_roles),
        "provenance": ds.provenance,
    }
    (directory / "dataset.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    manifest = directory / "manifest.jsonl"
    if not manifest.is_file():
        raise ManifestMismatchError(f"no manifest.jsonl in {directory}")
    utterances = []
    seen: set[str] = set()
    for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            uid, speaker, word_text, fname = entry["id"], entry["speaker"], entry["word"], entry["file"]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ManifestMismatchError(f"manifest line {lineno} malformed: {e}") from e
        if uid in seen:
            raise ManifestMismatchError(f"duplicate utterance id {uid!r} in manifest")
        seen.add(uid)
        path = directory / fname
        if not path.is_file():
            raise ManifestMismatchError(f"manifest references missing file {fname!r} (id {uid!r})")
        utterances.append(decode_utterance_file(
            path.read_bytes(), id=uid, speaker=int(speaker), word=word_by_text(word_text),
        ))
    if utterances:
        ccs = {u.channel_count for u in utterances}
        if len(ccs) != 1:
            raise ManifestMismatchError(f"mixed channel counts in corpus: {sorted(ccs)}")
    meta_path = directory / "dataset.json"
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        roles = tuple(meta["channel_roles"])
        provenance = meta.get("provenance", "ingested")
    else:
        roles = default_channel_roles(utterances[0].channel_count) if utterances else ()
        provenance = "ingested"
    return Dataset(utterances=tuple(utterances), channel_roles=roles, provenance=provenance)


def select_channels(ds: Dataset, channels: Sequence[int]) -> Dataset:
    """New dataset with only the requested channels, in the order given."""
    channels = list(channels)
    if len(set(channels)) != len(channels):
        raise ChannelSelectionError(f"duplicate channel indices in {channels}")
    for c in channels:
        if not 0 <= c < ds.channel_count:
            raise ChannelSelectionError(f"channel {c} out of range for {ds.channel_count}-channel dataset")
    idx = np.asarray(channels, dtype=np.intp)
    utterances = tuple(
        Utterance(
            id=u.id, speaker=u.speaker, word=u.word, sample_rate_hz=u.sample_rate_hz,
            samples=np.ascontiguousarray(u.samples[idx]), volts_per_lsb=u.volts_per_lsb,
        )
        for u in ds.utterances
    )
    roles = tuple(ds.channel_roles[c] for c in channels)
    return Dataset(utterances=utterances, channel_roles=roles, provenance=ds.provenance)
