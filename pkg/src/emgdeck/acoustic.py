"""Acoustic feature tracks (1024-dim @ 50 Hz) and their "ACF1" file format.

Per-track binary layout, little-endian:

    magic       4 bytes  b"ACF1"
    version     u8       1
    rate_hz     f64
    frame_count u32
    dim         u32      1024
    payload     f32 * (frame_count * dim), row-major (frame-major)

A JSON-lines index (``features.jsonl``) maps utterance ids to files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import (
    BadMagicError,
    ManifestMismatchError,
    PairingError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

ACF_MAGIC = b"ACF1"
ACF_VERSION = 1
_ACF_HEADER = struct.Struct("<4sBdII")

FEATURE_DIM = 1024
FEATURE_RATE_HZ = 50.0


@dataclass(frozen=True, eq=False)
class AcousticFeatureTrack:
    utterance_id: str
    frames: np.ndarray  # (frame_count, dim) float32
    rate_hz: float = FEATURE_RATE_HZ

    def __post_init__(self):
        if self.frames.ndim != 2:
            raise ValueError("frames must be 2-D [frame][dim]")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        object.__setattr__(self, "frames", np.ascontiguousarray(self.frames, dtype=np.float32))
        self.frames.setflags(write=False)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __eq__(self, other):
        if not isinstance(other, AcousticFeatureTrack):
            return NotImplemented
        return (
            self.utterance_id == other.utterance_id
            and self.rate_hz == other.rate_hz
            and np.array_equal(self.frames, other.frames)
        )

    def __hash__(self):
        return hash(self.utterance_id)


@dataclass(frozen=True)
class AcousticFeatureSet:
    tracks: dict[str, AcousticFeatureTrack]
    source: str = "synthetic"

    def __post_init__(self):
        for uid, tr in self.tracks.items():
            if tr.utterance_id != uid:
                raise ValueError(f"track keyed {uid!r} carries id {tr.utterance_id!r}")

    def __len__(self):
        return len(self.tracks)

    def __getitem__(self, uid: str) -> AcousticFeatureTrack:
        return self.tracks[uid]


def encode_track(track: AcousticFeatureTrack) -> bytes:
    header = _ACF_HEADER.pack(ACF_MAGIC, ACF_VERSION, track.rate_hz, track.frame_count, track.dim)
    return header + track.frames.astype("<f4").tobytes()


def decode_track(data: bytes, utterance_id: str, *, allow_nonstandard_dim: bool = False) -> AcousticFeatureTrack:
    if len(data) < 4 or data[:4] != ACF_MAGIC:
        raise BadMagicError(f"not an ACF1 file (magic={data[:4]!r})")
    if len(data) < _ACF_HEADER.size:
        raise TruncatedPayloadError(f"ACF1 header truncated at {len(data)} bytes")
    _, version, rate_hz, frame_count, dim = _ACF_HEADER.unpack_from(data)
    if version != ACF_VERSION:
        raise UnsupportedVersionError(f"ACF1 version {version} not supported")
    if dim != FEATURE_DIM and not allow_nonstandard_dim:
        raise ManifestMismatchError(
            f"track {utterance_id!r} has dim={dim}, expected {FEATURE_DIM} "
            "(pass allow_nonstandard_dim=True to accept)"
        )
    expected = _ACF_HEADER.size + 4 * frame_count * dim
    if len(data) != expected:
        raise TruncatedPayloadError(f"ACF1 payload: expected {expected} bytes, have {len(data)}")
    frames = np.frombuffer(data, dtype="<f4", offset=_ACF_HEADER.size).reshape(frame_count, dim)
    return AcousticFeatureTrack(utterance_id=utterance_id, frames=frames.copy(), rate_hz=rate_hz)


def save_features(feature_set: AcousticFeatureSet, directory: str | Path) -> Path:
    """Write one .acf per track plus a features.jsonl index; returns the index path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for uid in feature_set.tracks:
        fname = f"{uid}.acf"
        (directory / fname).write_bytes(encode_track(feature_set.tracks[uid]))
        lines.append(json.dumps({"id": uid, "file": fname}, ensure_ascii=False))
    index = directory / "features.jsonl"
    index.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    meta = {"schema_version": 1, "source": feature_set.source}
    (directory / "features.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return index


def load_features(directory: str | Path, *, allow_nonstandard_dim: bool = False) -> AcousticFeatureSet:
    directory = Path(directory)
    index = directory / "features.jsonl"
    if not index.is_file():
        raise ManifestMismatchError(f"no features.jsonl in {directory}")
    tracks: dict[str, AcousticFeatureTrack] = {}
    for lineno, line in enumerate(index.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            uid, fname = entry["id"], entry["file"]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ManifestMismatchError(f"features index line {lineno} malformed: {e}") from e
        if uid in tracks:
            raise ManifestMismatchError(f"duplicate track id {uid!r} in index")
        path = directory / fname
        if not path.is_file():
            raise ManifestMismatchError(f"index references missing file {fname!r} (id {uid!r})")
        tracks[uid] = decode_track(path.read_bytes(), uid, allow_nonstandard_dim=allow_nonstandard_dim)
    meta_path = directory / "features.json"
    source = "extracted"
    if meta_path.is_file():
        source = json.loads(meta_path.read_text(encoding="utf-8")).get("source", source)
    return AcousticFeatureSet(tracks=tracks, source=source)


def validate_pairing(ds: Dataset, feature_set: AcousticFeatureSet) -> None:
    """Check a dataset and a feature set describe the same utterances.

    Total over all inputs: every defect is reported in one PairingError.
    """
    problems = []
    ds_ids = {u.id for u in ds.utterances}
    fs_ids = set(feature_set.tracks)
    for uid in sorted(ds_ids - fs_ids):
        problems.append(f"no acoustic track for utterance {uid!r}")
    for uid in sorted(fs_ids - ds_ids):
        problems.append(f"track {uid!r} has no utterance")
    for u in ds.utterances:
        tr = feature_set.tracks.get(u.id)
        if tr is None:
            continue
        expected = round(u.duration_s * tr.rate_hz)
        if tr.frame_count != expected:
            problems.append(
                f"track {u.id!r}: {tr.frame_count} frames, expected {expected} "
                f"for {u.duration_s:.3f}s at {tr.rate_hz:g} Hz"
            )
    if problems:
        raise PairingError("; ".join(problems))
