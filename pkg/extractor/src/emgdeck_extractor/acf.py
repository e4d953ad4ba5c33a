"""Writer for the "ACF1" feature-track format.

Independent implementation of the documented layout (little-endian):
magic "ACF1", version u8=1, rate_hz f64, frame_count u32, dim u32, then
f32 row-major frames. An index file ``features.jsonl`` maps ids to files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

ACF_MAGIC = b"ACF1"
ACF_VERSION = 1
_HEADER = struct.Struct("<4sBdII")


def encode_track(frames: np.ndarray, rate_hz: float) -> bytes:
    frames = np.ascontiguousarray(frames, dtype=np.float32)
    if frames.ndim != 2:
        raise ValueError("frames must be 2-D [frame][dim]")
    header = _HEADER.pack(ACF_MAGIC, ACF_VERSION, rate_hz, frames.shape[0], frames.shape[1])
    return header + frames.astype("<f4").tobytes()


def write_feature_dir(tracks: dict[str, np.ndarray], out_dir: str | Path,
                      rate_hz: float, source: str) -> Path:
    """One .acf per id plus the JSONL index; returns the index path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for uid, frames in tracks.items():
        fname = f"{uid}.acf"
        (out_dir / fname).write_bytes(encode_track(frames, rate_hz))
        lines.append(json.dumps({"id": uid, "file": fname}, ensure_ascii=False))
    index = out_dir / "features.jsonl"
    index.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    meta = {"schema_version": 1, "source": source}
    (out_dir / "features.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return index
