"""Wav reading and resampling to the 16 kHz rate the encoders expect."""

from __future__ import annotations

import math
import wave
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly


class AudioReadError(Exception):
    pass


def read_wav(path: str | Path) -> tuple[int, np.ndarray]:
    """Returns (sample_rate, mono float64 waveform in [-1, 1])."""
    try:
        with wave.open(str(path), "rb") as handle:
            rate = handle.getframerate()
            channels = handle.getnchannels()
            width = handle.getsampwidth()
            raw = handle.readframes(handle.getnframes())
    except (wave.Error, OSError, EOFError) as e:
        raise AudioReadError(f"cannot read {path}: {e}") from e
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 1:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    else:
        raise AudioReadError(f"{path}: unsupported sample width {width}")
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return rate, data


def resample_to(waveform: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    if rate_in == rate_out:
        return waveform
    g = math.gcd(rate_in, rate_out)
    return resample_poly(waveform, rate_out // g, rate_in // g)
