"""EMG featurization: 20 per-channel time-domain statistics and STFT spectrograms.

Statistics operate on samples converted to volts; spectrogram power stays in
raw ADC code (LSB^2) scale, which only shifts log-power by a constant and is
irrelevant to the correlation study.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, Utterance

STAT_NAMES = (
    "max", "min", "range", "max_position", "min_position",
    "arith_mean", "quad_mean", "std", "var", "kurtosis", "skewness",
    "p25", "p75", "n_peaks", "mean_peak_amplitude", "mean_abs_slope",
    "rise_time", "fall_time", "zcr", "mcr",
)
N_STATS = len(STAT_NAMES)


@dataclass(frozen=True)
class StatsFeatureVector:
    """20 statistics per channel, concatenated channel-major."""

    values: np.ndarray  # float64, length 20 * channel_count
    channel_count: int

    def __post_init__(self):
        if self.values.shape != (N_STATS * self.channel_count,):
            raise ValueError("values length must be 20 * channel_count")
        self.values.setflags(write=False)

    def channel(self, c: int) -> np.ndarray:
        return self.values[c * N_STATS:(c + 1) * N_STATS]


def _carried_signs(x: np.ndarray) -> np.ndarray:
    """Sign of each sample with zeros resolved by carrying the last nonzero sign."""
    s = np.sign(x)
    nz = s != 0
    if not nz.any():
        return s
    idx = np.where(nz, np.arange(len(s)), 0)
    np.maximum.accumulate(idx, out=idx)
    carried = s[idx]
    # Leading zeros before the first nonzero sample stay signless.
    first = np.argmax(nz)
    carried[:first] = 0
    return carried


def _crossing_rate(x: np.ndarray, duration_s: float) -> float:
    s = _carried_signs(x)
    s = s[s != 0]
    if len(s) < 2:
        return 0.0
    return float(np.count_nonzero(s[1:] != s[:-1]) / duration_s)


def _channel_stats(x: np.ndarray, fs: int) -> np.ndarray:
    """The 20 statistics of one channel, in STAT_NAMES order. x is volts."""
    n = len(x)
    out = np.empty(N_STATS)
    xmax = float(x.max())
    xmin = float(x.min())
    mean = float(x.mean())
    var = float(np.mean((x - mean) ** 2))  # population moments throughout
    std = float(np.sqrt(var))
    if var > 0.0:
        z = (x - mean) / std
        skew = float(np.mean(z**3))
        kurt = float(np.mean(z**4) - 3.0)  # excess kurtosis
    else:
        skew = kurt = 0.0
    diffs = np.diff(x)
    steps = len(diffs)
    # Strict interior local maxima above the mean.
    interior = x[1:-1]
    peaks = (interior > x[:-2]) & (interior > x[2:]) & (interior > mean)
    n_peaks = int(np.count_nonzero(peaks))
    duration_s = n / fs
    out[0] = xmax
    out[1] = xmin
    out[2] = xmax - xmin
    out[3] = float(np.argmax(x)) / (n - 1)
    out[4] = float(np.argmin(x)) / (n - 1)
    out[5] = mean
    out[6] = float(np.sqrt(np.mean(x**2)))
    out[7] = std
    out[8] = var
    out[9] = kurt
    out[10] = skew
    out[11] = float(np.percentile(x, 25))  # linear interpolation between order stats
    out[12] = float(np.percentile(x, 75))
    out[13] = float(n_peaks)
    out[14] = float(interior[peaks].mean()) if n_peaks else 0.0
    out[15] = float(np.mean(np.abs(diffs))) if steps else 0.0
    out[16] = float(np.count_nonzero(diffs > 0) / steps) if steps else 0.0
    out[17] = float(np.count_nonzero(diffs < 0) / steps) if steps else 0.0
    out[18] = _crossing_rate(x, duration_s)
    out[19] = _crossing_rate(x - mean, duration_s)
    return out


def extract_stats(u: Utterance) -> StatsFeatureVector:
    if u.duration_samples < 3:
        raise ValueError("each channel needs at least 3 samples")
    volts = u.volts()
    values = np.concatenate([_channel_stats(volts[c], u.sample_rate_hz) for c in range(u.channel_count)])
    return StatsFeatureVector(values=values, channel_count=u.channel_count)


def stats_matrix(ds: Dataset) -> np.ndarray:
    """Feature matrix for a corpus: one row per utterance, 20 * C columns."""
    return np.vstack([extract_stats(u).values for u in ds.utterances])


def stats_columns_for_channels(channels: Sequence[int]) -> np.ndarray:
    """Column indices of a stats matrix belonging to the given channels.

    Per-channel statistics are independent, so selecting channels before
    featurizing equals slicing these columns afterwards.
    """
    return np.concatenate([np.arange(c * N_STATS, (c + 1) * N_STATS) for c in channels])


# -- spectrogram ----------------------------------------------------------------

@dataclass(frozen=True)
class SpectrogramConfig:
    nperseg: int = 100
    noverlap: int = 50
    nfft: int = 128  # the correlation study fixes 256 for its 129-bin flatten
    window: str = "hann"  # "boxcar" supported for the Parseval check
    log_floor: float = 1e-12

    def __post_init__(self):
        if not self.noverlap < self.nperseg <= self.nfft:
            raise ValueError("need noverlap < nperseg <= nfft")
        if self.window not in ("hann", "boxcar"):
            raise ValueError(f"unsupported window {self.window!r}")

    @property
    def hop(self) -> int:
        return self.nperseg - self.noverlap

    @property
    def n_bins(self) -> int:
        return self.nfft // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        return (n_samples - self.nperseg) // self.hop + 1

    def window_values(self) -> np.ndarray:
        if self.window == "boxcar":
            return np.ones(self.nperseg)
        # Periodic Hann, matching the common STFT convention.
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(self.nperseg) / self.nperseg)


@dataclass(frozen=True)
class Spectrogram:
    """One-sided power spectrogram per channel, power >= 0 everywhere."""

    power: np.ndarray  # float64, (channels, bins, frames)
    bin_hz: float
    frame_hop_s: float
    config: SpectrogramConfig

    @property
    def channel_count(self) -> int:
        return self.power.shape[0]

    @property
    def n_bins(self) -> int:
        return self.power.shape[1]

    @property
    def n_frames(self) -> int:
        return self.power.shape[2]


def spectrogram(u: Utterance, cfg: SpectrogramConfig | None = None) -> Spectrogram:
    """Hann-windowed, zero-padded, one-sided power spectrogram of each channel.

    Density-style scaling: |X|^2 / (fs * sum(w^2)), interior bins doubled.
    """
    cfg = cfg or SpectrogramConfig()
    n = u.duration_samples
    if n < cfg.nperseg:
        raise ValueError(f"need at least nperseg={cfg.nperseg} samples, got {n}")
    fs = u.sample_rate_hz
    frames = cfg.n_frames(n)
    win = cfg.window_values()
    scale = 1.0 / (fs * float(np.sum(win**2)))
    x = u.samples.astype(np.float64)
    starts = np.arange(frames) * cfg.hop
    # (channels, frames, nperseg) windowed segments
    seg = x[:, starts[:, None] + np.arange(cfg.nperseg)[None, :]] * win
    spec = np.fft.rfft(seg, n=cfg.nfft, axis=2)
    power = (spec.real**2 + spec.imag**2) * scale
    power[:, :, 1:-1 if cfg.nfft % 2 == 0 else None] *= 2.0
    power = np.transpose(power, (0, 2, 1))  # -> (channels, bins, frames)
    return Spectrogram(
        power=np.ascontiguousarray(power),
        bin_hz=fs / cfg.nfft,
        frame_hop_s=cfg.hop / fs,
        config=cfg,
    )


def flatten_spectrogram(s: Spectrogram, log: bool = False) -> np.ndarray:
    """Reshape to (channels * bins, frames), channel-major then bin-ascending."""
    flat = s.power.reshape(s.channel_count * s.n_bins, s.n_frames)
    if log:
        flat = np.log10(flat + s.config.log_floor)
    return flat


def unflatten_spectrogram(flat: np.ndarray, channel_count: int) -> np.ndarray:
    """Inverse of flatten_spectrogram (without the log)."""
    dims, frames = flat.shape
    if dims % channel_count != 0:
        raise ValueError("dims not divisible by channel_count")
    return flat.reshape(channel_count, dims // channel_count, frames)


def interp_to_length(track: np.ndarray, t_dst: int) -> np.ndarray:
    """Piecewise-linear resample of each row onto t_dst points over [0, 1]."""
    track = np.asarray(track, dtype=np.float64)
    if track.ndim != 2:
        raise ValueError("track must be 2-D [dim][time]")
    t_src = track.shape[1]
    if t_src < 2:
        raise ValueError("need at least 2 source frames to interpolate")
    if t_dst < 1:
        raise ValueError("t_dst must be >= 1")
    xs = np.linspace(0.0, 1.0, t_src)
    xd = np.linspace(0.0, 1.0, t_dst)
    out = np.empty((track.shape[0], t_dst))
    for i, row in enumerate(track):
        out[i] = np.interp(xd, xs, row)
    return out
