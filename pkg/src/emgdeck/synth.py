"""Seeded synthetic corpus generator standing in for human recordings.

Generative model, per utterance:

  1. A smooth latent articulator trajectory tau(t) (75 frames @ 50 Hz,
     latent_dim dims) built from word-specific coefficients on a low-order
     cosine basis, scaled by a per-speaker articulation gain, plus smooth
     per-utterance latent noise.
  2. Per channel c and frequency band b, a log-envelope drive
     u = T_w[c,b] + gamma * <g_cb, tau(t)>, where T_w is the word's static
     channel x band activation template and g_cb couples the latent to that
     band. EMG is the sum over bands of band-limited unit-RMS noise carriers
     scaled by exp(u), plus white sensor noise, quantized to 15-bit codes.
  3. Acoustic features are acoustic_mixing @ tau(t), so a ground-truth
     linear EMG<->acoustic relation exists by construction.

Articulatory structure drives the templates: the two throat-center channels
(4, 5) respond only to the word's vowel nucleus, consonant place/voicing
information lives on the outer neck channels, and the face channels add a
labial boost. That yields the intended behaviors: electrode ablation
improves past two electrodes, and face electrodes help labial contrasts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .acoustic import AcousticFeatureSet, AcousticFeatureTrack, FEATURE_DIM
from .dataset import (
    ADC_CODE_MAX,
    ADC_CODE_MIN,
    VOLTS_PER_LSB_DEFAULT,
    Dataset,
    Utterance,
    default_channel_roles,
)
from .forest import derive_seed
from .words import WORDS, WordLabel

SAMPLE_RATE_HZ = 1000
DURATION_SAMPLES = 1500
ACOUSTIC_RATE_HZ = 50.0
ACOUSTIC_FRAMES = 75  # round(1.5 s * 50 Hz)
CHANNEL_COUNT = 13

BAND_EDGES_HZ = (0.0, 80.0, 160.0, 240.0, 330.0, 420.0, 500.0)
N_BANDS = len(BAND_EDGES_HZ) - 1

# Typical surface-EMG spectral tilt (log scale factors per band).
_BAND_LEVELS = np.log(np.array([1.0, 1.35, 1.0, 0.72, 0.52, 0.38]))

# Channel weighting of vowel vs consonant information. Channels 4 and 5 sit
# over the larynx and carry vowel information only; consonant place/voicing
# grows toward the outer neck channels; face channels are consonant-heavy.
_VOWEL_W = np.array([0.40, 0.50, 0.70, 0.90, 1.0, 1.0, 0.90, 0.70, 0.50, 0.40, 0.35, 0.35, 0.35])
_CONS_W = np.array([1.0, 1.0, 0.80, 0.40, 0.0, 0.0, 0.40, 0.80, 1.0, 1.0, 0.90, 0.90, 0.90])
_FACE_FLAG = np.array([0.0] * 10 + [1.0] * 3)

# Vowel nucleus group and onset/medial consonant group per word (see words.py
# for the inventory order).
_VOWEL_GROUP = {"heed": 0, "had": 1, "hood": 2, "tail": 3, "kale": 3,
                "doe": 4, "goat": 4, "aba": 5, "ada": 5, "aga": 5, "aka": 5}
_CONS_GROUP = {"heed": 0, "had": 0, "hood": 0, "tail": 1, "kale": 2,
               "doe": 3, "goat": 4, "aba": 5, "ada": 3, "aga": 4, "aka": 2}
_N_VOWEL_GROUPS = 6
_N_CONS_GROUPS = 6
# Lip engagement: the labial plosive plus, weakly, the rounded vowels.
_LABIAL_W = {"aba": 1.0, "hood": 0.45, "doe": 0.45, "goat": 0.45}

# Temporal basis: zero-mean cosines over normalized utterance time.
_BASIS_SCALES = np.array([1.0, 0.7, 0.5, 0.35])
_N_BASIS = len(_BASIS_SCALES)

# Tuned amplitudes (log-envelope units unless noted).
_STATIC_BASE_STD = 0.15     # word-independent per-(channel, band) texture
_STATIC_VOWEL = 0.55        # vowel template strength
_STATIC_CONS = 0.55         # consonant template strength
_STATIC_LABIAL = 0.50       # face-channel labial boost
_SPEAKER_STATIC_STD = 0.08  # per-speaker electrode-placement offsets
_GAMMA_TEMPORAL = 0.60      # latent-to-log-envelope coupling
_ANCHOR_JITTER = 0.30       # per-band deviation from the channel anchor direction
_CONS_UNIQUE = 0.35         # how far the labial consonant sits from alveolar on the neck
_DRIVE_CLIP = 2.5
_ENVELOPE_LSB = 230.0       # base envelope amplitude in ADC LSB


@dataclass(frozen=True)
class SynthConfig:
    """Everything the generator needs; same seed means byte-identical corpus."""

    seed: int = 2024
    latent_dim: int = 8
    noise_std: float = 40.0       # additive sensor noise, ADC LSB units
    latent_noise: float = 0.25    # per-utterance smooth trajectory jitter
    utterances_per_cell: int = 10
    speaker_gain: Mapping[int, float] = field(default_factory=lambda: {1: 1.0, 2: 1.08})
    per_word_band_templates: Mapping[str, np.ndarray] | None = None
    acoustic_mixing: np.ndarray | None = None  # (FEATURE_DIM, latent_dim)

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.utterances_per_cell < 1:
            raise ValueError("utterances_per_cell must be >= 1")
        if set(self.speaker_gain) != {1, 2}:
            raise ValueError("speaker_gain must map speakers 1 and 2")
        if self.per_word_band_templates is not None:
            for w in WORDS:
                t = self.per_word_band_templates.get(w.text)
                if t is None or np.asarray(t).shape != (CHANNEL_COUNT, N_BANDS):
                    raise ValueError(
                        f"template for {w.text!r} must have shape ({CHANNEL_COUNT}, {N_BANDS})"
                    )
        if self.acoustic_mixing is not None:
            m = np.asarray(self.acoustic_mixing)
            if m.shape != (FEATURE_DIM, self.latent_dim):
                raise ValueError(f"acoustic_mixing must be ({FEATURE_DIM}, {self.latent_dim})")


def _validate_distinct(templates: dict[str, np.ndarray]) -> None:
    words = [w.text for w in WORDS]
    for i, a in enumerate(words):
        for b in words[i + 1:]:
            if float(np.linalg.norm(templates[a] - templates[b])) <= 0.0:
                raise ValueError(f"word templates for {a!r} and {b!r} are identical")


class SynthModel:
    """Materialized generator state for one SynthConfig."""

    def __init__(self, config: SynthConfig):
        self.config = config
        L = config.latent_dim
        self.n_vowel_dims = max(1, L - L // 2)  # first dims carry vowel latents
        rng = np.random.default_rng(derive_seed(config.seed, 0))

        # Static channel x band templates per word.
        base = rng.normal(0.0, _STATIC_BASE_STD, size=(CHANNEL_COUNT, N_BANDS))
        vowel_pat = rng.normal(0.0, 1.0, size=(_N_VOWEL_GROUPS, N_BANDS))
        cons_pat = rng.normal(0.0, 1.0, size=(_N_CONS_GROUPS, N_BANDS))
        # The labial plosive is hard to see from the neck: give it nearly the
        # alveolar pattern there; the face channels carry the real contrast.
        cons_pat[5] = cons_pat[3] + _CONS_UNIQUE * rng.normal(0.0, 1.0, size=N_BANDS)
        labial_pat = rng.normal(0.0, 1.0, size=N_BANDS)
        if config.per_word_band_templates is not None:
            templates = {
                w.text: np.array(config.per_word_band_templates[w.text], dtype=np.float64)
                for w in WORDS
            }
        else:
            templates = {}
            for w in WORDS:
                t = base + _BAND_LEVELS
                t = t + _STATIC_VOWEL * _VOWEL_W[:, None] * vowel_pat[_VOWEL_GROUP[w.text]]
                t = t + _STATIC_CONS * _CONS_W[:, None] * cons_pat[_CONS_GROUP[w.text]]
                t = t + _STATIC_LABIAL * _LABIAL_W.get(w.text, 0.0) * _FACE_FLAG[:, None] * labial_pat
                templates[w.text] = t
        _validate_distinct(templates)
        self.templates = templates

        # Per-speaker static electrode-placement offsets.
        self.speaker_static = {
            s: rng.normal(0.0, _SPEAKER_STATIC_STD, size=(CHANNEL_COUNT, N_BANDS)) for s in (1, 2)
        }

        # Latent-to-band coupling directions, confined per channel to the
        # latent dims that channel is allowed to see.
        mask = np.zeros((CHANNEL_COUNT, L))
        mask[:, :self.n_vowel_dims] = _VOWEL_W[:, None]
        mask[:, self.n_vowel_dims:] = _CONS_W[:, None]
        anchors = rng.normal(0.0, 1.0, size=(CHANNEL_COUNT, L)) * mask
        coupling = anchors[:, None, :] + _ANCHOR_JITTER * rng.normal(0.0, 1.0, size=(CHANNEL_COUNT, N_BANDS, L)) * mask[:, None, :]
        norms = np.linalg.norm(coupling, axis=2, keepdims=True)
        self.coupling = coupling / np.maximum(norms, 1e-12)  # (C, B, L)

        # Trajectory coefficients per vowel/consonant group: (group, dims, basis).
        self.vowel_traj = rng.normal(0.0, 1.0, size=(_N_VOWEL_GROUPS, self.n_vowel_dims, _N_BASIS)) * _BASIS_SCALES
        self.cons_traj = rng.normal(0.0, 1.0, size=(_N_CONS_GROUPS, L - self.n_vowel_dims, _N_BASIS)) * _BASIS_SCALES

        if config.acoustic_mixing is not None:
            self.acoustic_mixing = np.array(config.acoustic_mixing, dtype=np.float64)
        else:
            self.acoustic_mixing = rng.normal(0.0, 1.0, size=(FEATURE_DIM, L)) / np.sqrt(L)

        s = np.linspace(0.0, 1.0, ACOUSTIC_FRAMES)
        self.basis = np.cos(np.pi * np.outer(np.arange(1, _N_BASIS + 1), s))  # (basis, frames)

        self._mask_cache: dict[int, list[np.ndarray]] = {}

    # -- pieces ---------------------------------------------------------------

    def word_coefficients(self, word: WordLabel) -> np.ndarray:
        """(latent_dim, n_basis) trajectory coefficients for a word."""
        c = np.zeros((self.config.latent_dim, _N_BASIS))
        c[:self.n_vowel_dims] = self.vowel_traj[_VOWEL_GROUP[word.text]]
        c[self.n_vowel_dims:] = self.cons_traj[_CONS_GROUP[word.text]]
        return c

    def trajectory(self, word: WordLabel, speaker: int, rng: np.random.Generator) -> np.ndarray:
        """(ACOUSTIC_FRAMES, latent_dim) latent articulator trajectory."""
        gain = float(self.config.speaker_gain[speaker])
        coef = gain * self.word_coefficients(word)
        noise_coef = rng.normal(0.0, self.config.latent_noise, size=coef.shape) * _BASIS_SCALES
        return ((coef + noise_coef) @ self.basis).T

    def acoustic_frames(self, trajectory: np.ndarray) -> np.ndarray:
        return (trajectory @ self.acoustic_mixing.T).astype(np.float32)

    def _band_masks(self, n_samples: int) -> list[np.ndarray]:
        masks = self._mask_cache.get(n_samples)
        if masks is None:
            freqs = np.fft.rfftfreq(n_samples, d=1.0 / SAMPLE_RATE_HZ)
            masks = []
            for b in range(N_BANDS):
                lo, hi = BAND_EDGES_HZ[b], BAND_EDGES_HZ[b + 1]
                m = (freqs >= lo) & ((freqs < hi) if b < N_BANDS - 1 else (freqs <= hi))
                masks.append(m)
            self._mask_cache[n_samples] = masks
        return masks

    def _band_carrier(self, rng: np.random.Generator, mask: np.ndarray, n_samples: int) -> np.ndarray:
        """Unit-RMS noise confined to one frequency band."""
        white = rng.standard_normal(n_samples)
        spec = np.fft.rfft(white)
        spec[~mask] = 0.0
        x = np.fft.irfft(spec, n=n_samples)
        rms = float(np.sqrt(np.mean(x * x)))
        return x / max(rms, 1e-12)

    def emg_codes(
        self,
        word: WordLabel,
        speaker: int,
        trajectory: np.ndarray,
        rng: np.random.Generator,
        *,
        envelope_weight: np.ndarray | None = None,
        n_samples: int = DURATION_SAMPLES,
    ) -> np.ndarray:
        """(CHANNEL_COUNT, n_samples) int16 ADC codes.

        envelope_weight, if given, blends drives from a resting floor up to the
        full word drive per sample (used by the live prompt-block simulator).
        """
        static = self.templates[word.text] + self.speaker_static[speaker]
        tau_up = np.empty((n_samples, self.config.latent_dim))
        src = np.linspace(0.0, 1.0, trajectory.shape[0])
        dst = np.linspace(0.0, 1.0, n_samples)
        for d in range(self.config.latent_dim):
            tau_up[:, d] = np.interp(dst, src, trajectory[:, d])
        masks = self._band_masks(n_samples)
        signal = np.zeros((CHANNEL_COUNT, n_samples))
        for c in range(CHANNEL_COUNT):
            # (bands, samples) log-envelope drives
            drive = static[c][:, None] + _GAMMA_TEMPORAL * (self.coupling[c] @ tau_up.T)
            if envelope_weight is not None:
                rest = _BAND_LEVELS[:, None] + np.log(0.22)
                drive = rest + envelope_weight[None, :] * (drive - rest)
            env = _ENVELOPE_LSB * np.exp(np.clip(drive, -_DRIVE_CLIP, _DRIVE_CLIP))
            for b in range(N_BANDS):
                signal[c] += env[b] * self._band_carrier(rng, masks[b], n_samples)
        if self.config.noise_std > 0:
            signal += rng.normal(0.0, self.config.noise_std, size=signal.shape)
        return np.clip(np.rint(signal), ADC_CODE_MIN, ADC_CODE_MAX).astype(np.int16)

    def synth_utterance(
        self, word: WordLabel, speaker: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """(codes (C, 1500) int16, acoustic frames (75, 1024) float32)."""
        trajectory = self.trajectory(word, speaker, rng)
        acoustic = self.acoustic_frames(trajectory)
        codes = self.emg_codes(word, speaker, trajectory, rng)
        return codes, acoustic

    def prompt_block(
        self, word: WordLabel, speaker: int, rng: np.random.Generator,
        *, block_samples: int = 9000, word_center: int = 4500,
    ) -> np.ndarray:
        """A full wait/word/wait recording block with the utterance embedded.

        The word drive ramps in around the utterance window so energy-based
        slicing finds it; outside the window channels sit at a resting floor.
        """
        trajectory = self.trajectory(word, speaker, rng)
        t = np.arange(block_samples, dtype=np.float64)
        half = DURATION_SAMPLES // 2
        attack = 150.0
        w = np.clip((t - (word_center - half - attack)) / attack, 0.0, 1.0) \
            * np.clip(((word_center + half + attack) - t) / attack, 0.0, 1.0)
        w = 0.5 - 0.5 * np.cos(np.pi * w)  # smooth the ramps
        return self.emg_codes(
            word, speaker, trajectory, rng, envelope_weight=w, n_samples=block_samples
        )


def generate_synthetic(config: SynthConfig) -> tuple[Dataset, AcousticFeatureSet]:
    """A balanced 11-word x 2-speaker corpus plus matching acoustic tracks.

    Pure function of the config: identical configs yield byte-identical output.
    """
    model = SynthModel(config)
    utterances = []
    tracks: dict[str, AcousticFeatureTrack] = {}
    stream = 1
    for speaker in (1, 2):
        for word in WORDS:
            for rep in range(config.utterances_per_cell):
                rng = np.random.default_rng(derive_seed(config.seed, stream))
                stream += 1
                codes, acoustic = model.synth_utterance(word, speaker, rng)
                uid = f"s{speaker}-{word.text}-r{rep:02d}"
                utterances.append(Utterance(
                    id=uid, speaker=speaker, word=word,
                    sample_rate_hz=SAMPLE_RATE_HZ, samples=codes,
                    volts_per_lsb=VOLTS_PER_LSB_DEFAULT,
                ))
                tracks[uid] = AcousticFeatureTrack(
                    utterance_id=uid, frames=acoustic, rate_hz=ACOUSTIC_RATE_HZ
                )
    ds = Dataset(
        utterances=tuple(utterances),
        channel_roles=default_channel_roles(CHANNEL_COUNT),
        provenance=f"synthetic seed={config.seed}",
    )
    return ds, AcousticFeatureSet(tracks=tracks, source="synthetic")
