"""The four scripted studies, each a pure function of (dataset, config, seed).

- run_classification: stats features + random forest over stratified splits.
- run_ablation: classification for 1..10 neck electrodes (center-out or
  seeded random subsets), sharing split seeds across k.
- run_one_shot_confusion: train on one speaker plus one utterance per word
  from the other, test on the rest; both directions summed element-wise.
- run_correlation: per-dimension linear regression from acoustic features to
  the flattened log-power EMG spectrogram, scored by mean per-utterance
  Pearson r (pooled-r and held-out variants behind flags).

All randomness derives from the experiment seed; the seed field of a passed
ForestConfig is replaced by a per-split derivation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import dsp
from .acoustic import AcousticFeatureSet
from .dataset import Dataset, select_channels
from .errors import ExperimentError
from .forest import ForestConfig, derive_seed, fit_forest, predict_forest
from .learn import ConfusionMatrix, fit_ols_multi, make_splits, t_interval_95
from .words import WORDS

# Electrode order when ablating center-out: start at the throat-center pair
# the neckband is aligned on, then alternate outward.
CENTER_OUT_ORDER = (4, 5, 3, 6, 2, 7, 1, 8, 0, 9)

CHANNEL_SET_NAMES = ("full13", "neck10", "face3")

_SPLIT_STREAM = 0x51
_FOREST_STREAM = 0xF0
_PERMUTE_STREAM = 0x9E
_ONESHOT_STREAM = 0x15
_SUBSET_STREAM = 0xAB
_CONTROL_STREAM = 0xC0


def resolve_channel_set(ds: Dataset, channel_set) -> tuple[tuple[int, ...], str]:
    """Map a channel-set name or index list to sorted dataset channel indices."""
    if isinstance(channel_set, str):
        if channel_set == "full13":
            return tuple(range(ds.channel_count)), "full13"
        if channel_set == "neck10":
            return ds.neck_channels, "neck10"
        if channel_set == "face3":
            return ds.face_channels, "face3"
        raise ExperimentError(
            f"unknown channel set {channel_set!r}; use one of {CHANNEL_SET_NAMES} or indices"
        )
    channels = tuple(sorted(int(c) for c in channel_set))
    if len(set(channels)) != len(channels):
        raise ExperimentError(f"duplicate channel indices in {channel_set}")
    for c in channels:
        if not 0 <= c < ds.channel_count:
            raise ExperimentError(f"channel {c} out of range")
    return channels, "custom"


@dataclass(frozen=True)
class ClassificationReport:
    channel_set: str
    channels: tuple[int, ...]
    per_split_accuracy: tuple[float, ...]
    mean: float
    ci95: tuple[float, float]
    n_splits: int
    train_frac: float
    seed: int
    permuted_labels: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "classification",
            "channel_set": self.channel_set,
            "channels": list(self.channels),
            "per_split_accuracy": list(self.per_split_accuracy),
            "mean_accuracy": self.mean,
            "ci95": list(self.ci95),
            "n_splits": self.n_splits,
            "train_frac": self.train_frac,
            "seed": self.seed,
            "permuted_labels": self.permuted_labels,
        }


def _split_rows(ds: Dataset, splits) -> list[tuple[np.ndarray, np.ndarray]]:
    index = {u.id: i for i, u in enumerate(ds.utterances)}
    return [
        (np.asarray([index[i] for i in train]), np.asarray([index[i] for i in test]))
        for train, test in splits
    ]


def run_classification(
    ds: Dataset,
    channel_set="full13",
    cfg: ForestConfig | None = None,
    n_splits: int = 10,
    train_frac: float = 0.8,
    seed: int = 2024,
    permute_labels: bool = False,
    _stats: np.ndarray | None = None,
) -> ClassificationReport:
    """Word classification accuracy over seeded stratified train/test splits."""
    if not ds.is_balanced():
        raise ExperimentError("dataset must be balanced across (word, speaker) cells")
    cfg = cfg or ForestConfig()
    channels, set_name = resolve_channel_set(ds, channel_set)
    stats = _stats if _stats is not None else dsp.stats_matrix(ds)
    X = stats[:, dsp.stats_columns_for_channels(channels)]
    truth = [u.word for u in ds.utterances]
    splits = _split_rows(ds, make_splits(ds, n_splits, train_frac, derive_seed(seed, _SPLIT_STREAM)))
    accuracies = []
    for s, (train, test) in enumerate(splits):
        y = truth
        if permute_labels:
            # Fresh permutation per split: the chance-level control then
            # averages over independent relabelings instead of inheriting one
            # permutation's luck.
            perm = np.random.default_rng(derive_seed(seed, _PERMUTE_STREAM + s)).permutation(len(y))
            y = [truth[i] for i in perm]
        forest_cfg = replace(cfg, seed=derive_seed(seed, _FOREST_STREAM + s))
        forest = fit_forest(X[train], [y[i] for i in train], forest_cfg, classes=WORDS)
        pred, _ = predict_forest(forest, X[test])
        cm = ConfusionMatrix.from_labels([y[i] for i in test], pred)
        accuracies.append(cm.accuracy)
    return ClassificationReport(
        channel_set=set_name,
        channels=channels,
        per_split_accuracy=tuple(accuracies),
        mean=float(np.mean(accuracies)),
        ci95=t_interval_95(accuracies),
        n_splits=n_splits,
        train_frac=train_frac,
        seed=seed,
        permuted_labels=permute_labels,
    )


@dataclass(frozen=True)
class AblationReport:
    ordering_policy: str
    per_k: dict[int, ClassificationReport]
    seed: int

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "ablation",
            "ordering_policy": self.ordering_policy,
            "seed": self.seed,
            "per_k": {str(k): r.to_dict() for k, r in sorted(self.per_k.items())},
        }


def run_ablation(
    ds: Dataset,
    policy: str = "center_out",
    cfg: ForestConfig | None = None,
    n_splits: int = 10,
    train_frac: float = 0.8,
    seed: int = 2024,
    n_subsets: int = 5,
) -> AblationReport:
    """Classification accuracy for k = 1..10 neck electrodes.

    center_out adds electrodes outward from the throat-center pair;
    random_subsets pools n_subsets seeded subsets per k. Every k shares the
    same split seeds, so k=10 under center_out is bitwise identical to a
    neck10 run_classification with the same seed.
    """
    neck = ds.neck_channels
    if len(neck) != 10:
        raise ExperimentError(f"ablation needs the 10 neck channels, dataset has {len(neck)}")
    stats = dsp.stats_matrix(ds)
    per_k: dict[int, ClassificationReport] = {}
    if policy == "center_out":
        for k in range(1, 11):
            channels = sorted(neck[p] for p in CENTER_OUT_ORDER[:k])
            per_k[k] = run_classification(
                ds, channels, cfg, n_splits, train_frac, seed, _stats=stats
            )
    elif policy == "random_subsets":
        for k in range(1, 11):
            rng = np.random.default_rng(derive_seed(seed, _SUBSET_STREAM + k))
            accuracies: list[float] = []
            report = None
            for _ in range(n_subsets):
                channels = sorted(neck[p] for p in rng.choice(10, size=k, replace=False))
                report = run_classification(
                    ds, channels, cfg, n_splits, train_frac, seed, _stats=stats
                )
                accuracies.extend(report.per_split_accuracy)
            per_k[k] = ClassificationReport(
                channel_set="custom",
                channels=(),
                per_split_accuracy=tuple(accuracies),
                mean=float(np.mean(accuracies)),
                ci95=t_interval_95(accuracies),
                n_splits=n_splits,
                train_frac=train_frac,
                seed=seed,
            )
    else:
        raise ExperimentError(f"unknown ablation policy {policy!r}")
    return AblationReport(ordering_policy=policy, per_k=per_k, seed=seed)


@dataclass(frozen=True)
class OneShotReport:
    channel_set: str
    matrix: ConfusionMatrix
    per_direction: tuple[ConfusionMatrix, ConfusionMatrix]
    seed: int

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "one_shot_confusion",
            "channel_set": self.channel_set,
            "seed": self.seed,
            "matrix": self.matrix.to_dict(),
            "per_direction": [m.to_dict() for m in self.per_direction],
            "row_sums": self.matrix.counts.sum(axis=1).tolist(),
        }


def run_one_shot_confusion(
    ds: Dataset,
    channel_set="neck10",
    cfg: ForestConfig | None = None,
    seed: int = 2024,
) -> OneShotReport:
    """Cross-speaker 1-shot confusion: both directions, summed element-wise."""
    if set(ds.speakers()) != {1, 2}:
        raise ExperimentError(f"need both speakers, dataset has {ds.speakers()}")
    cfg = cfg or ForestConfig()
    channels, set_name = resolve_channel_set(ds, channel_set)
    stats = dsp.stats_matrix(ds)
    X = stats[:, dsp.stats_columns_for_channels(channels)]
    y = [u.word for u in ds.utterances]
    matrices = []
    for d, (src, dst) in enumerate(((1, 2), (2, 1))):
        rng = np.random.default_rng(derive_seed(seed, _ONESHOT_STREAM + d))
        train = [i for i, u in enumerate(ds.utterances) if u.speaker == src]
        shots = []
        for w in WORDS:
            members = [i for i, u in enumerate(ds.utterances) if u.speaker == dst and u.word == w]
            if not members:
                raise ExperimentError(f"speaker {dst} has no utterances of {w.text!r}")
            shots.append(members[int(rng.integers(len(members)))])
        train = train + shots
        test = [i for i, u in enumerate(ds.utterances) if u.speaker == dst and i not in set(shots)]
        forest_cfg = replace(cfg, seed=derive_seed(seed, _FOREST_STREAM + 100 + d))
        forest = fit_forest(X[train], [y[i] for i in train], forest_cfg, classes=WORDS)
        pred, _ = predict_forest(forest, X[test])
        matrices.append(ConfusionMatrix.from_labels([y[i] for i in test], pred))
    return OneShotReport(
        channel_set=set_name,
        matrix=matrices[0] + matrices[1],
        per_direction=(matrices[0], matrices[1]),
        seed=seed,
    )


@dataclass(frozen=True)
class CorrelationReport:
    per_dim_r: tuple[float, ...]       # mean Pearson r per EMG dimension
    fraction_ge_threshold: float
    threshold: float
    control_fraction: float | None
    n_dims: int
    n_undefined_dims: int              # dims undefined for every utterance
    undefined_dims: tuple[int, ...]
    r_mode: str
    nfft: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "correlation",
            "n_dims": self.n_dims,
            "threshold": self.threshold,
            "fraction_ge_threshold": self.fraction_ge_threshold,
            "control_fraction": self.control_fraction,
            "n_undefined_dims": self.n_undefined_dims,
            "undefined_dims": list(self.undefined_dims),
            "r_mode": self.r_mode,
            "nfft": self.nfft,
            "seed": self.seed,
            "per_dim_r": [None if not np.isfinite(v) else v for v in self.per_dim_r],
        }


def _mean_r_per_dim(P: np.ndarray, Y: np.ndarray, n_frames: int) -> np.ndarray:
    """Per-utterance Pearson r between columns of P and Y, averaged; -inf if never defined."""
    n_dims = Y.shape[1]
    sums = np.zeros(n_dims)
    counts = np.zeros(n_dims)
    for u in range(len(P) // n_frames):
        sl = slice(u * n_frames, (u + 1) * n_frames)
        p = P[sl] - P[sl].mean(axis=0)
        a = Y[sl] - Y[sl].mean(axis=0)
        vp = np.sum(p * p, axis=0)
        va = np.sum(a * a, axis=0)
        defined = (vp > 0.0) & (va > 0.0)
        r = np.zeros(n_dims)
        r[defined] = np.clip(
            np.sum(p * a, axis=0)[defined] / np.sqrt(vp[defined] * va[defined]), -1.0, 1.0
        )
        sums[defined] += r[defined]
        counts[defined] += 1
    mean_r = np.full(n_dims, -np.inf)
    mean_r[counts > 0] = sums[counts > 0] / counts[counts > 0]
    return mean_r


def _pooled_r_per_dim(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    p = P - P.mean(axis=0)
    a = Y - Y.mean(axis=0)
    vp = np.sum(p * p, axis=0)
    va = np.sum(a * a, axis=0)
    defined = (vp > 0.0) & (va > 0.0)
    r = np.full(Y.shape[1], -np.inf)
    r[defined] = np.clip(np.sum(p * a, axis=0)[defined] / np.sqrt(vp[defined] * va[defined]), -1.0, 1.0)
    return r


def correlation_features(
    ds: Dataset, acoustics: AcousticFeatureSet, nfft: int = 256
) -> tuple[np.ndarray, np.ndarray, int]:
    """Pooled (acoustic X, EMG log-power Y, frames per utterance) over the corpus."""
    from .acoustic import validate_pairing

    neck = ds.neck_channels
    if len(neck) != 10:
        raise ExperimentError(f"correlation study uses the 10 neck channels, dataset has {len(neck)}")
    ds10 = select_channels(ds, neck) if ds.channel_count != 10 else ds
    validate_pairing(ds, acoustics)
    cfg = dsp.SpectrogramConfig(nperseg=100, noverlap=50, nfft=nfft)
    X_blocks, Y_blocks = [], []
    n_frames = None
    for u in ds10.utterances:
        spec = dsp.spectrogram(u, cfg)
        emg = dsp.flatten_spectrogram(spec, log=True).T  # (frames, dims)
        track = acoustics[u.id].frames.astype(np.float64).T
        if n_frames is None:
            n_frames = emg.shape[0]
        elif emg.shape[0] != n_frames:
            raise ExperimentError(
                f"frame count mismatch: {u.id} has {emg.shape[0]} EMG frames, expected {n_frames}"
            )
        X_blocks.append(dsp.interp_to_length(track, n_frames).T)
        Y_blocks.append(emg)
    return np.vstack(X_blocks), np.vstack(Y_blocks), n_frames


def run_correlation(
    ds: Dataset,
    acoustics: AcousticFeatureSet,
    nfft: int = 256,
    ridge: float | None = None,
    threshold: float = 0.5,
    seed: int = 2024,
    include_control: bool = False,
    r_mode: str = "per_utterance",
    holdout_frac: float | None = None,
) -> CorrelationReport:
    """Fraction of EMG spectrogram dims linearly predictable from acoustic features.

    Paper-faithful defaults: fit on all pooled frames, score by per-utterance
    Pearson r averaged over utterances. `holdout_frac` fits on a seeded subset
    of utterances and scores only the rest; r_mode="pooled" scores one r over
    all frames instead of the per-utterance mean.
    """
    if r_mode not in ("per_utterance", "pooled"):
        raise ExperimentError(f"unknown r_mode {r_mode!r}")
    X, Y, n_frames = correlation_features(ds, acoustics, nfft)
    n_utt = len(X) // n_frames

    def score(X_in: np.ndarray) -> np.ndarray:
        if holdout_frac is None:
            fit_rows = slice(None)
            eval_rows = slice(None)
        else:
            rng = np.random.default_rng(derive_seed(seed, _SPLIT_STREAM + 1))
            order = rng.permutation(n_utt)
            n_fit = max(1, int(round((1.0 - holdout_frac) * n_utt)))
            fit_utts = np.sort(order[:n_fit])
            eval_utts = np.sort(order[n_fit:])
            if len(eval_utts) == 0:
                raise ExperimentError("holdout_frac leaves no utterances to evaluate")
            fit_rows = np.concatenate([np.arange(u * n_frames, (u + 1) * n_frames) for u in fit_utts])
            eval_rows = np.concatenate([np.arange(u * n_frames, (u + 1) * n_frames) for u in eval_utts])
        W, b = fit_ols_multi(X_in[fit_rows], Y[fit_rows], ridge)
        P = X_in[eval_rows] @ W + b
        Y_eval = Y[eval_rows]
        if r_mode == "pooled":
            return _pooled_r_per_dim(P, Y_eval)
        return _mean_r_per_dim(P, Y_eval, n_frames)

    per_dim = score(X)
    fraction = float(np.mean(per_dim >= threshold))
    control_fraction = None
    if include_control:
        rng = np.random.default_rng(derive_seed(seed, _CONTROL_STREAM))
        control = score(rng.uniform(0.0, 1.0, size=X.shape))
        control_fraction = float(np.mean(control >= threshold))
    undefined = tuple(int(i) for i in np.flatnonzero(~np.isfinite(per_dim)))
    return CorrelationReport(
        per_dim_r=tuple(float(v) for v in per_dim),
        fraction_ge_threshold=fraction,
        threshold=threshold,
        control_fraction=control_fraction,
        n_dims=Y.shape[1],
        n_undefined_dims=len(undefined),
        undefined_dims=undefined,
        r_mode=r_mode,
        nfft=nfft,
        seed=seed,
    )
