import json

import numpy as np
import pytest

from emgdeck import dsp
from emgdeck.dataset import select_channels
from emgdeck.errors import ExperimentError
from emgdeck.experiments import (
    CENTER_OUT_ORDER,
    run_ablation,
    run_classification,
    run_correlation,
    run_one_shot_confusion,
)
from emgdeck.forest import ForestConfig, fit_forest, predict_forest, derive_seed
from emgdeck.learn import ConfusionMatrix, make_splits
from emgdeck.synth import SynthConfig, generate_synthetic
from emgdeck.words import WORDS

FAST = ForestConfig(n_trees=25, max_depth=32)


def test_center_out_order_spec():
    assert CENTER_OUT_ORDER == (4, 5, 3, 6, 2, 7, 1, 8, 0, 9)


def test_classification_report_shape(small_corpus):
    ds, _ = small_corpus
    report = run_classification(ds, "full13", FAST, n_splits=3, seed=5)
    assert len(report.per_split_accuracy) == 3
    assert report.mean == pytest.approx(np.mean(report.per_split_accuracy))
    assert report.ci95[0] <= report.mean <= report.ci95[1]
    assert report.channel_set == "full13"
    doc = report.to_dict()
    assert doc["kind"] == "classification" and doc["schema_version"] == 1
    json.dumps(doc)  # serializable


def test_classification_deterministic(small_corpus):
    ds, _ = small_corpus
    a = run_classification(ds, "neck10", FAST, n_splits=2, seed=9)
    b = run_classification(ds, "neck10", FAST, n_splits=2, seed=9)
    assert a == b
    c = run_classification(ds, "neck10", FAST, n_splits=2, seed=10)
    assert a != c


def test_classification_accuracy_equals_confusion_trace(small_corpus):
    # The report's accuracy and an externally built confusion matrix are the
    # same integers divided: reproduce one split by hand.
    ds, _ = small_corpus
    seed = 5
    report = run_classification(ds, "full13", FAST, n_splits=1, seed=seed)
    splits = make_splits(ds, 1, 0.8, derive_seed(seed, 0x51))
    index = {u.id: i for i, u in enumerate(ds.utterances)}
    train = [index[i] for i in splits[0][0]]
    test = [index[i] for i in splits[0][1]]
    X = dsp.stats_matrix(ds)
    y = [u.word for u in ds.utterances]
    from dataclasses import replace
    cfg = replace(FAST, seed=derive_seed(seed, 0xF0))
    forest = fit_forest(X[train], [y[i] for i in train], cfg, classes=WORDS)
    pred, _ = predict_forest(forest, X[test])
    cm = ConfusionMatrix.from_labels([y[i] for i in test], pred)
    assert report.per_split_accuracy[0] == cm.accuracy  # exact float identity


def test_permuted_labels_near_chance(default_dataset, default_stats):
    report = run_classification(
        default_dataset, "full13", FAST, n_splits=4, seed=3,
        permute_labels=True, _stats=default_stats,
    )
    assert 0.0 <= report.mean <= 0.25  # collapses toward 1/11


def test_channel_set_resolution(small_corpus):
    ds, _ = small_corpus
    neck = run_classification(ds, "neck10", FAST, n_splits=1, seed=1)
    assert neck.channels == tuple(range(10))
    face = run_classification(ds, "face3", FAST, n_splits=1, seed=1)
    assert face.channels == (10, 11, 12)
    custom = run_classification(ds, [7, 2], FAST, n_splits=1, seed=1)
    assert custom.channels == (2, 7) and custom.channel_set == "custom"
    with pytest.raises(ExperimentError):
        run_classification(ds, "neck11", FAST, n_splits=1, seed=1)
    with pytest.raises(ExperimentError):
        run_classification(ds, [0, 0], FAST, n_splits=1, seed=1)


def test_ablation_k10_bitwise_equals_neck10(small_corpus):
    ds, _ = small_corpus
    report = run_ablation(ds, "center_out", FAST, n_splits=2, seed=4)
    assert set(report.per_k) == set(range(1, 11))
    neck = run_classification(ds, "neck10", FAST, n_splits=2, seed=4)
    k10 = report.per_k[10]
    assert k10.per_split_accuracy == neck.per_split_accuracy  # bitwise floats
    assert k10.channels == neck.channels
    # k=1 uses only the first center electrode.
    assert report.per_k[1].channels == (4,)
    assert report.per_k[2].channels == (4, 5)
    assert len(report.per_k[1].per_split_accuracy) == 2


def test_ablation_random_subsets_pools(small_corpus):
    ds, _ = small_corpus
    report = run_ablation(ds, "random_subsets", FAST, n_splits=2, seed=4, n_subsets=3)
    assert len(report.per_k[3].per_split_accuracy) == 6  # 3 subsets x 2 splits
    with pytest.raises(ExperimentError):
        run_ablation(ds, "inside_out", FAST, n_splits=2, seed=4)


def test_ablation_requires_neck_channels(small_corpus):
    ds, _ = small_corpus
    with pytest.raises(ExperimentError, match="neck"):
        run_ablation(select_channels(ds, [10, 11, 12]), "center_out", FAST, 2, seed=1)


def test_one_shot_protocol_arithmetic(small_corpus):
    # 3 utterances per cell: per direction train = 33 + 11 = 44, test = 22;
    # summed matrix total = 44 with row sums 4.
    ds, _ = small_corpus
    report = run_one_shot_confusion(ds, "neck10", FAST, seed=8)
    m = report.matrix
    assert m.total == 44
    assert np.all(m.counts.sum(axis=1) == 4)
    for direction in report.per_direction:
        assert direction.total == 22
    doc = report.to_dict()
    assert doc["row_sums"] == [4] * 11


def test_one_shot_requires_both_speakers(small_corpus):
    ds, _ = small_corpus
    solo = type(ds)(
        utterances=tuple(u for u in ds.utterances if u.speaker == 1),
        channel_roles=ds.channel_roles, provenance=ds.provenance,
    )
    with pytest.raises(ExperimentError, match="speaker"):
        run_one_shot_confusion(solo, "neck10", FAST, seed=1)


def test_one_shot_channel_sets_share_protocol(small_corpus):
    ds, _ = small_corpus
    a = run_one_shot_confusion(ds, "neck10", FAST, seed=8)
    b = run_one_shot_confusion(ds, "full13", FAST, seed=8)
    assert a.matrix.total == b.matrix.total == 44


@pytest.fixture(scope="module")
def tiny_correlation_corpus():
    # 2 utterances per cell keeps the pooled regression small (44 x 29 rows).
    return generate_synthetic(SynthConfig(seed=31, utterances_per_cell=2, noise_std=0.0))


def test_correlation_dims_and_oracle(tiny_correlation_corpus):
    ds, acoustics = tiny_correlation_corpus
    report = run_correlation(ds, acoustics, nfft=256, seed=6)
    assert report.n_dims == 1290  # 10 channels x 129 bins
    assert len(report.per_dim_r) == 1290
    # The generator builds a linear EMG<->acoustic relation: noise-free
    # corpora correlate strongly.
    assert report.fraction_ge_threshold >= 0.9
    assert report.control_fraction is None
    doc = report.to_dict()
    json.dumps(doc)


def test_correlation_control_flag_populates(tiny_correlation_corpus):
    # On 44 utterances the pooled design (1276 rows, 1025 regressors) lets the
    # control overfit in-sample, so the <= 0.02 bound only holds at full
    # corpus size; the acceptance suite asserts it there. Here we check the
    # flag wiring and determinism.
    ds, acoustics = tiny_correlation_corpus
    report = run_correlation(ds, acoustics, nfft=256, seed=6, include_control=True)
    assert report.control_fraction is not None
    assert 0.0 <= report.control_fraction <= 1.0
    again = run_correlation(ds, acoustics, nfft=256, seed=6, include_control=True)
    assert report.control_fraction == again.control_fraction
    without = run_correlation(ds, acoustics, nfft=256, seed=6)
    assert without.control_fraction is None
    assert without.fraction_ge_threshold == report.fraction_ge_threshold


def test_correlation_consistency_with_pearson(tiny_correlation_corpus):
    # The vectorized per-dim mean r must match the scalar pearson op.
    from emgdeck.experiments import correlation_features, _mean_r_per_dim
    from emgdeck.learn import fit_ols_multi, pearson

    ds, acoustics = tiny_correlation_corpus
    X, Y, n_frames = correlation_features(ds, acoustics, nfft=256)
    W, b = fit_ols_multi(X, Y)
    P = X @ W + b
    mean_r = _mean_r_per_dim(P, Y, n_frames)
    rng = np.random.default_rng(0)
    for dim in rng.integers(0, Y.shape[1], size=5):
        rs = []
        for u in range(len(X) // n_frames):
            sl = slice(u * n_frames, (u + 1) * n_frames)
            rs.append(pearson(P[sl, dim], Y[sl, dim]))
        assert mean_r[dim] == pytest.approx(np.mean(rs), abs=1e-12)


def test_correlation_fitted_beats_zeroed_weights(tiny_correlation_corpus):
    # Sanity monotonicity: zeroing the regression weights gives constant
    # predictions, whose per-utterance r is undefined everywhere (treated as
    # -inf), so the fitted mean r dominates for every dim.
    from emgdeck.experiments import correlation_features, _mean_r_per_dim
    from emgdeck.learn import fit_ols_multi

    ds, acoustics = tiny_correlation_corpus
    X, Y, n_frames = correlation_features(ds, acoustics, nfft=256)
    W, b = fit_ols_multi(X, Y)
    fitted = _mean_r_per_dim(X @ W + b, Y, n_frames)
    zeroed = _mean_r_per_dim(np.broadcast_to(Y.mean(axis=0), Y.shape).copy(), Y, n_frames)
    assert np.all(fitted >= zeroed)


def test_correlation_pooled_and_holdout_modes(tiny_correlation_corpus):
    ds, acoustics = tiny_correlation_corpus
    per_utt = run_correlation(ds, acoustics, nfft=256, seed=6)
    # Pooled r also spans between-word level differences the acoustic latent
    # does not carry, so it sits below the per-utterance default.
    pooled = run_correlation(ds, acoustics, nfft=256, seed=6, r_mode="pooled")
    assert pooled.r_mode == "pooled"
    assert 0.0 < pooled.fraction_ge_threshold <= per_utt.fraction_ge_threshold
    # The constructed linear relation generalizes to held-out utterances.
    held = run_correlation(ds, acoustics, nfft=256, seed=6, holdout_frac=0.25)
    assert held.fraction_ge_threshold >= 0.8
    with pytest.raises(ExperimentError):
        run_correlation(ds, acoustics, nfft=256, seed=6, r_mode="median")


def test_correlation_requires_pairing(tiny_correlation_corpus):
    from emgdeck.acoustic import AcousticFeatureSet
    from emgdeck.errors import PairingError

    ds, acoustics = tiny_correlation_corpus
    broken = dict(acoustics.tracks)
    del broken[ds.utterances[0].id]
    with pytest.raises(PairingError):
        run_correlation(ds, AcousticFeatureSet(tracks=broken, source="synthetic"), seed=1)


def test_reports_are_pure_functions_of_inputs(small_corpus):
    ds, acoustics = small_corpus
    a = run_one_shot_confusion(ds, "neck10", FAST, seed=2)
    b = run_one_shot_confusion(ds, "neck10", FAST, seed=2)
    assert np.array_equal(a.matrix.counts, b.matrix.counts)
    ra = run_correlation(ds, acoustics, nfft=256, seed=2)
    rb = run_correlation(ds, acoustics, nfft=256, seed=2)
    assert ra == rb
