"""Acceptance criteria, one test per criterion, each printing PASS/FAIL lines.

Run with `pytest tests/test_acceptance.py -v -s`. Tolerances are pinned here;
the criteria are property-based on seeded synthetic corpora plus exact
protocol arithmetic (published accuracy figures from human recordings are
explicitly not reproduction targets).
"""

import time

import numpy as np
import pytest

from emgdeck import dsp
from emgdeck.cli import main as cli_main
from emgdeck.dataset import select_channels
from emgdeck.errors import PacketCrcError, PacketMagicError
from emgdeck.experiments import (
    run_ablation,
    run_classification,
    run_correlation,
    run_one_shot_confusion,
)
from emgdeck.forest import ForestConfig, fit_forest, forest_to_json, predict_forest
from emgdeck.learn import fit_ols, make_splits
from emgdeck.protocol import decode_packet, encode_packet, reassemble, simulate_device
from emgdeck.session import SessionScript, run_session
from emgdeck.words import WORDS

SEED = 2024


def check(name: str, ok: bool, detail: str = ""):
    print(f"{'PASS' if ok else 'FAIL'} {name}" + (f"  [{detail}]" if detail else ""))
    assert ok, f"{name}: {detail}"


def nearest_centroid_accuracy(X, y_idx, splits_rows):
    """Brute-force oracle: standardized nearest-centroid over the same splits."""
    accs = []
    for train, test in splits_rows:
        mu = X[train].mean(axis=0)
        sd = X[train].std(axis=0)
        sd[sd == 0] = 1.0
        Z = (X - mu) / sd
        centroids = np.vstack([
            Z[train][y_idx[train] == k].mean(axis=0) for k in range(len(WORDS))
        ])
        d = ((Z[test][:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        accs.append(float(np.mean(d.argmin(axis=1) == y_idx[test])))
    return float(np.mean(accs))


def test_accuracy_floor(default_dataset, default_stats):
    t0 = time.perf_counter()
    # Generator separability oracle first: stratified nearest-centroid.
    y_idx = np.array([u.word.id for u in default_dataset.utterances])
    splits = make_splits(default_dataset, 10, 0.8, SEED)
    index = {u.id: i for i, u in enumerate(default_dataset.utterances)}
    rows = [
        (np.array([index[i] for i in tr]), np.array([index[i] for i in te]))
        for tr, te in splits
    ]
    oracle = nearest_centroid_accuracy(default_stats, y_idx, rows)
    check("accuracy-floor/centroid-oracle >= 0.85", oracle >= 0.85, f"{oracle:.3f}")

    full = run_classification(default_dataset, "full13", n_splits=10, seed=SEED,
                              _stats=default_stats)
    check("accuracy-floor/full13 >= 0.90", full.mean >= 0.90, f"mean={full.mean:.4f}")
    neck = run_classification(default_dataset, "neck10", n_splits=10, seed=SEED,
                              _stats=default_stats)
    check("accuracy-floor/neck10 >= 0.85", neck.mean >= 0.85, f"mean={neck.mean:.4f}")
    permuted = run_classification(default_dataset, "full13", n_splits=10, seed=SEED,
                                  permute_labels=True, _stats=default_stats)
    check("accuracy-floor/permuted-control in 0.09±0.04",
          0.05 <= permuted.mean <= 0.13, f"mean={permuted.mean:.4f}")
    elapsed = time.perf_counter() - t0
    check("accuracy-floor/runtime < 120 s", elapsed < 120.0, f"{elapsed:.1f}s")


def test_ablation_shape(default_dataset):
    report = run_ablation(default_dataset, "center_out", n_splits=10, seed=SEED)
    k2 = report.per_k[2].mean
    k10 = report.per_k[10].mean
    check("ablation/k10 - k2 >= 0.05", k10 - k2 >= 0.05,
          f"k10={k10:.4f} k2={k2:.4f} gap={k10 - k2:.4f}")
    neck = run_classification(default_dataset, "neck10", n_splits=10, seed=SEED)
    bitwise = report.per_k[10].per_split_accuracy == neck.per_split_accuracy
    check("ablation/k10 bitwise == neck10", bitwise)


def test_one_shot_protocol_arithmetic(default_dataset):
    report = run_one_shot_confusion(default_dataset, "neck10", seed=SEED)
    for d, direction in enumerate(report.per_direction):
        check(f"one-shot/direction-{d} totals", direction.total == 99,
              f"train=121 test={direction.total}")
    m = report.matrix
    check("one-shot/summed total == 198", m.total == 198, f"total={m.total}")
    row_sums = m.counts.sum(axis=1)
    check("one-shot/row sums == 18", bool(np.all(row_sums == 18)),
          f"rows={row_sums.tolist()}")


def test_correlation_oracle(quiet_corpus):
    t0 = time.perf_counter()
    ds, acoustics = quiet_corpus
    report = run_correlation(ds, acoustics, nfft=256, seed=SEED, include_control=True)
    check("correlation/1290 dims", report.n_dims == 1290, f"dims={report.n_dims}")
    check("correlation/fraction >= 0.9 at r >= 0.5",
          report.fraction_ge_threshold >= 0.9,
          f"fraction={report.fraction_ge_threshold:.4f}")
    check("correlation/uniform control <= 0.02",
          report.control_fraction <= 0.02,
          f"control={report.control_fraction:.4f}")
    elapsed = time.perf_counter() - t0
    check("correlation/runtime < 300 s", elapsed < 300.0, f"{elapsed:.1f}s")


def test_dsp_oracles():
    from conftest import make_utterance

    # Constant channel.
    vec = dsp.extract_stats(make_utterance([[5] * 100]))
    s = dict(zip(dsp.STAT_NAMES, vec.values))
    ok = (s["max"] == s["min"] == 5.0 and s["range"] == 0.0 and s["std"] == 0.0
          and s["var"] == 0.0 and s["kurtosis"] == 0.0 and s["skewness"] == 0.0
          and s["n_peaks"] == 0 and s["zcr"] == 0.0 and s["rise_time"] == 0.0
          and s["fall_time"] == 0.0)
    check("dsp/constant-channel stats", ok)

    # Ramp.
    vec = dsp.extract_stats(make_utterance([list(range(1000))]))
    s = dict(zip(dsp.STAT_NAMES, vec.values))
    ok = (s["mean_abs_slope"] == 1.0 and s["rise_time"] == 1.0
          and s["fall_time"] == 0.0 and s["max_position"] == 1.0
          and s["min_position"] == 0.0)
    check("dsp/ramp stats", ok)

    # 10 Hz unit sine, 1 s at 1000 Hz (generic phase).
    t = np.arange(1000) / 1000.0
    codes = np.rint(10000 * np.sin(2 * np.pi * 10 * t + 0.3)).astype(np.int16)
    vec = dsp.extract_stats(make_utterance([codes], volts_per_lsb=1e-4))
    s = dict(zip(dsp.STAT_NAMES, vec.values))
    ok = (s["zcr"] == 20.0 and s["mcr"] == 20.0
          and abs(s["quad_mean"] - np.sqrt(0.5)) < 1e-3)
    check("dsp/sine zcr=20 mcr=20 rms~0.7071", ok,
          f"zcr={s['zcr']} mcr={s['mcr']} rms={s['quad_mean']:.5f}")

    # 1500-sample spectrogram frame count.
    u = make_utterance(np.zeros((1, 1500), dtype=np.int16))
    spec = dsp.spectrogram(u, dsp.SpectrogramConfig(nperseg=100, noverlap=50, nfft=128))
    check("dsp/29 frames from 1500 samples", spec.n_frames == 29,
          f"frames={spec.n_frames}")

    # 125 Hz sine peaks at bin 32 in every frame at nfft=256.
    codes = np.rint(8000 * np.sin(2 * np.pi * 125 * np.arange(1500) / 1000)).astype(np.int16)
    spec = dsp.spectrogram(make_utterance([codes]), dsp.SpectrogramConfig(nfft=256))
    peaks = np.argmax(spec.power[0], axis=0)
    check("dsp/125 Hz peaks at bin 32 every frame", bool(np.all(peaks == 32)),
          f"bins={sorted(set(peaks.tolist()))}")


def test_codec_conformance():
    # 1e5 randomized round trips.
    rng = np.random.default_rng(SEED)
    n = 100_000
    bad = 0
    for _ in range(n):
        cc = int(rng.integers(1, 15))
        spc = int(rng.integers(1, 25))
        from emgdeck.protocol import DevicePacket
        p = DevicePacket(
            samples=rng.integers(-16384, 16384, size=(cc, spc)).astype(np.int16),
            sequence=int(rng.integers(0, 1 << 32)),
            timestamp_us=int(rng.integers(0, 1 << 48)),
            trigger=bool(rng.integers(0, 2)),
        )
        if decode_packet(encode_packet(p)) != p:
            bad += 1
    check("codec/1e5 round trips", bad == 0, f"failures={bad}")

    # Exhaustive single-bit-flip detection on a 21-byte packet.
    from emgdeck.protocol import DevicePacket
    p = DevicePacket(samples=np.zeros((1, 1), dtype=np.int16), sequence=0,
                     timestamp_us=0, trigger=True)
    frame = encode_packet(p)
    assert len(frame) == 21
    caught = 0
    for bit in range(len(frame) * 8):
        corrupted = bytearray(frame)
        corrupted[bit // 8] ^= 1 << (bit % 8)
        try:
            decode_packet(bytes(corrupted))
        except (PacketMagicError, PacketCrcError):
            caught += 1
    check("codec/single-bit flips all caught", caught == len(frame) * 8,
          f"{caught}/{len(frame) * 8}")

    # Lossless simulate -> reassemble identity over a full 9 s session block.
    rng = np.random.default_rng(SEED + 1)
    samples = rng.integers(-16384, 16384, size=(13, 9000)).astype(np.int16)
    triggers = [0, 3000, 6000]
    out, events, stats = reassemble(simulate_device(samples, triggers=triggers))
    ok = (np.array_equal(out, samples)
          and [e.sample_index for e in events] == triggers
          and stats.packets_lost == 0 and stats.packets_received == 450)
    check("codec/lossless 9 s session identity", ok)


def test_learning_oracles():
    # OLS vs brute-force normal equations on random full-rank systems.
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(10, 201))
        d = int(rng.integers(1, min(n - 2, 50) + 1))
        X = rng.normal(size=(n, d))
        y = rng.normal(size=n)
        m = fit_ols(X, y, ridge=0.0)
        Xa = np.column_stack([X, np.ones(n)])
        theta = np.linalg.solve(Xa.T @ Xa, Xa.T @ y)
        rel = float(np.linalg.norm(np.append(m.weights, m.intercept) - theta)
                    / max(1.0, np.linalg.norm(theta)))
        worst = max(worst, rel)
    check("learn/OLS matches normal equations < 1e-6", worst < 1e-6, f"worst={worst:.2e}")

    # Forest determinism.
    X = rng.normal(size=(80, 10))
    y = rng.integers(0, 4, size=80).tolist()
    cfg = ForestConfig(n_trees=20, seed=SEED)
    same = forest_to_json(fit_forest(X, y, cfg)) == forest_to_json(fit_forest(X, y, cfg))
    check("learn/forest seed-deterministic", same)

    # XOR fits exactly under the stated config.
    Xx = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    yx = [0, 1, 1, 0]
    forest = fit_forest(Xx, yx, ForestConfig(n_trees=9, max_depth=2, mtry=2,
                                             bootstrap=False, seed=1))
    pred, _ = predict_forest(forest, Xx)
    check("learn/XOR exact", pred == yx, f"pred={pred}")


def test_cli_determinism(tmp_path):
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert cli_main(["--seed", str(SEED), "synth", "-o", str(d / "corpus")]) == 0
        assert cli_main(["--seed", str(SEED), "classify", "-d", str(d / "corpus"),
                         "-o", str(d / "cls.json")]) == 0
        assert cli_main(["--seed", str(SEED), "correlate", "-d", str(d / "corpus"),
                         "-o", str(d / "corr.json")]) == 0
        outs.append(d)
    a, b = outs
    cls_same = (a / "cls.json").read_bytes() == (b / "cls.json").read_bytes()
    corr_same = (a / "corr.json").read_bytes() == (b / "corr.json").read_bytes()
    check("determinism/classify reports byte-identical", cls_same)
    check("determinism/correlate reports byte-identical", corr_same)
    manifest_same = ((a / "corpus" / "manifest.jsonl").read_bytes()
                     == (b / "corpus" / "manifest.jsonl").read_bytes())
    emg_same = all(
        (a / "corpus" / f.name).read_bytes() == f.read_bytes()
        for f in sorted((b / "corpus").glob("*.emg"))[:5]
    )
    check("determinism/synth corpus byte-identical", manifest_same and emg_same)


def test_full_session_protocol(default_dataset):
    # 11 words x 10 repetitions through the packetized device: 110 utterances
    # per speaker; together with the second speaker that is the 220-utterance,
    # 5 min 30 s corpus.
    from emgdeck.forest import derive_seed
    from emgdeck.synth import SynthConfig, SynthModel

    model = SynthModel(SynthConfig(seed=SEED))
    script = SessionScript()

    def packets():
        spc = 20
        for i, (rep, word) in enumerate(script.sequence()):
            rng = np.random.default_rng(derive_seed(SEED, 0xB10C + i))
            block = model.prompt_block(word, 1, rng)
            yield from simulate_device(
                block, triggers=[0, 3000, 6000], samples_per_channel=spc,
                start_sequence=i * (9000 // spc),
                start_timestamp_us=i * 9_000_000,
            )

    ds = run_session(script, packets(), speaker=1)
    kept_s = sum(u.duration_samples for u in ds.utterances) / 1000.0
    check("session/110 utterances per speaker", len(ds) == 110, f"n={len(ds)}")
    check("session/5min30s kept across two speakers", 2 * kept_s == 330.0,
          f"{2 * kept_s:.0f}s")
