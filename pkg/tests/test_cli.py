import json

import pytest

from emgdeck.cli import main
from emgdeck.dataset import load_dataset


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    code = main(["--seed", "7", "synth", "-o", str(out), "--utterances-per-cell", "3"])
    assert code == 0
    return out


def test_synth_writes_corpus_and_features(corpus_dir):
    ds = load_dataset(corpus_dir)
    assert len(ds) == 66
    assert (corpus_dir / "acoustic" / "features.jsonl").is_file()
    assert (corpus_dir / "dataset.json").is_file()


def test_synth_then_classify_smoke(corpus_dir, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main([
        "--seed", "7", "classify", "-d", str(corpus_dir), "--channels", "neck10",
        "--n-splits", "2", "--trees", "15", "-o", str(out),
    ])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "classification"
    assert doc["channel_set"] == "neck10"
    assert len(doc["per_split_accuracy"]) == 2


def test_unknown_subcommand_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "Usage" in capsys.readouterr().err


def test_bogus_channels_exit_1(corpus_dir, capsys):
    code = main(["classify", "-d", str(corpus_dir), "--channels", "bogus"])
    assert code == 1
    err = capsys.readouterr().err
    assert "channel set" in err


def test_missing_corpus_exit_2(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main(["classify", "-d", str(empty), "--channels", "neck10"])
    assert code == 2
    assert "manifest" in capsys.readouterr().err


def test_stratification_failure_exit_3(tmp_path, capsys):
    out = tmp_path / "one"
    assert main(["--seed", "3", "synth", "-o", str(out), "--utterances-per-cell", "1"]) == 0
    code = main(["classify", "-d", str(out), "--n-splits", "2"])
    assert code == 3


def test_correlate_control_flag(corpus_dir, tmp_path):
    out = tmp_path / "corr.json"
    code = main([
        "--seed", "7", "correlate", "-d", str(corpus_dir), "--control", "-o", str(out),
    ])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "correlation"
    assert doc["n_dims"] == 1290
    assert doc["control_fraction"] is not None


def test_determinism_byte_identical_reports(tmp_path):
    # synth + classify + correlate twice with identical flags: identical bytes.
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["--seed", "5", "synth", "-o", str(d / "corpus"),
                     "--utterances-per-cell", "3"]) == 0
        assert main(["--seed", "5", "classify", "-d", str(d / "corpus"),
                     "--n-splits", "2", "--trees", "10",
                     "-o", str(d / "cls.json")]) == 0
        assert main(["--seed", "5", "correlate", "-d", str(d / "corpus"),
                     "-o", str(d / "corr.json")]) == 0
        outs.append(d)
    a, b = outs
    assert (a / "cls.json").read_bytes() == (b / "cls.json").read_bytes()
    assert (a / "corr.json").read_bytes() == (b / "corr.json").read_bytes()
    assert (a / "corpus" / "manifest.jsonl").read_bytes() == (b / "corpus" / "manifest.jsonl").read_bytes()
    ids = [u.id for u in load_dataset(a / "corpus").utterances]
    for uid in ids[:3]:
        assert (a / "corpus" / f"{uid}.emg").read_bytes() == (b / "corpus" / f"{uid}.emg").read_bytes()


def test_packets_subcommands(tmp_path, capsys):
    assert main(["--seed", "2", "packets", "roundtrip", "--count", "50"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ok"] is True
    assert main(["--seed", "2", "packets", "fuzz", "--count", "50"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["count"] == 50 and "decoded" not in out["outcomes"]
    vec = tmp_path / "vectors.jsonl"
    assert main(["--seed", "2", "packets", "vectors", "--count", "5", "-o", str(vec)]) == 0
    lines = vec.read_text().splitlines()
    assert len(lines) == 5
    frame = json.loads(lines[0])
    assert main(["packets", "decode", frame["hex"]]) == 0
    decoded = json.loads(capsys.readouterr().out)
    assert decoded["sequence"] == frame["sequence"]
    assert decoded["samples"] == frame["samples"]


def test_features_and_spectrogram_export(corpus_dir, tmp_path, capsys):
    assert main(["--format", "csv", "features", "-d", str(corpus_dir),
                 "-o", str(tmp_path / "f.csv")]) == 0
    header = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert header.startswith("id,word,speaker,c0_max,c0_min")
    assert header.count(",") == 3 + 260 - 1
    ds = load_dataset(corpus_dir)
    uid = ds.utterances[0].id
    out = tmp_path / "spec.acf"
    assert main(["spectrogram", "-d", str(corpus_dir), "--id", uid, "--nfft", "256",
                 "--log", "-o", str(out)]) == 0
    from emgdeck.acoustic import decode_track
    track = decode_track(out.read_bytes(), uid, allow_nonstandard_dim=True)
    assert track.frames.shape == (29, 13 * 129)
    assert main(["spectrogram", "-d", str(corpus_dir), "--id", "nope", "-o",
                 str(tmp_path / "x.acf")]) == 2


def test_record_cli_roundtrip(tmp_path):
    out = tmp_path / "rec"
    code = main(["--seed", "3", "record", "-o", str(out), "--reps", "2",
                 "--words", "heed,doe", "--speaker", "2"])
    assert code == 0
    ds = load_dataset(out)
    assert len(ds) == 4
    assert ds.provenance == "recorded anchor=center"
    assert {u.word.text for u in ds.utterances} == {"heed", "doe"}


def test_env_seed_override(corpus_dir, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("EMGDECK_SEED", "99")
    assert main(["classify", "-d", str(corpus_dir), "--n-splits", "1",
                 "--trees", "5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["seed"] == 99
