"""Single entry point exposing every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 experiment assertion
failure. Reports are machine-readable JSON by default (`--format text|csv`
for humans and plotters); identical flags and inputs produce byte-identical
primary output files.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import dsp
from .acoustic import AcousticFeatureTrack, encode_track, load_features, save_features
from .dataset import load_dataset, save_dataset
from .errors import DataError, ExperimentError, PacketError
from .experiments import (
    run_ablation,
    run_classification,
    run_correlation,
    run_one_shot_confusion,
)
from .forest import ForestConfig, derive_seed
from .protocol import (
    DevicePacket,
    decode_packet,
    encode_packet,
    fill_gaps,
    simulate_device,
)
from .session import SessionScript, run_session
from .synth import SynthConfig, SynthModel, generate_synthetic
from .words import WORDS, word_by_text

DEFAULT_SEED = 2024


def _emit(text: str, output: str | None) -> None:
    if output and output != "-":
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _emit_report(doc: dict, output: str | None, fmt: str, as_text, as_csv) -> None:
    if fmt == "json":
        _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", output)
    elif fmt == "csv":
        _emit(as_csv(doc), output)
    else:
        _emit(as_text(doc), output)


@click.group()
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True,
              envvar="EMGDECK_SEED", help="Master seed; everything derives from it.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "text"]),
              default="json", show_default=True, help="Report output format.")
@click.pass_context
def cli(ctx, seed, fmt):
    """emgdeck: neck-EMG speech decoding pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["fmt"] = fmt


# -- corpus ---------------------------------------------------------------------

@cli.command()
@click.option("-o", "--out", required=True, type=click.Path(), help="Corpus directory to write.")
@click.option("--noise-std", type=float, default=40.0, show_default=True)
@click.option("--latent-dim", type=int, default=8, show_default=True)
@click.option("--utterances-per-cell", type=int, default=10, show_default=True)
@click.pass_context
def synth(ctx, out, noise_std, latent_dim, utterances_per_cell):
    """Generate the seeded synthetic corpus plus its acoustic feature tracks."""
    config = SynthConfig(
        seed=ctx.obj["seed"], noise_std=noise_std, latent_dim=latent_dim,
        utterances_per_cell=utterances_per_cell,
    )
    ds, features = generate_synthetic(config)
    out = Path(out)
    save_dataset(ds, out)
    save_features(features, out / "acoustic")
    click.echo(json.dumps({
        "schema_version": 1, "kind": "synth", "seed": config.seed,
        "utterances": len(ds), "channels": ds.channel_count,
        "acoustic_tracks": len(features), "out": str(out),
    }, sort_keys=True))


@cli.command()
@click.option("-o", "--out", required=True, type=click.Path())
@click.option("--speaker", type=click.IntRange(1, 2), default=1, show_default=True)
@click.option("--reps", type=int, default=10, show_default=True)
@click.option("--words", default="all", show_default=True,
              help="Comma-separated word list, or 'all'.")
@click.option("--loss-rate", type=float, default=0.0, show_default=True)
@click.option("--anchor", type=click.Choice(["center", "energy"]), default="center",
              show_default=True)
@click.pass_context
def record(ctx, out, speaker, reps, words, loss_rate, anchor):
    """Run a prompt session against the simulated device and save the corpus."""
    seed = ctx.obj["seed"]
    prompts = WORDS if words == "all" else tuple(word_by_text(w.strip()) for w in words.split(","))
    script = SessionScript(prompts=prompts, repetitions=reps)
    model = SynthModel(SynthConfig(seed=seed))

    def packets():
        fs = 1000
        block_samples = script.block_samples(fs)
        word_lo, word_hi = script.word_span(fs)
        offsets = script.phase_offsets(fs)
        spc = 20
        for i, (rep, word) in enumerate(script.sequence()):
            rng = np.random.default_rng(derive_seed(seed, 0xB10C + i))
            block = model.prompt_block(
                word, speaker, rng, block_samples=block_samples,
                word_center=(word_lo + word_hi) // 2,
            )
            yield from simulate_device(
                block, triggers=offsets, loss_rate=loss_rate,
                seed=derive_seed(seed, 0x707 + i), samples_per_channel=spc,
                start_sequence=i * (block_samples // spc),
                start_timestamp_us=i * block_samples * 1000,
            )

    ds = run_session(script, fill_gaps(packets()), speaker, anchor=anchor)
    save_dataset(ds, out)
    click.echo(json.dumps({
        "schema_version": 1, "kind": "record", "seed": seed, "speaker": speaker,
        "utterances": len(ds), "anchor": anchor, "out": str(out),
    }, sort_keys=True))


@cli.command()
@click.option("--port", type=int, default=8787, show_default=True)
@click.option("--device", type=click.Choice(["sim", "file"]), default="sim", show_default=True)
@click.option("--data", "data", type=click.Path(exists=True), default=None,
              help="Corpus directory for the file device.")
@click.option("--out", type=click.Path(), default=None, help="Directory for recorded sessions.")
@click.option("--time-scale", type=float, default=1.0, show_default=True,
              help=">1 runs sessions faster than real time.")
@click.option("--loss-rate", type=float, default=0.0, show_default=True)
@click.pass_context
def serve(ctx, port, device, data, out, time_scale, loss_rate):
    """Serve the operator UI endpoint (JSON control + binary packet frames)."""
    from .service import ServiceConfig, SessionService

    config = ServiceConfig(
        port=port, device=device,
        replay_dir=Path(data) if data else None,
        data_dir=Path(out) if out else None,
        seed=ctx.obj["seed"], time_scale=time_scale, loss_rate=loss_rate,
    )
    click.echo(f"serving on ws://{config.host}:{port} (device={device})", err=True)
    asyncio.run(SessionService(config).run_forever())


# -- featurization ----------------------------------------------------------------

@cli.command()
@click.option("-d", "--data", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None)
@click.pass_context
def features(ctx, data, output):
    """Extract the 20-statistic feature vectors for every utterance."""
    ds = load_dataset(data)
    X = dsp.stats_matrix(ds)
    fmt = ctx.obj["fmt"]
    header = [f"c{c}_{name}" for c in range(ds.channel_count) for name in dsp.STAT_NAMES]
    if fmt == "csv":
        lines = ["id,word,speaker," + ",".join(header)]
        for u, row in zip(ds.utterances, X):
            lines.append(f"{u.id},{u.word.text},{u.speaker}," + ",".join(repr(v) for v in row))
        _emit("\n".join(lines) + "\n", output)
    else:
        doc = {
            "schema_version": 1, "kind": "features", "columns": header,
            "rows": [
                {"id": u.id, "word": u.word.text, "speaker": u.speaker, "values": row.tolist()}
                for u, row in zip(ds.utterances, X)
            ],
        }
        _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", output)


@cli.command()
@click.option("-d", "--data", required=True, type=click.Path(exists=True))
@click.option("--id", "utterance_id", required=True, help="Utterance id to transform.")
@click.option("--nfft", type=int, default=128, show_default=True)
@click.option("--log", "log_power", is_flag=True, help="Export log10 power.")
@click.option("-o", "--output", type=click.Path(), default=None)
@click.pass_context
def spectrogram(ctx, data, utterance_id, nfft, log_power, output):
    """Export one utterance's spectrogram (flattened dims x frames)."""
    ds = load_dataset(data)
    matches = [u for u in ds.utterances if u.id == utterance_id]
    if not matches:
        raise DataError(f"no utterance with id {utterance_id!r} in {data}")
    u = matches[0]
    spec = dsp.spectrogram(u, dsp.SpectrogramConfig(nfft=nfft))
    flat = dsp.flatten_spectrogram(spec, log=log_power)
    if ctx.obj["fmt"] == "csv":
        lines = [",".join(repr(v) for v in row) for row in flat]
        _emit("\n".join(lines) + "\n", output)
    else:
        # ACF1-style binary matrix: frames x dims at the spectrogram frame rate.
        track = AcousticFeatureTrack(
            utterance_id=u.id, frames=flat.T.astype(np.float32),
            rate_hz=1.0 / spec.frame_hop_s,
        )
        if not output or output == "-":
            raise click.UsageError("binary spectrogram export needs -o FILE (or --format csv)")
        Path(output).write_bytes(encode_track(track))
        click.echo(json.dumps({
            "schema_version": 1, "kind": "spectrogram", "id": u.id,
            "dims": int(flat.shape[0]), "frames": int(flat.shape[1]),
            "bin_hz": spec.bin_hz, "out": output,
        }, sort_keys=True))


# -- experiments ------------------------------------------------------------------

def _parse_channels(value: str):
    if value in ("full13", "neck10", "face3"):
        return value
    try:
        return [int(v) for v in value.split(",")]
    except ValueError:
        raise click.BadParameter(
            f"{value!r} is not a channel set name (full13|neck10|face3) or index list"
        ) from None


def _forest_config(trees: int, depth: int) -> ForestConfig:
    return ForestConfig(n_trees=trees, max_depth=depth)


_report_text_keys = ("mean_accuracy", "ci95", "per_split_accuracy")


def _classification_text(doc: dict) -> str:
    lines = [f"channel set : {doc['channel_set']} {doc['channels']}"]
    lines.append(f"mean acc    : {doc['mean_accuracy']:.4f}")
    lines.append(f"95% CI      : [{doc['ci95'][0]:.4f}, {doc['ci95'][1]:.4f}]")
    lines.append("per split   : " + " ".join(f"{a:.3f}" for a in doc["per_split_accuracy"]))
    return "\n".join(lines) + "\n"


def _classification_csv(doc: dict) -> str:
    lines = ["split,accuracy"]
    lines += [f"{i},{a!r}" for i, a in enumerate(doc["per_split_accuracy"])]
    return "\n".join(lines) + "\n"


@cli.command()
@click.option("-d", "--data", required=True, type=click.Path(exists=True))
@click.option("--channels", default="full13", show_default=True, callback=lambda c, p, v: _parse_channels(v))
@click.option("--n-splits", type=int, default=10, show_default=True)
@click.option("--train-frac", type=float, default=0.8, show_default=True)
@click.option("--trees", type=int, default=100, show_default=True)
@click.option("--depth", type=int, default=32, show_default=True)
@click.option("--permuted", is_flag=True, help="Chance-level control: permute labels.")
@click.option("-o", "--output", type=click.Path(), default=None)
@click.pass_context
def classify(ctx, data, channels, n_splits, train_frac, trees, depth, permuted, output):
    """Word classification accuracy over stratified train/test splits."""
    ds = load_dataset(data)
    report = run_classification(
        ds, channels, _forest_config(trees, depth), n_splits, train_frac,
        seed=ctx.obj["seed"], permute_labels=permuted,
    )
    _emit_report(report.to_dict(), output, ctx.obj["fmt"], _classification_text, _classification_csv)


def _ablation_text(doc: dict) -> str:
    lines = [f"policy: {doc['ordering_policy']}", "k  mean    ci95"]
    for k, rep in sorted(doc["per_k"].items(), key=lambda kv: int(kv[0])):
        lines.append(f"{int(k):>2} {rep['mean_accuracy']:.4f}  [{rep['ci95'][0]:.4f}, {rep['ci95'][1]:.4f}]")
    return "\n".join(lines) + "\n"


def _ablation_csv(doc: dict) -> str:
    lines = ["k,mean_accuracy,ci_lo,ci_hi"]
    for k, rep in sorted(doc["per_k"].items(), key=lambda kv: int(kv[0])):
        lines.append(f"{int(k)},{rep['mean_accuracy']!r},{rep['ci95'][0]!r},{rep['ci95'][1]!r}")
    return "\n".join(lines) + "\n"


@cli.command()
@click.option("-d", "--data", required=True, type=click.Path(exists=True))
@click.option("--policy", type=click.Choice(["center_out", "random_subsets"]),
              default="center_out", show_default=True)
@click.option("--n-splits", type=int, default=10, show_default=True)
@click.option("--trees", type=int, default=100, show_default=True)
@click.option("--depth", type=int, default=32, show_default=True)
@click.option("--subsets", type=int, default=5, show_default=True,
              help="Subsets per k for the random_subsets policy.")
@click.option("-o", "--output", type=click.Path(), default=None)
@click.pass_context
def ablate(ctx, data, policy, n_splits, trees, depth, subsets, output):
    """Classification accuracy for 1..10 neck electrodes."""
    ds = load_dataset(data)
    report = run_ablation(
        ds, policy, _forest_config(trees, depth), n_splits,
        seed=ctx.obj["seed"], n_subsets=subsets,
    )
    _emit_report(report.to_dict(), output, ctx.obj["fmt"], _ablation_text, _ablation_csv)


def _confusion_text(doc: dict) -> str:
    m = doc["matrix"]
    names = m["classes"]
    width = max(len(n) for n in names) + 1
    lines = [" " * width + " ".join(f"{n:>5}" for n in names)]
    for name, row in zip(names, m["counts"]):
        lines.append(f"{name:<{width}}" + " ".join(f"{v:>5}" for v in row))
    lines.append(f"total={m['total']} accuracy={m['accuracy']:.4f}")
    return "\n".join(lines) + "\n"


def _confusion_csv(doc: dict) -> str:
    m = doc["matrix"]
    names = m["classes"]
    lines = ["truth\\pred," + ",".join(names)]
    for name, row in zip(names, m["counts"]):
        lines.append(name + "," + ",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


@cli.command()
@click.option("-d", "--data", required=True, type=click.Path(exists=True))
@click.option("--channels", default="neck10", show_default=True, callback=lambda c, p, v: _parse_channels(v))
@click.option("--trees", type=int, default=100, show_default=True)
@click.option("--depth", type=int, default=32, show_default=True)
@click.option("-o", "--output", type=click.Path(), default=None)
@click.pass_context
def confusion(ctx, data, channels, trees, depth, output):
    """One-shot cross-speaker confusion matrix (both directions summed)."""
    ds = load_dataset(data)
    report = run_one_shot_confusion(ds, channels, _forest_config(trees, depth), seed=ctx.obj["seed"])
    _emit_report(report.to_dict(), output, ctx.obj["fmt"], _confusion_text, _confusion_csv)


def _correlation_text(doc: dict) -> str:
    lines = [
        f"dims          : {doc['n_dims']} (nfft={doc['nfft']})",
        f"fraction >= {doc['threshold']}: {doc['fraction_ge_threshold']:.4f}",
    ]
    if doc["control_fraction"] is not None:
        lines.append(f"uniform control: {doc['control_fraction']:.4f}")
    lines.append(f"undefined dims : {doc['n_undefined_dims']}")
    return "\n".join(lines) + "\n"


def _correlation_csv(doc: dict) -> str:
    lines = ["dim,mean_r"]
    for i, r in enumerate(doc["per_dim_r"]):
        lines.append(f"{i},{'' if r is None else repr(r)}")
    return "\n".join(lines) + "\n"


@cli.command()
@click.option("-d", "--data", required=True, type=click.Path(exists=True))
@click.option("--acoustic", "acoustic_dir", type=click.Path(exists=True), default=None,
              help="Acoustic feature directory; defaults to DATA/acoustic.")
@click.option("--nfft", type=int, default=256, show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--ridge", type=float, default=None)
@click.option("--control", is_flag=True, help="Also score the uniform-[0,1] control features.")
@click.option("--r-mode", type=click.Choice(["per_utterance", "pooled"]),
              default="per_utterance", show_default=True)
@click.option("--holdout-frac", type=float, default=None,
              help="Fit on a subset of utterances and score the rest (off by default).")
@click.option("-o", "--output", type=click.Path(), default=None)
@click.pass_context
def correlate(ctx, data, acoustic_dir, nfft, threshold, ridge, control, r_mode, holdout_frac, output):
    """Speech-EMG correlation study over the flattened spectrogram dims."""
    ds = load_dataset(data)
    acoustic_dir = Path(acoustic_dir) if acoustic_dir else Path(data) / "acoustic"
    acoustics = load_features(acoustic_dir)
    report = run_correlation(
        ds, acoustics, nfft=nfft, ridge=ridge, threshold=threshold,
        seed=ctx.obj["seed"], include_control=control, r_mode=r_mode,
        holdout_frac=holdout_frac,
    )
    _emit_report(report.to_dict(), output, ctx.obj["fmt"], _correlation_text, _correlation_csv)


# -- packet codec debug --------------------------------------------------------------

@cli.group()
def packets():
    """Codec debugging: round trips, fuzzing, conformance vectors."""


def _random_packet(rng: np.random.Generator, channel_count=None, spc=None) -> DevicePacket:
    cc = int(channel_count or rng.integers(1, 17))
    n = int(spc or rng.integers(1, 33))
    return DevicePacket(
        samples=rng.integers(-16384, 16384, size=(cc, n)).astype(np.int16),
        sequence=int(rng.integers(0, 1 << 32)),
        timestamp_us=int(rng.integers(0, 1 << 48)),
        trigger=bool(rng.integers(0, 2)),
    )


@packets.command()
@click.option("--count", type=int, default=1000, show_default=True)
@click.pass_context
def roundtrip(ctx, count):
    """Encode/decode random packets and verify equality."""
    rng = np.random.default_rng(ctx.obj["seed"])
    for _ in range(count):
        p = _random_packet(rng)
        if decode_packet(encode_packet(p)) != p:
            raise DataError(f"round-trip mismatch at sequence {p.sequence}")
    click.echo(json.dumps({"schema_version": 1, "kind": "packets_roundtrip",
                           "count": count, "ok": True}, sort_keys=True))


@packets.command()
@click.option("--count", type=int, default=1000, show_default=True)
@click.pass_context
def fuzz(ctx, count):
    """Feed random buffers and bit-flipped frames; every one must fail cleanly."""
    rng = np.random.default_rng(ctx.obj["seed"])
    outcomes: dict[str, int] = {}
    for i in range(count):
        if i % 2 == 0:
            buf = rng.integers(0, 256, size=int(rng.integers(0, 64))).astype(np.uint8).tobytes()
        else:
            raw = bytearray(encode_packet(_random_packet(rng, channel_count=2, spc=3)))
            bit = int(rng.integers(0, len(raw) * 8))
            raw[bit // 8] ^= 1 << (bit % 8)
            buf = bytes(raw)
        try:
            decode_packet(buf)
            outcomes["decoded"] = outcomes.get("decoded", 0) + 1
        except PacketError as e:
            name = type(e).__name__
            outcomes[name] = outcomes.get(name, 0) + 1
    click.echo(json.dumps({"schema_version": 1, "kind": "packets_fuzz",
                           "count": count, "outcomes": outcomes}, sort_keys=True))


@packets.command()
@click.option("--count", type=int, default=100, show_default=True)
@click.option("--channels", type=int, default=13, show_default=True)
@click.option("--spc", type=int, default=20, show_default=True)
@click.option("-o", "--output", type=click.Path(), default=None)
@click.pass_context
def vectors(ctx, count, channels, spc, output):
    """Publish encode/decode conformance vectors (JSON lines with hex frames)."""
    rng = np.random.default_rng(ctx.obj["seed"])
    lines = []
    for i in range(count):
        p = _random_packet(rng, channel_count=channels, spc=spc)
        lines.append(json.dumps({
            "index": i,
            "hex": encode_packet(p).hex(),
            "sequence": p.sequence,
            "timestamp_us": p.timestamp_us,
            "trigger": p.trigger,
            "channel_count": p.channel_count,
            "samples_per_channel": p.samples_per_channel,
            "samples": p.samples.tolist(),
        }, sort_keys=True))
    _emit("\n".join(lines) + "\n", output)


@packets.command()
@click.argument("hex_frame")
def decode(hex_frame):
    """Decode one hex-encoded frame and print its fields."""
    p = decode_packet(bytes.fromhex(hex_frame))
    click.echo(json.dumps({
        "sequence": p.sequence, "timestamp_us": p.timestamp_us, "trigger": p.trigger,
        "channel_count": p.channel_count, "samples_per_channel": p.samples_per_channel,
        "samples": p.samples.tolist(),
    }, sort_keys=True))


def main(argv=None) -> int:
    """CLI entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as e:
        e.show()
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except DataError as e:
        click.echo(f"data error: {e}", err=True)
        return 2
    except ExperimentError as e:
        click.echo(f"experiment error: {e}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
