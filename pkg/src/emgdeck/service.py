"""Local operator service: JSON control frames + binary DevicePacket frames.

One WebSocket endpoint serves both views of the experiment GUI. Text frames
carry JSON control messages:

    client -> service: {"type": "start_session", "script": {...}, "speaker": n}
                       {"type": "stop"}
                       {"type": "pace", "wait_before_s": x, "word_s": y, "wait_after_s": z}
    service -> client: {"type": "prompt", "text", "word", "phase", "remaining_ms", ...}
                       {"type": "state", "phase": "idle|armed|prompting|done"}
                       {"type": "stats", "packets_received", "packets_lost", "crc_failures"}
                       {"type": "error", "code": "bad_message" | "busy", "detail": ...}

Binary frames are raw DevicePacket bytes (device -> UI live plot). One session
runs at a time; a start while prompting is rejected with a "busy" error. The
engine owns session state; every control message is serialized onto it by the
single service loop.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import websockets

from .dataset import Dataset, save_dataset
from .errors import EmgDeckError
from .protocol import DevicePacket, StreamStats, encode_packet, simulate_device
from .session import SessionEngine, SessionScript
from .synth import SynthConfig, SynthModel
from .words import WORDS, word_by_text
from .forest import derive_seed

logger = logging.getLogger(__name__)

PROMPT_INTERVAL_S = 0.25  # >= 4 Hz prompt updates in simulated time
STATS_INTERVAL_S = 1.0


class SimPromptDevice:
    """Streams synthetic EMG blocks shaped by the prompted word."""

    def __init__(self, config: SynthConfig):
        self.model = SynthModel(config)
        self.seed = config.seed

    def block(self, word, speaker: int, prompt_index: int, block_samples: int, word_center: int) -> np.ndarray:
        rng = np.random.default_rng(derive_seed(self.seed, 0xB10C + prompt_index))
        return self.model.prompt_block(
            word, speaker, rng, block_samples=block_samples, word_center=word_center
        )


class FilePromptDevice:
    """Replays utterances from a saved corpus, embedded in quiet blocks."""

    def __init__(self, ds: Dataset, noise_floor: float = 12.0, seed: int = 0):
        self.ds = ds
        self.noise_floor = noise_floor
        self.seed = seed
        self._by_key: dict[tuple[str, int], list] = {}
        for u in ds.utterances:
            self._by_key.setdefault((u.word.text, u.speaker), []).append(u)

    def block(self, word, speaker: int, prompt_index: int, block_samples: int, word_center: int) -> np.ndarray:
        rng = np.random.default_rng(derive_seed(self.seed, 0xF17E + prompt_index))
        cc = self.ds.channel_count
        block = np.rint(rng.normal(0.0, self.noise_floor, size=(cc, block_samples)))
        members = self._by_key.get((word.text, speaker))
        if members:
            u = members[prompt_index % len(members)]
            start = max(0, word_center - u.duration_samples // 2)
            stop = min(block_samples, start + u.duration_samples)
            block[:, start:stop] = u.samples[:, :stop - start]
        return np.clip(block, -16384, 16383).astype(np.int16)


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8787
    device: str = "sim"  # sim | file
    data_dir: Path | None = None     # where recorded sessions are persisted
    replay_dir: Path | None = None   # corpus for the file device
    seed: int = 2024
    time_scale: float = 1.0          # >1 runs sessions faster than real time
    loss_rate: float = 0.0
    samples_per_channel: int = 20
    sample_rate_hz: int = 1000


class SessionService:
    """Owns the engine, the device loop, and the client broadcast set."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.clients: set = set()
        self.engine: SessionEngine | None = None
        self._task: asyncio.Task | None = None
        self._session_counter = 0
        self._stats = StreamStats()
        self._server = None
        if config.device == "sim":
            self.device = SimPromptDevice(SynthConfig(seed=config.seed))
        elif config.device == "file":
            if config.replay_dir is None:
                raise ValueError("file device needs replay_dir")
            from .dataset import load_dataset
            self.device = FilePromptDevice(load_dataset(config.replay_dir), seed=config.seed)
        else:
            raise ValueError(f"unknown device {config.device!r}")

    # -- lifecycle ---------------------------------------------------------

    async def start(self):
        self._server = await websockets.serve(self._handler, self.config.host, self.config.port)
        return self

    async def close(self):
        await self._cancel_session(persist=False)
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def run_forever(self):
        await self.start()
        logger.info("session service on ws://%s:%d", self.config.host, self.config.port)
        await asyncio.Future()

    @property
    def phase(self) -> str:
        return self.engine.state.phase if self.engine is not None else "idle"

    # -- client handling -----------------------------------------------------

    async def _handler(self, ws):
        self.clients.add(ws)
        try:
            await self._send(ws, {"type": "state", "phase": self.phase})
            async for message in ws:
                if isinstance(message, bytes):
                    await self._send(ws, {"type": "error", "code": "bad_message",
                                          "detail": "binary frames flow service->client only"})
                    continue
                await self._on_control(ws, message)
        finally:
            self.clients.discard(ws)

    async def _on_control(self, ws, message: str):
        try:
            msg = json.loads(message)
            if not isinstance(msg, dict) or "type" not in msg:
                raise ValueError("control frame must be an object with a 'type'")
        except (json.JSONDecodeError, ValueError) as e:
            await self._send(ws, {"type": "error", "code": "bad_message", "detail": str(e)})
            return
        kind = msg["type"]
        if kind == "start_session":
            await self._on_start(ws, msg)
        elif kind == "stop":
            await self._cancel_session(persist=True)
            await self._broadcast({"type": "state", "phase": "idle"})
        elif kind == "pace":
            if self.engine is None:
                await self._send(ws, {"type": "error", "code": "bad_message",
                                      "detail": "no active session to pace"})
            else:
                try:
                    self.engine.set_pace(
                        wait_before_s=msg.get("wait_before_s"),
                        word_s=msg.get("word_s"),
                        wait_after_s=msg.get("wait_after_s"),
                    )
                except (ValueError, EmgDeckError) as e:
                    await self._send(ws, {"type": "error", "code": "bad_message", "detail": str(e)})
        else:
            await self._send(ws, {"type": "error", "code": "bad_message",
                                  "detail": f"unknown control type {kind!r}"})

    async def _on_start(self, ws, msg: dict):
        if self._task is not None and not self._task.done():
            await self._send(ws, {"type": "error", "code": "busy",
                                  "detail": "a session is already running"})
            return
        try:
            script = _script_from_json(msg.get("script") or {})
            speaker = int(msg.get("speaker", 1))
            engine = SessionEngine(script, speaker, sample_rate_hz=self.config.sample_rate_hz,
                                   anchor=str(msg.get("anchor", "center")))
        except (KeyError, ValueError, TypeError, EmgDeckError) as e:
            await self._send(ws, {"type": "error", "code": "bad_message", "detail": str(e)})
            return
        self.engine = engine
        self._stats = StreamStats()
        self._task = asyncio.create_task(self._run_session())

    # -- the device loop -------------------------------------------------------

    async def _run_session(self):
        engine = self.engine
        cfg = self.config
        engine.arm()
        await self._broadcast({"type": "state", "phase": engine.state.phase})
        packet_period = cfg.samples_per_channel / cfg.sample_rate_hz
        prompt_every = max(1, round(PROMPT_INTERVAL_S / packet_period))
        stats_every = max(1, round(STATS_INTERVAL_S / packet_period))
        sleep_for = packet_period / cfg.time_scale
        sequence = 0
        n_packets = 0
        expected_seq = 0
        try:
            prompt_index = 0
            while engine.state.phase in ("armed", "prompting"):
                script = engine.script
                word = script.sequence()[prompt_index][1]
                block_samples = script.block_samples(cfg.sample_rate_hz)
                word_start, word_end = script.word_span(cfg.sample_rate_hz)
                block = self.device.block(
                    word, engine.speaker, prompt_index, block_samples, (word_start + word_end) // 2
                )
                triggers = list(script.phase_offsets(cfg.sample_rate_hz))
                for pkt in simulate_device(
                    block,
                    triggers=triggers,
                    loss_rate=cfg.loss_rate,
                    seed=derive_seed(cfg.seed, 0x707 + prompt_index),
                    samples_per_channel=cfg.samples_per_channel,
                    sample_rate_hz=cfg.sample_rate_hz,
                    start_sequence=sequence,
                ):
                    gap = (pkt.sequence - expected_seq) % (1 << 32)
                    if gap:
                        # Keep the engine sample-aligned across lost packets.
                        self._stats.packets_lost += gap
                        zeros = np.zeros_like(pkt.samples)
                        for g in range(gap):
                            engine.feed(DevicePacket(
                                samples=zeros.copy(), sequence=(expected_seq + g) % (1 << 32),
                                timestamp_us=pkt.timestamp_us,
                            ))
                    expected_seq = (pkt.sequence + 1) % (1 << 32)
                    raw = encode_packet(pkt)
                    await self._broadcast_binary(raw)
                    for event in engine.feed(pkt):
                        await self._broadcast(event)
                    self._stats.packets_received += 1
                    n_packets += 1
                    if n_packets % prompt_every == 0 and engine.state.phase == "prompting":
                        word_now = engine.current_word()
                        if word_now is not None:
                            sub = engine.state.sub_phase
                            await self._broadcast({
                                "type": "prompt",
                                "text": word_now.text if sub == "word" else "wait",
                                "word": word_now.text,
                                "phase": sub,
                                "prompt_index": engine.state.prompt_index,
                                "remaining_ms": engine.remaining_in_sub_phase_ms(),
                            })
                    if n_packets % stats_every == 0:
                        await self._broadcast({"type": "stats", **self._stats.to_dict()})
                    if sleep_for > 0:
                        await asyncio.sleep(sleep_for)
                sequence += block_samples // cfg.samples_per_channel
                prompt_index += 1
            self._persist()
            await self._broadcast({"type": "state", "phase": "done"})
            self.engine = None
            await self._broadcast({"type": "state", "phase": "idle"})
        except asyncio.CancelledError:
            raise
        except Exception as e:  # surface failures to clients before dying
            logger.exception("session loop failed")
            await self._broadcast({"type": "error", "code": "session_failed", "detail": str(e)})
            self.engine = None
            await self._broadcast({"type": "state", "phase": "idle"})

    async def _cancel_session(self, persist: bool):
        if self._task is not None and not self._task.done():
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass
        self._task = None
        if persist and self.engine is not None:
            self._persist()
        self.engine = None

    def _persist(self):
        if self.config.data_dir is None or self.engine is None:
            return
        self._session_counter += 1
        out = Path(self.config.data_dir) / f"session-{self._session_counter:03d}"
        save_dataset(self.engine.dataset(), out)
        logger.info("persisted %d utterances to %s", len(self.engine.dataset().utterances), out)

    # -- broadcasting ------------------------------------------------------------

    async def _send(self, ws, obj: dict):
        try:
            await ws.send(json.dumps(obj, sort_keys=True))
        except websockets.ConnectionClosed:
            pass

    async def _broadcast(self, obj: dict):
        text = json.dumps(obj, sort_keys=True)
        for ws in list(self.clients):
            try:
                await ws.send(text)
            except websockets.ConnectionClosed:
                self.clients.discard(ws)

    async def _broadcast_binary(self, data: bytes):
        for ws in list(self.clients):
            try:
                await ws.send(data)
            except websockets.ConnectionClosed:
                self.clients.discard(ws)


def _script_from_json(obj: dict) -> SessionScript:
    prompts = obj.get("prompts")
    if prompts is None:
        words = WORDS
    else:
        words = tuple(word_by_text(t) for t in prompts)
    return SessionScript(
        prompts=words,
        wait_before_s=float(obj.get("wait_before_s", 3.0)),
        word_s=float(obj.get("word_s", 3.0)),
        wait_after_s=float(obj.get("wait_after_s", 3.0)),
        repetitions=int(obj.get("repetitions", 10)),
    )


def serve_session(port: int, **kwargs) -> SessionService:
    """Construct a service bound to the port; call `await service.start()` to run."""
    return SessionService(ServiceConfig(port=port, **kwargs))
