"""The prompting protocol: wait/word/wait blocks, trigger alignment, window slicing.

A session presents each scripted word for `repetitions` blocks of
wait (3 s) / word (3 s) / wait (3 s), records the full 9 s block, and keeps a
1.5 s utterance slice per block. The slice anchor is configurable: "center"
takes the midpoint of the word sub-phase (the paper never pins the anchor
down), "energy" centers on the peak of a 250 ms RMS envelope within the word
sub-phase. The anchor used is flagged in the dataset provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np

from .dataset import (
    VOLTS_PER_LSB_DEFAULT,
    Dataset,
    Utterance,
    default_channel_roles,
)
from .errors import (
    IllegalTransitionError,
    StreamEndedEarlyError,
    TriggerMismatchError,
)
from .protocol import DevicePacket, TriggerEvent
from .words import WORDS, WordLabel

WINDOW_SAMPLES = 1500
ENERGY_WINDOW_S = 0.25

ANCHOR_POLICIES = ("center", "energy")

SUB_PHASES = ("wait1", "word", "wait2")
_PHASE_TRIGGER_KIND = {"wait1": "prompt_wait", "word": "prompt_word", "wait2": "prompt_end"}


@dataclass(frozen=True)
class SessionScript:
    prompts: tuple[WordLabel, ...] = WORDS
    wait_before_s: float = 3.0
    word_s: float = 3.0
    wait_after_s: float = 3.0
    repetitions: int = 10

    def __post_init__(self):
        object.__setattr__(self, "prompts", tuple(self.prompts))
        if self.repetitions < 0:
            raise ValueError("repetitions must be >= 0")
        for name in ("wait_before_s", "word_s", "wait_after_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def block_s(self) -> float:
        return self.wait_before_s + self.word_s + self.wait_after_s

    def block_samples(self, fs: int) -> int:
        return round(self.block_s * fs)

    def phase_offsets(self, fs: int) -> tuple[int, int, int]:
        """Sample offsets of the wait1/word/wait2 sub-phase starts within a block."""
        return (0, round(self.wait_before_s * fs), round((self.wait_before_s + self.word_s) * fs))

    def word_span(self, fs: int) -> tuple[int, int]:
        return (round(self.wait_before_s * fs), round((self.wait_before_s + self.word_s) * fs))

    def sequence(self) -> list[tuple[int, WordLabel]]:
        """(repetition, word) pairs in presentation order: full list, repeated."""
        return [(rep, w) for rep in range(self.repetitions) for w in self.prompts]


def slice_window(
    block: np.ndarray,
    anchor: str = "center",
    *,
    word_span: tuple[int, int] | None = None,
    window: int = WINDOW_SAMPLES,
    sample_rate_hz: int = 1000,
) -> np.ndarray:
    """Cut the utterance window out of a recorded block (channels, samples).

    word_span defaults to the middle third of the block, which is the word
    sub-phase under the default 3/3/3 s pacing.
    """
    if block.ndim != 2:
        raise ValueError("block must be (channels, samples)")
    n = block.shape[1]
    if n < window:
        raise ValueError(f"block of {n} samples cannot hold a {window}-sample window")
    if anchor not in ANCHOR_POLICIES:
        raise ValueError(f"anchor must be one of {ANCHOR_POLICIES}")
    if word_span is None:
        word_span = (n // 3, 2 * n // 3)
    lo, hi = word_span
    if not 0 <= lo < hi <= n:
        raise ValueError(f"word_span {word_span} out of block bounds")
    if anchor == "center":
        center = (lo + hi) // 2
    else:
        half = round(ENERGY_WINDOW_S * sample_rate_hz) // 2
        weights = np.hanning(2 * half + 1)
        energy = np.mean(block.astype(np.float64) ** 2, axis=0)
        envelope = np.convolve(energy, weights / weights.sum(), mode="same")
        center = lo + int(np.argmax(envelope[lo:hi]))
    start = min(max(center - window // 2, 0), n - window)
    return block[:, start:start + window]


@dataclass(frozen=True)
class SessionState:
    phase: str  # idle | armed | prompting | done
    prompt_index: int = 0
    sub_phase: str = "wait1"
    current_sample: int = 0


class SessionEngine:
    """Sample-accurate session state machine fed by device packets.

    Legal phase transitions are idle -> armed -> prompting -> done only; the
    sub-phase cycles wait1 -> word -> wait2 exactly once per prompt block.
    """

    def __init__(
        self,
        script: SessionScript,
        speaker: int,
        *,
        sample_rate_hz: int = 1000,
        anchor: str = "center",
        volts_per_lsb: float = VOLTS_PER_LSB_DEFAULT,
        validate_triggers: bool = True,
    ):
        if anchor not in ANCHOR_POLICIES:
            raise ValueError(f"anchor must be one of {ANCHOR_POLICIES}")
        if speaker not in (1, 2):
            raise ValueError("speaker must be 1 or 2")
        if script.block_samples(sample_rate_hz) < WINDOW_SAMPLES:
            raise ValueError(
                f"script block of {script.block_samples(sample_rate_hz)} samples cannot "
                f"hold the {WINDOW_SAMPLES}-sample utterance window"
            )
        self.script = script
        self.speaker = speaker
        self.fs = sample_rate_hz
        self.anchor = anchor
        self.volts_per_lsb = volts_per_lsb
        self.validate_triggers = validate_triggers
        self._phase = "idle"
        self._sequence = script.sequence()
        self._prompt_index = 0
        self._current_sample = 0
        self._block: list[np.ndarray] = []
        self._block_samples = script.block_samples(sample_rate_hz)
        self._utterances: list[Utterance] = []
        self._channel_count: int | None = None
        self.trigger_log: list[TriggerEvent] = []
        self._pending_script: SessionScript | None = None

    # -- state ------------------------------------------------------------

    @property
    def state(self) -> SessionState:
        return SessionState(
            phase=self._phase,
            prompt_index=self._prompt_index,
            sub_phase=self._sub_phase_at(self._block_position()) if self._phase == "prompting" else "wait1",
            current_sample=self._current_sample,
        )

    def _block_position(self) -> int:
        return int(sum(c.shape[1] for c in self._block))

    def _sub_phase_at(self, offset: int) -> str:
        _, word_start, wait2_start = self.script.phase_offsets(self.fs)
        if offset < word_start:
            return "wait1"
        if offset < wait2_start:
            return "word"
        return "wait2"

    def current_word(self) -> WordLabel | None:
        if self._phase != "prompting" or self._prompt_index >= len(self._sequence):
            return None
        return self._sequence[self._prompt_index][1]

    def remaining_in_sub_phase_ms(self) -> int:
        if self._phase != "prompting":
            return 0
        offset = self._block_position()
        _, word_start, wait2_start = self.script.phase_offsets(self.fs)
        boundary = word_start if offset < word_start else (
            wait2_start if offset < wait2_start else self._block_samples
        )
        return round((boundary - offset) * 1000 / self.fs)

    # -- transitions --------------------------------------------------------

    def arm(self) -> None:
        if self._phase != "idle":
            raise IllegalTransitionError(f"cannot arm from {self._phase!r}")
        if not self._sequence:
            self._phase = "done"
            return
        self._phase = "armed"

    def set_pace(self, *, wait_before_s=None, word_s=None, wait_after_s=None) -> None:
        """Adjust pacing for prompt blocks that have not started yet."""
        new = replace(
            self.script,
            wait_before_s=wait_before_s or self.script.wait_before_s,
            word_s=word_s or self.script.word_s,
            wait_after_s=wait_after_s or self.script.wait_after_s,
        )
        if new.block_samples(self.fs) < WINDOW_SAMPLES:
            raise ValueError("pace would shrink blocks below the utterance window")
        self._pending_script = new

    def _maybe_apply_pace(self) -> None:
        if self._pending_script is not None:
            self.script = self._pending_script
            self._block_samples = self.script.block_samples(self.fs)
            self._pending_script = None

    def feed(self, packet: DevicePacket) -> list[dict]:
        """Consume one packet; returns phase-change events for observers."""
        if self._phase == "done":
            return []
        if self._phase == "idle":
            raise IllegalTransitionError("engine must be armed before feeding packets")
        if self._channel_count is None:
            self._channel_count = packet.channel_count
        elif packet.channel_count != self._channel_count:
            raise TriggerMismatchError(
                f"channel count changed mid-session: {self._channel_count} -> {packet.channel_count}"
            )
        events: list[dict] = []
        if self._phase == "armed":
            self._phase = "prompting"
            self._maybe_apply_pace()
            events.append(self._phase_event("wait1"))
            self._log_trigger("wait1")
        offset_before = self._block_position()
        if packet.trigger and self.validate_triggers:
            boundaries = set(self.script.phase_offsets(self.fs))
            if offset_before not in boundaries:
                raise TriggerMismatchError(
                    f"stream trigger at block offset {offset_before}, expected one of {sorted(boundaries)}"
                )
        phase_before = self._sub_phase_at(offset_before)
        self._block.append(packet.samples)
        self._current_sample += packet.samples_per_channel
        offset_after = self._block_position()
        phase_after = self._sub_phase_at(min(offset_after, self._block_samples - 1))
        if phase_after != phase_before:
            events.append(self._phase_event(phase_after))
            self._log_trigger(phase_after)
        while self._phase == "prompting" and self._block_position() >= self._block_samples:
            self._finish_block()
            if self._phase == "prompting":
                events.append(self._phase_event("wait1"))
                self._log_trigger("wait1")
        return events

    def _phase_event(self, sub_phase: str) -> dict:
        rep, word = self._sequence[self._prompt_index]
        return {
            "type": "prompt",
            "text": word.text if sub_phase == "word" else "wait",
            "word": word.text,
            "phase": sub_phase,
            "prompt_index": self._prompt_index,
            "repetition": rep,
            "remaining_ms": self.remaining_in_sub_phase_ms(),
        }

    def _log_trigger(self, sub_phase: str) -> None:
        offsets = dict(zip(SUB_PHASES, self.script.phase_offsets(self.fs)))
        block_start = self._current_sample - self._block_position()
        self.trigger_log.append(TriggerEvent(
            kind=_PHASE_TRIGGER_KIND[sub_phase],
            sample_index=block_start + offsets[sub_phase],
            timestamp_us=0,
        ))

    def _finish_block(self) -> None:
        rep, word = self._sequence[self._prompt_index]
        block = np.concatenate(self._block, axis=1)
        extra = block.shape[1] - self._block_samples
        leftover = block[:, self._block_samples:] if extra > 0 else None
        block = block[:, :self._block_samples]
        sliced = slice_window(
            block, self.anchor,
            word_span=self.script.word_span(self.fs),
            sample_rate_hz=self.fs,
        )
        self._utterances.append(Utterance(
            id=f"s{self.speaker}-{word.text}-r{rep:02d}",
            speaker=self.speaker,
            word=word,
            sample_rate_hz=self.fs,
            samples=np.ascontiguousarray(sliced),
            volts_per_lsb=self.volts_per_lsb,
        ))
        self._block = [] if leftover is None else [leftover]
        self._prompt_index += 1
        if self._prompt_index >= len(self._sequence):
            self._phase = "done"
        else:
            self._maybe_apply_pace()

    def dataset(self) -> Dataset:
        """The utterances recorded so far (complete blocks only)."""
        cc = self._channel_count or 0
        roles = default_channel_roles(cc) if cc else ()
        return Dataset(
            utterances=tuple(self._utterances),
            channel_roles=roles,
            provenance=f"recorded anchor={self.anchor}",
        )

    def finish(self) -> Dataset:
        if self._phase != "done":
            raise StreamEndedEarlyError(
                f"device stream ended at prompt {self._prompt_index}/{len(self._sequence)} "
                f"(phase {self._phase!r})"
            )
        return self.dataset()


def run_session(
    script: SessionScript,
    packets: Iterable[DevicePacket],
    speaker: int,
    *,
    sample_rate_hz: int = 1000,
    anchor: str = "center",
) -> Dataset:
    """Run a scripted session over a packet stream and return the sliced corpus."""
    engine = SessionEngine(script, speaker, sample_rate_hz=sample_rate_hz, anchor=anchor)
    engine.arm()
    for pkt in packets:
        engine.feed(pkt)
        if engine.state.phase == "done":
            break
    return engine.finish()


def session_trigger_indices(script: SessionScript, fs: int = 1000) -> list[int]:
    """Absolute sample indices of every sub-phase boundary in a full session."""
    block = script.block_samples(fs)
    offsets = script.phase_offsets(fs)
    out = []
    for i in range(len(script.sequence())):
        out.extend(i * block + o for o in offsets)
    return out
