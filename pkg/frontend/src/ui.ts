/**
 * DOM wiring for the two experiment views.
 *
 * Subject view: the teleprompter only — no signal data on the screen the
 * speaker watches. Host view: live traces of every channel drawn from ring
 * buffers, stream stats, and start/stop/pace controls. The view never owns
 * experiment truth; killing and reopening it changes nothing recorded.
 */

import { SessionClient, type LinkState } from "./client.js";
import type { DevicePacket } from "./packet.js";
import { defaultScript, type ServiceMessage } from "./protocol.js";
import { ChannelRings } from "./ringbuffer.js";
import { applyPrompt, initialTeleprompter, type TeleprompterView } from "./teleprompter.js";

const PLOT_SECONDS = 4;
const SAMPLE_RATE = 1000;
const REFRESH_MS = 50; // 20 Hz canvas refresh, above the 10 Hz floor

type Mode = "subject" | "host";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export function startUi(): void {
  const mode: Mode = location.hash === "#subject" ? "subject" : "host";
  document.body.dataset.mode = mode;
  el<HTMLDivElement>("subject-view").style.display = mode === "subject" ? "flex" : "none";
  el<HTMLDivElement>("host-view").style.display = mode === "host" ? "block" : "none";

  const rings = new ChannelRings(PLOT_SECONDS * SAMPLE_RATE);
  let teleprompter: TeleprompterView = initialTeleprompter();
  let statsLine = "no packets yet";
  let sessionPhase = "idle";
  let lastError = "";

  const promptEl = el<HTMLDivElement>(mode === "subject" ? "subject-prompt" : "host-prompt");
  const linkEl = el<HTMLSpanElement>("link-state");
  const phaseEl = el<HTMLSpanElement>("session-phase");

  const url = `ws://${location.hostname || "127.0.0.1"}:${
    new URLSearchParams(location.search).get("port") ?? "8787"
  }`;

  const client = new SessionClient(url, {
    onLinkState(state: LinkState, retryInMs?: number) {
      linkEl.textContent =
        state === "lost" ? `link lost — retrying in ${retryInMs ?? 0} ms` : state;
      linkEl.className = state;
    },
    onMessage(msg: ServiceMessage) {
      if (msg.type === "prompt") {
        teleprompter = applyPrompt(teleprompter, msg);
      } else if (msg.type === "state") {
        sessionPhase = msg.phase;
        if (msg.phase === "idle" || msg.phase === "done") {
          teleprompter = initialTeleprompter();
        }
      } else if (msg.type === "stats") {
        statsLine = `packets ${msg.packets_received}  lost ${msg.packets_lost}  crc ${msg.crc_failures}`;
      } else {
        lastError = `${msg.code}${msg.detail ? `: ${msg.detail}` : ""}`;
      }
    },
    onPacket(packet: DevicePacket) {
      if (mode === "host") rings.push(packet.samples);
    },
    onDecodeError(error) {
      lastError = error.message;
    },
  });
  client.connect();

  if (mode === "host") {
    el<HTMLButtonElement>("start-btn").onclick = () => {
      const speaker = Number(el<HTMLInputElement>("speaker-input").value) || 1;
      client.send({ type: "start_session", script: defaultScript(), speaker });
    };
    el<HTMLButtonElement>("stop-btn").onclick = () => client.send({ type: "stop" });
    el<HTMLButtonElement>("pace-btn").onclick = () => {
      const wordS = Number(el<HTMLInputElement>("pace-input").value);
      if (wordS > 0) client.send({ type: "pace", word_s: wordS });
    };
  }

  const canvas = mode === "host" ? el<HTMLCanvasElement>("traces") : null;
  const render = () => {
    promptEl.textContent = teleprompter.text || (mode === "subject" ? "·" : "idle");
    promptEl.classList.toggle("word", teleprompter.phase === "word");
    phaseEl.textContent = `${sessionPhase}${
      teleprompter.phase ? ` / ${teleprompter.phase} (${teleprompter.remainingMs} ms)` : ""
    }`;
    if (mode === "host") {
      el<HTMLSpanElement>("stats-line").textContent = statsLine;
      el<HTMLSpanElement>("error-line").textContent = lastError;
      drawTraces(canvas as HTMLCanvasElement, rings);
    }
  };
  setInterval(render, REFRESH_MS);
  render();
}

function drawTraces(canvas: HTMLCanvasElement, rings: ChannelRings): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, width, height);
  const channels = rings.channelCount;
  if (channels === 0) return;
  const lane = height / channels;
  const scale = lane / 2 / 16384;
  for (let c = 0; c < channels; c++) {
    const data = rings.channel(c);
    if (data.length < 2) continue;
    const mid = lane * c + lane / 2;
    ctx.strokeStyle = c < 10 ? "#5ec8f0" : "#f0a35e"; // neck vs face electrodes
    ctx.lineWidth = 1;
    ctx.beginPath();
    const step = Math.max(1, Math.floor(data.length / width));
    for (let x = 0, i = 0; i < data.length; i += step, x++) {
      const y = mid - (data[i] as number) * scale;
      if (x === 0) ctx.moveTo(0, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
}
