/** Typed view of the session service's JSON control schema. */

export const DEFAULT_WORDS = [
  "heed", "had", "hood", "tail", "kale", "doe", "goat", "aba", "ada", "aga", "aka",
] as const;

export type SubPhase = "wait1" | "word" | "wait2";

export interface ScriptSpec {
  prompts: string[];
  wait_before_s: number;
  word_s: number;
  wait_after_s: number;
  repetitions: number;
}

export function defaultScript(): ScriptSpec {
  return {
    prompts: [...DEFAULT_WORDS],
    wait_before_s: 3.0,
    word_s: 3.0,
    wait_after_s: 3.0,
    repetitions: 10,
  };
}

export interface PromptMessage {
  type: "prompt";
  text: string;
  word: string;
  phase: SubPhase;
  remaining_ms: number;
  prompt_index?: number;
  repetition?: number;
}

export interface StateMessage {
  type: "state";
  phase: "idle" | "armed" | "prompting" | "done";
}

export interface StatsMessage {
  type: "stats";
  packets_received: number;
  packets_lost: number;
  crc_failures: number;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  detail?: string;
}

export type ServiceMessage = PromptMessage | StateMessage | StatsMessage | ErrorMessage;

export interface StartSessionMessage {
  type: "start_session";
  script: ScriptSpec;
  speaker: number;
  anchor?: "center" | "energy";
}

export interface StopMessage {
  type: "stop";
}

export interface PaceMessage {
  type: "pace";
  wait_before_s?: number;
  word_s?: number;
  wait_after_s?: number;
}

export type ControlMessage = StartSessionMessage | StopMessage | PaceMessage;

export function parseServiceMessage(raw: string): ServiceMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    throw new Error(`service sent invalid JSON: ${raw.slice(0, 80)}`);
  }
  if (typeof obj !== "object" || obj === null || typeof (obj as { type?: unknown }).type !== "string") {
    throw new Error("service frame is not a typed object");
  }
  const msg = obj as { type: string };
  switch (msg.type) {
    case "prompt":
    case "state":
    case "stats":
    case "error":
      return obj as ServiceMessage;
    default:
      throw new Error(`unknown service message type ${msg.type}`);
  }
}
