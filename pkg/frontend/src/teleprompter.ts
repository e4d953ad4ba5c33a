/**
 * Teleprompter logic: the scripted phase sequence and the subject-facing
 * display state, kept free of DOM so it can be tested headless.
 */

import type { PromptMessage, ScriptSpec, SubPhase } from "./protocol.js";

export interface PhaseStep {
  word: string;
  phase: SubPhase;
  durationMs: number;
  repetition: number;
}

/** The full wait/word/wait presentation order for a script. */
export function phaseSequence(script: ScriptSpec): PhaseStep[] {
  const steps: PhaseStep[] = [];
  const durations: Array<[SubPhase, number]> = [
    ["wait1", Math.round(script.wait_before_s * 1000)],
    ["word", Math.round(script.word_s * 1000)],
    ["wait2", Math.round(script.wait_after_s * 1000)],
  ];
  for (let rep = 0; rep < script.repetitions; rep++) {
    for (const word of script.prompts) {
      for (const [phase, durationMs] of durations) {
        steps.push({ word, phase, durationMs, repetition: rep });
      }
    }
  }
  return steps;
}

/** What the subject screen shows for one phase step. */
export function displayText(step: { word: string; phase: SubPhase }): string {
  return step.phase === "word" ? step.word : "wait";
}

export interface TeleprompterView {
  text: string;
  phase: SubPhase | null;
  word: string | null;
  remainingMs: number;
  /** Count of phase transitions seen, for progress display. */
  phasesSeen: number;
}

export function initialTeleprompter(): TeleprompterView {
  return { text: "", phase: null, word: null, remainingMs: 0, phasesSeen: 0 };
}

/** Fold one service prompt message into the view. */
export function applyPrompt(view: TeleprompterView, msg: PromptMessage): TeleprompterView {
  const transitioned = view.phase !== msg.phase || view.word !== msg.word;
  return {
    text: msg.phase === "word" ? msg.word : "wait",
    phase: msg.phase,
    word: msg.word,
    remainingMs: msg.remaining_ms,
    phasesSeen: view.phasesSeen + (transitioned ? 1 : 0),
  };
}
