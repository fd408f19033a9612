/**
 * Server event types and the pure view model.
 *
 * The view is a deterministic function of the received event sequence: the
 * client holds no NLP or planning logic and re-deriving the view from a
 * recorded event log reproduces the transcript exactly.
 */

export type EventKind =
  | "question"
  | "utterance"
  | "plan"
  | "state"
  | "incapable"
  | "error";

export interface ServerEvent {
  kind: EventKind;
  state: string;
  text?: string;
  plan?: string[];
  fluents?: string[];
}

export interface TranscriptEntry {
  speaker: "human" | "robot";
  text: string;
  kind: "instruction" | "question" | "utterance" | "incapable" | "error";
}

export interface ViewState {
  transcript: TranscriptEntry[];
  plans: string[][];
  fluents: string[];
  previousFluents: string[];
  pendingQuestion: string | null;
  connection: "idle" | "connected" | "reconnecting";
}

export function initialView(): ViewState {
  return {
    transcript: [],
    plans: [],
    fluents: [],
    previousFluents: [],
    pendingQuestion: null,
    connection: "idle",
  };
}

/** A human turn entering the log (events only carry robot output). */
export function applyHumanTurn(view: ViewState, text: string): ViewState {
  return {
    ...view,
    transcript: [...view.transcript, { speaker: "human", text, kind: "instruction" }],
    pendingQuestion: null,
  };
}

export function applyEvent(view: ViewState, event: ServerEvent): ViewState {
  switch (event.kind) {
    case "question":
      return {
        ...view,
        transcript: [
          ...view.transcript,
          { speaker: "robot", text: event.text ?? "", kind: "question" },
        ],
        pendingQuestion: event.text ?? null,
      };
    case "utterance":
    case "incapable":
    case "error":
      return {
        ...view,
        transcript: [
          ...view.transcript,
          { speaker: "robot", text: event.text ?? "", kind: event.kind },
        ],
        pendingQuestion: null,
      };
    case "plan":
      return { ...view, plans: [...view.plans, event.plan ?? []] };
    case "state":
      return {
        ...view,
        previousFluents: view.fluents,
        fluents: event.fluents ?? [],
      };
    default:
      return view;
  }
}

export type LogEntry =
  | { turn: "human"; text: string }
  | { turn: "server"; event: ServerEvent };

/** Replay a recorded log (human turns interleaved with server events). */
export function replay(log: LogEntry[]): ViewState {
  let view = initialView();
  for (const entry of log) {
    view = entry.turn === "human" ? applyHumanTurn(view, entry.text) : applyEvent(view, entry.event);
  }
  return view;
}

/** Fluents added/removed by the latest state event, for panel highlighting. */
export function fluentDiff(view: ViewState): { added: string[]; removed: string[] } {
  const before = new Set(view.previousFluents);
  const after = new Set(view.fluents);
  return {
    added: view.fluents.filter((f) => !before.has(f)),
    removed: view.previousFluents.filter((f) => !after.has(f)),
  };
}

/** Plain-text rendering of the whole view; the DOM mirrors these lines. */
export function renderText(view: ViewState): string {
  const lines: string[] = [];
  for (const entry of view.transcript) {
    const who = entry.speaker === "human" ? "H" : "R";
    const marker = entry.kind === "incapable" ? "!" : entry.kind === "error" ? "x" : ":";
    lines.push(`${who}${marker} ${entry.text}`);
  }
  view.plans.forEach((plan, i) => {
    lines.push(`plan ${i + 1}:`);
    for (const step of plan) lines.push(`  ${step}`);
  });
  if (view.fluents.length > 0) {
    lines.push(`world (${view.fluents.length}):`);
    for (const f of view.fluents) lines.push(`  ${f}`);
  }
  return lines.join("\n");
}
