// Console-side session state assembled from server messages.

import { WireMessage } from "./wire.js";

export type ConnectionStatus = "connecting" | "connected" | "stale" | "closed";

export interface TrialScore {
  task_id: string;
  completion_overall: number;
  collided: boolean;
  stage_flags?: Record<string, boolean>;
}

export interface ConsoleState {
  connection: ConnectionStatus;
  hello: Record<string, unknown> | null;
  lastState: Record<string, unknown> | null;
  lastStateAtMs: number;
  operator: boolean;
  inputMode: "sliders" | "gamepad" | "script";
  recording: boolean;
  collisionsTotal: number;
  schemaMismatch: string | null;
  scoreboard: TrialScore[];
  events: string[];
}

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    hello: null,
    lastState: null,
    lastStateAtMs: 0,
    operator: false,
    inputMode: "sliders",
    recording: false,
    collisionsTotal: 0,
    schemaMismatch: null,
    scoreboard: [],
    events: [],
  };
}

export const STALE_AFTER_MS = 2000;

export function applyMessage(state: ConsoleState, msg: WireMessage, nowMs: number): void {
  switch (msg.type) {
    case "hello": {
      state.hello = msg.payload;
      state.connection = "connected";
      const schema = msg.payload.schema;
      state.schemaMismatch =
        schema === "airexo-wire/1" ? null : `unsupported wire schema: ${schema}`;
      break;
    }
    case "state": {
      state.lastState = msg.payload;
      state.lastStateAtMs = nowMs;
      state.connection = "connected";
      state.recording = Boolean(msg.payload.recording);
      state.collisionsTotal = Number(msg.payload.collisions_total ?? 0);
      break;
    }
    case "event": {
      const kind = String(msg.payload.kind ?? "");
      state.events.push(kind);
      if (kind === "operator_granted") {
        state.operator = true;
      }
      if (kind === "trial_score" && msg.payload.result) {
        state.scoreboard.push(msg.payload.result as unknown as TrialScore);
      }
      if (kind === "recording_started") {
        state.recording = true;
      }
      if (kind === "recording_saved" || kind === "recording_discarded") {
        state.recording = false;
      }
      break;
    }
    case "error": {
      state.events.push(`error: ${msg.payload.message}`);
      break;
    }
    default:
      break;
  }
}

export function connectionStatus(state: ConsoleState, nowMs: number): ConnectionStatus {
  if (state.connection === "closed") {
    return "closed";
  }
  if (state.lastState && nowMs - state.lastStateAtMs > STALE_AFTER_MS) {
    return "stale";
  }
  return state.connection;
}
