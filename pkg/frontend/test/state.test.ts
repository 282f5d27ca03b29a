import { describe, expect, it } from "vitest";

import {
  applyMessage,
  connectionStatus,
  initialState,
  STALE_AFTER_MS,
} from "../src/state.js";
import { WireMessage } from "../src/wire.js";

function msg(type: WireMessage["type"], payload: Record<string, unknown>): WireMessage {
  return { type, seq: 0, t: 0, payload };
}

describe("console state", () => {
  it("hello sets connection and flags schema mismatches", () => {
    const s = initialState();
    applyMessage(s, msg("hello", { schema: "airexo-wire/1" }), 0);
    expect(s.connection).toBe("connected");
    expect(s.schemaMismatch).toBeNull();
    applyMessage(s, msg("hello", { schema: "airexo-wire/2" }), 0);
    expect(s.schemaMismatch).toContain("airexo-wire/2");
  });

  it("goes stale after two seconds without state", () => {
    const s = initialState();
    applyMessage(s, msg("hello", { schema: "airexo-wire/1" }), 0);
    applyMessage(
      s,
      msg("state", { recording: false, collisions_total: 0 }),
      1000,
    );
    expect(connectionStatus(s, 1000 + STALE_AFTER_MS - 1)).toBe("connected");
    expect(connectionStatus(s, 1000 + STALE_AFTER_MS + 1)).toBe("stale");
    s.connection = "closed";
    expect(connectionStatus(s, 99999)).toBe("closed");
  });

  it("tracks operator grant, recording and the scoreboard", () => {
    const s = initialState();
    applyMessage(s, msg("event", { kind: "operator_granted" }), 0);
    expect(s.operator).toBe(true);
    applyMessage(s, msg("event", { kind: "recording_started" }), 0);
    expect(s.recording).toBe(true);
    applyMessage(s, msg("event", { kind: "recording_saved", path: "x" }), 0);
    expect(s.recording).toBe(false);
    applyMessage(
      s,
      msg("event", {
        kind: "trial_score",
        result: { task_id: "gather_balls", completion_overall: 0.5, collided: false },
      }),
      0,
    );
    expect(s.scoreboard.length).toBe(1);
    expect(s.scoreboard[0].completion_overall).toBe(0.5);
  });

  it("collects error messages as events", () => {
    const s = initialState();
    applyMessage(s, msg("error", { message: "nope" }), 0);
    expect(s.events.at(-1)).toContain("nope");
  });
});
