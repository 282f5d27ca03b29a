import { describe, expect, it } from "vitest";

import {
  SeqCounter,
  WireError,
  encodeMessage,
  parseMessage,
  validateMessage,
} from "../src/wire.js";

describe("wire validation", () => {
  it("round-trips a valid message", () => {
    const text = encodeMessage("encoder_input", 3, 17, { ticks: Array(16).fill(2048) });
    const msg = parseMessage(text);
    expect(msg.type).toBe("encoder_input");
    expect(msg.seq).toBe(3);
    expect(parseMessage(JSON.stringify(msg))).toEqual(msg);
  });

  it("rejects a 15-channel frame client-side", () => {
    expect(() =>
      validateMessage({
        type: "encoder_input",
        seq: 0,
        t: 0,
        payload: { ticks: Array(15).fill(0) },
      }),
    ).toThrowError(/dim mismatch 15 != 16/);
  });

  it("rejects non-integer ticks", () => {
    const ticks = Array(16).fill(0.5);
    expect(() =>
      validateMessage({ type: "encoder_input", seq: 0, t: 0, payload: { ticks } }),
    ).toThrow(WireError);
  });

  it("rejects unknown types and bad seq", () => {
    expect(() => validateMessage({ type: "nope", seq: 0, t: 0, payload: {} })).toThrow(WireError);
    expect(() =>
      validateMessage({ type: "event", seq: -1, t: 0, payload: {} }),
    ).toThrow(WireError);
    expect(() => validateMessage({ type: "event", seq: 1.5, t: 0, payload: {} })).toThrow(
      WireError,
    );
  });

  it("checks state payload dimensions", () => {
    const payload = {
      joint_pos: Array(14).fill(0),
      joint_vel: Array(14).fill(0),
      tcp_pos: Array(14).fill(0),
      gripper_widths: [0, 0],
    };
    expect(() => validateMessage({ type: "state", seq: 0, t: 0, payload })).not.toThrow();
    expect(() =>
      validateMessage({
        type: "state",
        seq: 0,
        t: 0,
        payload: { ...payload, tcp_pos: Array(13).fill(0) },
      }),
    ).toThrow(WireError);
  });

  it("control messages need an action", () => {
    expect(() => validateMessage({ type: "record_ctl", seq: 0, t: 0, payload: {} })).toThrow(
      WireError,
    );
  });

  it("sequence counter is monotone", () => {
    const c = new SeqCounter();
    expect([c.take(), c.take(), c.take()]).toEqual([0, 1, 2]);
  });
});
