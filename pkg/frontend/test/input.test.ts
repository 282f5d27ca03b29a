import { describe, expect, it } from "vitest";

import {
  ARM_JOINTS,
  CalibrationDoc,
  JointCalEntry,
  calibrationPose,
  jointToTicks,
  poseToTicks,
  widthToTicks,
} from "../src/calibration.js";
import { EncoderInputEmitter, ScriptPlayer, gamepadToPose } from "../src/input.js";
import { parseMessage } from "../src/wire.js";

const RES = 0.08 * (Math.PI / 180);

function makeCal(): CalibrationDoc {
  const joints = (k: number) =>
    Array.from({ length: ARM_JOINTS }, () => ({
      q_c: 0.0,
      p_c: 2048,
      k,
      q_min: -2.88,
      q_max: 2.88,
    }));
  const gripper = { p_open: 3500, p_closed: 500, width_open: 0.085 };
  return {
    schema: "airexo-cal/1",
    arms: { left: [...joints(1), gripper], right: [...joints(-1), gripper] },
  };
}

describe("client-side quantization", () => {
  it("slider at the calibration pose emits the calibration ticks", () => {
    const cal = makeCal();
    const pose = calibrationPose(cal);
    const ticks = poseToTicks(cal, pose.left, pose.right, RES);
    for (let j = 0; j < ARM_JOINTS; j++) {
      expect(ticks[j]).toBe(2048);
      expect(ticks[8 + j]).toBe(2048);
    }
    expect(ticks[7]).toBe(500); // gripper closed
    expect(ticks[15]).toBe(500);
  });

  it("quantizes to the nearest tick and respects k sign", () => {
    const entry: JointCalEntry = { q_c: 0, p_c: 2048, k: 1, q_min: -3, q_max: 3 };
    expect(jointToTicks(entry, 500 * RES, RES)).toBe(2548);
    const mirrored: JointCalEntry = { ...entry, k: -1 };
    expect(jointToTicks(mirrored, 500 * RES, RES)).toBe(1548);
    expect(widthToTicks({ p_open: 3500, p_closed: 500, width_open: 0.085 }, 0.085)).toBe(3500);
  });
});

describe("encoder input emitter", () => {
  function collectEmitter(holdsRole: () => boolean) {
    const sent: string[] = [];
    const emitter = new EncoderInputEmitter(
      makeCal(),
      RES,
      { send: (t) => sent.push(t) },
      holdsRole,
    );
    return { sent, emitter };
  }

  it("never sends without the operator role", () => {
    const { sent, emitter } = collectEmitter(() => false);
    const pose = calibrationPose(makeCal());
    expect(emitter.emitPose(pose.left, pose.right, 0)).toBeNull();
    expect(sent.length).toBe(0);
  });

  it("rate-limits to 30 Hz and keeps seq monotone", () => {
    const { sent, emitter } = collectEmitter(() => true);
    const pose = calibrationPose(makeCal());
    let now = 1000;
    for (let i = 0; i < 100; i++) {
      emitter.emitPose(pose.left, pose.right, now);
      now += 10; // 100 Hz attempts
    }
    // 1 s of attempts at 100 Hz: never above 30 Hz; the 10 ms attempt grid
    // quantizes the 33.3 ms minimum interval up to 40 ms (25 sends).
    expect(sent.length).toBeLessThanOrEqual(31);
    expect(sent.length).toBeGreaterThanOrEqual(24);
    const seqs = sent.map((s) => parseMessage(s).seq);
    for (let i = 1; i < seqs.length; i++) {
      expect(seqs[i]).toBeGreaterThan(seqs[i - 1]);
    }
    for (const s of sent) {
      const msg = parseMessage(s); // validates dims client-side
      expect((msg.payload.ticks as number[]).length).toBe(16);
    }
  });
});

describe("auxiliary input sources", () => {
  it("gamepad axes offset the base pose with a deadzone", () => {
    const base = calibrationPose(makeCal());
    const idle = gamepadToPose({ axes: [0.02, -0.03, 0, 0] }, base);
    expect(idle.left.joints).toEqual(base.left.joints);
    const active = gamepadToPose({ axes: [0.5, 0, -0.4, 0] }, base);
    expect(active.left.joints[0]).toBeCloseTo(base.left.joints[0] + 0.75, 12);
    expect(active.right.joints[0]).toBeCloseTo(base.right.joints[0] - 0.6, 12);
  });

  it("script player rejects malformed channel counts", () => {
    expect(
      () =>
        new ScriptPlayer([
          { t_s: 0, left: { joints: [0, 0, 0], width: 0 }, right: { joints: Array(7).fill(0), width: 0 } },
        ]),
    ).toThrow();
    const player = new ScriptPlayer([
      { t_s: 0, left: { joints: Array(7).fill(0), width: 0 }, right: { joints: Array(7).fill(0), width: 0 } },
      { t_s: 2, left: { joints: Array(7).fill(1), width: 0 }, right: { joints: Array(7).fill(0), width: 0 } },
    ]);
    expect(player.poseAt(1.0).left.joints[0]).toBe(0);
    expect(player.poseAt(2.5).left.joints[0]).toBe(1);
    expect(player.durationS).toBe(2);
  });
});
