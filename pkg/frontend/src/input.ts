// Operator input: per-joint sliders, gamepad axes or a scripted pose source,
// quantized client-side to integer ticks and rate-limited to 30 Hz with a
// monotone sequence number.  Input is disabled unless the operator role is
// held.

import { ArmPose, CalibrationDoc, poseToTicks } from "./calibration.js";
import { DUAL_ARM_TICKS, SeqCounter, encodeMessage } from "./wire.js";

export const INPUT_RATE_HZ = 30;

export type InputMode = "sliders" | "gamepad" | "script";

export interface InputSink {
  send(text: string): void;
}

export class EncoderInputEmitter {
  private seq = new SeqCounter();
  private lastSent = 0;
  private tNs = 0;

  constructor(
    private cal: CalibrationDoc,
    private resolutionRad: number,
    private sink: InputSink,
    private holdsRole: () => boolean,
  ) {}

  /** Quantize a pose and send it; returns the ticks or null when gated. */
  emitPose(left: ArmPose, right: ArmPose, nowMs: number): number[] | null {
    if (!this.holdsRole()) {
      return null;
    }
    if (nowMs - this.lastSent < 1000 / INPUT_RATE_HZ) {
      return null;
    }
    const ticks = poseToTicks(this.cal, left, right, this.resolutionRad);
    if (ticks.length !== DUAL_ARM_TICKS) {
      throw new Error(`refusing to send ${ticks.length}-channel frame`);
    }
    this.tNs += Math.round(1e9 / INPUT_RATE_HZ);
    // encodeMessage validates against the wire schema before send.
    this.sink.send(encodeMessage("encoder_input", this.seq.take(), this.tNs, { ticks }));
    this.lastSent = nowMs;
    return ticks;
  }
}

export interface GamepadLike {
  axes: ReadonlyArray<number>;
}

/** Map gamepad stick axes onto two shoulder joints for quick driving. */
export function gamepadToPose(
  pad: GamepadLike,
  base: { left: ArmPose; right: ArmPose },
  span = 1.5,
): { left: ArmPose; right: ArmPose } {
  const dead = (v: number) => (Math.abs(v) < 0.08 ? 0 : v);
  const left: ArmPose = {
    joints: [...base.left.joints],
    width: base.left.width,
  };
  const right: ArmPose = {
    joints: [...base.right.joints],
    width: base.right.width,
  };
  left.joints[0] = base.left.joints[0] + dead(pad.axes[0] ?? 0) * span;
  left.joints[1] = base.left.joints[1] + dead(pad.axes[1] ?? 0) * span;
  right.joints[0] = base.right.joints[0] + dead(pad.axes[2] ?? 0) * span;
  right.joints[1] = base.right.joints[1] + dead(pad.axes[3] ?? 0) * span;
  return { left, right };
}

export interface ScriptPoint {
  t_s: number;
  left: ArmPose;
  right: ArmPose;
}

/** Piecewise-constant script playback; rejects malformed channel counts. */
export class ScriptPlayer {
  constructor(private points: ScriptPoint[]) {
    for (const p of points) {
      if (p.left.joints.length !== 7 || p.right.joints.length !== 7) {
        throw new Error("script poses must carry 7 joints per arm");
      }
    }
  }

  poseAt(tS: number): { left: ArmPose; right: ArmPose } {
    let current = this.points[0];
    for (const p of this.points) {
      if (p.t_s <= tS) {
        current = p;
      }
    }
    return { left: current.left, right: current.right };
  }

  get durationS(): number {
    return this.points.length ? this.points[this.points.length - 1].t_s : 0;
  }
}
