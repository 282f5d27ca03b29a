// Client-side inverse calibration: joint-space slider values quantize to the
// integer encoder ticks a hardware encoder would emit, so the server sees
// genuine ticks on the same code path either way.

export interface JointCalEntry {
  q_c: number;
  p_c: number;
  k: number;
  q_min: number;
  q_max: number;
}

export interface GripperCalEntry {
  p_open: number;
  p_closed: number;
  width_open: number;
}

export interface CalibrationDoc {
  schema: string;
  arms: {
    left: Array<JointCalEntry | GripperCalEntry>;
    right: Array<JointCalEntry | GripperCalEntry>;
  };
}

export const ARM_JOINTS = 7;

export function jointToTicks(entry: JointCalEntry, q: number, resolutionRad: number): number {
  const exact = entry.p_c + (q - entry.q_c) / (entry.k * resolutionRad);
  return Math.round(exact);
}

export function widthToTicks(entry: GripperCalEntry, width: number): number {
  const frac = width / entry.width_open;
  return Math.round(entry.p_closed + frac * (entry.p_open - entry.p_closed));
}

export interface ArmPose {
  joints: number[]; // 7 radians
  width: number; // meters
}

export function poseToTicks(
  cal: CalibrationDoc,
  left: ArmPose,
  right: ArmPose,
  resolutionRad: number,
): number[] {
  const ticks: number[] = [];
  for (const [arm, pose] of [
    [cal.arms.left, left],
    [cal.arms.right, right],
  ] as Array<[Array<JointCalEntry | GripperCalEntry>, ArmPose]>) {
    for (let j = 0; j < ARM_JOINTS; j++) {
      ticks.push(jointToTicks(arm[j] as JointCalEntry, pose.joints[j], resolutionRad));
    }
    ticks.push(widthToTicks(arm[ARM_JOINTS] as GripperCalEntry, pose.width));
  }
  return ticks;
}

export function calibrationPose(cal: CalibrationDoc): { left: ArmPose; right: ArmPose } {
  const poseOf = (arm: Array<JointCalEntry | GripperCalEntry>): ArmPose => ({
    joints: arm.slice(0, ARM_JOINTS).map((e) => (e as JointCalEntry).q_c),
    width: 0.0,
  });
  return { left: poseOf(cal.arms.left), right: poseOf(cal.arms.right) };
}
