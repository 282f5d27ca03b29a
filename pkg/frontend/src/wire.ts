// Wire protocol "airexo-wire/1": one JSON document per WebSocket message.
// Every outbound message is validated before send so a malformed frame never
// leaves the console.

export const WIRE_SCHEMA = "airexo-wire/1";
export const DUAL_ARM_TICKS = 16;

export type MessageType =
  | "hello"
  | "state"
  | "encoder_input"
  | "command_echo"
  | "record_ctl"
  | "replay_ctl"
  | "eval_ctl"
  | "event"
  | "error";

const MESSAGE_TYPES: ReadonlySet<string> = new Set([
  "hello",
  "state",
  "encoder_input",
  "command_echo",
  "record_ctl",
  "replay_ctl",
  "eval_ctl",
  "event",
  "error",
]);

export interface WireMessage {
  type: MessageType;
  seq: number;
  t: number;
  payload: Record<string, unknown>;
}

const STATE_DIMS: Record<string, number> = {
  joint_pos: 14,
  joint_vel: 14,
  tcp_pos: 14,
  gripper_widths: 2,
};

export class WireError extends Error {}

function isIntArray(v: unknown, n: number): v is number[] {
  return Array.isArray(v) && v.length === n && v.every((x) => Number.isInteger(x));
}

export function validateMessage(doc: unknown): WireMessage {
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new WireError("message must be a JSON object");
  }
  const m = doc as Record<string, unknown>;
  if (typeof m.type !== "string" || !MESSAGE_TYPES.has(m.type)) {
    throw new WireError(`unknown message type ${JSON.stringify(m.type)}`);
  }
  if (typeof m.seq !== "number" || !Number.isInteger(m.seq) || m.seq < 0) {
    throw new WireError(`seq must be a non-negative integer, got ${m.seq}`);
  }
  const t = m.t ?? 0;
  if (typeof t !== "number" || !Number.isInteger(t)) {
    throw new WireError(`t must be integer nanoseconds, got ${t}`);
  }
  const payload = (m.payload ?? {}) as Record<string, unknown>;
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    throw new WireError("payload must be an object");
  }
  if (m.type === "encoder_input") {
    const ticks = payload.ticks;
    if (!Array.isArray(ticks)) {
      throw new WireError("encoder_input payload needs a 'ticks' list");
    }
    if (ticks.length !== DUAL_ARM_TICKS) {
      throw new WireError(`dim mismatch ${ticks.length} != ${DUAL_ARM_TICKS}`);
    }
    if (!isIntArray(ticks, DUAL_ARM_TICKS)) {
      throw new WireError("encoder ticks must be integers");
    }
  } else if (m.type === "state") {
    for (const [name, dim] of Object.entries(STATE_DIMS)) {
      const arr = payload[name];
      if (!Array.isArray(arr) || arr.length !== dim) {
        throw new WireError(`state payload ${name} must have ${dim} entries`);
      }
    }
  } else if (m.type === "record_ctl" || m.type === "replay_ctl" || m.type === "eval_ctl") {
    if (typeof payload.action !== "string") {
      throw new WireError(`${m.type} payload needs an 'action' string`);
    }
  }
  return { type: m.type as MessageType, seq: m.seq, t: t as number, payload };
}

export function parseMessage(text: string): WireMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    throw new WireError(`message is not valid JSON: ${err}`);
  }
  return validateMessage(doc);
}

export class SeqCounter {
  private next = 0;
  take(): number {
    return this.next++;
  }
}

export function encodeMessage(
  type: MessageType,
  seq: number,
  t: number,
  payload: Record<string, unknown>,
): string {
  const msg: WireMessage = validateMessage({ type, seq, t, payload });
  return JSON.stringify(msg);
}
