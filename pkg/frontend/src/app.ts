// Operator console entry point: socket wiring, slider/gamepad input,
// record/replay controls and the trial scoreboard.  Host and port come from
// the URL query (?host=...&port=...).

import { calibrationPose, CalibrationDoc, ArmPose } from "./calibration.js";
import { ChainConfig } from "./chain.js";
import { EncoderInputEmitter, gamepadToPose } from "./input.js";
import { applyMessage, connectionStatus, ConsoleState, initialState } from "./state.js";
import { renderScene } from "./view.js";
import { parseMessage, SeqCounter, encodeMessage, WireError } from "./wire.js";

const state: ConsoleState = initialState();
const ctlSeq = new SeqCounter();

let chains: { left: ChainConfig; right: ChainConfig } | null = null;
let cal: CalibrationDoc | null = null;
let resolutionRad = 0.08 * (Math.PI / 180);
let emitter: EncoderInputEmitter | null = null;
let sliderPose: { left: ArmPose; right: ArmPose } | null = null;

function query(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const host = query("host", window.location.hostname || "127.0.0.1");
const port = query("port", "8765");
const ws = new WebSocket(`ws://${host}:${port}/ws`);

ws.onmessage = (ev) => {
  let msg;
  try {
    msg = parseMessage(String(ev.data));
  } catch (err) {
    if (err instanceof WireError) {
      state.events.push(`bad message from server: ${err.message}`);
      return;
    }
    throw err;
  }
  applyMessage(state, msg, performance.now());
  if (msg.type === "hello") {
    onHello(msg.payload);
  }
};
ws.onclose = () => {
  state.connection = "closed";
};

function onHello(payload: Record<string, unknown>): void {
  chains = payload.chains as { left: ChainConfig; right: ChainConfig };
  cal = payload.calibration as unknown as CalibrationDoc;
  const world = payload.world as Record<string, unknown>;
  const res = (payload as { resolution_rad?: number }).resolution_rad;
  if (typeof res === "number") {
    resolutionRad = res;
  }
  if (state.schemaMismatch) {
    banner(state.schemaMismatch);
    return;
  }
  sliderPose = calibrationPose(cal);
  emitter = new EncoderInputEmitter(cal, resolutionRad, { send: (t) => ws.send(t) }, () =>
    state.operator,
  );
  buildSliders(world);
}

function banner(text: string): void {
  const el = document.getElementById("banner")!;
  el.textContent = text;
  el.style.display = "block";
}

// -- controls ---------------------------------------------------------------

function buildSliders(world: Record<string, unknown>): void {
  const holder = document.getElementById("sliders")!;
  holder.innerHTML = "";
  (["left", "right"] as const).forEach((arm) => {
    const group = document.createElement("fieldset");
    group.innerHTML = `<legend>${arm} arm</legend>`;
    for (let j = 0; j < 7; j++) {
      const entry = (cal!.arms[arm][j] as { q_min: number; q_max: number; q_c: number });
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(entry.q_min);
      slider.max = String(entry.q_max);
      slider.step = "0.001";
      slider.value = String(entry.q_c);
      slider.oninput = () => {
        sliderPose![arm].joints[j] = Number(slider.value);
      };
      group.appendChild(slider);
    }
    const grip = document.createElement("input");
    grip.type = "range";
    grip.min = "0";
    grip.max = "0.085";
    grip.step = "0.001";
    grip.value = "0";
    grip.oninput = () => {
      sliderPose![arm].width = Number(grip.value);
    };
    group.appendChild(grip);
    holder.appendChild(group);
  });
  void world;
}

function bindButton(id: string, fn: () => void): void {
  document.getElementById(id)!.onclick = fn;
}

bindButton("claim", () => {
  ws.send(encodeMessage("hello", ctlSeq.take(), 0, { role: "operator" }));
});
bindButton("record-start", () => {
  ws.send(encodeMessage("record_ctl", ctlSeq.take(), 0, { action: "start" }));
});
bindButton("record-stop", () => {
  ws.send(encodeMessage("record_ctl", ctlSeq.take(), 0, { action: "stop" }));
});
bindButton("score", () => {
  ws.send(encodeMessage("eval_ctl", ctlSeq.take(), 0, { action: "score" }));
});
document.getElementById("mode")!.onchange = (ev) => {
  state.inputMode = (ev.target as HTMLSelectElement).value as ConsoleState["inputMode"];
};

// -- input pump (independent timer from rendering) ---------------------------

setInterval(() => {
  if (!emitter || !sliderPose || !state.operator) {
    return;
  }
  let pose = sliderPose;
  if (state.inputMode === "gamepad") {
    const pads = navigator.getGamepads?.() ?? [];
    const pad = pads.find(Boolean);
    if (pad) {
      pose = gamepadToPose(pad, calibrationPose(cal!));
    }
  }
  emitter.emitPose(pose.left, pose.right, performance.now());
}, 1000 / 30);

// -- render loop --------------------------------------------------------------

function draw(): void {
  const top = (document.getElementById("top") as HTMLCanvasElement).getContext("2d")!;
  const side = (document.getElementById("side") as HTMLCanvasElement).getContext("2d")!;
  const status = connectionStatus(state, performance.now());
  const overlay = document.getElementById("overlay")!;
  overlay.style.display = status === "stale" || status === "closed" ? "flex" : "none";
  overlay.textContent = status === "closed" ? "connection closed" : "disconnected";
  if (chains && state.lastState) {
    renderScene(top, side, {
      chains,
      jointPos: state.lastState.joint_pos as number[],
      world: (state.lastState.world as Record<string, unknown>) ?? null,
      collided: state.collisionsTotal > 0,
      status: `${status} | mode=${state.inputMode} | rec=${state.recording ? "on" : "off"}`,
    });
  }
  const board = document.getElementById("scoreboard")!;
  board.textContent = state.scoreboard
    .map(
      (s, i) =>
        `#${i + 1} ${s.task_id} c=${(100 * s.completion_overall).toFixed(1)}%` +
        (s.collided ? " [collision]" : ""),
    )
    .join("\n");
  requestAnimationFrame(draw);
}

requestAnimationFrame(draw);
