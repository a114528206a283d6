/** Browser bootstrap: wires the session, target widget, and canvas view
 * together. Everything testable lives in the other modules; this file only
 * builds DOM and forwards events. */

import { adrBarWidth, formatMetrics, interpolateFrames, modeBadge } from "./dashboard.js";
import { RobotModel, type RobotConfig } from "./fk.js";
import type { StateFrame } from "./protocol.js";
import { defaultView, drawFrame } from "./render.js";
import robotConfig from "./robot.json" with { type: "json" };
import { ConsoleSession } from "./session.js";
import {
  PALM_POS_HI,
  PALM_POS_LO,
  PALM_ROT_BOUND,
  PCA_HI,
  PCA_LO,
  defaultWidget,
  targetFrame,
} from "./widgets.js";

const STATE_PERIOD_MS = 50; // server publishes at 20 Hz

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  parent: HTMLElement,
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text) node.textContent = text;
  parent.appendChild(node);
  return node;
}

function slider(
  parent: HTMLElement,
  label: string,
  lo: number,
  hi: number,
  value: number,
  onInput: (v: number) => void,
): HTMLInputElement {
  const row = el("div", parent);
  row.className = "row";
  el("label", row, label);
  const input = el("input", row);
  input.type = "range";
  input.min = String(lo);
  input.max = String(hi);
  input.step = "0.001";
  input.value = String(value);
  const readout = el("span", row, value.toFixed(3));
  input.oninput = () => {
    const v = Number(input.value);
    readout.textContent = v.toFixed(3);
    onInput(v);
  };
  return input;
}

export function start(root: HTMLElement, url: string): ConsoleSession {
  const model = new RobotModel(robotConfig as RobotConfig);
  const session = new ConsoleSession(url, (u) => new WebSocket(u));
  const widget = defaultWidget();

  const header = el("div", root);
  header.className = "header";
  const status = el("span", header, "disconnected");
  const tick = el("span", header, "tick 0");
  const badge = el("span", header, "PolicyActive");
  const warn = el("span", header, "");

  const canvas = el("canvas", root);
  canvas.width = 720;
  canvas.height = 460;
  const ctx = canvas.getContext("2d")!;
  const view = defaultView(canvas.width, canvas.height);

  const metrics = el("div", root, "no metrics yet");
  const adrOuter = el("div", root);
  adrOuter.className = "adr-bar";
  const adrInner = el("div", adrOuter);
  adrInner.className = "adr-fill";
  const errorLine = el("div", root, "");
  errorLine.className = "error";

  const controls = el("div", root);
  controls.className = "controls";
  const modeButton = el("button", controls, "switch to manual");
  modeButton.onclick = () => {
    const next = session.mode === "policy" ? "manual" : "policy";
    if (session.setMode(next)) modeButton.textContent = `switch to ${session.mode === "policy" ? "manual" : "policy"}`;
  };
  slider(controls, "damping", 10, 20, 13, (v) => session.setGain("damping", v));
  slider(controls, "velocity scale", 0, 1, 1, (v) => session.setGain("pd_velocity_scale", v));

  const pushTarget = () => {
    if (session.mode === "manual" && widget.sendOnChange) session.sendTarget(targetFrame(widget));
  };
  const axes = ["palm x", "palm y", "palm z"];
  axes.forEach((label, i) =>
    slider(controls, label, PALM_POS_LO[i], PALM_POS_HI[i], widget.palmPos[i], (v) => {
      widget.palmPos[i] = v;
      pushTarget();
    }),
  );
  ["palm rx", "palm ry", "palm rz"].forEach((label, i) =>
    slider(controls, label, -PALM_ROT_BOUND, PALM_ROT_BOUND, widget.palmRot[i], (v) => {
      widget.palmRot[i] = v;
      pushTarget();
    }),
  );
  for (let i = 0; i < 5; i++)
    slider(controls, `hand ${i + 1}`, PCA_LO[i], PCA_HI[i], widget.pca[i], (v) => {
      widget.pca[i] = v;
      pushTarget();
    });

  let prev: StateFrame | null = null;
  let prevAt = 0;
  let latestAt = 0;
  session.onStatus = (s) => (status.textContent = s);
  session.onError = (e) => (errorLine.textContent = `runtime error: ${e.message}`);
  session.onState = (frame) => {
    prev = session.latest === frame ? prev : session.latest;
    prevAt = latestAt;
    latestAt = performance.now();
    tick.textContent = `tick ${frame.tick}`;
    const b = modeBadge(frame.sm_mode);
    badge.textContent = b.label;
    badge.className = b.active ? "badge active" : "badge";
    metrics.textContent = formatMetrics(frame.metrics);
    adrInner.style.width = `${adrBarWidth(frame.adr_fraction)}%`;
    warn.textContent = session.droppedFrames > 0 ? `dropped ${session.droppedFrames}` : "";
  };

  const animate = () => {
    session.flush();
    const latest = session.latest;
    if (latest !== null) {
      const t = prev === null ? 1 : (performance.now() - latestAt) / Math.max(latestAt - prevAt, STATE_PERIOD_MS);
      drawFrame(ctx, model, prev === null ? latest : interpolateFrames(prev, latest, t), view);
    }
    requestAnimationFrame(animate);
  };
  requestAnimationFrame(animate);
  session.connect();
  return session;
}

if (typeof document !== "undefined" && document.getElementById("console-root")) {
  const host = location.hostname || "127.0.0.1";
  start(document.getElementById("console-root")!, `ws://${host}:8732/ws`);
}
