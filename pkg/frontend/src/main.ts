/** Browser entry point: renderer, DOM, and the two sockets.
 *
 * Roles are exclusive on the wire, so the UI holds two connections:
 * a viewer socket that receives robot states and carries control
 * commands, and a hand_source socket that only streams the steered
 * skeleton. Everything testable lives in the other modules; this file
 * is wiring.
 */

import * as THREE from "three";

import { TwinClient } from "./client.js";
import type { SocketCtor } from "./client.js";
import { hudLines, recordingIndicator } from "./controls.js";
import { speedBannerVisible } from "./feedback.js";
import { FRAME_NS, HandStreamer, applyKey, applyPointerDelta, applyScroll } from "./input.js";
import { WS_PATH } from "./protocol.js";
import type { Vec3 } from "./protocol.js";
import { TwinScene } from "./scene.js";
import { ViewState } from "./state.js";

function must<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing #${id}`);
  return el as T;
}

const viewEl = must<HTMLDivElement>("view");
const bannerEl = must<HTMLDivElement>("banner");
const hudEl = must<HTMLPreElement>("hud");
const recEl = must<HTMLSpanElement>("rec-indicator");
const toastsEl = must<HTMLDivElement>("toasts");
const connViewerEl = must<HTMLSpanElement>("conn-viewer");
const connSourceEl = must<HTMLSpanElement>("conn-source");

// ?server=host:port targets a backend on another origin
const wsHost = new URLSearchParams(location.search).get("server") ?? location.host;
const url = `ws://${wsHost}${WS_PATH}`;
const view = new ViewState();
const twin = new TwinScene();

// --- renderer ---

const camera = new THREE.PerspectiveCamera(50, 1, 0.01, 20);
camera.up.set(0, 0, 1);
camera.position.set(1.7, -1.5, 1.1);
camera.lookAt(0.45, 0.0, 0.3);

const renderer = new THREE.WebGLRenderer({ antialias: true });
renderer.setPixelRatio(window.devicePixelRatio);
viewEl.appendChild(renderer.domElement);

function resize(): void {
  const w = viewEl.clientWidth;
  const h = viewEl.clientHeight;
  camera.aspect = w / h;
  camera.updateProjectionMatrix();
  renderer.setSize(w, h);
}
window.addEventListener("resize", resize);
resize();

// --- sockets ---

const DEFAULT_START: Vec3 = [0.45, -0.1, 0.28];
const streamer = new HandStreamer(DEFAULT_START);

// the native socket matches SocketLike structurally in everything we touch
const BrowserSocket = WebSocket as unknown as SocketCtor;

const viewer = new TwinClient(url, "viewer", BrowserSocket);
viewer.onStatus = (s) => {
  view.viewerConn = s === "open" ? "open" : "closed";
  connViewerEl.className = `dot ${view.viewerConn}`;
  if (s === "open") {
    const seq = viewer.sendControl("get_model");
    view.noteControl(seq, "get_model");
  }
};
viewer.onEnvelope = (env) => {
  const hadModel = view.model !== null;
  view.applyEnvelope(env);
  if (!hadModel && view.model !== null) {
    twin.buildRobot(view.model);
    const arm = view.model.arms[0];
    if (arm !== undefined) {
      if (arm.anchor !== null) streamer.state.target = [...arm.anchor];
      streamer.volume = arm.workspace;
    }
  }
};

const source = new TwinClient(url, "hand_source", BrowserSocket);
source.onStatus = (s) => {
  view.sourceConn = s === "open" ? "open" : "closed";
  connSourceEl.className = `dot ${view.sourceConn}`;
};

let streamT = 0;
setInterval(() => {
  if (!source.isOpen) return;
  streamT += FRAME_NS;
  source.sendRaw(streamer.tickOnce(streamT));
}, 33);

// --- steering input ---

const canvas = renderer.domElement;
canvas.style.touchAction = "none";
let dragging = false;

canvas.addEventListener("pointerdown", (ev) => {
  if (ev.button === 2) {
    streamer.state.pinchHeld = true;
    ev.preventDefault();
    return;
  }
  dragging = true;
  canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointermove", (ev) => {
  if (dragging) applyPointerDelta(streamer.state, ev.movementX, ev.movementY);
});
canvas.addEventListener("pointerup", (ev) => {
  if (ev.button === 2) streamer.state.pinchHeld = false;
  else dragging = false;
});
canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
canvas.addEventListener(
  "wheel",
  (ev) => {
    ev.preventDefault();
    applyScroll(streamer.state, ev.deltaY);
  },
  { passive: false },
);

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  if (ev.code === "Space") {
    streamer.state.pinchHeld = true;
    ev.preventDefault();
    return;
  }
  applyKey(streamer.state, ev.key);
});
window.addEventListener("keyup", (ev) => {
  if (ev.code === "Space") streamer.state.pinchHeld = false;
});

// --- toolbar ---

function control(cmd: Parameters<TwinClient["sendControl"]>[0], args: Record<string, unknown> = {}): void {
  if (!viewer.isOpen) return;
  const seq = viewer.sendControl(cmd, args);
  view.noteControl(seq, cmd);
}

must<HTMLButtonElement>("btn-record").addEventListener("click", () => control("start_recording"));
must<HTMLButtonElement>("btn-stop").addEventListener("click", () => control("stop_recording"));
must<HTMLButtonElement>("btn-reset").addEventListener("click", () => control("reset"));
must<HTMLButtonElement>("btn-feedback").addEventListener("click", () => {
  control("set_feedback", { mode: view.feedbackMode === "live" ? "none" : "live" });
});
must<HTMLButtonElement>("btn-labels").addEventListener("click", () => {
  const task = must<HTMLInputElement>("label-task").value.trim();
  const condition = must<HTMLSelectElement>("label-condition").value;
  const args: Record<string, unknown> = { condition };
  if (task !== "") args.task = task;
  control("set_labels", args);
});

// --- frame loop ---

function showToasts(): void {
  for (const toast of view.takeToasts()) {
    const el = document.createElement("div");
    el.className = `toast ${toast.kind}`;
    el.textContent = toast.text;
    toastsEl.appendChild(el);
    setTimeout(() => el.remove(), 4000);
  }
}

function frame(): void {
  requestAnimationFrame(frame);
  if (view.lastState !== null) twin.applyState(view.lastState);

  bannerEl.classList.toggle("hidden", !speedBannerVisible(view.lastState));
  const rec = recordingIndicator(view.recording);
  recEl.textContent = rec.label;
  recEl.className = rec.className;
  must<HTMLButtonElement>("btn-feedback").textContent =
    view.feedbackMode === "live" ? "feedback: live" : "feedback: none";
  hudEl.textContent = hudLines(view.lastState).join("\n");
  showToasts();
  renderer.render(twin.scene, camera);
}
frame();
