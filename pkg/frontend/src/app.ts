// Page wiring: two synchronized panes, transport controls, choice buttons,
// keyboard shortcuts, and the service round trip. Configured entirely by
// query parameters (?annotator=...&service=...&strategy=...).

import { AnnotationClient } from "./api.js";
import { drawDisplayList } from "./canvas.js";
import { AnnotationFlow, type FlowState } from "./controller.js";
import { fitTransform, worldBounds, type ViewTransform } from "./geometry.js";
import {
  createPlayback,
  setPlaying,
  setSpeed,
  setStep,
  tick,
  type PlaybackState,
} from "./playback.js";
import { renderFrame } from "./render.js";
import type { Choice, ScenarioPayload } from "./types.js";

const params = new URLSearchParams(window.location.search);
const annotator = params.get("annotator") ?? "anonymous";
const serviceUrl = params.get("service") ?? "";
const strategy = params.get("strategy") ?? undefined;

const client = new AnnotationClient(serviceUrl, annotator);
const flow = new AnnotationFlow(client, strategy);

const canvasA = byId<HTMLCanvasElement>("pane-a");
const canvasB = byId<HTMLCanvasElement>("pane-b");
const scrubber = byId<HTMLInputElement>("scrubber");
const playButton = byId<HTMLButtonElement>("play");
const speedSelect = byId<HTMLSelectElement>("speed");
const futureToggle = byId<HTMLInputElement>("show-future");
const choiceButtons: Record<Choice, HTMLButtonElement> = {
  A: byId("choose-a"),
  skip: byId("choose-skip"),
  B: byId("choose-b"),
};
const statusLine = byId<HTMLElement>("status");
const counter = byId<HTMLElement>("labeled-count");
const overlay = byId<HTMLElement>("overlay");
const overlayMessage = byId<HTMLElement>("overlay-message");
const retryButton = byId<HTMLButtonElement>("retry");

let playback: PlaybackState = createPlayback(1);
let transform: ViewTransform | null = null;
let lastFrameMs: number | null = null;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function payloads(): [ScenarioPayload, ScenarioPayload] | null {
  const pair = flow.state.pair;
  return pair ? [pair.a, pair.b] : null;
}

function lastStep(): number {
  const pair = payloads();
  if (!pair) return 0;
  const cap = futureToggle.checked
    ? Math.max(pair[0].n_steps, pair[1].n_steps) - 1
    : Math.max(pair[0].split_index, pair[1].split_index);
  return Math.max(cap, 0);
}

function onFlowChange(state: FlowState): void {
  counter.textContent = String(state.labeled);
  const ready = state.phase === "ready";
  for (const button of Object.values(choiceButtons)) button.disabled = !ready;

  if (state.phase === "ready" && state.pair) {
    // fresh pair: shared fit, playback reset to step 0 paused
    transform = null;
    playback = createPlayback(lastStep() + 1);
    scrubber.max = String(lastStep());
    scrubber.value = "0";
    statusLine.textContent =
      `pair ${state.pair.pair_id}: ${state.pair.a.scenario_id} vs ${state.pair.b.scenario_id}`;
    overlay.hidden = true;
  } else if (state.phase === "loading" || state.phase === "submitting") {
    statusLine.textContent = state.phase === "loading" ? "fetching pair..." : "submitting...";
  } else if (state.phase === "exhausted") {
    overlayMessage.textContent =
      `every pair is labeled - thank you. ${state.labeled} labels this session.`;
    retryButton.hidden = true;
    overlay.hidden = false;
  } else if (state.phase === "error") {
    overlayMessage.textContent = `request failed: ${state.lastError ?? "unknown error"}`;
    retryButton.hidden = false;
    overlay.hidden = false;
  }
}

function draw(nowMs: number): void {
  const pair = payloads();
  if (pair) {
    const dt = pair[0].dt;
    if (lastFrameMs !== null) {
      playback = tick(playback, (nowMs - lastFrameMs) / 1000, dt);
    }
    scrubber.value = String(playback.step);
    if (transform === null) {
      transform = fitTransform(worldBounds(pair), canvasA.width, canvasA.height);
    }
    const options = { showFuture: futureToggle.checked };
    drawDisplayList(ctx2d(canvasA), renderFrame(pair[0], playback.step, options), transform);
    drawDisplayList(ctx2d(canvasB), renderFrame(pair[1], playback.step, options), transform);
  }
  lastFrameMs = nowMs;
  playButton.textContent = playback.playing ? "pause" : "play";
  window.requestAnimationFrame(draw);
}

function ctx2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d context unavailable");
  return ctx;
}

scrubber.addEventListener("input", () => {
  playback = setPlaying(setStep(playback, Number(scrubber.value)), false);
});
playButton.addEventListener("click", () => {
  playback = setPlaying(playback, !playback.playing);
});
speedSelect.addEventListener("change", () => {
  playback = setSpeed(playback, Number(speedSelect.value));
});
futureToggle.addEventListener("change", () => {
  playback = createPlayback(lastStep() + 1);
  scrubber.max = String(lastStep());
});
for (const [choice, button] of Object.entries(choiceButtons)) {
  button.addEventListener("click", () => void flow.choose(choice as Choice));
}
retryButton.addEventListener("click", () => void flow.retry());

window.addEventListener("keydown", (event) => {
  if (event.repeat) return;
  switch (event.key) {
    case "ArrowLeft":
      void flow.choose("A");
      break;
    case "ArrowRight":
      void flow.choose("B");
      break;
    case "s":
      void flow.choose("skip");
      break;
    case " ":
      event.preventDefault();
      playback = setPlaying(playback, !playback.playing);
      break;
  }
});

byId<HTMLElement>("annotator-name").textContent = annotator;
flow.onChange = onFlowChange;
void flow.loadNext();
window.requestAnimationFrame(draw);
