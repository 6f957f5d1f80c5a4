// World-space helpers: oriented rectangles and the shared world-to-screen
// fit. Both panes of a pair use one transform so apparent speeds compare.

import type { ScenarioPayload } from "./types.js";

export type Pt = [number, number];

export interface WorldBounds {
  minX: number;
  maxX: number;
  minY: number;
  maxY: number;
}

export interface ViewTransform {
  scale: number;
  // screen position of the world point (minX, maxY); screen y grows down
  px0: number;
  py0: number;
  minX: number;
  maxY: number;
}

/** Corners of a length x width rectangle centered at (x, y), long axis
 * along the heading, counterclockwise from the front-left corner. */
export function rectCorners(
  x: number,
  y: number,
  heading: number,
  length: number,
  width: number,
): Pt[] {
  const c = Math.cos(heading);
  const s = Math.sin(heading);
  const hl = length / 2;
  const hw = width / 2;
  const local: Pt[] = [
    [hl, hw],
    [hl, -hw],
    [-hl, -hw],
    [-hl, hw],
  ];
  return local.map(([lx, ly]) => [x + lx * c - ly * s, y + lx * s + ly * c]);
}

/** Tight bounds over every observed agent state, lane point, and drivable
 * ring of the given payloads. */
export function worldBounds(payloads: ScenarioPayload[]): WorldBounds {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  const take = (x: number, y: number) => {
    if (x < minX) minX = x;
    if (x > maxX) maxX = x;
    if (y < minY) minY = y;
    if (y > maxY) maxY = y;
  };
  for (const payload of payloads) {
    for (const agent of payload.agents) {
      const reach = Math.hypot(agent.length, agent.width) / 2;
      for (const state of agent.states) {
        if (state === null) continue;
        take(state.x - reach, state.y - reach);
        take(state.x + reach, state.y + reach);
      }
    }
    for (const lane of payload.lanes) {
      for (const [x, y] of lane.centerline) take(x, y);
    }
    for (const ring of payload.drivable_area) {
      for (const [x, y] of ring) take(x, y);
    }
  }
  if (minX > maxX) return { minX: 0, maxX: 1, minY: 0, maxY: 1 };
  return { minX, maxX, minY, maxY };
}

/** Uniform-scale fit of the bounds into a view, centered, y flipped so
 * world north is screen up. */
export function fitTransform(
  bounds: WorldBounds,
  viewWidth: number,
  viewHeight: number,
  margin = 16,
): ViewTransform {
  const spanX = Math.max(bounds.maxX - bounds.minX, 1e-6);
  const spanY = Math.max(bounds.maxY - bounds.minY, 1e-6);
  const scale = Math.min(
    (viewWidth - 2 * margin) / spanX,
    (viewHeight - 2 * margin) / spanY,
  );
  const padX = (viewWidth - 2 * margin - spanX * scale) / 2;
  const padY = (viewHeight - 2 * margin - spanY * scale) / 2;
  return {
    scale,
    px0: margin + padX,
    py0: margin + padY,
    minX: bounds.minX,
    maxY: bounds.maxY,
  };
}

export function toScreen(tf: ViewTransform, p: Pt): Pt {
  return [
    tf.px0 + (p[0] - tf.minX) * tf.scale,
    tf.py0 + (tf.maxY - p[1]) * tf.scale,
  ];
}
