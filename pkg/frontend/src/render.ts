// Pure scene construction: (payload, step) -> display list. No canvas or
// DOM here, so every drawing decision is unit-testable and re-rendering
// the same inputs yields the same list.

import { rectCorners, type Pt } from "./geometry.js";
import type { AgentJson, ScenarioPayload } from "./types.js";

export interface PolygonOp {
  kind: "polygon";
  role: "drivable";
  points: Pt[];
}

export interface PolylineOp {
  kind: "polyline";
  role: "lane" | "trail-history" | "trail-future";
  points: Pt[];
  dashed: boolean;
  agentId?: string;
}

export interface RectOp {
  kind: "rect";
  agentId: string;
  agentKind: string;
  ego: boolean;
  corners: Pt[];
}

export interface ErrorOp {
  kind: "error";
  message: string;
}

export type DisplayOp = PolygonOp | PolylineOp | RectOp | ErrorOp;

export interface RenderOptions {
  // hide recorded futures (annotation-protocol ablation)
  showFuture?: boolean;
}

/** Structural complaint about a payload, or null when it is drawable. */
export function payloadProblem(payload: unknown): string | null {
  const p = payload as ScenarioPayload;
  if (typeof p !== "object" || p === null) return "payload is not an object";
  if (typeof p.scenario_id !== "string") return "missing scenario_id";
  if (!Number.isFinite(p.dt) || p.dt <= 0) return "dt must be a positive number";
  if (!Number.isInteger(p.n_steps) || p.n_steps < 1) return "n_steps must be a positive integer";
  if (!Number.isInteger(p.split_index) || p.split_index < 0 || p.split_index >= p.n_steps) {
    return "split_index outside the step range";
  }
  if (!Array.isArray(p.agents) || p.agents.length === 0) return "no agents";
  for (const agent of p.agents) {
    if (typeof agent.id !== "string") return "agent without id";
    if (!(agent.length > 0) || !(agent.width > 0)) {
      return `agent ${agent.id}: non-positive size`;
    }
    if (!Array.isArray(agent.states) || agent.states.length !== p.n_steps) {
      return `agent ${agent.id}: states do not cover every step`;
    }
  }
  if (!Array.isArray(p.lanes) || !Array.isArray(p.drivable_area)) {
    return "missing lanes or drivable_area";
  }
  return null;
}

/** Display list for one scenario at one time step: drivable area, lane
 * centerlines, per-agent trails (history dashed, future solid), then one
 * oriented rectangle per agent observed at the step. A malformed payload
 * yields a single error op and nothing else. */
export function renderFrame(
  payload: ScenarioPayload,
  step: number,
  options: RenderOptions = {},
): DisplayOp[] {
  const problem = payloadProblem(payload);
  if (problem !== null) return [{ kind: "error", message: problem }];
  const showFuture = options.showFuture ?? true;
  const at = Math.min(Math.max(Math.trunc(step), 0), payload.n_steps - 1);

  const ops: DisplayOp[] = [];
  for (const ring of payload.drivable_area) {
    ops.push({ kind: "polygon", role: "drivable", points: ring.map((p) => [p[0], p[1]]) });
  }
  for (const lane of payload.lanes) {
    ops.push({
      kind: "polyline",
      role: "lane",
      points: lane.centerline.map((p) => [p[0], p[1]]),
      dashed: false,
    });
  }
  for (const agent of payload.agents) {
    ops.push(...trailOps(agent, 0, payload.split_index, "trail-history"));
    if (showFuture) {
      ops.push(
        ...trailOps(agent, payload.split_index, payload.n_steps - 1, "trail-future"),
      );
    }
  }
  for (const agent of payload.agents) {
    const state = agent.states[at];
    if (state === null) continue;
    ops.push({
      kind: "rect",
      agentId: agent.id,
      agentKind: agent.kind,
      ego: agent.id === payload.ego_id,
      corners: rectCorners(state.x, state.y, state.heading, agent.length, agent.width),
    });
  }
  return ops;
}

function trailOps(
  agent: AgentJson,
  from: number,
  to: number,
  role: "trail-history" | "trail-future",
): PolylineOp[] {
  const out: PolylineOp[] = [];
  let run: Pt[] = [];
  const flush = () => {
    if (run.length >= 2) {
      out.push({
        kind: "polyline",
        role,
        points: run,
        dashed: role === "trail-history",
        agentId: agent.id,
      });
    }
    run = [];
  };
  for (let k = from; k <= to; k++) {
    const state = agent.states[k];
    if (state === null) {
      flush();
      continue;
    }
    run.push([state.x, state.y]);
  }
  flush();
  return out;
}
