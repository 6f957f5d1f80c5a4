import { describe, expect, it } from "vitest";

import { renderFrame, type PolylineOp, type RectOp } from "../src/render.js";
import type { AgentStateJson, ScenarioPayload } from "../src/types.js";

const N_STEPS = 18;
const SPLIT = 9;
const DT = 0.5;

function state(x: number, y: number, heading = 0, speed = 0): AgentStateJson {
  return {
    t: 0,
    x,
    y,
    heading,
    vx: speed * Math.cos(heading),
    vy: speed * Math.sin(heading),
  };
}

function payload(overrides: Partial<ScenarioPayload> = {}): ScenarioPayload {
  return {
    scenario_id: "s-0",
    dt: DT,
    split_index: SPLIT,
    n_steps: N_STEPS,
    ego_id: "ego",
    agents: [
      {
        id: "ego",
        kind: "vehicle",
        length: 4.5,
        width: 2.0,
        states: Array.from({ length: N_STEPS }, (_, k) => state(5 * k, 0)),
      },
      {
        id: "parked",
        kind: "vehicle",
        length: 4.5,
        width: 2.0,
        states: Array.from({ length: N_STEPS }, () => state(30, 8)),
      },
    ],
    lanes: [],
    drivable_area: [],
    ...overrides,
  };
}

function rects(ops: ReturnType<typeof renderFrame>): RectOp[] {
  return ops.filter((op): op is RectOp => op.kind === "rect");
}

function trails(ops: ReturnType<typeof renderFrame>): PolylineOp[] {
  return ops.filter(
    (op): op is PolylineOp => op.kind === "polyline" && op.role !== "lane",
  );
}

describe("renderFrame", () => {
  it("draws a stationary agent as the identical rectangle every frame", () => {
    const p = payload();
    const first = rects(renderFrame(p, 0)).find((r) => r.agentId === "parked");
    for (const step of [1, SPLIT, N_STEPS - 1]) {
      const again = rects(renderFrame(p, step)).find((r) => r.agentId === "parked");
      expect(again).toEqual(first);
    }
  });

  it("hides an agent on steps past its last present state", () => {
    const p = payload();
    p.agents[1].states = p.agents[1].states.map((s, k) => (k <= 4 ? s : null));
    const visible = rects(renderFrame(p, 4)).map((r) => r.agentId);
    const hidden = rects(renderFrame(p, 5)).map((r) => r.agentId);
    expect(visible).toContain("parked");
    expect(hidden).not.toContain("parked");
    expect(hidden).toContain("ego");
  });

  it("hides an agent on a mid-sequence missing frame only", () => {
    const p = payload();
    p.agents[1].states[6] = null;
    expect(rects(renderFrame(p, 6)).map((r) => r.agentId)).not.toContain("parked");
    expect(rects(renderFrame(p, 7)).map((r) => r.agentId)).toContain("parked");
  });

  it("turns heading pi/2 into a vertical long axis", () => {
    const p = payload();
    p.agents[0].states = p.agents[0].states.map(() => state(0, 0, Math.PI / 2));
    const rect = rects(renderFrame(p, 0)).find((r) => r.agentId === "ego")!;
    const xs = rect.corners.map((c) => c[0]);
    const ys = rect.corners.map((c) => c[1]);
    expect(Math.max(...xs) - Math.min(...xs)).toBeCloseTo(2.0, 12);
    expect(Math.max(...ys) - Math.min(...ys)).toBeCloseTo(4.5, 12);
  });

  it("is pure in (payload, step)", () => {
    const p = payload();
    expect(renderFrame(p, 7)).toEqual(renderFrame(p, 7));
  });

  it("marks only the ego rectangle as ego", () => {
    const byId = new Map(rects(renderFrame(payload(), 0)).map((r) => [r.agentId, r.ego]));
    expect(byId.get("ego")).toBe(true);
    expect(byId.get("parked")).toBe(false);
  });

  it("draws history trails dashed up to the split and futures solid after it", () => {
    const ego = trails(renderFrame(payload(), 0)).filter((t) => t.agentId === "ego");
    const history = ego.find((t) => t.role === "trail-history")!;
    const future = ego.find((t) => t.role === "trail-future")!;
    expect(history.dashed).toBe(true);
    expect(history.points).toHaveLength(SPLIT + 1);
    expect(future.dashed).toBe(false);
    expect(future.points).toHaveLength(N_STEPS - SPLIT);
    // the two trails connect at the split state
    expect(history.points[SPLIT]).toEqual(future.points[0]);
  });

  it("drops future trails when showFuture is off", () => {
    const ops = trails(renderFrame(payload(), 0, { showFuture: false }));
    expect(ops.some((t) => t.role === "trail-future")).toBe(false);
    expect(ops.some((t) => t.role === "trail-history")).toBe(true);
  });

  it("breaks a trail at missing frames instead of bridging the gap", () => {
    const p = payload();
    p.agents[0].states[3] = null;
    const history = trails(renderFrame(p, 0)).filter(
      (t) => t.agentId === "ego" && t.role === "trail-history",
    );
    expect(history).toHaveLength(2);
    expect(history[0].points).toHaveLength(3);
    expect(history[1].points).toHaveLength(SPLIT - 3);
  });

  it("shows only an error panel for a malformed payload", () => {
    const broken = payload();
    broken.agents[0].states = broken.agents[0].states.slice(0, 3);
    const ops = renderFrame(broken, 0);
    expect(ops).toHaveLength(1);
    expect(ops[0]).toMatchObject({ kind: "error" });
  });

  it("clamps out-of-range steps instead of failing", () => {
    const p = payload();
    expect(renderFrame(p, -5)).toEqual(renderFrame(p, 0));
    expect(renderFrame(p, 999)).toEqual(renderFrame(p, N_STEPS - 1));
  });
});
