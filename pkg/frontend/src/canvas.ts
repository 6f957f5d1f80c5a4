// Canvas realization of a display list. Everything interesting happens in
// render.ts; this layer only maps semantic roles to strokes and fills.

import { toScreen, type ViewTransform } from "./geometry.js";
import type { DisplayOp } from "./render.js";

const COLORS = {
  background: "#15181d",
  drivableFill: "#1e232b",
  lane: "#3c4654",
  trailHistory: "#5b6676",
  trailFuture: "#8fa3bd",
  ego: "#f2a33c",
  vehicle: "#6fa8dc",
  pedestrian: "#93c47d",
  cyclist: "#c27ba0",
  errorText: "#e06666",
};

export function drawDisplayList(
  ctx: CanvasRenderingContext2D,
  ops: DisplayOp[],
  tf: ViewTransform,
): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);

  for (const op of ops) {
    switch (op.kind) {
      case "error": {
        ctx.fillStyle = COLORS.errorText;
        ctx.font = "14px system-ui, sans-serif";
        ctx.textAlign = "center";
        ctx.fillText(`cannot draw scenario: ${op.message}`, width / 2, height / 2);
        break;
      }
      case "polygon": {
        ctx.beginPath();
        tracePath(ctx, tf, op.points);
        ctx.closePath();
        ctx.fillStyle = COLORS.drivableFill;
        ctx.fill();
        break;
      }
      case "polyline": {
        ctx.beginPath();
        tracePath(ctx, tf, op.points);
        ctx.lineWidth = op.role === "lane" ? 1 : 1.5;
        ctx.strokeStyle =
          op.role === "lane"
            ? COLORS.lane
            : op.role === "trail-history"
              ? COLORS.trailHistory
              : COLORS.trailFuture;
        ctx.setLineDash(op.dashed ? [6, 4] : []);
        ctx.stroke();
        ctx.setLineDash([]);
        break;
      }
      case "rect": {
        ctx.beginPath();
        tracePath(ctx, tf, op.corners);
        ctx.closePath();
        ctx.fillStyle = op.ego
          ? COLORS.ego
          : op.agentKind === "pedestrian"
            ? COLORS.pedestrian
            : op.agentKind === "cyclist"
              ? COLORS.cyclist
              : COLORS.vehicle;
        ctx.fill();
        ctx.lineWidth = 1;
        ctx.strokeStyle = COLORS.background;
        ctx.stroke();
        break;
      }
    }
  }
}

function tracePath(
  ctx: CanvasRenderingContext2D,
  tf: ViewTransform,
  points: [number, number][],
): void {
  points.forEach((p, i) => {
    const [x, y] = toScreen(tf, p);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
}
