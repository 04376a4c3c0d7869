/** Pure canvas rendering: scene, forbidden mask, heatmap overlay, predicted
 * edges. Everything takes an explicit context so tests can pass a recorder
 * (jsdom has no real 2D context).
 */
import type { DecodedHeatmap } from "./heatmap";
import { rampColor } from "./heatmap";
import { decodeMaskRow } from "./scene";
import type { GraphNodeDoc, RecommendResponse, SceneDoc } from "./types";

export const CELL_PX = 8;

const KIND_COLORS: Record<string, string> = {
  architectural: "#7aa2f7",
  infrastructure: "#9ece6a",
  forbidden: "#f7768e",
};

export interface DrawOptions {
  cellPx?: number;
  showForbidden?: boolean;
  highlight?: Set<number>;
  kindOf?: (category: number) => string;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  scene: SceneDoc,
  opts: DrawOptions = {},
): void {
  const cell = opts.cellPx ?? CELL_PX;
  const W = scene.grid_w * cell;
  const H = scene.grid_h * cell;
  ctx.clearRect(0, 0, W, H);
  ctx.fillStyle = "#1a1b26";
  ctx.fillRect(0, 0, W, H);

  if (opts.showForbidden !== false) {
    ctx.fillStyle = "rgba(247, 118, 142, 0.25)";
    for (let y = 0; y < scene.grid_h; y++) {
      const cells = decodeMaskRow(scene.forbidden_rows[y], scene.grid_w);
      for (let x = 0; x < scene.grid_w; x++) {
        if (cells[x]) ctx.fillRect(x * cell, y * cell, cell, cell);
      }
    }
  }

  ctx.strokeStyle = "rgba(255,255,255,0.06)";
  ctx.lineWidth = 1;
  for (let x = 0; x <= scene.grid_w; x++) {
    ctx.beginPath();
    ctx.moveTo(x * cell + 0.5, 0);
    ctx.lineTo(x * cell + 0.5, H);
    ctx.stroke();
  }
  for (let y = 0; y <= scene.grid_h; y++) {
    ctx.beginPath();
    ctx.moveTo(0, y * cell + 0.5);
    ctx.lineTo(W, y * cell + 0.5);
    ctx.stroke();
  }

  for (const unit of scene.units) {
    const kind = opts.kindOf ? opts.kindOf(unit.category) : "architectural";
    ctx.fillStyle = KIND_COLORS[kind] ?? "#c0caf5";
    ctx.fillRect(unit.x * cell, unit.y * cell, unit.w * cell, unit.h * cell);
    if (opts.highlight?.has(unit.id)) {
      ctx.strokeStyle = "#ffde59";
      ctx.lineWidth = 2;
      ctx.strokeRect(unit.x * cell + 1, unit.y * cell + 1, unit.w * cell - 2, unit.h * cell - 2);
    }
    // Heading tick from the footprint center.
    const cx = (unit.x + unit.w / 2) * cell;
    const cy = (unit.y + unit.h / 2) * cell;
    const angle = (unit.orientation * Math.PI) / 180;
    ctx.strokeStyle = "#1a1b26";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + Math.cos(angle) * cell, cy + Math.sin(angle) * cell);
    ctx.stroke();
  }
}

export function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  hm: DecodedHeatmap,
  cellPx = CELL_PX,
): void {
  for (let x = 0; x < hm.gridW; x++) {
    for (let y = 0; y < hm.gridH; y++) {
      const v = hm.at(x, y);
      if (v <= 0) continue;
      const [r, g, b, a] = rampColor(v);
      ctx.fillStyle = `rgba(${r},${g},${b},${(0.75 * a).toFixed(3)})`;
      ctx.fillRect(x * cellPx, y * cellPx, cellPx, cellPx);
    }
  }
}

/** Arrows from each predicted edge's source node toward the suggestion. */
export function drawEdges(
  ctx: CanvasRenderingContext2D,
  response: RecommendResponse,
  nodes: GraphNodeDoc[],
  cellPx = CELL_PX,
): void {
  const [px, py] = response.peak;
  const tx = (px + 0.5) * cellPx;
  const ty = (py + 0.5) * cellPx;
  ctx.strokeStyle = "#ffde59";
  ctx.fillStyle = "#ffde59";
  ctx.lineWidth = 1.5;
  for (const edge of response.edges) {
    const node = nodes[edge.node];
    if (!node) continue;
    const [nx, ny, nw, nh] = node.obb;
    const sx = (nx + nw / 2) * cellPx;
    const sy = (ny + nh / 2) * cellPx;
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(tx, ty);
    ctx.stroke();
    const angle = Math.atan2(ty - sy, tx - sx);
    ctx.beginPath();
    ctx.moveTo(tx, ty);
    ctx.lineTo(tx - 6 * Math.cos(angle - 0.4), ty - 6 * Math.sin(angle - 0.4));
    ctx.lineTo(tx - 6 * Math.cos(angle + 0.4), ty - 6 * Math.sin(angle + 0.4));
    ctx.closePath();
    ctx.fill();
  }
}
