/** Client-side scene state: placement edits, forbidden-mask painting, and
 * canonical export. All edits are pure (return a new document); validity is
 * the server's call (the session layer asks /v1/validate before committing).
 */
import { dumpsCanonical } from "./canonical";
import type { MaskRow, SceneDoc, UnitDoc } from "./types";

export function emptyScene(gridW: number, gridH: number, catalog: string): SceneDoc {
  return {
    format: "siterec.scene/1",
    grid_w: gridW,
    grid_h: gridH,
    catalog,
    units: [],
    forbidden_rows: Array.from({ length: gridH }, () => [[0, gridW]] as MaskRow),
  };
}

export function cloneScene(scene: SceneDoc): SceneDoc {
  return JSON.parse(JSON.stringify(scene)) as SceneDoc;
}

export function exportScene(scene: SceneDoc): string {
  return dumpsCanonical(scene);
}

export function importScene(text: string): SceneDoc {
  const doc = JSON.parse(text) as SceneDoc;
  if (doc.format !== "siterec.scene/1") {
    throw new Error(`unsupported scene format: ${String(doc.format)}`);
  }
  return doc;
}

export function nextUnitId(scene: SceneDoc): number {
  return scene.units.reduce((m, u) => Math.max(m, u.id + 1), 0);
}

export function unitAt(scene: SceneDoc, x: number, y: number): UnitDoc | undefined {
  // Last placed wins, matching visual stacking order.
  for (let i = scene.units.length - 1; i >= 0; i--) {
    const u = scene.units[i];
    if (x >= u.x && x < u.x + u.w && y >= u.y && y < u.y + u.h) return u;
  }
  return undefined;
}

export function placeUnit(
  scene: SceneDoc,
  category: number,
  x: number,
  y: number,
  w: number,
  h: number,
  orientation = 0,
): SceneDoc {
  const next = cloneScene(scene);
  next.units.push({ id: nextUnitId(scene), category, x, y, w, h, orientation });
  return next;
}

export function moveUnit(scene: SceneDoc, unitId: number, x: number, y: number): SceneDoc {
  const next = cloneScene(scene);
  const unit = next.units.find((u) => u.id === unitId);
  if (!unit) throw new Error(`no unit with id ${unitId}`);
  unit.x = x;
  unit.y = y;
  return next;
}

export function deleteUnit(scene: SceneDoc, unitId: number): SceneDoc {
  const next = cloneScene(scene);
  const idx = next.units.findIndex((u) => u.id === unitId);
  if (idx < 0) throw new Error(`no unit with id ${unitId}`);
  next.units.splice(idx, 1);
  return next;
}

/** Decode one RLE row into grid_w booleans. */
export function decodeMaskRow(row: MaskRow, gridW: number): boolean[] {
  const out: boolean[] = [];
  for (const [value, count] of row) {
    for (let i = 0; i < count; i++) out.push(value === 1);
  }
  if (out.length !== gridW) throw new Error(`mask row decodes to ${out.length} cells, grid is ${gridW}`);
  return out;
}

export function encodeMaskRow(cells: boolean[]): MaskRow {
  const row: MaskRow = [];
  for (const cell of cells) {
    const value = cell ? 1 : 0;
    const last = row[row.length - 1];
    if (last && last[0] === value) last[1] += 1;
    else row.push([value, 1]);
  }
  return row;
}

export function isForbidden(scene: SceneDoc, x: number, y: number): boolean {
  return decodeMaskRow(scene.forbidden_rows[y], scene.grid_w)[x];
}

export function paintForbidden(scene: SceneDoc, x: number, y: number, value: boolean): SceneDoc {
  const next = cloneScene(scene);
  const cells = decodeMaskRow(next.forbidden_rows[y], next.grid_w);
  cells[x] = value;
  next.forbidden_rows[y] = encodeMaskRow(cells);
  return next;
}
