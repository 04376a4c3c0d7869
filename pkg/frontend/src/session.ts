/** Editing session: the working scene, undo/redo, overlay state, and the
 * commit protocol (server-validated edits; invalid edits leave the scene
 * untouched and surface their violations).
 *
 * Undo/redo stacks hold canonical document strings, so a round-trip
 * restores the scene byte-for-byte.
 */
import { ApiClient } from "./api";
import { decodeHeatmap, type DecodedHeatmap } from "./heatmap";
import * as scenes from "./scene";
import type {
  CatalogDoc,
  RecommendOptions,
  RecommendResponse,
  SceneDoc,
  Violation,
} from "./types";

export interface Overlays {
  heatmap: boolean;
  edges: boolean;
  forbidden: boolean;
}

export class EditorSession {
  private undoStack: string[] = [];
  private redoStack: string[] = [];
  private current: string;

  selectedCategory: number;
  lastResponse: RecommendResponse | null = null;
  lastHeatmap: DecodedHeatmap | null = null;
  lastDisplay: DecodedHeatmap | null = null;
  lastViolations: Violation[] = [];
  overlays: Overlays = { heatmap: true, edges: true, forbidden: true };

  constructor(
    readonly api: ApiClient,
    readonly catalog: CatalogDoc,
    scene: SceneDoc,
  ) {
    this.current = scenes.exportScene(scene);
    const placeable = catalog.entries.find((e) => e.kind !== "forbidden");
    this.selectedCategory = placeable ? placeable.category_id : 0;
  }

  get scene(): SceneDoc {
    return scenes.importScene(this.current);
  }

  exportCanonical(): string {
    return this.current;
  }

  footprintOf(category: number): [number, number] {
    const entry = this.catalog.entries.find((e) => e.category_id === category);
    if (!entry) throw new Error(`unknown category ${category}`);
    return entry.default_footprint;
  }

  /** Validate a candidate scene; commit it when clean. Returns violations
   * (empty on success). */
  private async commit(candidate: SceneDoc): Promise<Violation[]> {
    const violations = await this.api.validate(candidate);
    this.lastViolations = violations;
    if (violations.length > 0) return violations;
    this.undoStack.push(this.current);
    this.redoStack = [];
    this.current = scenes.exportScene(candidate);
    return [];
  }

  place(x: number, y: number, category = this.selectedCategory): Promise<Violation[]> {
    const [w, h] = this.footprintOf(category);
    return this.commit(scenes.placeUnit(this.scene, category, x, y, w, h));
  }

  move(unitId: number, x: number, y: number): Promise<Violation[]> {
    return this.commit(scenes.moveUnit(this.scene, unitId, x, y));
  }

  delete(unitId: number): Promise<Violation[]> {
    return this.commit(scenes.deleteUnit(this.scene, unitId));
  }

  paintForbidden(x: number, y: number, value: boolean): Promise<Violation[]> {
    return this.commit(scenes.paintForbidden(this.scene, x, y, value));
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (prev === undefined) return false;
    this.redoStack.push(this.current);
    this.current = prev;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (next === undefined) return false;
    this.undoStack.push(this.current);
    this.current = next;
    return true;
  }

  async recommend(options: RecommendOptions = {}): Promise<RecommendResponse> {
    const response = await this.api.recommend(this.scene, options);
    this.lastResponse = response;
    this.lastHeatmap = decodeHeatmap(response.heatmap);
    this.lastDisplay = decodeHeatmap(response.display);
    return response;
  }

  /** Place the selected category centered on the last response's peak cell
   * (snapped into the grid), then clear the overlay. The peak cell ends up
   * inside the footprint. */
  async acceptSuggestion(): Promise<Violation[]> {
    if (!this.lastResponse) throw new Error("no recommendation to accept");
    const { grid_w, grid_h } = this.scene;
    const [w, h] = this.footprintOf(this.selectedCategory);
    const [px, py] = this.lastResponse.peak;
    const x = Math.max(0, Math.min(grid_w - w, px - Math.floor(w / 2)));
    const y = Math.max(0, Math.min(grid_h - h, py - Math.floor(h / 2)));
    const violations = await this.place(x, y);
    if (violations.length === 0) this.clearOverlay();
    return violations;
  }

  clearOverlay(): void {
    this.lastResponse = null;
    this.lastHeatmap = null;
    this.lastDisplay = null;
  }
}
