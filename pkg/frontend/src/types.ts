/** Wire types mirrored from the HTTP API (docs/service-api.md). */

export interface UnitDoc {
  id: number;
  category: number;
  x: number;
  y: number;
  w: number;
  h: number;
  orientation: number;
}

/** Run-length pairs [value, count] per grid row. */
export type MaskRow = Array<[number, number]>;

export interface SceneDoc {
  format: "siterec.scene/1";
  grid_w: number;
  grid_h: number;
  catalog: string;
  units: UnitDoc[];
  forbidden_rows: MaskRow[];
}

export interface CatalogEntry {
  category_id: number;
  name: string;
  kind: "infrastructure" | "architectural" | "forbidden";
  nominal_height: number;
  default_footprint: [number, number];
}

export interface CatalogDoc {
  name: string;
  entries: CatalogEntry[];
  digest: string;
}

export interface Violation {
  kind: string;
  message: string;
  unit_ids: number[];
}

export interface HeatmapPayload {
  grid_w: number;
  grid_h: number;
  encoding: "f32le";
  values_b64: string;
}

export interface GraphNodeDoc {
  id: number;
  members: number[];
  category: number;
  orientation: number;
  obb: [number, number, number, number];
}

export interface GraphDoc {
  format: "siterec.graph/1";
  nodes: GraphNodeDoc[];
  edges: Array<{
    src: number;
    dst: number;
    direction: number;
    bin: number;
    d: number;
    align: number[];
  }>;
  A: number[][];
}

export interface RecommendResponse {
  heatmap: HeatmapPayload;
  display: HeatmapPayload;
  edges: Array<{ node: number; type: number }>;
  peak: [number, number];
  validity: { forbidden_overlap: number; collision_overlap: number };
  empty: boolean;
  node_count: number;
  checkpoint_id: string;
  latency_ms: number;
}

export interface RecommendOptions {
  mode?: "argmax" | "sample";
  seed?: number;
  target_size?: [number, number] | null;
}
