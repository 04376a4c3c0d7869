/** DOM wiring for the layout editor. `initApp` builds the whole interface
 * inside a root element and returns the live pieces so scripted tests can
 * drive it through real DOM events.
 */
import { ApiClient, ApiError } from "./api";
import { CELL_PX, drawEdges, drawHeatmap, drawScene } from "./draw";
import { payloadChecksum } from "./heatmap";
import { EditorSession } from "./session";
import { emptyScene } from "./scene";
import { unitAt } from "./scene";
import type { CatalogDoc, GraphNodeDoc, Violation } from "./types";

export type Tool = "place" | "move" | "delete" | "paint" | "erase";

export interface App {
  session: EditorSession;
  canvas: HTMLCanvasElement;
  banner: HTMLElement;
  debug: HTMLElement;
  setTool(tool: Tool): void;
  tool(): Tool;
  lastExport: () => string | null;
  redraw(): void;
}

const GRID_W = 64;
const GRID_H = 64;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export async function initApp(root: HTMLElement, baseUrl = ""): Promise<App> {
  const doc = root.ownerDocument;
  const api = new ApiClient(baseUrl);

  const banner = el(doc, "div", "banner");
  const toolbar = el(doc, "div", "toolbar");
  const palette = el(doc, "div", "palette");
  const canvas = el(doc, "canvas", "grid-canvas");
  const debug = el(doc, "div", "debug");
  canvas.width = GRID_W * CELL_PX;
  canvas.height = GRID_H * CELL_PX;
  root.append(banner, toolbar, palette, canvas, debug);

  let catalog: CatalogDoc;
  try {
    catalog = await api.catalog();
  } catch (err) {
    banner.textContent = "service unreachable — editing disabled until it comes back";
    banner.classList.add("error");
    throw err;
  }

  const session = new EditorSession(api, catalog, emptyScene(GRID_W, GRID_H, catalog.name));
  let tool: Tool = "place";
  let moveSource: number | null = null;
  let graphNodes: GraphNodeDoc[] = [];
  let highlighted = new Set<number>();
  let lastExport: string | null = null;

  const say = (text: string, isError = false) => {
    banner.textContent = text;
    banner.classList.toggle("error", isError);
  };

  const showViolations = (violations: Violation[]) => {
    highlighted = new Set(violations.flatMap((v) => v.unit_ids));
    say(violations.map((v) => v.message).join("; "), true);
  };

  const redraw = () => {
    const ctx = canvas.getContext("2d");
    if (!ctx) return; // headless test environment
    drawScene(ctx, session.scene, {
      showForbidden: session.overlays.forbidden,
      highlight: highlighted,
      kindOf: (category) =>
        catalog.entries.find((e) => e.category_id === category)?.kind ?? "architectural",
    });
    if (session.lastDisplay && session.overlays.heatmap) {
      drawHeatmap(ctx, session.lastDisplay);
    }
    if (session.lastResponse && session.overlays.edges) {
      drawEdges(ctx, session.lastResponse, graphNodes);
    }
  };

  const refreshDebug = () => {
    const r = session.lastResponse;
    debug.textContent = r
      ? `checkpoint ${r.checkpoint_id} · nodes ${r.node_count} · ` +
        `heatmap ${payloadChecksum(r.heatmap)} · display ${payloadChecksum(r.display)} · ` +
        `${r.latency_ms.toFixed(1)} ms`
      : "no recommendation yet";
  };

  const afterEdit = (violations: Violation[], action: string) => {
    if (violations.length > 0) {
      showViolations(violations);
    } else {
      highlighted = new Set();
      say(`${action} ok`);
    }
    redraw();
  };

  // --- palette -----------------------------------------------------------
  for (const entry of catalog.entries) {
    if (entry.kind === "forbidden") continue;
    const button = el(doc, "button", "palette-entry", `${entry.name} ${entry.default_footprint[0]}x${entry.default_footprint[1]}`);
    button.dataset.category = String(entry.category_id);
    button.addEventListener("click", () => {
      session.selectedCategory = entry.category_id;
      for (const other of palette.children) other.classList.remove("selected");
      button.classList.add("selected");
    });
    if (entry.category_id === session.selectedCategory) button.classList.add("selected");
    palette.append(button);
  }

  // --- toolbar -----------------------------------------------------------
  const toolButtons = new Map<Tool, HTMLButtonElement>();
  const setTool = (next: Tool) => {
    tool = next;
    moveSource = null;
    for (const [name, button] of toolButtons) button.classList.toggle("selected", name === next);
  };
  for (const name of ["place", "move", "delete", "paint", "erase"] as Tool[]) {
    const button = el(doc, "button", "tool", name);
    button.dataset.tool = name;
    button.addEventListener("click", () => setTool(name));
    toolButtons.set(name, button);
    toolbar.append(button);
  }
  setTool("place");

  const addAction = (label: string, id: string, handler: () => void | Promise<void>) => {
    const button = el(doc, "button", "action", label);
    button.id = id;
    button.addEventListener("click", () => {
      void Promise.resolve(handler()).catch((err) => {
        say(err instanceof ApiError ? `service error ${err.status}` : String(err), true);
      });
    });
    toolbar.append(button);
    return button;
  };

  addAction("undo", "undo", () => {
    if (session.undo()) {
      say("undid");
      redraw();
    }
  });
  addAction("redo", "redo", () => {
    if (session.redo()) {
      say("redid");
      redraw();
    }
  });
  addAction("recommend", "recommend", async () => {
    say("thinking…");
    const response = await session.recommend({ mode: "argmax" });
    try {
      graphNodes = (await api.extract(session.scene)).nodes;
    } catch {
      graphNodes = [];
    }
    say(response.empty ? "no placement found" : `peak at (${response.peak[0]}, ${response.peak[1]})`);
    refreshDebug();
    redraw();
  });
  addAction("accept", "accept", async () => {
    const violations = await session.acceptSuggestion();
    afterEdit(violations, "accepted suggestion");
    refreshDebug();
  });
  addAction("export", "export", () => {
    lastExport = session.exportCanonical();
    try {
      const blob = new Blob([lastExport], { type: "application/json" });
      const anchor = el(doc, "a");
      anchor.href = URL.createObjectURL(blob);
      anchor.download = "layout.scene";
      anchor.click();
      URL.revokeObjectURL(anchor.href);
    } catch {
      // headless environments have no object URLs; the export text is
      // still available programmatically
    }
    say("exported scene");
  });

  for (const overlay of ["heatmap", "edges", "forbidden"] as const) {
    const button = el(doc, "button", "toggle selected", overlay);
    button.id = `toggle-${overlay}`;
    button.addEventListener("click", () => {
      session.overlays[overlay] = !session.overlays[overlay];
      button.classList.toggle("selected", session.overlays[overlay]);
      redraw(); // view-only: no recompute
    });
    toolbar.append(button);
  }

  // --- canvas ------------------------------------------------------------
  const cellFromEvent = (event: MouseEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    const x = Math.floor((event.clientX - rect.left) / CELL_PX);
    const y = Math.floor((event.clientY - rect.top) / CELL_PX);
    return [Math.max(0, Math.min(GRID_W - 1, x)), Math.max(0, Math.min(GRID_H - 1, y))];
  };

  canvas.addEventListener("click", (event) => {
    const [x, y] = cellFromEvent(event as MouseEvent);
    const run = async () => {
      if (tool === "place") {
        afterEdit(await session.place(x, y), `placed at (${x}, ${y})`);
      } else if (tool === "delete") {
        const unit = unitAt(session.scene, x, y);
        if (unit) afterEdit(await session.delete(unit.id), `deleted unit ${unit.id}`);
      } else if (tool === "paint") {
        afterEdit(await session.paintForbidden(x, y, true), "painted forbidden");
      } else if (tool === "erase") {
        afterEdit(await session.paintForbidden(x, y, false), "erased forbidden");
      } else if (tool === "move") {
        if (moveSource === null) {
          const unit = unitAt(session.scene, x, y);
          if (unit) {
            moveSource = unit.id;
            say(`moving unit ${unit.id} — click destination`);
          }
        } else {
          const id = moveSource;
          moveSource = null;
          afterEdit(await session.move(id, x, y), `moved unit ${id}`);
        }
      }
    };
    void run().catch((err) => {
      say(err instanceof ApiError ? `service error ${err.status}` : String(err), true);
    });
  });

  refreshDebug();
  redraw();
  return {
    session,
    canvas,
    banner,
    debug,
    setTool,
    tool: () => tool,
    lastExport: () => lastExport,
    redraw,
  };
}
