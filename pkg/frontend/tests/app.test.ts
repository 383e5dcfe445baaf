import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { App, createApp, formatClock } from "../src/app.js";
import { GOALS, MockServer, tick } from "./mockServer.js";

let root: HTMLElement;
let server: MockServer;
let apps: App[];

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
  server = new MockServer();
  apps = [];
});

afterEach(() => {
  for (const app of apps) app.dispose();
});

function boot(options: { now?: () => number } = {}): App {
  const app = createApp(root, {
    socketFactory: () => server.connect(),
    frameDelayMs: 0,
    ...options,
  });
  apps.push(app);
  return app;
}

function el<T extends HTMLElement>(id: string): T {
  const node = root.querySelector<T>(`#${id}`);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

const btn = (id: string) => el<HTMLButtonElement>(id);
const canvas = () => el<HTMLCanvasElement>("board");

/** Workspace metres -> client pixels for the default 0.5 m / 512 px view
 * (layout rects are zero-sized here, so client pixels equal canvas pixels). */
const px = (wx: number) => (wx / 0.5) * 512;
const py = (wy: number) => ((0.5 - wy) / 0.5) * 512;

function mouse(target: EventTarget, type: string, cx: number, cy: number) {
  target.dispatchEvent(
    new MouseEvent(type, { clientX: cx, clientY: cy, bubbles: true }),
  );
}

/** Press at `from`, drag through a midpoint, release at `to`. */
function drag(from: [number, number], to: [number, number]) {
  mouse(canvas(), "mousedown", px(from[0]), py(from[1]));
  mouse(document, "mousemove", (px(from[0]) + px(to[0])) / 2, (py(from[1]) + py(to[1])) / 2);
  mouse(document, "mousemove", px(to[0]), py(to[1]));
  mouse(document, "mouseup", px(to[0]), py(to[1]));
}

async function startSession(app: App, opts: { preview?: boolean } = {}) {
  await tick();
  if (opts.preview === false) {
    el<HTMLInputElement>("preview-check").checked = false;
  }
  btn("btn-start").click();
  return app;
}

const PAIR0 = { pick: [0.15, 0.25], place: [0.35, 0.25] } as const;
const PAIR1 = { pick: [0.1, 0.1], place: [0.4, 0.4] } as const;

function placeAllMarkers() {
  drag([...PAIR0.pick], [...PAIR0.pick]);
  drag([...PAIR0.place], [...PAIR0.place]);
  drag([...PAIR1.pick], [...PAIR1.pick]);
  drag([...PAIR1.place], [...PAIR1.place]);
}

describe("connect", () => {
  it("lists goals and enables start once the socket opens", async () => {
    const app = boot();
    expect(btn("btn-start").disabled).toBe(true);
    await tick();
    expect(app.connected).toBe(true);
    expect(el("banner").classList.contains("hidden")).toBe(true);
    const select = el<HTMLSelectElement>("goal-select");
    expect(select.options).toHaveLength(GOALS.length);
    expect(el("goal-desc").textContent).toBe(GOALS[0].description);
    expect(btn("btn-start").disabled).toBe(false);
  });

  it("shows goal descriptions as the selection changes", async () => {
    boot();
    await tick();
    const select = el<HTMLSelectElement>("goal-select");
    select.value = "G2";
    select.dispatchEvent(new Event("change", { bubbles: true }));
    expect(el("goal-desc").textContent).toBe(GOALS[1].description);
  });

  it("survives a down server and recovers on retry", async () => {
    server.down = true;
    const app = boot();
    await tick();
    expect(app.connected).toBe(false);
    expect(el("banner").classList.contains("hidden")).toBe(false);
    expect(el("banner-text").textContent).toMatch(/connection/i);
    expect(btn("btn-start").disabled).toBe(true);

    server.down = false;
    btn("btn-retry").click();
    await tick();
    expect(app.connected).toBe(true);
    expect(el("banner").classList.contains("hidden")).toBe(true);
    expect(btn("btn-start").disabled).toBe(false);
  });

  it("drops into a visible error state when the connection dies mid-session", async () => {
    const app = await startSession(boot());
    placeAllMarkers();
    expect(btn("btn-fold").disabled).toBe(false);
    server.dropConnections();
    expect(app.connected).toBe(false);
    expect(el("banner").classList.contains("hidden")).toBe(false);
    expect(btn("btn-fold").disabled).toBe(true);
    expect(btn("btn-simulate").disabled).toBe(true);
  });

  it("renders Simulate and Undo disabled for a preview-off session", async () => {
    const app = await startSession(boot(), { preview: false });
    expect(app.vm.snapshot?.preview_enabled).toBe(false);
    placeAllMarkers();
    expect(btn("btn-simulate").disabled).toBe(true);
    expect(btn("btn-undo").disabled).toBe(true);
    expect(btn("btn-fold").disabled).toBe(false);
    expect(btn("btn-reset").disabled).toBe(false);
  });
});

describe("demonstration flow", () => {
  it("places markers by drag, previews, undoes, re-places, folds, and shows the IoU", async () => {
    const app = await startSession(boot(), {});
    expect(el("setup").classList.contains("hidden")).toBe(true);
    expect(el("live").classList.contains("hidden")).toBe(false);
    expect(el("goal-name").textContent).toContain("G1");

    // Four markers, each landed by a drag and echoed back by the server.
    drag([0.12, 0.22], [...PAIR0.pick]);
    let slots = app.vm.snapshot!.slots;
    expect(slots[0].x).toBeCloseTo(PAIR0.pick[0], 6);
    expect(slots[0].y).toBeCloseTo(PAIR0.pick[1], 6);

    drag([...PAIR0.place], [...PAIR0.place]);
    drag([...PAIR1.pick], [...PAIR1.pick]);
    drag([...PAIR1.place], [...PAIR1.place]);
    slots = app.vm.snapshot!.slots;
    expect(slots).toHaveLength(4);
    expect(slots.every((s) => s.x !== null)).toBe(true);
    expect(app.vm.snapshot!.active_pair).toBe(1);

    // Preview the first fold.
    expect(btn("btn-simulate").disabled).toBe(false);
    btn("btn-simulate").click();
    expect(app.vm.snapshot!.simulated_pairs).toBe(1);
    expect(app.vm.playback).toHaveLength(1);
    expect(app.vm.playbackPair).toBe(0);
    expect(btn("btn-undo").disabled).toBe(false);
    expect(btn("btn-replay").disabled).toBe(false);

    // Undo unlocks the pair again.
    btn("btn-undo").click();
    expect(app.vm.snapshot!.simulated_pairs).toBe(0);

    // Re-place the first pick by dragging the existing marker.
    drag([...PAIR0.pick], [0.2, 0.3]);
    slots = app.vm.snapshot!.slots;
    expect(slots[0].x).toBeCloseTo(0.2, 6);
    expect(slots[0].y).toBeCloseTo(0.3, 6);

    // Execute and read the score off the header.
    btn("btn-fold").click();
    expect(app.vm.snapshot!.executed).toBe(true);
    expect(app.vm.resultMask).not.toBeNull();
    expect(el("score").textContent).toBe("IoU 87.3%");
    expect(el("timer").textContent).toBe(formatClock(42.4));
    expect(btn("btn-simulate").disabled).toBe(true);
    expect(btn("btn-undo").disabled).toBe(true);
    expect(btn("btn-reset").disabled).toBe(false);

    const commands = server.received
      .filter((m) => m.kind === "command")
      .map((m) => (m.payload as { name: string }).name);
    expect(commands).toEqual(["Simulate", "Undo", "Fold"]);
    expect(server.received.filter((m) => m.kind === "place_marker")).toHaveLength(5);
  });

  it("coalesces a drag into one place_marker message", async () => {
    await startSession(boot());
    server.received.length = 0;
    mouse(canvas(), "mousedown", px(0.2), py(0.2));
    for (let i = 0; i < 20; i++) {
      mouse(document, "mousemove", px(0.2) + i, py(0.2) - i);
    }
    mouse(document, "mouseup", px(0.3), py(0.3));
    const placed = server.received.filter((m) => m.kind === "place_marker");
    expect(placed).toHaveLength(1);
    expect((placed[0].payload as { x: number }).x).toBeCloseTo(0.3, 6);
  });

  it("clamps an off-canvas drop before sending", async () => {
    const app = await startSession(boot());
    mouse(canvas(), "mousedown", px(0.2), py(0.2));
    mouse(document, "mousemove", 700, py(0.25));
    mouse(document, "mouseup", 700, -40);
    const placed = server.received.filter((m) => m.kind === "place_marker");
    expect(placed).toHaveLength(1);
    const sent = placed[0].payload as { x: number; y: number };
    expect(sent.x).toBe(0.5);
    expect(sent.y).toBe(0.5);
    expect(app.vm.snapshot!.slots[0].x).toBe(0.5);
  });

  it("refuses to drag a locked marker and points at Undo", async () => {
    const app = await startSession(boot());
    placeAllMarkers();
    btn("btn-simulate").click();
    expect(app.vm.snapshot!.simulated_pairs).toBe(1);

    const before = server.received.length;
    drag([...PAIR0.pick], [0.3, 0.3]);
    expect(server.received).toHaveLength(before);
    expect(el("hint").textContent).toMatch(/undo/i);
    // The marker did not move.
    expect(app.vm.snapshot!.slots[0].x).toBeCloseTo(PAIR0.pick[0], 6);
  });

  it("starts over cleanly via Reset", async () => {
    const app = await startSession(boot());
    placeAllMarkers();
    btn("btn-fold").click();
    expect(app.vm.snapshot!.executed).toBe(true);
    btn("btn-reset").click();
    const s = app.vm.snapshot!;
    expect(s.executed).toBe(false);
    expect(s.slots).toHaveLength(2);
    expect(s.slots.every((sl) => sl.x === null)).toBe(true);
    expect(btn("btn-fold").disabled).toBe(true);
  });
});

describe("formatClock", () => {
  it("renders m:ss with flooring and a zero floor", () => {
    expect(formatClock(0)).toBe("0:00");
    expect(formatClock(42.4)).toBe("0:42");
    expect(formatClock(65)).toBe("1:05");
    expect(formatClock(-3)).toBe("0:00");
    expect(formatClock(600)).toBe("10:00");
  });
});
