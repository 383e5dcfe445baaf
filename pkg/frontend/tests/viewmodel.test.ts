import { describe, expect, it } from "vitest";

import type { ServerMessage, SlotInfo, Snapshot } from "../src/protocol.js";
import { Transform, ViewModel } from "../src/viewmodel.js";

function makeSnapshot(over: Partial<Snapshot> = {}): Snapshot {
  return {
    n_folds: 2,
    preview_enabled: true,
    goal_id: "G1",
    active_pair: 0,
    simulated_pairs: 0,
    executed: false,
    slots: [
      { pair: 0, kind: "pick", x: null, y: null },
      { pair: 0, kind: "place", x: null, y: null },
    ],
    positions: [[0.25, 0.25, 0.001]],
    sim_time: 0,
    resolution: 1,
    cloth_side: 0.3,
    workspace: { side: 0.5, pixels_per_side: 8, origin: [0, 0] },
    ...over,
  };
}

function placedSlots(): SlotInfo[] {
  return [
    { pair: 0, kind: "pick", x: 0.15, y: 0.25 },
    { pair: 0, kind: "place", x: 0.35, y: 0.25 },
    { pair: 1, kind: "pick", x: 0.1, y: 0.1 },
    { pair: 1, kind: "place", x: 0.4, y: 0.4 },
  ];
}

function vmWith(snapshot: Snapshot): ViewModel {
  const vm = new ViewModel();
  const msg: ServerMessage = {
    kind: "state_snapshot",
    session_id: "s",
    seq: 1,
    payload: snapshot as unknown as Record<string, unknown>,
  };
  vm.apply(msg);
  return vm;
}

describe("Transform", () => {
  const tf = new Transform(0, 0, 0.5, 512);

  it("maps the north edge of the workspace to screen row zero", () => {
    expect(tf.toScreen(0, 0.5)).toEqual({ sx: 0, sy: 0 });
    expect(tf.toScreen(0.5, 0)).toEqual({ sx: 512, sy: 512 });
    expect(tf.toScreen(0.25, 0.25)).toEqual({ sx: 256, sy: 256 });
  });

  it("round-trips screen to workspace", () => {
    const { x, y } = tf.toWorkspace(153.6, 256);
    expect(x).toBeCloseTo(0.15, 10);
    expect(y).toBeCloseTo(0.25, 10);
    const back = tf.toScreen(x, y);
    expect(back.sx).toBeCloseTo(153.6, 8);
    expect(back.sy).toBeCloseTo(256, 8);
  });

  it("clamps points into the workspace square", () => {
    expect(tf.clamp(-0.2, 0.7)).toEqual({ x: 0, y: 0.5 });
    expect(tf.clamp(0.3, 0.1)).toEqual({ x: 0.3, y: 0.1 });
  });

  it("honours a non-zero origin", () => {
    const shifted = new Transform(1, 2, 0.5, 100);
    expect(shifted.toScreen(1, 2.5)).toEqual({ sx: 0, sy: 0 });
    expect(shifted.toWorkspace(50, 50)).toEqual({ x: 1.25, y: 2.25 });
  });
});

describe("command availability", () => {
  it("disables everything before the first snapshot", () => {
    const vm = new ViewModel();
    expect(vm.commandEnabled("Simulate")).toBe(false);
    expect(vm.commandEnabled("Fold")).toBe(false);
    expect(vm.commandEnabled("Undo")).toBe(false);
    expect(vm.commandEnabled("Reset")).toBe(false);
  });

  it("mirrors the no-preview rule: Simulate and Undo stay off", () => {
    const vm = vmWith(
      makeSnapshot({ preview_enabled: false, slots: placedSlots(), active_pair: 1 }),
    );
    expect(vm.commandEnabled("Simulate")).toBe(false);
    expect(vm.commandEnabled("Undo")).toBe(false);
    expect(vm.commandEnabled("Fold")).toBe(true);
    expect(vm.commandEnabled("Reset")).toBe(true);
  });

  it("enables Simulate only when the next pair is fully placed", () => {
    const partial = makeSnapshot();
    partial.slots[0] = { pair: 0, kind: "pick", x: 0.2, y: 0.2 };
    expect(vmWith(partial).commandEnabled("Simulate")).toBe(false);

    const ready = makeSnapshot({ slots: placedSlots(), active_pair: 1 });
    expect(vmWith(ready).commandEnabled("Simulate")).toBe(true);

    const consumed = makeSnapshot({
      slots: placedSlots(),
      active_pair: 1,
      simulated_pairs: 2,
    });
    expect(vmWith(consumed).commandEnabled("Simulate")).toBe(false);
  });

  it("enables Undo only while previews are stacked", () => {
    expect(vmWith(makeSnapshot()).commandEnabled("Undo")).toBe(false);
    const one = makeSnapshot({
      slots: placedSlots(),
      active_pair: 1,
      simulated_pairs: 1,
    });
    expect(vmWith(one).commandEnabled("Undo")).toBe(true);
  });

  it("enables Fold exactly when every pair is placed", () => {
    expect(vmWith(makeSnapshot()).commandEnabled("Fold")).toBe(false);
    const ready = makeSnapshot({ slots: placedSlots(), active_pair: 1 });
    expect(vmWith(ready).commandEnabled("Fold")).toBe(true);
    // Re-running Fold after execution is allowed by the service.
    const done = makeSnapshot({
      slots: placedSlots(),
      active_pair: 1,
      executed: true,
    });
    expect(vmWith(done).commandEnabled("Fold")).toBe(true);
    expect(vmWith(done).commandEnabled("Simulate")).toBe(false);
  });
});

describe("marker interaction state", () => {
  it("locks markers of simulated pairs and of executed sessions", () => {
    const vm = vmWith(
      makeSnapshot({ slots: placedSlots(), active_pair: 1, simulated_pairs: 1 }),
    );
    const s = vm.snapshot!;
    expect(vm.markerLocked(s.slots[0])).toBe(true);
    expect(vm.markerLocked(s.slots[2])).toBe(false);

    const done = vmWith(
      makeSnapshot({ slots: placedSlots(), active_pair: 1, executed: true }),
    );
    expect(done.markerLocked(done.snapshot!.slots[2])).toBe(true);
  });

  it("finds the nearest unlocked marker within the hit radius", () => {
    const vm = vmWith(makeSnapshot({ slots: placedSlots(), active_pair: 1 }));
    expect(vm.slotAt(0.151, 0.251, 0.02)?.kind).toBe("pick");
    expect(vm.slotAt(0.151, 0.251, 0.0001)).toBeNull();
    const locked = vmWith(
      makeSnapshot({ slots: placedSlots(), active_pair: 1, simulated_pairs: 1 }),
    );
    expect(locked.slotAt(0.151, 0.251, 0.02)).toBeNull();
  });

  it("offers slots for placement in pick-then-place order", () => {
    const vm = vmWith(makeSnapshot());
    expect(vm.nextUnplacedSlot()).toMatchObject({ pair: 0, kind: "pick" });
    const snap = makeSnapshot();
    snap.slots[0] = { pair: 0, kind: "pick", x: 0.2, y: 0.2 };
    expect(vmWith(snap).nextUnplacedSlot()).toMatchObject({
      pair: 0,
      kind: "place",
    });
  });
});

describe("message application", () => {
  it("keeps score, result mask, and playback from server messages", () => {
    const vm = new ViewModel();
    vm.apply({
      kind: "fold_result",
      session_id: "s",
      seq: 3,
      payload: {
        folds: [{ grasped_count: 1, settle_converged: true, frames: [] }],
        final_positions: [],
        result_mask: { width: 1, height: 1, rows: ["80"] },
      },
    });
    vm.apply({
      kind: "score",
      session_id: "s",
      seq: 4,
      payload: { iou: 0.5, offset: [0, 0], completion_time: 12 },
    });
    expect(vm.playback).toHaveLength(1);
    expect(vm.resultMask?.rows).toEqual(["80"]);
    expect(vm.score?.iou).toBe(0.5);

    vm.apply({
      kind: "error",
      session_id: "s",
      seq: 5,
      payload: { code: "PairLocked", message: "locked" },
    });
    expect(vm.lastError?.code).toBe("PairLocked");
  });
});
