/** Canvas painting for the fold workbench.  Every entry point tolerates a
 * null 2D context so logic tests can run in DOM environments without a
 * canvas implementation. */

import { decodeMask } from "./protocol.js";
import type { Snapshot, SlotInfo, WireMask } from "./protocol.js";
import { Transform, ViewModel } from "./viewmodel.js";

const CLOTH_FILL = "rgba(66, 135, 245, 0.35)";
const CLOTH_EDGE = "rgba(66, 135, 245, 0.9)";
const GOAL_FILL = "rgba(46, 160, 67, 0.25)";
const MATCH_FILL = "rgba(46, 160, 67, 0.55)";
const MISS_FILL = "rgba(215, 58, 73, 0.55)";
const PICK_COLOR = "#d97706";
const PLACE_COLOR = "#7c3aed";
const LOCKED_ALPHA = 0.35;

export function getContext(
  canvas: HTMLCanvasElement,
): CanvasRenderingContext2D | null {
  try {
    return canvas.getContext("2d");
  } catch {
    return null;
  }
}

function maskToImage(
  ctx: CanvasRenderingContext2D,
  mask: WireMask,
  rgba: [number, number, number, number],
): ImageData {
  const bits = decodeMask(mask);
  const img = ctx.createImageData(mask.width, mask.height);
  for (let i = 0; i < bits.length; i++) {
    if (!bits[i]) continue;
    img.data[i * 4] = rgba[0];
    img.data[i * 4 + 1] = rgba[1];
    img.data[i * 4 + 2] = rgba[2];
    img.data[i * 4 + 3] = rgba[3];
  }
  return img;
}

/** Paint a bitmask stretched across the whole canvas. */
function drawMask(
  ctx: CanvasRenderingContext2D,
  canvas: HTMLCanvasElement,
  mask: WireMask,
  rgba: [number, number, number, number],
): void {
  const scratch = canvas.ownerDocument.createElement("canvas");
  scratch.width = mask.width;
  scratch.height = mask.height;
  const sctx = getContext(scratch);
  if (!sctx) return;
  sctx.putImageData(maskToImage(sctx, mask, rgba), 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(scratch, 0, 0, canvas.width, canvas.height);
}

/** Paint the two-colour comparison: match where both masks agree on cloth,
 * miss where exactly one claims it. */
function drawComparison(
  ctx: CanvasRenderingContext2D,
  canvas: HTMLCanvasElement,
  result: WireMask,
  goal: WireMask,
): void {
  if (result.width !== goal.width || result.height !== goal.height) return;
  const a = decodeMask(result);
  const b = decodeMask(goal);
  const scratch = canvas.ownerDocument.createElement("canvas");
  scratch.width = result.width;
  scratch.height = result.height;
  const sctx = getContext(scratch);
  if (!sctx) return;
  const img = sctx.createImageData(result.width, result.height);
  const match = [46, 160, 67, 150];
  const miss = [215, 58, 73, 150];
  for (let i = 0; i < a.length; i++) {
    const got = a[i] !== 0;
    const want = b[i] !== 0;
    if (!got && !want) continue;
    const c = got && want ? match : miss;
    img.data[i * 4] = c[0];
    img.data[i * 4 + 1] = c[1];
    img.data[i * 4 + 2] = c[2];
    img.data[i * 4 + 3] = c[3];
  }
  sctx.putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(scratch, 0, 0, canvas.width, canvas.height);
}

function drawCloth(
  ctx: CanvasRenderingContext2D,
  tf: Transform,
  positions: number[][],
  resolution: number,
): void {
  // Fill the cloth footprint quad-by-quad, then stroke the grid edges.
  const at = (r: number, c: number) => positions[r * resolution + c];
  ctx.fillStyle = CLOTH_FILL;
  for (let r = 0; r < resolution - 1; r++) {
    for (let c = 0; c < resolution - 1; c++) {
      const quad = [at(r, c), at(r, c + 1), at(r + 1, c + 1), at(r + 1, c)];
      ctx.beginPath();
      quad.forEach((p, i) => {
        const { sx, sy } = tf.toScreen(p[0], p[1]);
        if (i === 0) ctx.moveTo(sx, sy);
        else ctx.lineTo(sx, sy);
      });
      ctx.closePath();
      ctx.fill();
    }
  }
  ctx.strokeStyle = CLOTH_EDGE;
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let r = 0; r < resolution; r++) {
    for (let c = 0; c < resolution; c++) {
      const p = at(r, c);
      const { sx, sy } = tf.toScreen(p[0], p[1]);
      if (c + 1 < resolution) {
        const q = at(r, c + 1);
        const t = tf.toScreen(q[0], q[1]);
        ctx.moveTo(sx, sy);
        ctx.lineTo(t.sx, t.sy);
      }
      if (r + 1 < resolution) {
        const q = at(r + 1, c);
        const t = tf.toScreen(q[0], q[1]);
        ctx.moveTo(sx, sy);
        ctx.lineTo(t.sx, t.sy);
      }
    }
  }
  ctx.stroke();
}

function drawMarker(
  ctx: CanvasRenderingContext2D,
  tf: Transform,
  slot: SlotInfo,
  locked: boolean,
  ghost: boolean,
): void {
  if (slot.x === null || slot.y === null) return;
  const { sx, sy } = tf.toScreen(slot.x, slot.y);
  ctx.save();
  ctx.globalAlpha = ghost ? 0.6 : locked ? LOCKED_ALPHA : 1.0;
  ctx.fillStyle = slot.kind === "pick" ? PICK_COLOR : PLACE_COLOR;
  ctx.strokeStyle = "#ffffff";
  ctx.lineWidth = 2;
  ctx.beginPath();
  if (slot.kind === "pick") {
    ctx.arc(sx, sy, 9, 0, Math.PI * 2);
  } else {
    ctx.rect(sx - 8, sy - 8, 16, 16);
  }
  ctx.fill();
  ctx.stroke();
  ctx.fillStyle = "#ffffff";
  ctx.font = "bold 10px sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(String(slot.pair + 1), sx, sy);
  ctx.restore();
}

export interface RenderOptions {
  /** Positions to draw instead of the snapshot's (playback frames). */
  positionsOverride?: number[][] | null;
  /** Draw the two-colour result/goal comparison instead of the goal wash. */
  showComparison?: boolean;
}

/** Full repaint of the workbench canvas from the view model. */
export function render(
  canvas: HTMLCanvasElement,
  vm: ViewModel,
  opts: RenderOptions = {},
): void {
  const ctx = getContext(canvas);
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#f6f2ea";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const s: Snapshot | null = vm.snapshot;
  if (!s) return;
  const tf = Transform.fromSnapshot(s, canvas.width);

  if (opts.showComparison && vm.resultMask && vm.goalMask) {
    drawComparison(ctx, canvas, vm.resultMask, vm.goalMask);
  } else if (vm.goalMask) {
    drawMask(ctx, canvas, vm.goalMask, [46, 160, 67, 64]);
  }

  const positions = opts.positionsOverride ?? s.positions;
  drawCloth(ctx, tf, positions, s.resolution);

  for (const slot of s.slots) {
    const ghosted =
      vm.dragGhost !== null &&
      vm.dragGhost.pair === slot.pair &&
      vm.dragGhost.kind === slot.kind;
    if (ghosted) continue;
    drawMarker(ctx, tf, slot, vm.markerLocked(slot), false);
  }
  if (vm.dragGhost) {
    drawMarker(
      ctx,
      tf,
      { pair: vm.dragGhost.pair, kind: vm.dragGhost.kind, x: vm.dragGhost.x, y: vm.dragGhost.y },
      false,
      true,
    );
  }
}

export const palette = {
  CLOTH_FILL,
  CLOTH_EDGE,
  GOAL_FILL,
  MATCH_FILL,
  MISS_FILL,
  PICK_COLOR,
  PLACE_COLOR,
};
