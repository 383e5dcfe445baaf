/** Pure session view state: applies server messages, exposes exactly the
 * command availability the server itself would grant. No DOM here. */

import type {
  CommandName,
  FoldPlayback,
  GoalInfo,
  ScorePayload,
  ServerMessage,
  Snapshot,
  SlotInfo,
  WireMask,
} from "./protocol.js";

export interface PendingMarker {
  pair: number;
  kind: "pick" | "place";
  x: number;
  y: number;
}

export class ViewModel {
  sessionId: string | null = null;
  goal: GoalInfo | null = null;
  goalMask: WireMask | null = null;
  snapshot: Snapshot | null = null;
  resultMask: WireMask | null = null;
  score: ScorePayload | null = null;
  playback: FoldPlayback[] = [];
  playbackPair = -1;
  lastError: { code: string; message: string } | null = null;
  /** Marker being dragged right now, rendered as a ghost until the
   * authoritative snapshot echo lands. */
  dragGhost: PendingMarker | null = null;

  /** Apply one server message; returns its kind for the caller to react. */
  apply(msg: ServerMessage): void {
    switch (msg.kind) {
      case "session_created": {
        const p = msg.payload as unknown as {
          goal: GoalInfo;
          goal_mask: WireMask;
        };
        this.sessionId = msg.session_id;
        this.goal = p.goal;
        this.goalMask = p.goal_mask;
        this.snapshot = null;
        this.resultMask = null;
        this.score = null;
        this.playback = [];
        this.playbackPair = -1;
        this.lastError = null;
        this.dragGhost = null;
        break;
      }
      case "state_snapshot":
        this.snapshot = msg.payload as unknown as Snapshot;
        this.dragGhost = null;
        break;
      case "preview_frames": {
        const p = msg.payload as unknown as {
          pair: number;
          folds: FoldPlayback[];
        };
        this.playback = p.folds;
        this.playbackPair = p.pair;
        break;
      }
      case "fold_result": {
        const p = msg.payload as unknown as {
          folds: FoldPlayback[];
          result_mask: WireMask;
        };
        this.playback = p.folds;
        this.resultMask = p.result_mask;
        break;
      }
      case "score":
        this.score = msg.payload as unknown as ScorePayload;
        break;
      case "error":
        this.lastError = msg.payload as unknown as {
          code: string;
          message: string;
        };
        break;
      case "goal_list":
        break;
    }
  }

  /** The pair whose markers are interactive (lowest incomplete pair,
   * falling back to the last pair once everything is placed). */
  get visiblePair(): number {
    const s = this.snapshot;
    if (!s) return 0;
    return Math.min(s.active_pair, s.n_folds - 1);
  }

  private pairPlaced(s: Snapshot, pair: number): boolean {
    const slots = s.slots.filter((sl) => sl.pair === pair);
    return slots.length === 2 && slots.every((sl) => sl.x !== null);
  }

  get allPlaced(): boolean {
    const s = this.snapshot;
    if (!s) return false;
    if (s.slots.length !== 2 * s.n_folds) return false;
    return s.slots.every((sl) => sl.x !== null);
  }

  /** Mirror of the server's own command rules. */
  commandEnabled(name: CommandName): boolean {
    const s = this.snapshot;
    if (!s) return false;
    switch (name) {
      case "Simulate":
        return (
          s.preview_enabled &&
          !s.executed &&
          s.simulated_pairs < s.n_folds &&
          this.pairPlaced(s, s.simulated_pairs)
        );
      case "Undo":
        return s.preview_enabled && s.simulated_pairs > 0;
      case "Fold":
        return this.allPlaced;
      case "Reset":
        return true;
    }
  }

  /** A marker may be dragged while its pair is neither previewed nor the
   * plan executed. */
  markerLocked(slot: SlotInfo): boolean {
    const s = this.snapshot;
    if (!s) return true;
    return s.executed || slot.pair < s.simulated_pairs;
  }

  /** First slot of the visible pair still waiting for a position — the
   * one a fresh canvas drag will place. */
  nextUnplacedSlot(): SlotInfo | null {
    const s = this.snapshot;
    if (!s) return null;
    for (const sl of s.slots) {
      if (sl.pair === this.visiblePair && sl.x === null) return sl;
    }
    return null;
  }

  /** Slot at a workspace point within `radius` metres, draggable first. */
  slotAt(x: number, y: number, radius: number): SlotInfo | null {
    const s = this.snapshot;
    if (!s) return null;
    let best: SlotInfo | null = null;
    let bestD = radius * radius;
    for (const sl of s.slots) {
      if (sl.x === null || sl.y === null) continue;
      const d = (sl.x - x) ** 2 + (sl.y - y) ** 2;
      if (d <= bestD && !this.markerLocked(sl)) {
        best = sl;
        bestD = d;
      }
    }
    return best;
  }
}

/** Screen <-> workspace transforms for a square canvas.  Mask row 0 is
 * the workspace's north edge (largest y), so screen y runs south. */
export class Transform {
  constructor(
    private originX: number,
    private originY: number,
    private side: number,
    private pixels: number,
  ) {}

  static fromSnapshot(s: Snapshot, canvasSide: number): Transform {
    return new Transform(
      s.workspace.origin[0],
      s.workspace.origin[1],
      s.workspace.side,
      canvasSide,
    );
  }

  toScreen(x: number, y: number): { sx: number; sy: number } {
    return {
      sx: ((x - this.originX) / this.side) * this.pixels,
      sy: ((this.originY + this.side - y) / this.side) * this.pixels,
    };
  }

  toWorkspace(sx: number, sy: number): { x: number; y: number } {
    return {
      x: this.originX + (sx / this.pixels) * this.side,
      y: this.originY + this.side - (sy / this.pixels) * this.side,
    };
  }

  /** Clamp a workspace point into the workspace square. */
  clamp(x: number, y: number): { x: number; y: number } {
    const lo = (v: number, o: number) => Math.min(Math.max(v, o), o + this.side);
    return { x: lo(x, this.originX), y: lo(y, this.originY) };
  }
}
