/** Wire types for the foldlab JSON-over-WebSocket protocol. */

export type ClientKind =
  | "create_session"
  | "place_marker"
  | "command"
  | "get_state"
  | "list_goals";

export type ServerKind =
  | "session_created"
  | "state_snapshot"
  | "preview_frames"
  | "fold_result"
  | "score"
  | "goal_list"
  | "error";

export type MarkerKind = "pick" | "place";
export type CommandName = "Simulate" | "Fold" | "Undo" | "Reset";

export interface ClientMessage {
  kind: ClientKind;
  session_id: string | null;
  payload: Record<string, unknown>;
}

export interface ServerMessage {
  kind: ServerKind;
  session_id: string | null;
  seq: number;
  payload: Record<string, unknown>;
}

export interface GoalInfo {
  id: string;
  name: string;
  description: string;
}

export interface WireMask {
  width: number;
  height: number;
  rows: string[];
}

export interface SlotInfo {
  pair: number;
  kind: MarkerKind;
  x: number | null;
  y: number | null;
}

export interface WorkspaceInfo {
  side: number;
  pixels_per_side: number;
  origin: [number, number];
}

export interface Snapshot {
  n_folds: number;
  preview_enabled: boolean;
  goal_id: string;
  active_pair: number;
  simulated_pairs: number;
  executed: boolean;
  slots: SlotInfo[];
  positions: number[][];
  sim_time: number;
  resolution: number;
  cloth_side: number;
  workspace: WorkspaceInfo;
}

export interface PreviewFrame {
  sim_time: number;
  positions: number[][];
}

export interface FoldPlayback {
  grasped_count: number;
  settle_converged: boolean;
  frames: PreviewFrame[];
}

export interface ScorePayload {
  iou: number;
  offset: [number, number];
  completion_time: number | null;
}

/** The subset of the WebSocket interface the app uses (injectable in tests). */
export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

/** Decode the wire form of a mask (hex-packed rows, MSB first) into a
 * flat Uint8Array of 0/1 pixels, row-major from the north-west corner. */
export function decodeMask(mask: WireMask): Uint8Array {
  const out = new Uint8Array(mask.width * mask.height);
  for (let r = 0; r < mask.height; r++) {
    const hex = mask.rows[r];
    for (let c = 0; c < mask.width; c++) {
      const byte = parseInt(hex.substring((c >> 3) * 2, (c >> 3) * 2 + 2), 16);
      out[r * mask.width + c] = (byte >> (7 - (c & 7))) & 1;
    }
  }
  return out;
}
