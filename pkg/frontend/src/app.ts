/** Application wiring: DOM construction, socket lifecycle, and the glue
 * between user gestures and protocol messages.  The socket is injected so
 * tests can drive the app against an in-memory server. */

import type {
  ClientMessage,
  CommandName,
  FoldPlayback,
  GoalInfo,
  ServerMessage,
  WebSocketLike,
} from "./protocol.js";
import { render } from "./render.js";
import { Transform, ViewModel } from "./viewmodel.js";

export interface AppOptions {
  socketFactory: () => WebSocketLike;
  /** Fixed milliseconds between playback frames; 0 renders synchronously.
   * Omit to pace frames by their sim_time spacing (real-time playback). */
  frameDelayMs?: number;
  now?: () => number;
}

const MARKUP = `
  <div id="banner" class="banner hidden">
    <span id="banner-text">Connecting…</span>
    <button id="btn-retry" type="button">Retry</button>
  </div>
  <section id="setup" class="panel">
    <h1>Fold workbench</h1>
    <label for="goal-select">Goal</label>
    <select id="goal-select"></select>
    <p id="goal-desc"></p>
    <label for="nfolds-input">Folds</label>
    <input id="nfolds-input" type="number" min="1" max="4" value="2" />
    <label class="check">
      <input id="preview-check" type="checkbox" checked />
      Enable fold preview
    </label>
    <button id="btn-start" type="button" disabled>Start session</button>
  </section>
  <section id="live" class="panel hidden">
    <header>
      <span id="goal-name"></span>
      <span id="timer">0:00</span>
      <span id="score"></span>
    </header>
    <canvas id="board" width="512" height="512"></canvas>
    <div class="controls">
      <button id="btn-simulate" type="button">Simulate</button>
      <button id="btn-undo" type="button">Undo</button>
      <button id="btn-fold" type="button">Fold</button>
      <button id="btn-reset" type="button">Reset</button>
      <button id="btn-replay" type="button">Replay</button>
      <button id="btn-new" type="button">New session</button>
    </div>
    <p id="hint"></p>
  </section>
`;

export function formatClock(seconds: number): string {
  const s = Math.max(0, Math.floor(seconds));
  return `${Math.floor(s / 60)}:${String(s % 60).padStart(2, "0")}`;
}

interface DragState {
  pair: number;
  kind: "pick" | "place";
  moved: boolean;
}

export class App {
  readonly vm = new ViewModel();
  goals: GoalInfo[] = [];
  connected = false;
  playing = false;

  private socket: WebSocketLike | null = null;
  private readonly socketFactory: () => WebSocketLike;
  private readonly frameDelayMs: number | undefined;
  private readonly now: () => number;
  private drag: DragState | null = null;
  private startedAt: number | null = null;
  private timerId: ReturnType<typeof setInterval> | null = null;
  private playbackTimer: ReturnType<typeof setTimeout> | null = null;

  private readonly canvas: HTMLCanvasElement;
  private readonly el: Record<string, HTMLElement>;

  constructor(root: HTMLElement, options: AppOptions) {
    this.socketFactory = options.socketFactory;
    this.frameDelayMs = options.frameDelayMs;
    this.now = options.now ?? (() => Date.now());
    root.innerHTML = MARKUP;
    const byId = (id: string) => {
      const node = root.querySelector<HTMLElement>(`#${id}`);
      if (!node) throw new Error(`missing element #${id}`);
      return node;
    };
    this.el = Object.fromEntries(
      [
        "banner",
        "banner-text",
        "btn-retry",
        "setup",
        "goal-select",
        "goal-desc",
        "nfolds-input",
        "preview-check",
        "btn-start",
        "live",
        "goal-name",
        "timer",
        "score",
        "btn-simulate",
        "btn-undo",
        "btn-fold",
        "btn-reset",
        "btn-replay",
        "btn-new",
        "hint",
      ].map((id) => [id, byId(id)]),
    );
    this.canvas = byId("board") as HTMLCanvasElement;
    this.bindEvents();
    this.connect();
  }

  // ---- socket lifecycle -------------------------------------------------

  connect(): void {
    this.showBanner("Connecting…", false);
    let socket: WebSocketLike;
    try {
      socket = this.socketFactory();
    } catch {
      this.onDisconnected("Could not open a connection to the service.");
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.connected = true;
      this.hideBanner();
      this.send({ kind: "list_goals", session_id: null, payload: {} });
      this.syncControls();
    };
    socket.onmessage = (event) => {
      this.receive(JSON.parse(event.data) as ServerMessage);
    };
    socket.onclose = () => this.onDisconnected("Connection to the service lost.");
    socket.onerror = () => this.onDisconnected("Connection to the service failed.");
  }

  private onDisconnected(reason: string): void {
    this.connected = false;
    this.socket = null;
    this.showBanner(reason, true);
    this.syncControls();
  }

  private send(msg: ClientMessage): void {
    if (!this.socket || !this.connected) return;
    this.socket.send(JSON.stringify(msg));
  }

  private sendSession(
    kind: ClientMessage["kind"],
    payload: Record<string, unknown>,
  ): void {
    this.send({ kind, session_id: this.vm.sessionId, payload });
  }

  // ---- server messages --------------------------------------------------

  private receive(msg: ServerMessage): void {
    this.vm.apply(msg);
    switch (msg.kind) {
      case "goal_list": {
        const p = msg.payload as unknown as { goals: GoalInfo[] };
        this.goals = p.goals;
        this.populateGoals();
        break;
      }
      case "session_created": {
        this.startedAt = this.now();
        this.el["score"].textContent = "";
        this.el["hint"].textContent = "";
        this.el["goal-name"].textContent = this.vm.goal
          ? `${this.vm.goal.name} (${this.vm.goal.id})`
          : "";
        this.el["setup"].classList.add("hidden");
        this.el["live"].classList.remove("hidden");
        this.startTimer();
        break;
      }
      case "state_snapshot":
        // During playback the animation owns the canvas; its completion
        // callback repaints from the snapshot that landed meanwhile.
        if (!this.playing) this.repaint();
        break;
      case "preview_frames": {
        const p = msg.payload as unknown as { folds: FoldPlayback[] };
        this.playFolds(p.folds, () => this.repaint());
        break;
      }
      case "fold_result": {
        const p = msg.payload as unknown as { folds: FoldPlayback[] };
        this.stopTimer();
        this.playFolds(p.folds, () => this.repaint());
        break;
      }
      case "score": {
        const s = this.vm.score;
        if (s) {
          this.el["score"].textContent = `IoU ${(s.iou * 100).toFixed(1)}%`;
          if (s.completion_time !== null) {
            this.el["timer"].textContent = formatClock(s.completion_time);
          }
        }
        break;
      }
      case "error": {
        const p = msg.payload as unknown as { code: string; message: string };
        this.el["hint"].textContent =
          p.code === "PairLocked"
            ? "That marker is locked by a preview — press Undo to edit it."
            : p.message;
        break;
      }
    }
    this.syncControls();
  }

  // ---- DOM events -------------------------------------------------------

  private bindEvents(): void {
    this.el["btn-retry"].addEventListener("click", () => this.connect());
    this.el["goal-select"].addEventListener("change", () => this.showGoalDesc());
    this.el["btn-start"].addEventListener("click", () => this.startSession());
    this.el["btn-new"].addEventListener("click", () => this.backToSetup());
    const cmd = (name: CommandName) => () =>
      this.sendSession("command", { name });
    this.el["btn-simulate"].addEventListener("click", cmd("Simulate"));
    this.el["btn-undo"].addEventListener("click", cmd("Undo"));
    this.el["btn-fold"].addEventListener("click", cmd("Fold"));
    this.el["btn-reset"].addEventListener("click", cmd("Reset"));
    this.el["btn-replay"].addEventListener("click", () => this.replay());

    this.canvas.addEventListener("mousedown", (e) => this.onMouseDown(e));
    const doc = this.canvas.ownerDocument;
    doc.addEventListener("mousemove", (e) => this.onMouseMove(e));
    doc.addEventListener("mouseup", (e) => this.onMouseUp(e));
  }

  private transform(): Transform | null {
    const s = this.vm.snapshot;
    if (!s) return null;
    return Transform.fromSnapshot(s, this.canvas.width);
  }

  /** Map a mouse event to canvas-pixel coordinates.  Layout boxes are
   * unreliable in headless DOMs, so fall back to the raw offsets when the
   * measured rectangle has no size. */
  private eventToScreen(e: MouseEvent): { sx: number; sy: number } {
    const rect = this.canvas.getBoundingClientRect();
    const scale = rect.width > 0 ? this.canvas.width / rect.width : 1;
    return {
      sx: (e.clientX - rect.left) * scale,
      sy: (e.clientY - rect.top) * scale,
    };
  }

  private onMouseDown(e: MouseEvent): void {
    if (!this.connected || this.playing) return;
    const tf = this.transform();
    const s = this.vm.snapshot;
    if (!tf || !s || s.executed) return;
    const { sx, sy } = this.eventToScreen(e);
    const { x, y } = tf.toWorkspace(sx, sy);
    const radius = (12 / this.canvas.width) * s.workspace.side;

    const hit = this.vm.slotAt(x, y, radius);
    if (hit) {
      this.drag = { pair: hit.pair, kind: hit.kind, moved: false };
      this.vm.dragGhost = { pair: hit.pair, kind: hit.kind, x, y };
      this.repaint();
      return;
    }
    // A press on a locked marker is refused with guidance instead of a
    // round-trip the server would reject anyway.
    for (const slot of s.slots) {
      if (slot.x === null || slot.y === null) continue;
      const d = (slot.x - x) ** 2 + (slot.y - y) ** 2;
      if (d <= radius * radius && this.vm.markerLocked(slot)) {
        this.el["hint"].textContent =
          "That marker is locked by a preview — press Undo to edit it.";
        return;
      }
    }
    const next = this.vm.nextUnplacedSlot();
    if (!next) return;
    this.drag = { pair: next.pair, kind: next.kind, moved: false };
    this.vm.dragGhost = { pair: next.pair, kind: next.kind, x, y };
    this.repaint();
  }

  private onMouseMove(e: MouseEvent): void {
    if (!this.drag) return;
    const tf = this.transform();
    if (!tf) return;
    const { sx, sy } = this.eventToScreen(e);
    const { x, y } = tf.toWorkspace(sx, sy);
    this.drag.moved = true;
    this.vm.dragGhost = { pair: this.drag.pair, kind: this.drag.kind, x, y };
    this.repaint();
  }

  /** Drags coalesce into a single placement sent on release. */
  private onMouseUp(e: MouseEvent): void {
    if (!this.drag) return;
    const drag = this.drag;
    this.drag = null;
    const tf = this.transform();
    if (!tf) return;
    const { sx, sy } = this.eventToScreen(e);
    const raw = tf.toWorkspace(sx, sy);
    const { x, y } = tf.clamp(raw.x, raw.y);
    this.vm.dragGhost = { pair: drag.pair, kind: drag.kind, x, y };
    this.sendSession("place_marker", { pair: drag.pair, kind: drag.kind, x, y });
  }

  // ---- session flow -----------------------------------------------------

  private populateGoals(): void {
    const select = this.el["goal-select"] as HTMLSelectElement;
    select.innerHTML = "";
    for (const goal of this.goals) {
      const opt = select.ownerDocument.createElement("option");
      opt.value = goal.id;
      opt.textContent = `${goal.id} — ${goal.name}`;
      select.appendChild(opt);
    }
    this.showGoalDesc();
    this.syncControls();
  }

  private showGoalDesc(): void {
    const select = this.el["goal-select"] as HTMLSelectElement;
    const goal = this.goals.find((g) => g.id === select.value);
    this.el["goal-desc"].textContent = goal ? goal.description : "";
  }

  private startSession(): void {
    const select = this.el["goal-select"] as HTMLSelectElement;
    const nFolds = Number((this.el["nfolds-input"] as HTMLInputElement).value);
    const preview = (this.el["preview-check"] as HTMLInputElement).checked;
    this.send({
      kind: "create_session",
      session_id: null,
      payload: {
        goal_id: select.value,
        n_folds: nFolds,
        preview_enabled: preview,
      },
    });
  }

  private backToSetup(): void {
    this.stopTimer();
    this.vm.sessionId = null;
    this.vm.snapshot = null;
    this.vm.score = null;
    this.vm.resultMask = null;
    this.vm.goalMask = null;
    this.el["live"].classList.add("hidden");
    this.el["setup"].classList.remove("hidden");
    this.syncControls();
  }

  // ---- playback and painting ---------------------------------------------

  /** Animate buffered fold frames.  Pacing follows each frame's sim_time
   * spacing so playback duration tracks simulated duration; a configured
   * fixed delay overrides that, and 0 renders everything synchronously. */
  private playFolds(folds: FoldPlayback[], done: () => void): void {
    const frames = folds.flatMap((f) => f.frames);
    if (this.playbackTimer !== null) clearTimeout(this.playbackTimer);
    if (frames.length === 0 || this.frameDelayMs === 0) {
      this.playing = false;
      done();
      return;
    }
    const delayAfter = (i: number) => {
      if (this.frameDelayMs !== undefined) return this.frameDelayMs;
      const dt = (frames[i + 1].sim_time - frames[i].sim_time) * 1000;
      return Math.min(200, Math.max(1, dt));
    };
    this.playing = true;
    this.syncControls();
    let i = 0;
    const step = () => {
      render(this.canvas, this.vm, { positionsOverride: frames[i].positions });
      if (i + 1 < frames.length) {
        this.playbackTimer = setTimeout(step, delayAfter(i));
        i += 1;
      } else {
        this.playbackTimer = null;
        this.playing = false;
        done();
        this.syncControls();
      }
    };
    step();
  }

  /** Re-run the last buffered preview or fold animation. */
  private replay(): void {
    if (this.playing || this.vm.playback.length === 0) return;
    this.playFolds(this.vm.playback, () => this.repaint());
  }

  private repaint(): void {
    const showComparison = this.vm.snapshot?.executed === true;
    render(this.canvas, this.vm, { showComparison });
  }

  private syncControls(): void {
    const busy = !this.connected || this.playing || !this.vm.snapshot;
    const setEnabled = (id: string, on: boolean) => {
      (this.el[id] as HTMLButtonElement).disabled = busy || !on;
    };
    setEnabled("btn-simulate", this.vm.commandEnabled("Simulate"));
    setEnabled("btn-undo", this.vm.commandEnabled("Undo"));
    setEnabled("btn-fold", this.vm.commandEnabled("Fold"));
    setEnabled("btn-reset", this.vm.commandEnabled("Reset"));
    setEnabled("btn-replay", this.vm.playback.length > 0);
    (this.el["btn-new"] as HTMLButtonElement).disabled = !this.connected;
    (this.el["btn-start"] as HTMLButtonElement).disabled =
      !this.connected || this.goals.length === 0;
  }

  // ---- timer and banner ---------------------------------------------------

  private startTimer(): void {
    this.stopTimer();
    this.el["timer"].textContent = "0:00";
    this.timerId = setInterval(() => {
      if (this.startedAt === null) return;
      const elapsed = (this.now() - this.startedAt) / 1000;
      this.el["timer"].textContent = formatClock(elapsed);
    }, 500);
  }

  private stopTimer(): void {
    if (this.timerId !== null) {
      clearInterval(this.timerId);
      this.timerId = null;
    }
  }

  private showBanner(text: string, retry: boolean): void {
    this.el["banner-text"].textContent = text;
    this.el["banner"].classList.remove("hidden");
    (this.el["btn-retry"] as HTMLButtonElement).style.display = retry
      ? ""
      : "none";
  }

  private hideBanner(): void {
    this.el["banner"].classList.add("hidden");
  }

  dispose(): void {
    this.stopTimer();
    if (this.playbackTimer !== null) clearTimeout(this.playbackTimer);
    this.socket?.close();
    this.socket = null;
  }
}

export function createApp(root: HTMLElement, options: AppOptions): App {
  return new App(root, options);
}
