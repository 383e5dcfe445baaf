"""Session service: JSON message handling, WebSocket wiring, log replay.

``handle_message`` is the protocol core — a pure-ish function from one
client message (a dict) to a list of server messages — so the whole
protocol is testable without a network.  The FastAPI app wraps it in a
``/ws`` WebSocket endpoint and serves the UI's static files from the
same port.  Messages for one session are handled strictly in arrival
order; the server never drops a request without a typed response.

Client kinds:  create_session, place_marker, command, get_state,
list_goals.  Server kinds: session_created, state_snapshot,
preview_frames, fold_result, score, goal_list, error.  Every server
message carries a per-session sequence number that increases strictly
(sessionless responses use seq 0).
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

try:
    # module-level so the postponed ``WebSocket`` annotation in build_app
    # resolves against module globals when FastAPI inspects the endpoint
    from fastapi import WebSocket
except ImportError:  # pragma: no cover - fastapi is an install dependency
    WebSocket = None  # type: ignore[assignment]

from .cloth import ClothState, GridSpec, rasterize_topdown
from .errors import DivergentLog, FoldLabError, SchemaError
from .fold import FoldResult
from .goals import builtin_goals, get_goal, render_goal
from .mask import Mask, write_mask_pgm
from .scoring import (DEFAULT_ALIGN_RADIUS, TrialScore, completion_time,
                      score_trial)
from .session import (DemonstrationLog, Session, SessionConfig, apply_command,
                      export_log, new_session, place_marker)

CLIENT_KINDS = ("create_session", "place_marker", "command", "get_state",
                "list_goals")
MAX_FRAMES_PER_FOLD = 60


@dataclass(frozen=True)
class ServerMessage:
    kind: str
    session_id: str | None
    seq: int
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "session_id": self.session_id,
                           "seq": self.seq, "payload": self.payload},
                          sort_keys=True)


@dataclass
class SessionEntry:
    session: Session
    goal_mask: Mask
    seq: int = 0
    log_events_written: int = 0
    log_path: str | None = None


@dataclass
class SessionStore:
    """All live sessions plus service-level configuration."""

    data_dir: str | None = None
    id_factory: Callable[[], str] = lambda: uuid.uuid4().hex[:12]
    sessions: dict[str, SessionEntry] = field(default_factory=dict)
    align_radius: int = DEFAULT_ALIGN_RADIUS


def mask_to_wire(mask: Mask) -> dict:
    """Compact JSON form of a mask: one hex string per row."""
    rows = []
    for r in range(mask.height):
        packed = np.packbits(mask.bits[r].astype(np.uint8))
        rows.append(packed.tobytes().hex())
    return {"width": mask.width, "height": mask.height, "rows": rows}


def _round3(positions: np.ndarray) -> list:
    return [[round(float(v), 5) for v in p] for p in positions]


def _snapshot_payload(entry: SessionEntry) -> dict:
    s = entry.session
    cfg = s.config
    return {
        "n_folds": cfg.n_folds,
        "preview_enabled": cfg.preview_enabled,
        "goal_id": cfg.goal_id,
        "active_pair": s.active_pair,
        "simulated_pairs": s.simulated_pairs,
        "executed": s.executed,
        "slots": [{"pair": sl.pair_index, "kind": sl.kind,
                   "x": None if sl.position is None else sl.position[0],
                   "y": None if sl.position is None else sl.position[1]}
                  for sl in s.slots],
        "positions": _round3(s.cloth.positions),
        "sim_time": s.cloth.sim_time,
        "resolution": s.cloth.resolution,
        "cloth_side": cfg.cloth.side_length,
        "workspace": {"side": cfg.grid.workspace_side,
                      "pixels_per_side": cfg.grid.pixels_per_side,
                      "origin": list(cfg.grid.origin)},
    }


def _frames_payload(results: list[FoldResult]) -> list[dict]:
    """Per-fold frame lists, each downsampled to MAX_FRAMES_PER_FOLD."""
    folds = []
    for result in results:
        frames = result.frames
        n = len(frames)
        if n > MAX_FRAMES_PER_FOLD:
            idx = np.unique(np.round(
                np.linspace(0, n - 1, MAX_FRAMES_PER_FOLD)).astype(int))
        else:
            idx = range(n)
        folds.append({
            "grasped_count": result.grasped_count,
            "settle_converged": result.settle_converged,
            "frames": [{"sim_time": frames[i].sim_time,
                        "positions": _round3(frames[i].positions)}
                       for i in idx],
        })
    return folds


_GOAL_MASK_CACHE: dict[tuple, Mask] = {}


def goal_mask_for(config: SessionConfig) -> Mask:
    """Rendered goal mask for a session config (cached by value)."""
    key = (config.goal_id, config.cloth, config.params, config.grid)
    if key not in _GOAL_MASK_CACHE:
        _GOAL_MASK_CACHE[key] = render_goal(get_goal(config.goal_id),
                                            config.cloth, config.params,
                                            config.grid)
    return _GOAL_MASK_CACHE[key]


def _bad_request(message: str, session_id: str | None = None) -> list[ServerMessage]:
    return [ServerMessage("error", session_id, 0,
                          {"code": "bad_request", "message": message})]


def _persist_log(store: SessionStore, sid: str, entry: SessionEntry) -> None:
    if store.data_dir is None:
        return
    events = entry.session.log.events
    if entry.log_path is None:
        os.makedirs(store.data_dir, exist_ok=True)
        entry.log_path = os.path.join(store.data_dir, f"{sid}.ndjson")
    new = events[entry.log_events_written:]
    if new:
        with open(entry.log_path, "a") as fh:
            for e in new:
                fh.write(json.dumps({"t_ms": e.t_ms, "event": e.event,
                                     "payload": e.payload}, sort_keys=True) + "\n")
        entry.log_events_written = len(events)


def handle_message(store: SessionStore, msg: dict) -> list[ServerMessage]:
    """Dispatch one client message; always returns at least one response."""
    if not isinstance(msg, dict):
        return _bad_request("message must be a JSON object")
    kind = msg.get("kind")
    if kind not in CLIENT_KINDS:
        return _bad_request(f"unknown message kind {kind!r}")
    payload = msg.get("payload", {})
    if not isinstance(payload, dict):
        return _bad_request("payload must be an object")

    if kind == "list_goals":
        goals = [{"id": g.id, "name": g.name, "description": g.description}
                 for g in builtin_goals()]
        return [ServerMessage("goal_list", None, 0, {"goals": goals})]

    if kind == "create_session":
        try:
            config = SessionConfig(
                n_folds=payload.get("n_folds", 2),
                preview_enabled=bool(payload.get("preview_enabled", True)),
                goal_id=payload.get("goal_id", "G1"),
            )
            get_goal(config.goal_id)
            session = new_session(config)
        except FoldLabError as exc:
            return [ServerMessage("error", None, 0,
                                  {"code": exc.code, "message": str(exc)})]
        except (TypeError, ValueError) as exc:
            return _bad_request(str(exc))
        sid = store.id_factory()
        entry = SessionEntry(session=session, goal_mask=goal_mask_for(config))
        store.sessions[sid] = entry
        _persist_log(store, sid, entry)
        entry.seq += 1
        created = ServerMessage("session_created", sid, entry.seq, {
            "goal": {"id": config.goal_id,
                     "name": get_goal(config.goal_id).name,
                     "description": get_goal(config.goal_id).description},
            "n_folds": config.n_folds,
            "preview_enabled": config.preview_enabled,
            "goal_mask": mask_to_wire(entry.goal_mask),
        })
        entry.seq += 1
        snap = ServerMessage("state_snapshot", sid, entry.seq,
                             _snapshot_payload(entry))
        return [created, snap]

    sid = msg.get("session_id")
    entry = store.sessions.get(sid)
    if entry is None:
        return _bad_request(f"unknown session_id {sid!r}", sid)

    def reply(kind: str, payload: dict) -> ServerMessage:
        entry.seq += 1
        return ServerMessage(kind, sid, entry.seq, payload)

    if kind == "get_state":
        return [reply("state_snapshot", _snapshot_payload(entry))]

    if kind == "place_marker":
        try:
            pair = payload["pair"]
            marker_kind = payload["kind"]
            x, y = float(payload["x"]), float(payload["y"])
        except (KeyError, TypeError, ValueError) as exc:
            return _bad_request(f"bad place_marker payload: {exc}", sid)
        if not isinstance(pair, int) or isinstance(pair, bool):
            return _bad_request("pair must be an integer", sid)
        try:
            place_marker(entry.session, pair, marker_kind, (x, y))
        except FoldLabError as exc:
            return [reply("error", {"code": exc.code, "message": str(exc)})]
        _persist_log(store, sid, entry)
        return [reply("state_snapshot", _snapshot_payload(entry))]

    # kind == "command"
    name = payload.get("name")
    if name not in ("Simulate", "Fold", "Undo", "Reset"):
        return _bad_request(f"unknown command {name!r}", sid)
    try:
        _, results = apply_command(entry.session, name)
    except FoldLabError as exc:
        return [reply("error", {"code": exc.code, "message": str(exc)})]
    _persist_log(store, sid, entry)
    out = []
    if name == "Simulate":
        out.append(reply("preview_frames", {
            "pair": entry.session.simulated_pairs - 1,
            "folds": _frames_payload(results),
        }))
    elif name == "Fold":
        result_mask = rasterize_topdown(entry.session.cloth,
                                        entry.session.config.grid)
        score = score_trial(result_mask, entry.goal_mask,
                            radius=store.align_radius,
                            completion_time_s=completion_time(entry.session.log))
        out.append(reply("fold_result", {
            "folds": _frames_payload(results),
            "final_positions": _round3(entry.session.cloth.positions),
            "result_mask": mask_to_wire(result_mask),
        }))
        out.append(reply("score", {
            "iou": score.iou,
            "offset": list(score.offset),
            "completion_time": score.completion_time,
        }))
    out.append(reply("state_snapshot", _snapshot_payload(entry)))
    return out


def handle_text(store: SessionStore, text: str) -> list[ServerMessage]:
    """Parse one wire message and dispatch it."""
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        return _bad_request(f"not valid JSON: {exc}")
    return handle_message(store, msg)


def replay(log: DemonstrationLog, config: SessionConfig | None = None,
           align_radius: int = DEFAULT_ALIGN_RADIUS,
           ) -> tuple[ClothState, Mask, TrialScore]:
    """Re-drive a fresh session from a demonstration log.

    Returns the final cloth state, its rasterized mask, and the score
    against the logged goal.  A schema-valid log whose events are
    impossible under the session FSM raises DivergentLog.
    """
    if not log.events or log.events[0].event != "session_start":
        raise SchemaError("log must begin with session_start")
    if config is None:
        config = SessionConfig.from_payload(log.events[0].payload)
    session = new_session(config)
    for e in log.events[1:]:
        try:
            if e.event == "marker_placed":
                place_marker(session, e.payload["pair"], e.payload["kind"],
                             (e.payload["x"], e.payload["y"]))
            elif e.event == "simulate":
                apply_command(session, "Simulate")
            elif e.event == "undo":
                apply_command(session, "Undo")
            elif e.event == "reset":
                apply_command(session, "Reset")
            elif e.event == "fold_complete":
                apply_command(session, "Fold")
            elif e.event in ("fold_start", "session_start"):
                pass  # fold_complete triggers the run; start is consumed above
            else:
                raise SchemaError(f"unknown event kind {e.event!r}")
        except KeyError as exc:
            raise SchemaError(f"event {e.event} missing field {exc}") from exc
        except FoldLabError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise DivergentLog(
                f"logged {e.event} is impossible here: {exc}") from exc
    mask = rasterize_topdown(session.cloth, config.grid)
    goal_mask = goal_mask_for(config)
    try:
        elapsed = completion_time(log)
    except FoldLabError:
        elapsed = None
    score = score_trial(mask, goal_mask, radius=align_radius,
                        completion_time_s=elapsed)
    return session.cloth, mask, score


def build_app(store: SessionStore, static_dir: str | None = None):
    """FastAPI app: /ws speaks the message protocol; / serves the UI."""
    from fastapi import FastAPI, WebSocketDisconnect

    app = FastAPI(title="foldlab")

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        try:
            while True:
                text = await websocket.receive_text()
                for response in handle_text(store, text):
                    await websocket.send_text(response.to_json())
        except WebSocketDisconnect:
            pass

    if static_dir and os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="static")
    return app
