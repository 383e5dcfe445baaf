"""Interactive demonstration sessions: markers, commands, undo, logging.

A session walks a user through defining ``n_folds`` pick/place marker
pairs on a simulated cloth.  Marker pairs spawn sequentially (only the
active pair is open for input until it is fully placed), Simulate
previews the earliest un-simulated pair on the live cloth, Undo pops an
exact snapshot, Fold commits by re-executing every pair from the initial
flat cloth, and Reset returns to the start while keeping the event log.

Every successful operation appends one event to the demonstration log;
failed operations change nothing, so a log is always replayable.  Logs
serialize as newline-delimited JSON with sorted keys.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

from .cloth import ClothSpec, ClothState, GridSpec, create_cloth, settle
from .errors import (CommandDisabled, InvalidConfig, MarkersIncomplete,
                     NoSuchSlot, NothingToSimulate, NothingToUndo, PairLocked,
                     SchemaError, SessionFinished)
from .fold import FoldAction, FoldParams, FoldResult, execute_fold

PICK = "pick"
PLACE = "place"
COMMANDS = ("Simulate", "Fold", "Undo", "Reset")
EVENT_KINDS = ("session_start", "marker_placed", "simulate", "undo", "reset",
               "fold_start", "fold_complete")


@dataclass(frozen=True)
class SessionConfig:
    """Immutable per-session settings."""

    n_folds: int = 2
    preview_enabled: bool = True
    goal_id: str = "G1"
    cloth: ClothSpec = field(default_factory=ClothSpec)
    params: FoldParams = field(default_factory=FoldParams)
    grid: GridSpec = field(default_factory=GridSpec)

    def validate(self) -> None:
        if not isinstance(self.n_folds, int) or self.n_folds < 1:
            raise InvalidConfig("n_folds must be an integer >= 1")
        self.cloth.validate()
        self.params.validate()
        self.grid.validate()

    def to_payload(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "preview_enabled": self.preview_enabled,
            "goal_id": self.goal_id,
            "cloth": asdict(self.cloth),
            "params": asdict(self.params),
            "grid": {"workspace_side": self.grid.workspace_side,
                     "pixels_per_side": self.grid.pixels_per_side,
                     "origin": list(self.grid.origin)},
        }

    @staticmethod
    def from_payload(payload: dict) -> "SessionConfig":
        try:
            grid = payload.get("grid", {})
            return SessionConfig(
                n_folds=payload["n_folds"],
                preview_enabled=payload["preview_enabled"],
                goal_id=payload["goal_id"],
                cloth=ClothSpec(**payload.get("cloth", {})),
                params=FoldParams(**payload.get("params", {})),
                grid=GridSpec(workspace_side=grid.get("workspace_side", 0.5),
                              pixels_per_side=grid.get("pixels_per_side", 256),
                              origin=tuple(grid.get("origin", (0.0, 0.0)))),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad session_start config payload: {exc}") from exc


@dataclass
class MarkerSlot:
    """One pick or place marker of one pair."""

    pair_index: int
    kind: str  # PICK or PLACE
    position: tuple[float, float] | None = None
    placed_at: int | None = None  # t_ms when last placed

    @property
    def placed(self) -> bool:
        return self.position is not None


@dataclass(frozen=True)
class LogEvent:
    t_ms: int
    event: str
    payload: dict


@dataclass
class DemonstrationLog:
    """Ordered, append-only record of one session's events."""

    events: list[LogEvent] = field(default_factory=list)

    def append(self, t_ms: int, event: str, payload: dict) -> None:
        self.events.append(LogEvent(t_ms=t_ms, event=event, payload=payload))

    def to_ndjson(self) -> str:
        lines = [json.dumps({"t_ms": e.t_ms, "event": e.event,
                             "payload": e.payload}, sort_keys=True)
                 for e in self.events]
        return "\n".join(lines) + ("\n" if lines else "")


def parse_log(text: str) -> DemonstrationLog:
    """Parse NDJSON into a DemonstrationLog, checking the schema."""
    log = DemonstrationLog()
    starts = 0
    last_t = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: not valid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise SchemaError(f"line {lineno}: expected an object")
        try:
            t_ms, event, payload = rec["t_ms"], rec["event"], rec["payload"]
        except KeyError as exc:
            raise SchemaError(f"line {lineno}: missing field {exc}") from exc
        if not isinstance(t_ms, int) or isinstance(t_ms, bool) or t_ms < 0:
            raise SchemaError(f"line {lineno}: t_ms must be a non-negative integer")
        if event not in EVENT_KINDS:
            raise SchemaError(f"line {lineno}: unknown event kind {event!r}")
        if not isinstance(payload, dict):
            raise SchemaError(f"line {lineno}: payload must be an object")
        if last_t is not None and t_ms < last_t:
            raise SchemaError(f"line {lineno}: timestamps decrease")
        last_t = t_ms
        if event == "session_start":
            starts += 1
        log.append(t_ms, event, payload)
    if starts != 1:
        raise SchemaError(f"log must contain exactly one session_start, found {starts}")
    if log.events[0].event != "session_start":
        raise SchemaError("session_start must be the first event")
    return log


def _pair_slots(n: int) -> list[MarkerSlot]:
    return [MarkerSlot(pair_index=n, kind=PICK),
            MarkerSlot(pair_index=n, kind=PLACE)]


@dataclass
class Session:
    """One user's demonstration in progress."""

    config: SessionConfig
    slots: list[MarkerSlot]
    cloth: ClothState
    initial_cloth: ClothState
    log: DemonstrationLog
    active_pair: int = 0
    undo_stack: list[tuple[ClothState, int]] = field(default_factory=list)
    simulated_pairs: int = 0
    executed: bool = False
    started_at: float = 0.0
    clock: Callable[[], float] = time.monotonic

    def now_ms(self) -> int:
        return max(0, int(round((self.clock() - self.started_at) * 1000.0)))

    def pair_complete(self, pair: int) -> bool:
        pair_slots = [s for s in self.slots if s.pair_index == pair]
        return len(pair_slots) == 2 and all(s.placed for s in pair_slots)

    def all_pairs_placed(self) -> bool:
        return all(self.pair_complete(k) for k in range(self.config.n_folds))

    def find_slot(self, pair: int, kind: str) -> MarkerSlot | None:
        for s in self.slots:
            if s.pair_index == pair and s.kind == kind:
                return s
        return None

    def pair_action(self, pair: int) -> FoldAction:
        pick = self.find_slot(pair, PICK)
        place = self.find_slot(pair, PLACE)
        assert pick is not None and place is not None
        return FoldAction(pick=pick.position, place=place.position)


def new_session(config: SessionConfig,
                clock: Callable[[], float] = time.monotonic) -> Session:
    """Start a session: settled flat cloth, pair-0 slots, session_start logged."""
    config.validate()
    state = create_cloth(config.cloth, center=config.grid.center)
    state, _, _ = settle(state, config.cloth)
    session = Session(config=config, slots=_pair_slots(0), cloth=state,
                      initial_cloth=state.copy(), log=DemonstrationLog(),
                      clock=clock)
    session.started_at = clock()
    session.log.append(0, "session_start", config.to_payload())
    return session


def place_marker(session: Session, pair_index: int, kind: str,
                 position: tuple[float, float]) -> Session:
    """Place (or move) one marker; clamps to the workspace and logs."""
    if session.executed:
        raise SessionFinished("folds already executed; Reset to start over")
    if kind not in (PICK, PLACE):
        raise NoSuchSlot(f"marker kind must be {PICK!r} or {PLACE!r}, got {kind!r}")
    slot = session.find_slot(pair_index, kind)
    if slot is None:
        raise NoSuchSlot(f"pair {pair_index} has no open {kind} slot yet")
    if kind == PLACE:
        pick = session.find_slot(pair_index, PICK)
        if pick is None or not pick.placed:
            raise NoSuchSlot(f"pair {pair_index}: place its pick marker first")
    if pair_index < session.simulated_pairs:
        raise PairLocked(f"pair {pair_index} was consumed by Simulate; Undo first")
    clamped = session.config.grid.clamp(position[0], position[1])
    t = session.now_ms()
    slot.position = clamped
    slot.placed_at = t
    session.log.append(t, "marker_placed", {
        "pair": pair_index, "kind": kind,
        "x": clamped[0], "y": clamped[1],
    })
    if (session.pair_complete(pair_index)
            and pair_index == session.active_pair
            and pair_index + 1 < session.config.n_folds
            and session.find_slot(pair_index + 1, PICK) is None):
        session.slots.extend(_pair_slots(pair_index + 1))
        session.active_pair = pair_index + 1
    return session


def apply_command(session: Session, command: str) -> tuple[Session, list[FoldResult]]:
    """Run one of Simulate / Fold / Undo / Reset.

    Returns the session and the fold results produced (previews or the
    committed folds), for callers that stream frames.  Failed commands
    raise and leave the session untouched, including its log.
    """
    if command == "Simulate":
        return _cmd_simulate(session)
    if command == "Undo":
        return _cmd_undo(session)
    if command == "Fold":
        return _cmd_fold(session)
    if command == "Reset":
        return _cmd_reset(session)
    raise CommandDisabled(f"unknown command {command!r}; expected one of {COMMANDS}")


def _cmd_simulate(session: Session) -> tuple[Session, list[FoldResult]]:
    if not session.config.preview_enabled:
        raise CommandDisabled("Simulate is disabled in no-preview mode")
    if session.executed:
        raise SessionFinished("folds already executed; Reset to start over")
    pair = session.simulated_pairs
    if pair >= session.config.n_folds or not session.pair_complete(pair):
        raise NothingToSimulate("no fully placed, un-simulated pair to preview")
    action = session.pair_action(pair)
    result = execute_fold(session.cloth, session.config.cloth, action,
                          session.config.params, workspace=session.config.grid)
    session.undo_stack.append((session.cloth, session.simulated_pairs))
    session.cloth = result.final_state
    session.simulated_pairs = pair + 1
    session.log.append(session.now_ms(), "simulate", {"pair": pair})
    return session, [result]


def _cmd_undo(session: Session) -> tuple[Session, list[FoldResult]]:
    if not session.config.preview_enabled:
        raise CommandDisabled("Undo is disabled in no-preview mode")
    if not session.undo_stack:
        raise NothingToUndo("nothing to undo")
    state, count = session.undo_stack.pop()
    session.cloth = state
    session.simulated_pairs = count
    session.log.append(session.now_ms(), "undo", {})
    return session, []


def _cmd_fold(session: Session) -> tuple[Session, list[FoldResult]]:
    if not session.all_pairs_placed():
        raise MarkersIncomplete(
            f"Fold needs all {session.config.n_folds} pairs placed")
    t_start = session.now_ms()
    state = session.initial_cloth.copy()
    results = []
    for pair in range(session.config.n_folds):
        result = execute_fold(state, session.config.cloth,
                              session.pair_action(pair), session.config.params,
                              workspace=session.config.grid)
        results.append(result)
        state = result.final_state
    session.cloth = state
    session.executed = True
    session.undo_stack.clear()
    session.simulated_pairs = 0
    session.log.append(t_start, "fold_start",
                       {"pairs": session.config.n_folds})
    session.log.append(session.now_ms(), "fold_complete",
                       {"pairs": session.config.n_folds})
    return session, results


def _cmd_reset(session: Session) -> tuple[Session, list[FoldResult]]:
    session.slots = _pair_slots(0)
    session.active_pair = 0
    session.cloth = session.initial_cloth.copy()
    session.undo_stack.clear()
    session.simulated_pairs = 0
    session.executed = False
    session.log.append(session.now_ms(), "reset", {})
    return session, []


def export_log(session: Session) -> DemonstrationLog:
    """A snapshot copy of the session's event log."""
    return DemonstrationLog(events=list(session.log.events))
