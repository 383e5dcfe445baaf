"""Top-down pick-and-place fold engine.

A fold is one gripper round trip in five straight-line phases:

  1. approach: descend from travel height to just above the pick point
  2. descend: continue to the cloth surface, pinch at the bottom
  3. lift: rise straight up to travel height with the pinched cloth
  4. translate: move horizontally to above the place point
  5. lower: descend and release slightly above the plane

Phase 1 ends ``approach_clearance`` above the cloth top at the pick
point; phase 5 ends — and the cloth releases — ``release_height`` above
the ground plane.  Pinched particles ride the gripper kinematically with
their relative offsets frozen at the pinch; everything else is simulated.
On release the grasped particles move up one stacking layer (the cloth
has no self-collision) and the sheet is settled before the result is
returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cloth import (SETTLE_CONSECUTIVE, SETTLE_MAX_STEPS, SETTLE_VELOCITY_TOL,
                    ClothSpec, ClothState, GridSpec, advance_in_place)
from .errors import InvalidAction, InvalidSpec, NothingGrasped

# Picks closer to their place point than this are degenerate.
MIN_PICK_PLACE_SEPARATION = 0.005

# Vertical extent of the pinch: particles within the pinch radius whose
# height is within this band below the local top are all grabbed.
GRASP_BAND = 0.006


@dataclass(frozen=True)
class FoldParams:
    """Gripper trajectory and grasp parameters (meters, seconds)."""

    approach_clearance: float = 0.040
    release_height: float = 0.020
    lift_height: float = 0.10
    pinch_radius: float = 0.015
    gripper_speed: float = 0.25
    frame_interval: float = 1.0 / 30.0

    def validate(self) -> None:
        for name in ("approach_clearance", "release_height", "lift_height",
                     "pinch_radius", "gripper_speed", "frame_interval"):
            if not getattr(self, name) > 0:
                raise InvalidSpec(f"{name} must be > 0")
        if self.lift_height <= self.release_height:
            raise InvalidSpec("lift_height must exceed release_height")


@dataclass(frozen=True)
class FoldAction:
    """One pick-and-place instruction in workspace coordinates."""

    pick: tuple[float, float]
    place: tuple[float, float]

    def validate(self, workspace: GridSpec | None = None) -> None:
        sep = math.hypot(self.place[0] - self.pick[0], self.place[1] - self.pick[1])
        if sep < MIN_PICK_PLACE_SEPARATION:
            raise InvalidAction(
                f"pick and place are {sep * 1000:.1f} mm apart; "
                f"minimum is {MIN_PICK_PLACE_SEPARATION * 1000:.0f} mm")
        if workspace is not None:
            for label, (x, y) in (("pick", self.pick), ("place", self.place)):
                if not workspace.contains(x, y):
                    raise InvalidAction(f"{label} point ({x:.3f}, {y:.3f}) "
                                        "is outside the workspace")


@dataclass(frozen=True)
class TrajectoryPhase:
    """One straight-line gripper segment at constant speed."""

    phase: int               # 1..5
    start: tuple[float, float, float]
    end: tuple[float, float, float]
    gripper_closed: bool     # True while carrying cloth (phases 3..5)
    duration: float          # seconds; length / gripper_speed

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)


@dataclass(frozen=True)
class Trajectory:
    phases: tuple[TrajectoryPhase, ...]
    duration: float

    def validate(self) -> None:
        if len(self.phases) != 5:
            raise InvalidSpec("trajectory must have exactly 5 phases")
        for prev, cur in zip(self.phases, self.phases[1:]):
            if prev.end != cur.start:
                raise InvalidSpec("trajectory phases must be continuous")


def plan_fold(action: FoldAction, cloth_top_z: float, params: FoldParams,
              workspace: GridSpec | None = None) -> Trajectory:
    """Plan the five-phase gripper path for one fold.

    The gripper starts at travel height directly above the pick point.
    Phase 1 ends ``approach_clearance`` above ``cloth_top_z``; phase 2
    touches down on the cloth top (the pinch closes there); phase 5 ends
    at ``release_height`` above the plane, where the pinch opens.
    """
    params.validate()
    action.validate(workspace)
    px, py = action.pick
    qx, qy = action.place
    z_travel = params.lift_height
    z_near = cloth_top_z + params.approach_clearance
    z_touch = cloth_top_z
    z_release = params.release_height

    points = [
        (px, py, z_travel),
        (px, py, z_near),
        (px, py, z_touch),
        (px, py, z_travel),
        (qx, qy, z_travel),
        (qx, qy, z_release),
    ]
    closed = (False, False, True, True, True)
    phases = []
    total = 0.0
    for k in range(5):
        dur = math.dist(points[k], points[k + 1]) / params.gripper_speed
        phases.append(TrajectoryPhase(phase=k + 1, start=points[k],
                                      end=points[k + 1],
                                      gripper_closed=closed[k], duration=dur))
        total += dur
    return Trajectory(phases=tuple(phases), duration=total)


def grasp_particles(state: ClothState, pick: tuple[float, float],
                    pinch_radius: float) -> np.ndarray:
    """Particle indices caught by a pinch at ``pick``.

    Candidates lie within ``pinch_radius`` of the pick point horizontally;
    of those, every particle within ``GRASP_BAND`` of the highest candidate
    is grabbed (the pinch closes on the top layer of the stack).
    Raises NothingGrasped if the radius is empty.
    """
    if pinch_radius <= 0:
        raise InvalidSpec("pinch_radius must be > 0")
    dx = state.positions[:, 0] - pick[0]
    dy = state.positions[:, 1] - pick[1]
    within = dx * dx + dy * dy <= pinch_radius * pinch_radius
    if not within.any():
        raise NothingGrasped(
            f"no particle within {pinch_radius * 1000:.0f} mm of "
            f"({pick[0]:.3f}, {pick[1]:.3f})")
    top = state.positions[within, 2].max()
    grabbed = within & (state.positions[:, 2] >= top - GRASP_BAND)
    return np.flatnonzero(grabbed).astype(np.int64)


@dataclass
class FoldResult:
    """Outcome of executing one fold."""

    final_state: ClothState
    frames: list[ClothState] = field(default_factory=list)
    grasped: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    trajectory: Trajectory | None = None
    settle_steps: int = 0
    settle_converged: bool = True

    @property
    def grasped_count(self) -> int:
        """Number of particles the pinch held during this fold."""
        return int(self.grasped.size)


def _phase_substeps(duration: float, dt: float) -> int:
    return int(math.ceil(duration / dt - 1e-12)) if duration > 0 else 0


def execute_fold(state: ClothState, spec: ClothSpec, action: FoldAction,
                 params: FoldParams, workspace: GridSpec | None = None,
                 record_frames: bool = True) -> FoldResult:
    """Run one complete fold on a copy of ``state``.

    Frames are snapshots taken every ``frame_interval`` of simulated time
    (plus the initial and final states).  The input state is untouched;
    grasp failure (NothingGrasped) raises before any simulation happens.
    Identical inputs produce bit-identical results.
    """
    spec.validate()
    params.validate()
    action.validate(workspace)

    grasped = grasp_particles(state, action.pick, params.pinch_radius)
    top = float(state.positions[grasped, 2].max())
    traj = plan_fold(action, top, params)

    work = state.copy()
    dt = spec.timestep
    per_frame = max(1, round(params.frame_interval / dt))
    frames: list[ClothState] = [work.copy()] if record_frames else []
    substep_count = 0

    def run_chunked(n_sub: int, pin_idx=None, targets=None,
                    vel_tol: float = 0.0, consec=None) -> int:
        """Advance n_sub substeps, snapshotting on frame boundaries."""
        nonlocal substep_count
        done_total = 0
        off = 0
        while off < n_sub:
            chunk = min(n_sub - off, per_frame - substep_count % per_frame)
            tgt = None if targets is None else \
                np.ascontiguousarray(targets[off:off + chunk])
            done = advance_in_place(work, spec, chunk, pin_idx, tgt,
                                    vel_tol=vel_tol, consec=consec)
            substep_count += done
            done_total += done
            if pin_idx is not None and done > 0:
                row = targets[off + done - 1]
                for p, i in enumerate(pin_idx):
                    work.pinned[int(i)] = row[p].copy()
            if record_frames and substep_count % per_frame == 0:
                frames.append(work.copy())
            if done < chunk:
                break  # settle early-stop fired mid-chunk
            off += chunk
        return done_total

    def gripper_targets(phase: TrajectoryPhase, n_sub: int,
                        offsets: np.ndarray) -> np.ndarray:
        start = np.asarray(phase.start)
        delta = np.asarray(phase.end) - start
        fracs = (np.arange(1, n_sub + 1, dtype=np.float64) / n_sub)
        grip = start[None, :] + fracs[:, None] * delta[None, :]
        return grip[:, None, :] + offsets[None, :, :]

    # phases 1-2: gripper open, cloth evolves freely
    free_sub = sum(_phase_substeps(ph.duration, dt) for ph in traj.phases[:2])
    run_chunked(free_sub)

    # pinch at the cloth top: freeze offsets relative to the gripper
    grip_at_pinch = np.array([action.pick[0], action.pick[1], top])
    offsets = work.positions[grasped] - grip_at_pinch[None, :]
    for p, i in enumerate(grasped):
        work.pinned[int(i)] = work.positions[i].copy()
    # The region a fold carries over is the pick side of the perpendicular
    # bisector of pick->place (an ideal fold reflects that half onto the
    # other).  It stacks one layer up right away: with no self-collision,
    # the raised ground offset is what keeps the carried cloth from sharing
    # a plane with the cloth it folds onto while it drapes and lands.
    mid = (np.asarray(action.pick) + np.asarray(action.place)) / 2.0
    axis = np.asarray(action.place) - np.asarray(action.pick)
    flap = (work.positions[:, :2] - mid[None, :]) @ axis < 0.0
    work.layers[flap] += work.fold_count + 1

    # phases 3-5: carry
    for phase in traj.phases[2:]:
        n_sub = _phase_substeps(phase.duration, dt)
        if n_sub == 0:
            continue
        run_chunked(n_sub, pin_idx=grasped,
                    targets=gripper_targets(phase, n_sub, offsets))

    # release: unpin and settle
    for i in grasped:
        work.pinned.pop(int(i), None)
    work.fold_count += 1

    consec = np.zeros(1, dtype=np.int64)
    settle_steps = run_chunked(SETTLE_MAX_STEPS, vel_tol=SETTLE_VELOCITY_TOL,
                               consec=consec)
    converged = bool(consec[0] >= SETTLE_CONSECUTIVE)

    if record_frames and frames[-1].sim_time != work.sim_time:
        frames.append(work.copy())
    return FoldResult(final_state=work, frames=frames, grasped=grasped,
                      trajectory=traj, settle_steps=settle_steps,
                      settle_converged=converged)
