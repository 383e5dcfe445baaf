"""Particle cloth model and deterministic stepping.

The cloth is a square grid of particles joined by three families of
distance constraints (structural neighbors, shear diagonals, and
two-apart bending pairs) integrated with position-based dynamics:
predict under gravity, project constraints Gauss-Seidel style in a fixed
order, then recover velocities from the position change.  There is no
cloth self-collision; stacking is approximated by giving particles a
per-layer ground offset when folds release them (see the fold engine).

Stepping the same state twice produces bit-identical results, which the
session layer relies on for undo and replay checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidSpec
from .kernels import rasterize_tris, run_substeps
from .mask import Mask

# Cloth sheet spawns (and each released fold layer stacks) this far above
# the ground plane, approximating fabric thickness.
CLOTH_THICKNESS = 0.002

# Settle defaults: a state counts as settled after this many consecutive
# substeps whose fastest particle stays below the velocity tolerance.
SETTLE_VELOCITY_TOL = 0.005
SETTLE_MAX_STEPS = 1500
SETTLE_CONSECUTIVE = 5

# Edge families, in projection order.
EDGE_STRUCTURAL = 0
EDGE_SHEAR = 1
EDGE_BEND = 2


@dataclass(frozen=True)
class ClothSpec:
    """Physical and solver parameters of a cloth sheet."""

    side_length: float = 0.30
    resolution: int = 25
    mass_per_particle: float = 0.005
    structural_stiffness: float = 1.0
    shear_stiffness: float = 0.95
    bend_stiffness: float = 0.1
    ground_friction: float = 0.45
    gravity: float = 9.81
    timestep: float = 1.0 / 120.0
    solver_iterations: int = 10

    def validate(self) -> None:
        if not self.side_length > 0:
            raise InvalidSpec(f"side_length must be > 0, got {self.side_length}")
        if not (isinstance(self.resolution, int) and self.resolution >= 2):
            raise InvalidSpec(f"resolution must be an int >= 2, got {self.resolution}")
        if not self.mass_per_particle > 0:
            raise InvalidSpec("mass_per_particle must be > 0")
        for name in ("structural_stiffness", "shear_stiffness", "bend_stiffness"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidSpec(f"{name} must be in [0, 1], got {v}")
        if not self.ground_friction >= 0:
            raise InvalidSpec("ground_friction must be >= 0")
        if not self.gravity >= 0:
            raise InvalidSpec("gravity must be >= 0")
        if not self.timestep > 0:
            raise InvalidSpec("timestep must be > 0")
        if not (isinstance(self.solver_iterations, int) and self.solver_iterations >= 1):
            raise InvalidSpec("solver_iterations must be an int >= 1")


@dataclass(frozen=True)
class GridSpec:
    """Top-down rasterization window: a square workspace region."""

    workspace_side: float = 0.5
    pixels_per_side: int = 256
    origin: tuple[float, float] = (0.0, 0.0)

    def validate(self) -> None:
        if not self.workspace_side > 0:
            raise InvalidSpec("workspace_side must be > 0")
        if not (isinstance(self.pixels_per_side, int) and self.pixels_per_side >= 8):
            raise InvalidSpec("pixels_per_side must be an int >= 8")
        if len(self.origin) != 2:
            raise InvalidSpec("origin must be an (x, y) pair")

    @property
    def pixel_size(self) -> float:
        return self.workspace_side / self.pixels_per_side

    @property
    def center(self) -> tuple[float, float]:
        return (self.origin[0] + self.workspace_side / 2.0,
                self.origin[1] + self.workspace_side / 2.0)

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        """Clamp a point into the workspace square."""
        lo_x, lo_y = self.origin
        hi_x = lo_x + self.workspace_side
        hi_y = lo_y + self.workspace_side
        return (min(max(x, lo_x), hi_x), min(max(y, lo_y), hi_y))

    def contains(self, x: float, y: float) -> bool:
        cx, cy = self.clamp(x, y)
        return cx == x and cy == y


@dataclass
class ClothState:
    """Full dynamic state of one cloth sheet.

    ``edges`` / ``rest_lengths`` / ``edge_kind`` are parallel arrays in the
    fixed projection order.  ``pinned`` maps particle index to its current
    kinematic target; pinned particles ignore dynamics and land exactly on
    the target each substep.  ``layers`` is the stacking level used for the
    per-particle ground offset (``layers * CLOTH_THICKNESS``).
    """

    positions: np.ndarray
    velocities: np.ndarray
    edges: np.ndarray
    rest_lengths: np.ndarray
    edge_kind: np.ndarray
    pinned: dict[int, np.ndarray] = field(default_factory=dict)
    layers: np.ndarray | None = None
    fold_count: int = 0
    sim_time: float = 0.0
    resolution: int = 0

    def __post_init__(self) -> None:
        if self.layers is None:
            self.layers = np.zeros(len(self.positions), dtype=np.int64)

    def copy(self) -> "ClothState":
        return ClothState(
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            edges=self.edges,           # immutable topology, shared
            rest_lengths=self.rest_lengths,
            edge_kind=self.edge_kind,
            pinned={i: t.copy() for i, t in self.pinned.items()},
            layers=self.layers.copy(),
            fold_count=self.fold_count,
            sim_time=self.sim_time,
            resolution=self.resolution,
        )

    @property
    def num_particles(self) -> int:
        return len(self.positions)

    @property
    def rest_edges(self) -> list[tuple[int, int, float]]:
        """Edge list as (i, j, rest_length) triples."""
        return [(int(a), int(b), float(r))
                for (a, b), r in zip(self.edges, self.rest_lengths)]


def states_equal(a: ClothState, b: ClothState) -> bool:
    """Exact (bitwise) equality of two cloth states."""
    if a.positions.shape != b.positions.shape:
        return False
    if set(a.pinned) != set(b.pinned):
        return False
    for i in a.pinned:
        if not np.array_equal(a.pinned[i], b.pinned[i]):
            return False
    return (
        np.array_equal(a.positions, b.positions)
        and np.array_equal(a.velocities, b.velocities)
        and np.array_equal(a.edges, b.edges)
        and np.array_equal(a.rest_lengths, b.rest_lengths)
        and np.array_equal(a.layers, b.layers)
        and a.fold_count == b.fold_count
        and a.sim_time == b.sim_time
        and a.resolution == b.resolution
    )


def _grid_index(res: int, r: int, c: int) -> int:
    return r * res + c


def create_cloth(spec: ClothSpec, center: tuple[float, float] = (0.0, 0.0)) -> ClothState:
    """Build a flat cloth at rest, centered on ``center``, at fabric height.

    Particles form a row-major ``resolution x resolution`` grid; edges are
    generated in a fixed order (structural rows then columns, shear
    diagonals per cell, bending pairs rows then columns) so constraint
    projection is reproducible.
    """
    spec.validate()
    res = spec.resolution
    spacing = spec.side_length / (res - 1)
    x0 = center[0] - spec.side_length / 2.0
    y0 = center[1] - spec.side_length / 2.0

    positions = np.zeros((res * res, 3), dtype=np.float64)
    for r in range(res):
        for c in range(res):
            i = _grid_index(res, r, c)
            positions[i, 0] = x0 + c * spacing
            positions[i, 1] = y0 + r * spacing
            positions[i, 2] = CLOTH_THICKNESS

    edges: list[tuple[int, int]] = []
    kinds: list[int] = []
    # structural: horizontal neighbors row-major, then vertical neighbors
    for r in range(res):
        for c in range(res - 1):
            edges.append((_grid_index(res, r, c), _grid_index(res, r, c + 1)))
            kinds.append(EDGE_STRUCTURAL)
    for r in range(res - 1):
        for c in range(res):
            edges.append((_grid_index(res, r, c), _grid_index(res, r + 1, c)))
            kinds.append(EDGE_STRUCTURAL)
    # shear: both diagonals of every cell
    for r in range(res - 1):
        for c in range(res - 1):
            edges.append((_grid_index(res, r, c), _grid_index(res, r + 1, c + 1)))
            kinds.append(EDGE_SHEAR)
            edges.append((_grid_index(res, r, c + 1), _grid_index(res, r + 1, c)))
            kinds.append(EDGE_SHEAR)
    # bending: two-apart pairs, horizontal then vertical
    for r in range(res):
        for c in range(res - 2):
            edges.append((_grid_index(res, r, c), _grid_index(res, r, c + 2)))
            kinds.append(EDGE_BEND)
    for r in range(res - 2):
        for c in range(res):
            edges.append((_grid_index(res, r, c), _grid_index(res, r + 2, c)))
            kinds.append(EDGE_BEND)

    edge_arr = np.asarray(edges, dtype=np.int64)
    kind_arr = np.asarray(kinds, dtype=np.uint8)
    diff = positions[edge_arr[:, 1]] - positions[edge_arr[:, 0]]
    rest = np.sqrt((diff * diff).sum(axis=1))

    return ClothState(
        positions=positions,
        velocities=np.zeros_like(positions),
        edges=edge_arr,
        rest_lengths=rest,
        edge_kind=kind_arr,
        resolution=res,
    )


def _stiffness_per_edge(state: ClothState, spec: ClothSpec) -> np.ndarray:
    k = np.empty(len(state.edges), dtype=np.float64)
    k[state.edge_kind == EDGE_STRUCTURAL] = spec.structural_stiffness
    k[state.edge_kind == EDGE_SHEAR] = spec.shear_stiffness
    k[state.edge_kind == EDGE_BEND] = spec.bend_stiffness
    return k


def _static_pin_arrays(state: ClothState) -> tuple[np.ndarray, np.ndarray]:
    idx = np.asarray(sorted(state.pinned), dtype=np.int64)
    targets = np.zeros((1, len(idx), 3), dtype=np.float64)
    for p, i in enumerate(idx):
        targets[0, p] = state.pinned[i]
    return idx, targets


def advance_in_place(state: ClothState, spec: ClothSpec, n_sub: int,
                     pin_idx: np.ndarray | None = None,
                     pin_targets: np.ndarray | None = None,
                     vel_tol: float = 0.0,
                     consec: np.ndarray | None = None) -> int:
    """Run substeps directly on ``state`` arrays; returns substeps executed.

    When ``pin_idx``/``pin_targets`` are omitted the static targets from
    ``state.pinned`` apply.  ``pin_targets`` with one row per substep moves
    the pins kinematically.  ``vel_tol`` > 0 enables the settle early-stop;
    ``consec`` (shape (1,) int64) carries the calm-substep count across
    calls.  ``sim_time`` is advanced by the executed substeps.
    """
    if n_sub <= 0:
        return 0
    if pin_idx is None:
        pin_idx, pin_targets = _static_pin_arrays(state)
    per_step = pin_targets.shape[0] > 1
    if per_step and pin_targets.shape[0] != n_sub:
        raise ValueError("pin_targets rows must be 1 or n_sub")
    if consec is None:
        consec = np.zeros(1, dtype=np.int64)
    inv_mass = np.full(state.num_particles, 1.0 / spec.mass_per_particle)
    ground_z = state.layers * CLOTH_THICKNESS
    done = run_substeps(
        state.positions, state.velocities, state.edges, state.rest_lengths,
        _stiffness_per_edge(state, spec), inv_mass,
        pin_idx, np.ascontiguousarray(pin_targets), per_step,
        ground_z.astype(np.float64), spec.gravity, spec.timestep,
        spec.solver_iterations, spec.ground_friction,
        n_sub, vel_tol, SETTLE_CONSECUTIVE, consec,
    )
    state.sim_time += done * spec.timestep
    return done


def step_sim(state: ClothState, spec: ClothSpec, substeps: int) -> ClothState:
    """Advance a copy of ``state`` by exactly ``substeps`` substeps."""
    spec.validate()
    if substeps < 0:
        raise InvalidSpec("substeps must be >= 0")
    out = state.copy()
    advance_in_place(out, spec, substeps)
    return out


def settle(state: ClothState, spec: ClothSpec,
           velocity_tol: float = SETTLE_VELOCITY_TOL,
           max_steps: int = SETTLE_MAX_STEPS) -> tuple[ClothState, int, bool]:
    """Step a copy of ``state`` until motion stays below ``velocity_tol``.

    Stops as soon as the fastest particle speed has been below the
    tolerance for ``SETTLE_CONSECUTIVE`` consecutive substeps, or after
    ``max_steps``.  Returns (state, substeps used, converged flag).
    """
    spec.validate()
    if velocity_tol <= 0:
        raise InvalidSpec("velocity_tol must be > 0")
    out = state.copy()
    consec = np.zeros(1, dtype=np.int64)
    used = advance_in_place(out, spec, max_steps, vel_tol=velocity_tol, consec=consec)
    return out, used, bool(consec[0] >= SETTLE_CONSECUTIVE)


def mesh_triangles(state: ClothState) -> np.ndarray:
    """Triangle corner xy coordinates, shape (T, 3, 2), two per grid cell."""
    res = state.resolution
    if res < 2:
        raise InvalidSpec("state has no grid mesh to triangulate")
    tris = np.empty(((res - 1) * (res - 1) * 2, 3, 2), dtype=np.float64)
    t = 0
    xy = state.positions[:, :2]
    for r in range(res - 1):
        for c in range(res - 1):
            i00 = _grid_index(res, r, c)
            i01 = _grid_index(res, r, c + 1)
            i10 = _grid_index(res, r + 1, c)
            i11 = _grid_index(res, r + 1, c + 1)
            tris[t, 0] = xy[i00]
            tris[t, 1] = xy[i01]
            tris[t, 2] = xy[i11]
            tris[t + 1, 0] = xy[i00]
            tris[t + 1, 1] = xy[i11]
            tris[t + 1, 2] = xy[i10]
            t += 2
    return tris


def rasterize_topdown(state: ClothState, grid: GridSpec) -> Mask:
    """Binary occupancy of the cloth seen from above.

    A pixel is set iff its center lies inside the vertical projection of
    any mesh triangle (inclusive on boundaries).
    """
    grid.validate()
    n = grid.pixels_per_side
    out = np.zeros((n, n), dtype=np.uint8)
    rasterize_tris(mesh_triangles(state), float(grid.origin[0]),
                   float(grid.origin[1]), float(grid.workspace_side), n, out)
    return Mask(out.astype(bool))


def cloth_top_z(state: ClothState) -> float:
    """Height of the highest particle."""
    return float(state.positions[:, 2].max())
