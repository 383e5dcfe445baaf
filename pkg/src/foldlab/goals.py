"""Built-in goal shapes: canonical two-fold scripts plus rendered masks.

Each goal is an ordered pair of fold actions written in normalized cloth
coordinates — (0, 0) is the cloth's south-west corner, (1, 1) its
north-east corner — so a script is independent of workspace placement
and cloth size.  Rendering a goal executes its script on a fresh flat
cloth and rasterizes the settled result.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cloth import ClothSpec, GridSpec, create_cloth, rasterize_topdown, settle
from .errors import InvalidAction
from .fold import FoldAction, FoldParams, execute_fold
from .mask import Mask


@dataclass(frozen=True)
class GoalSpec:
    """One target shape and the two-fold script that produces it."""

    id: str
    name: str
    script: tuple[FoldAction, FoldAction]  # normalized [0,1]^2 coordinates
    description: str

    def actions(self, cloth: ClothSpec, grid: GridSpec) -> list[FoldAction]:
        """The script scaled to workspace coordinates for ``cloth`` on ``grid``."""
        side = cloth.side_length
        cx, cy = grid.center
        x0, y0 = cx - side / 2.0, cy - side / 2.0

        def scale(p: tuple[float, float]) -> tuple[float, float]:
            return (x0 + p[0] * side, y0 + p[1] * side)

        out = []
        for a in self.script:
            action = FoldAction(pick=scale(a.pick), place=scale(a.place))
            action.validate(workspace=grid)
            out.append(action)
        return out


_GOALS = (
    GoalSpec(
        id="G1",
        name="quarter rectangle",
        script=(FoldAction((0.0, 0.5), (1.0, 0.5)),
                FoldAction((0.75, 0.0), (0.75, 1.0))),
        description="Half fold west to east, then fold the result in half "
                    "south to north: a quarter-size rectangle.",
    ),
    GoalSpec(
        id="G2",
        name="diagonal packet",
        # The diagonal carry drags the pile north-east, so the second
        # pinch targets the shifted triangle's north-west lobe; its
        # crease (the pick-place bisector) is still the main diagonal.
        script=(FoldAction((0.0, 0.0), (1.0, 1.0)),
                FoldAction((0.3, 1.0), (1.0, 0.3))),
        description="Corner-to-corner diagonal fold, then the resulting "
                    "triangle folded in half across the other diagonal.",
    ),
    GoalSpec(
        id="G3",
        name="half with corner tuck",
        script=(FoldAction((0.0, 0.5), (1.0, 0.5)),
                FoldAction((0.93, 0.12), (0.55, 0.45))),
        description="Half fold west to east, then the south-east corner "
                    "tucked diagonally onto the pile.",
    ),
    GoalSpec(
        id="G4",
        name="opposite corners in",
        # The first tuck drags the far corner ~2 cm inward, so the
        # second pinch sits just inside the original corner.
        script=(FoldAction((0.0, 0.0), (0.5, 0.5)),
                FoldAction((0.95, 0.95), (0.5, 0.5))),
        description="South-west corner folded to the center, then the "
                    "north-east corner folded to meet it.",
    ),
)


def builtin_goals() -> list[GoalSpec]:
    """The four built-in goal shapes, ids G1..G4."""
    return list(_GOALS)


def get_goal(goal_id: str) -> GoalSpec:
    """Look up a built-in goal by id."""
    for g in _GOALS:
        if g.id == goal_id:
            return g
    raise InvalidAction(f"unknown goal id {goal_id!r}; expected one of "
                        + ", ".join(g.id for g in _GOALS))


def render_goal(spec: GoalSpec, cloth: ClothSpec, params: FoldParams,
                grid: GridSpec) -> Mask:
    """Execute the goal's script on a fresh flat cloth and rasterize it."""
    state = create_cloth(cloth, center=grid.center)
    state, _, _ = settle(state, cloth)
    for action in spec.actions(cloth, grid):
        state = execute_fold(state, cloth, action, params, workspace=grid).final_state
    return rasterize_topdown(state, grid)
