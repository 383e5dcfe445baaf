"""Built-in goal shapes: scripts, scaling, and rendered masks."""

from __future__ import annotations

import numpy as np
import pytest

from foldlab.errors import InvalidAction
from foldlab.goals import builtin_goals, get_goal, render_goal
from foldlab.scoring import align
from foldlab.session import SessionConfig


class TestGoalCatalog:
    def test_four_goals_with_stable_ids(self):
        goals = builtin_goals()
        assert [g.id for g in goals] == ["G1", "G2", "G3", "G4"]
        for g in goals:
            assert g.name and g.description
            assert len(g.script) == 2

    def test_get_goal(self):
        assert get_goal("G2").id == "G2"
        with pytest.raises(InvalidAction):
            get_goal("G9")
        with pytest.raises(InvalidAction):
            get_goal("")

    def test_scripts_are_normalized_coordinates(self):
        for g in builtin_goals():
            for action in g.script:
                for x, y in (action.pick, action.place):
                    assert 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0

    def test_actions_scale_to_workspace(self, default_spec, default_grid):
        actions = get_goal("G1").actions(default_spec, default_grid)
        # Cloth spans [0.1, 0.4]^2 on the default grid, so the unit
        # script corners land on those bounds.
        assert actions[0].pick == pytest.approx((0.1, 0.25), abs=1e-12)
        assert actions[0].place == pytest.approx((0.4, 0.25), abs=1e-12)
        assert actions[1].pick == pytest.approx((0.325, 0.1), abs=1e-12)
        assert actions[1].place == pytest.approx((0.325, 0.4), abs=1e-12)

    def test_all_scaled_actions_fit_default_workspace(self, default_spec,
                                                      default_grid):
        for g in builtin_goals():
            actions = g.actions(default_spec, default_grid)
            assert len(actions) == 2  # validate() raised otherwise


class TestGoalMasks:
    def test_quarter_goal_area_ratio(self, goal_masks, flat_mask):
        ratio = goal_masks["G1"].area / flat_mask.area
        assert 0.22 <= ratio <= 0.32

    def test_diagonal_goal_between_quarter_and_flat(self, goal_masks,
                                                    flat_mask):
        assert goal_masks["G1"].area < goal_masks["G2"].area < flat_mask.area

    def test_all_goals_nonempty_and_smaller_than_flat(self, goal_masks,
                                                      flat_mask):
        for gid, mask in goal_masks.items():
            assert mask.area > 0
            assert mask.area < flat_mask.area

    def test_rerender_bit_identical(self, goal_masks, default_spec,
                                    default_params, default_grid):
        again = render_goal(get_goal("G1"), default_spec, default_params,
                            default_grid)
        assert np.array_equal(again.bits, goal_masks["G1"].bits)

    def test_goals_are_mutually_distinct(self, goal_masks):
        ids = sorted(goal_masks)
        for i, ga in enumerate(ids):
            for gb in ids[i + 1:]:
                _, value = align(goal_masks[ga], goal_masks[gb], 20)
                assert value <= 0.6, f"{ga} vs {gb} too similar: {value:.3f}"
