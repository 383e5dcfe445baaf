"""Shared fixtures: settled cloth states and rendered goal masks.

Physics fixtures are session-scoped because settling and folding are the
expensive part of the suite; tests that mutate a state must copy it.
"""

from __future__ import annotations

import numpy as np
import pytest

from foldlab.cloth import ClothSpec, GridSpec, create_cloth, rasterize_topdown, settle
from foldlab.fold import FoldParams
from foldlab.service import goal_mask_for
from foldlab.session import SessionConfig


@pytest.fixture(scope="session")
def default_spec() -> ClothSpec:
    return ClothSpec()


@pytest.fixture(scope="session")
def default_params() -> FoldParams:
    return FoldParams()


@pytest.fixture(scope="session")
def default_grid() -> GridSpec:
    return GridSpec()


@pytest.fixture(scope="session")
def flat_state(default_spec):
    """Settled flat cloth centered on the origin. Copy before mutating."""
    state = create_cloth(default_spec, center=(0.0, 0.0))
    state, _, converged = settle(state, default_spec)
    assert converged
    return state


@pytest.fixture(scope="session")
def flat_centered(default_spec, default_grid):
    """Settled flat cloth centered in the workspace (as sessions make it)."""
    state = create_cloth(default_spec, center=default_grid.center)
    state, _, converged = settle(state, default_spec)
    assert converged
    return state


@pytest.fixture(scope="session")
def flat_mask(flat_centered, default_grid):
    return rasterize_topdown(flat_centered, default_grid)


@pytest.fixture(scope="session")
def goal_masks():
    """All four builtin goal masks at the default session config.

    Rendered through goal_mask_for so the service-level cache is shared
    with tests that drive the message protocol.
    """
    return {gid: goal_mask_for(SessionConfig(goal_id=gid))
            for gid in ("G1", "G2", "G3", "G4")}


def make_fake_clock(step_ms: float = 125.0):
    """A deterministic monotonic clock advancing step_ms per reading."""
    state = {"t": 0.0}

    def clock() -> float:
        state["t"] += step_ms / 1000.0
        return state["t"]

    return clock
