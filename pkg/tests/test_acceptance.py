"""End-to-end acceptance checks, one test per shipped guarantee.

Each test prints a single PASS/FAIL line (visible even without -s) and
enforces its wall-clock budget.  Budgets cover the work inside the
`criterion` block; JIT warmup and shared fixtures are excluded by the
module-level warmup below.
"""

from __future__ import annotations

import itertools
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from conftest import make_fake_clock
from foldlab.analysis import TrialRecord, f_tail, rm_anova_2x2
from foldlab.cloth import (ClothSpec, GridSpec, cloth_top_z,
                           rasterize_topdown, states_equal)
from foldlab.errors import FoldLabError
from foldlab.fold import FoldAction, FoldParams, execute_fold, plan_fold
from foldlab.goals import builtin_goals, get_goal
from foldlab.mask import Mask, translate
from foldlab.scoring import align, iou, score_trial
from foldlab.service import replay
from foldlab.session import (PICK, PLACE, SessionConfig, apply_command,
                             export_log, new_session, parse_log, place_marker)


@pytest.fixture(autouse=True, scope="module")
def _warm(flat_centered, goal_masks):
    """Compile the simulation kernels and render goal masks before timing."""
    spec = ClothSpec(side_length=0.1, resolution=2)
    config = SessionConfig(cloth=spec)
    session = new_session(config, clock=make_fake_clock())
    place_marker(session, 0, PICK, (0.2, 0.2))
    place_marker(session, 0, PLACE, (0.3, 0.3))
    apply_command(session, "Simulate")


@contextmanager
def criterion(num: int, name: str, budget_s: float, capsys):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"\nACCEPTANCE {num} {name}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    ok = elapsed < budget_s
    with capsys.disabled():
        print(f"\nACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'} "
              f"({elapsed:.2f}s, budget {budget_s:g}s)")
    assert ok, f"criterion {num} exceeded budget: {elapsed:.2f}s >= {budget_s}s"


def goal_pairs(gid: str, cloth: ClothSpec, grid: GridSpec):
    return [(a.pick, a.place) for a in get_goal(gid).actions(cloth, grid)]


def run_session_folds(config: SessionConfig, pairs) -> "Session":
    session = new_session(config, clock=make_fake_clock())
    for pair, (pick, place) in enumerate(pairs):
        place_marker(session, pair, PICK, pick)
        place_marker(session, pair, PLACE, place)
    apply_command(session, "Fold")
    return session


# --- 1: fold-step clearance constants -----------------------------------------


def test_acceptance_1_fold_step_constants(flat_centered, default_params,
                                          capsys):
    with criterion(1, "fold-step clearance constants", 1.0, capsys):
        top = cloth_top_z(flat_centered)
        for action in (FoldAction((0.1, 0.25), (0.4, 0.25)),
                       FoldAction((0.325, 0.1), (0.325, 0.4)),
                       FoldAction((0.2, 0.2), (0.31, 0.33))):
            traj = plan_fold(action, top, default_params)
            assert traj.phases[0].end[2] == top + 0.040
            assert traj.phases[4].end[2] == 0.020


# --- 2: goal achievability ------------------------------------------------------


def _noisy_goal_trial(flat_state, spec, params, grid, actions, amp, unit):
    """Run one goal script with amp * unit noise on every marker coord.

    The same unit draw is reused across amplitudes (common random
    numbers), so each trial is its own noise direction swept outward.  A
    pick that lands beyond grasp range snaps to the nearest particle —
    the marker-stays-on-the-cloth rule the interactive surface applies.
    """
    state = flat_state
    k = 0
    for action in actions:
        pick = (action.pick[0] + amp * unit[k],
                action.pick[1] + amp * unit[k + 1])
        place = grid.clamp(action.place[0] + amp * unit[k + 2],
                           action.place[1] + amp * unit[k + 3])
        k += 4
        d2 = ((state.positions[:, 0] - pick[0]) ** 2
              + (state.positions[:, 1] - pick[1]) ** 2)
        nearest = int(np.argmin(d2))
        if d2[nearest] > params.pinch_radius ** 2:
            pick = (float(state.positions[nearest, 0]),
                    float(state.positions[nearest, 1]))
        state = execute_fold(state, spec, FoldAction(pick, place), params,
                             workspace=grid, record_frames=False).final_state
    return state


def test_acceptance_2_goal_achievability(flat_centered, goal_masks,
                                         default_spec, default_params,
                                         default_grid, capsys):
    with criterion(2, "goal achievability under marker noise", 60.0, capsys):
        amplitudes = (0.0, 0.01, 0.02, 0.03)
        goal_means: dict[str, list[float]] = {}
        for gid in ("G1", "G2", "G3", "G4"):
            actions = get_goal(gid).actions(default_spec, default_grid)

            # replaying the goal's own script scores >= 0.95
            session = run_session_folds(
                SessionConfig(goal_id=gid),
                [(a.pick, a.place) for a in actions])
            self_mask = rasterize_topdown(session.cloth, default_grid)
            self_score = score_trial(self_mask, goal_masks[gid])
            assert self_score.iou >= 0.95, (gid, self_score.iou)

            # 20 noisy trials per goal: 5 noise directions x 4 amplitudes
            rng = np.random.default_rng([9001, ord(gid[1])])
            units = [rng.uniform(-1.0, 1.0, 8) for _ in range(5)]
            means = []
            for amp in amplitudes:
                values = []
                for unit in units:
                    state = _noisy_goal_trial(flat_centered, default_spec,
                                              default_params, default_grid,
                                              actions, amp, unit)
                    mask = rasterize_topdown(state, default_grid)
                    values.append(iou(mask, goal_masks[gid]))
                means.append(sum(values) / len(values))
            goal_means[gid] = means
            # every goal individually degrades from zero to max noise
            assert means[0] > means[-1], (gid, means)

        # mean IoU over the noise experiment decays strictly with amplitude
        pooled = [sum(goal_means[g][ai] for g in goal_means) / len(goal_means)
                  for ai in range(len(amplitudes))]
        assert all(a > b for a, b in zip(pooled, pooled[1:])), (pooled,
                                                                goal_means)


# --- 3: alignment equals brute force --------------------------------------------


def brute_force_align(a: Mask, b: Mask, radius: int):
    best_key, best = None, None
    for dx in range(-radius, radius + 1):
        for dy in range(-radius, radius + 1):
            shifted = translate(b, dx, dy).bits
            inter = int((a.bits & shifted).sum())
            union = int((a.bits | shifted).sum())
            val = Fraction(1) if union == 0 else Fraction(inter, union)
            key = (-val, dx * dx + dy * dy, (dx, dy))
            if best_key is None or key < best_key:
                best_key, best = key, ((dx, dy), float(val))
    return best


def test_acceptance_3_alignment_oracle(capsys):
    with criterion(3, "alignment equals exhaustive search", 10.0, capsys):
        rng = np.random.default_rng(2718)
        for trial in range(200):
            density = rng.uniform(0.02, 0.8)
            a = Mask(rng.random((64, 64)) < density)
            if trial % 2 == 0:
                dx, dy = (int(v) for v in rng.integers(-4, 5, size=2))
                flips = rng.random((64, 64)) < rng.uniform(0.0, 0.1)
                b = Mask(translate(a, dx, dy).bits ^ flips)
            else:
                b = Mask(rng.random((64, 64)) < density)
            assert align(a, b, 4) == brute_force_align(a, b, 4)


# --- 4: determinism, undo, and replay --------------------------------------------


def test_acceptance_4_determinism_and_replay(capsys):
    with criterion(4, "determinism, undo, and log replay", 60.0, capsys):
        spec = ClothSpec(resolution=11)
        rng = np.random.default_rng(424242)

        def sample_place(pick):
            while True:
                p = (float(rng.uniform(0.12, 0.38)),
                     float(rng.uniform(0.12, 0.38)))
                if math.dist(p, pick) >= 0.03:
                    return p

        def sample_pick(state):
            i = int(rng.integers(state.num_particles))
            return (float(state.positions[i, 0]), float(state.positions[i, 1]))

        for trial in range(50):
            config = SessionConfig(n_folds=2, goal_id="G1", cloth=spec)
            session = new_session(config, clock=make_fake_clock())

            pick0 = sample_pick(session.cloth)
            place_marker(session, 0, PICK, pick0)
            place_marker(session, 0, PLACE, sample_place(pick0))

            before = session.cloth
            apply_command(session, "Simulate")
            apply_command(session, "Undo")
            assert session.cloth is before
            assert states_equal(session.cloth, before)

            apply_command(session, "Simulate")
            pick1 = sample_pick(session.cloth)
            place_marker(session, 1, PICK, pick1)
            place_marker(session, 1, PLACE, sample_place(pick1))
            apply_command(session, "Fold")

            direct = session.initial_cloth.copy()
            for pair in range(2):
                direct = execute_fold(direct, spec, session.pair_action(pair),
                                      config.params, workspace=config.grid,
                                      record_frames=False).final_state
            assert states_equal(session.cloth, direct)

            round_tripped = parse_log(export_log(session).to_ndjson())
            replayed, _, _ = replay(round_tripped)
            assert states_equal(replayed, session.cloth)


# --- 5: command FSM -----------------------------------------------------------------


FSM_POSITIONS = ((0.2, 0.2), (0.3, 0.3), (0.398, 0.287), (0.25, 0.25))
FSM_ALPHABET = ("PlaceNext", "Simulate", "Fold", "Undo", "Reset")


class OracleFsm:
    """Independent model of the session command rules for n_folds=2."""

    def __init__(self, preview: bool):
        self.preview = preview
        self.placed = 0          # markers placed, in canonical order
        self.simulated = 0       # pairs consumed by Simulate
        self.executed = False

    def step(self, op: str) -> str | None:
        if op == "PlaceNext":
            if self.executed:
                return "SessionFinished"
            if self.placed < 4:
                if self.placed // 2 < self.simulated:
                    return "PairLocked"
                self.placed += 1
                return None
            if self.simulated > 0:  # re-place pair 0's pick
                return "PairLocked"
            return None
        if op == "Simulate":
            if not self.preview:
                return "CommandDisabled"
            if self.executed:
                return "SessionFinished"
            if self.simulated >= 2 or self.placed < 2 * (self.simulated + 1):
                return "NothingToSimulate"
            self.simulated += 1
            return None
        if op == "Undo":
            if not self.preview:
                return "CommandDisabled"
            if self.simulated == 0:
                return "NothingToUndo"
            self.simulated -= 1
            return None
        if op == "Fold":
            if self.placed < 4:
                return "MarkersIncomplete"
            self.executed = True
            self.simulated = 0
            return None
        assert op == "Reset"
        self.placed = 0
        self.simulated = 0
        self.executed = False
        return None


def _fsm_real_step(session, op: str, placed_before: int) -> str | None:
    try:
        if op == "PlaceNext":
            i = placed_before if placed_before < 4 else 0
            kind = PICK if i % 2 == 0 else PLACE
            place_marker(session, i // 2, kind, FSM_POSITIONS[i])
        else:
            apply_command(session, op)
        return None
    except FoldLabError as exc:
        return exc.code


def _run_fsm_sequence(config, preview: bool, seq) -> set[str]:
    session = new_session(config, clock=make_fake_clock())
    oracle = OracleFsm(preview)
    codes: set[str] = set()
    for op in seq:
        placed_before = oracle.placed
        expected = oracle.step(op)
        actual = _fsm_real_step(session, op, placed_before)
        assert actual == expected, (preview, seq, op, actual, expected)
        if actual is not None:
            codes.add(actual)
        # structural invariants after every step
        assert session.simulated_pairs == oracle.simulated
        assert len(session.undo_stack) == oracle.simulated
        assert session.executed == oracle.executed
        assert sum(1 for sl in session.slots if sl.placed) == oracle.placed
        spawned = len(session.slots) // 2
        assert spawned == (1 if oracle.placed < 2 else 2)
        assert spawned <= oracle.placed // 2 + 1
        if not preview:
            assert session.undo_stack == []
    return codes


def test_acceptance_5_command_fsm(capsys):
    with criterion(5, "command FSM vs independent oracle", 30.0, capsys):
        spec = ClothSpec(side_length=0.1, resolution=2)
        seen_codes: set[str] = set()
        for preview in (True, False):
            config = SessionConfig(n_folds=2, preview_enabled=preview,
                                   cloth=spec)
            for length in range(1, 6):
                for seq in itertools.product(FSM_ALPHABET, repeat=length):
                    seen_codes |= _run_fsm_sequence(config, preview, seq)
        # every rejection reachable within five commands occurred; a
        # finished or pair-locked session needs at least six
        assert {"CommandDisabled", "MarkersIncomplete", "NothingToSimulate",
                "NothingToUndo"} <= seen_codes

        place4 = ("PlaceNext",) * 4
        config = SessionConfig(n_folds=2, preview_enabled=True, cloth=spec)
        extra_codes: set[str] = set()
        for seq in (place4 + ("Fold", "PlaceNext"),
                    place4 + ("Fold", "Simulate"),
                    place4 + ("Fold", "Undo"),
                    place4 + ("Simulate", "PlaceNext"),
                    place4 + ("Simulate", "Simulate", "Fold", "PlaceNext"),
                    place4 + ("Simulate", "Undo", "PlaceNext", "Fold")):
            extra_codes |= _run_fsm_sequence(config, True, seq)
        assert {"SessionFinished", "PairLocked",
                "NothingToUndo"} <= extra_codes


# --- 6: ANOVA correctness --------------------------------------------------------


def test_acceptance_6_anova_reference(capsys):
    import pandas as pd
    from statsmodels.stats.anova import AnovaRM

    with criterion(6, "ANOVA matches reference statistics", 5.0, capsys):
        for seed in range(10):
            rng = np.random.default_rng(1000 + seed)
            ea, eb, eab = rng.uniform(-6.0, 6.0, size=3)
            records = []
            for i in range(18):
                base = rng.normal(60.0, 8.0)
                for ai, a in enumerate(("baseline", "workbench")):
                    for bi, b in enumerate(("off", "on")):
                        value = (base + ea * ai + eb * bi + eab * ai * bi
                                 + rng.normal(0.0, 2.0))
                        records.append(TrialRecord(f"s{i:02d}", a, b,
                                                   "completion_time", value))
            result = rm_anova_2x2(records)
            frame = pd.DataFrame(
                [{"subject": r.subject, "interface": r.interface,
                  "preview": r.preview, "value": r.value} for r in records])
            table = AnovaRM(frame, depvar="value", subject="subject",
                            within=["interface", "preview"]).fit().anova_table
            for effect, row in ((result.interface, "interface"),
                                (result.preview, "preview"),
                                (result.interaction, "interface:preview")):
                assert effect.df == (1, 17)
                assert effect.f == pytest.approx(table.loc[row, "F Value"],
                                                 rel=1e-6)
                assert effect.p == pytest.approx(table.loc[row, "Pr > F"],
                                                 rel=1e-6)

        flat = [TrialRecord(s, a, b, "t", 3.0)
                for s in ("s1", "s2", "s3")
                for a in ("x", "y") for b in ("u", "v")]
        result = rm_anova_2x2(flat)
        for effect in (result.interface, result.preview, result.interaction):
            assert effect.f == 0.0 and effect.p == 1.0

        assert f_tail(4.45, 1, 17) == pytest.approx(0.05, abs=0.002)


# --- 7: preview performance --------------------------------------------------------


def test_acceptance_7_preview_performance(capsys):
    with criterion(7, "two-fold preview under 2 s", 2.0, capsys):
        session = new_session(SessionConfig(), clock=make_fake_clock())
        for pair, (pick, place) in enumerate(
                goal_pairs("G1", session.config.cloth, session.config.grid)):
            place_marker(session, pair, PICK, pick)
            place_marker(session, pair, PLACE, place)
        _, first = apply_command(session, "Simulate")
        _, second = apply_command(session, "Simulate")
        assert len(first[0].frames) >= 2
        assert len(second[0].frames) >= 2
        assert session.simulated_pairs == 2
