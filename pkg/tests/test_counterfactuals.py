import math

import numpy as np
import pytest

from helpers import (
    DT,
    N_FUTURE,
    N_HISTORY,
    TIMES,
    brake_primitive,
    car_following_scene,
    const_agent,
    library,
    scenario,
    state,
    straight_lane,
    straight_primitive,
    turn_primitive,
)
from oracles import arcwalk_positions_dense, obb_overlap_shapely
from scenesift.counterfactuals import (
    GeneratorKind,
    MotionPrimitive,
    cvm_rollout,
    extract_primitives,
    feasible,
    generate,
    lane_follow_rollout,
    load_library,
    place_primitive,
    place_primitive_final,
    save_library,
)
from scenesift.errors import DataError
from scenesift.geometry import obb_corners
from scenesift.scenario import ScenarioSet, canonical_segment


def _braking_agent(aid, x0, v0, decel=-3.0):
    rows = []
    x, v = x0, v0
    for t in TIMES:
        rows.append(state(t, x, 0.0, vx=v))
        x += v * DT
        v = max(0.0, v + decel * DT)
    return const_agent(aid, 0, 0, 0.0, 0.0).__class__(
        id=aid, kind="vehicle", length=4.5, width=2.0, states=rows
    )


def _turning_agent(aid, speed=8.0, rate=0.3):
    rows, x, y, h = [], 0.0, 0.0, 0.0
    for t in TIMES:
        rows.append(state(t, x, y, heading=h, vx=speed * math.cos(h), vy=speed * math.sin(h)))
        x += speed * math.cos(h) * DT
        y += speed * math.sin(h) * DT
        h += rate * DT
    return const_agent(aid, 0, 0, 0.0, 0.0).__class__(
        id=aid, kind="vehicle", length=4.5, width=2.0, states=rows
    )


class TestExtractPrimitives:
    def test_single_cv_agent_one_family(self):
        data = ScenarioSet([scenario([const_agent("a", 0, 0, 0.0, 10.0)])])
        lib = extract_primitives(data, horizon=4.0, max_count=64, seed=0)
        assert len(lib) >= 1
        for prim in lib.primitives:
            rel = prim.relative_states
            assert np.allclose(rel[0, 0:3], 0.0)  # canonical frame
            assert np.allclose(rel[:, 1], 0.0)  # straight
            assert np.allclose(np.linalg.norm(rel[:, 3:5], axis=1), 10.0)

    def test_braking_and_turning_both_represented(self):
        data = ScenarioSet([
            scenario([_braking_agent("brake", 0.0, 10.0),
                      _turning_agent("turn")], scenario_id="mixed"),
        ])
        lib = extract_primitives(data, horizon=4.0, max_count=16, seed=0)

        def speed_delta(p):
            v = np.linalg.norm(p.relative_states[:, 3:5], axis=1)
            return v[-1] - v[0]

        def heading_delta(p):
            return abs(p.relative_states[-1, 2] - p.relative_states[0, 2])

        assert any(speed_delta(p) < -1.5 for p in lib.primitives)
        assert any(heading_delta(p) > 0.3 for p in lib.primitives)

    def test_empty_dataset_errors(self):
        with pytest.raises(DataError, match="window"):
            extract_primitives(ScenarioSet([]), horizon=4.0, max_count=8, seed=0)

    def test_gap_free_windows_only(self):
        agent = const_agent("a", 0, 0, 0.0, 10.0)
        for k in range(len(agent.states)):
            if k % 3 == 2:
                agent.states[k] = None
        with pytest.raises(DataError):
            extract_primitives(ScenarioSet([scenario([agent])]), horizon=4.0,
                               max_count=8, seed=0)

    def test_deterministic_and_capped(self):
        data = ScenarioSet([
            scenario([_braking_agent("b", 0.0, 10.0), _turning_agent("t"),
                      const_agent("c", 0, 5, 0.0, 9.0)], scenario_id="mix"),
        ])
        lib1 = extract_primitives(data, horizon=4.0, max_count=5, seed=7)
        lib2 = extract_primitives(data, horizon=4.0, max_count=5, seed=7)
        assert len(lib1) == 5
        assert [p.source for p in lib1.primitives] == [p.source for p in lib2.primitives]

    def test_off_grid_horizon_errors(self):
        data = ScenarioSet([scenario([const_agent("a", 0, 0, 0.0, 10.0)])])
        with pytest.raises(DataError, match="multiple"):
            extract_primitives(data, horizon=4.2, max_count=8, seed=0)


class TestPlacePrimitive:
    def test_identity_primitive_takes_anchor_pose(self):
        rel = np.zeros((5, 5))
        prim = MotionPrimitive(id="still", relative_states=rel, duration=2.0,
                               dt=0.5, source="test")
        anchor = state(0.0, 3.0, 4.0, heading=math.pi / 2)
        placed = place_primitive(prim, anchor)
        assert np.allclose(placed[:, 0], 3.0)
        assert np.allclose(placed[:, 1], 4.0)
        assert np.allclose(placed[:, 2], math.pi / 2)

    def test_straight_along_plus_x(self):
        prim = straight_primitive("s", n_states=5, speed=2.0, dt=0.5)
        placed = place_primitive(prim, state(0.0, 0.0, 0.0))
        assert np.allclose(placed[:, 0], [0.0, 1.0, 2.0, 3.0, 4.0])
        assert np.allclose(placed[:, 1], 0.0)
        assert np.allclose(placed[:, 3], 2.0)

    def test_straight_rotated_to_plus_y(self):
        # R(pi/2) sends (x, 0) to (0, x) and (vx, 0) to (0, vx)
        prim = straight_primitive("s", n_states=5, speed=2.0, dt=0.5)
        placed = place_primitive(prim, state(0.0, 0.0, 0.0, heading=math.pi / 2))
        assert np.allclose(placed[:, 0], 0.0, atol=1e-12)
        assert np.allclose(placed[:, 1], [0.0, 1.0, 2.0, 3.0, 4.0])
        assert np.allclose(placed[:, 3], 0.0, atol=1e-12)
        assert np.allclose(placed[:, 4], 2.0)
        assert np.allclose(placed[:, 2], math.pi / 2)

    def test_final_state_pinning(self):
        prim = straight_primitive("s", n_states=5, speed=2.0, dt=0.5)
        anchor = state(0.0, 10.0, -2.0, heading=0.0)
        placed = place_primitive_final(prim, anchor)
        assert np.allclose(placed[-1, 0:3], [10.0, -2.0, 0.0])
        assert np.allclose(placed[:, 0], [6.0, 7.0, 8.0, 9.0, 10.0])

    def test_translation_only_preserves_shape(self):
        prim = turn_primitive("t", 8, 6.0, 0.25, dt=0.5)
        placed = place_primitive(prim, state(0.0, 100.0, 50.0, heading=0.0))
        rel = prim.relative_states
        assert np.allclose(placed[:, 0:2] - [100.0, 50.0], rel[:, 0:2])
        assert np.allclose(placed[:, 2:5], rel[:, 2:5])


class TestFeasible:
    def test_open_road_true(self):
        scene = scenario([const_agent("a", 0, 0, 0.0, 10.0)])
        seg = canonical_segment(scene)
        traj = cvm_rollout(seg.split_state("a"), 4.0, DT)
        assert feasible(traj, seg, "a")

    def test_step3_overlap_false(self):
        mover = const_agent("a", 0, 0, 0.0, 10.0)
        seg = canonical_segment(scenario([mover]))
        split = seg.split_state("a")
        traj = cvm_rollout(split, 4.0, DT)
        # park a second car exactly on the trajectory's step-3 position
        blocker_xy = traj[3, 0:2]
        scene = scenario([mover, const_agent("b", blocker_xy[0], blocker_xy[1], 0.0, 0.0)])
        seg2 = canonical_segment(scene)
        assert not feasible(traj, seg2, "a", start_index=seg2.split_index + 1)
        box_a = obb_corners(traj[3, 0:2], traj[3, 2], 4.5, 2.0)
        box_b = obb_corners(blocker_xy, 0.0, 4.5, 2.0)
        assert obb_overlap_shapely(box_a, box_b)

    def test_exits_drivable_false(self):
        strip = np.array([[-50.0, -5.0], [30.0, -5.0], [30.0, 5.0], [-50.0, 5.0]])
        scene = scenario([const_agent("a", -20, 0, 0.0, 10.0)], drivable_area=[strip])
        seg = canonical_segment(scene)
        traj = cvm_rollout(seg.split_state("a"), 4.0, DT)
        assert traj[-1, 0] > 30.0  # final step leaves the strip
        assert not feasible(traj, seg, "a", start_index=seg.split_index + 1)

    def test_no_map_is_unconstrained(self):
        scene = scenario([const_agent("a", 0, 0, 0.0, 50.0)])
        seg = canonical_segment(scene)
        traj = cvm_rollout(seg.split_state("a"), 4.0, DT)
        assert feasible(traj, seg, "a", start_index=seg.split_index + 1)


class TestRollouts:
    def test_cvm_eight_steps(self):
        traj = cvm_rollout(state(0.0, 0.0, 0.0, vx=2.0), 4.0, 0.5)
        assert traj.shape == (8, 5)
        assert np.allclose(traj[-1, 0:2], [8.0, 0.0])

    def test_cvm_zero_velocity(self):
        traj = cvm_rollout(state(0.0, 3.0, 7.0, vx=0.0, vy=0.0), 4.0, 0.5)
        assert np.allclose(traj[:, 0], 3.0)
        assert np.allclose(traj[:, 1], 7.0)

    def test_cvm_diagonal(self):
        traj = cvm_rollout(state(0.0, 0.0, 0.0, heading=math.pi / 4, vx=1.0, vy=1.0), 2.0, 1.0)
        assert np.allclose(traj[:, 0:2], [[1.0, 1.0], [2.0, 2.0]])

    def test_lane_follow_straight_arcs(self):
        lane = straight_lane("l", y=0.0)
        st = state(0.0, 0.0, 0.0, vx=3.0)
        traj = lane_follow_rollout(st, lane, 2.0, 1.0)
        assert np.allclose(traj[:, 0], [3.0, 6.0])
        assert np.allclose(traj[:, 1], 0.0)

    def test_lane_follow_speed_zero_holds(self):
        lane = straight_lane("l", y=0.0)
        st = state(0.0, 12.0, 0.0, vx=0.0, vy=0.0)
        traj = lane_follow_rollout(st, lane, 4.0, 0.5)
        assert np.allclose(traj[:, 0], 12.0)
        assert np.allclose(traj[:, 1], 0.0)

    def test_lane_follow_corner_matches_dense_walk(self):
        from scenesift.scenario import LaneSegment

        pts = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]])
        lane = LaneSegment(id="corner", width=4.0, centerline=pts)
        st = state(0.0, 0.0, 0.0, vx=3.0)
        traj = lane_follow_rollout(st, lane, 4.0, 0.5)
        expected = arcwalk_positions_dense(pts, 0.0, 3.0, 8, 0.5)
        assert np.allclose(traj[:, 0:2], expected, atol=2e-3)
        assert math.isclose(traj[-1, 2], math.pi / 2)  # past the corner


class TestGenerate:
    def _seg(self):
        return canonical_segment(car_following_scene())

    def _lib_history(self):
        # history substitution needs N_HISTORY-state primitives
        return library(
            straight_primitive("st", N_HISTORY, 10.0, DT),
            brake_primitive("br", N_HISTORY, 10.0, dt=DT),
            turn_primitive("tu", N_HISTORY, 10.0, 0.2, dt=DT),
        )

    def _lib_future(self):
        return library(
            straight_primitive("st", N_FUTURE + 1, 10.0, DT),
            brake_primitive("br", N_FUTURE + 1, 10.0, dt=DT),
            turn_primitive("tu", N_FUTURE + 1, 10.0, 0.2, dt=DT),
        )

    def test_futnone_identity_no_condition(self):
        seg = self._seg()
        out = generate(seg, "ego", GeneratorKind.FUT_NONE)
        assert len(out.variants) == 1
        assert out.variants[0].segment is seg
        assert out.variants[0].condition is None

    def test_futgt_condition_is_recorded_future(self):
        seg = self._seg()
        out = generate(seg, "ego", GeneratorKind.FUT_GT)
        cond = out.variants[0].condition
        future = [st for st in seg.future_states("ego")]
        assert cond.shape == (N_FUTURE, 5)
        assert np.allclose(cond[:, 0], [st.x for st in future])
        assert np.allclose(cond[:, 1], [st.y for st in future])

    def test_futcvm_condition_matches_rollout(self):
        seg = self._seg()
        out = generate(seg, "ego", GeneratorKind.FUT_CVM)
        expected = cvm_rollout(seg.split_state("ego"), 4.0, DT)
        assert np.array_equal(out.variants[0].condition, expected)

    def test_futcvmlane_follows_lane(self):
        seg = self._seg()
        out = generate(seg, "ego", GeneratorKind.FUT_CVM_LANE)
        cond = out.variants[0].condition
        assert cond.shape == (N_FUTURE, 5)
        assert np.allclose(cond[:, 1], 0.0, atol=1e-9)  # lane runs along y=0

    def test_histrmv_deletes_target(self):
        seg = canonical_segment(car_following_scene(bystander_at=40.0))
        out = generate(seg, "ego", GeneratorKind.HIST_RMV)
        edited = out.variants[0].segment.scenario
        assert len(seg.scenario.agents) == 3
        assert len(edited.agents) == 2
        assert not edited.has_agent("ego")
        assert out.variants[0].condition is None

    def test_histprim_three_distinct_histories_common_present(self):
        seg = self._seg()
        out = generate(seg, "ego", GeneratorKind.HIST_PRIM, lib=self._lib_history(),
                       max_variants=3)
        assert len(out.variants) == 3
        split = seg.split_state("ego")
        histories = []
        for v in out.variants:
            edited = v.segment
            vs = edited.split_state("ego")
            assert math.isclose(vs.x, split.x, abs_tol=1e-9)
            assert math.isclose(vs.y, split.y, abs_tol=1e-9)
            assert math.isclose(vs.heading, split.heading, abs_tol=1e-9)
            histories.append(np.array([[s.x, s.y] for s in edited.history_states("ego")]))
        for i in range(3):
            for j in range(i + 1, 3):
                assert not np.allclose(histories[i], histories[j])

    def test_futprim_conditions_are_future_only(self):
        seg = self._seg()
        out = generate(seg, "ego", GeneratorKind.FUT_PRIM, lib=self._lib_future(),
                       max_variants=3)
        assert len(out.variants) >= 1
        for v in out.variants:
            assert v.condition.shape == (N_FUTURE, 5)
            assert v.segment is seg  # futures condition, never edit

    def test_condition_presence_by_kind(self):
        seg = self._seg()
        lib_h, lib_f = self._lib_history(), self._lib_future()
        for kind in GeneratorKind:
            if kind is GeneratorKind.FUT_PRED:
                continue  # needs a predictor; covered in prediction tests
            lib = lib_h if kind is GeneratorKind.HIST_PRIM else lib_f
            out = generate(seg, "ego", kind, lib=lib)
            for v in out.variants:
                if kind.conditions_future:
                    assert v.condition is not None
                else:
                    assert v.condition is None

    def test_non_target_states_bitwise_unchanged(self):
        seg = self._seg()
        out = generate(seg, "ego", GeneratorKind.HIST_PRIM, lib=self._lib_history(),
                       max_variants=3)
        for v in out.variants:
            edited = v.segment.scenario
            for orig, new in zip(seg.scenario.agent("follower").states,
                                 edited.agent("follower").states):
                assert orig is new

    def test_input_segment_never_mutated(self):
        seg = self._seg()
        before = [(s.x, s.y, s.heading) for s in seg.scenario.agent("ego").states]
        generate(seg, "ego", GeneratorKind.HIST_PRIM, lib=self._lib_history())
        after = [(s.x, s.y, s.heading) for s in seg.scenario.agent("ego").states]
        assert before == after

    def test_deterministic_given_seed(self):
        seg = self._seg()
        out1 = generate(seg, "ego", GeneratorKind.HIST_PRIM, lib=self._lib_history(), seed=3)
        out2 = generate(seg, "ego", GeneratorKind.HIST_PRIM, lib=self._lib_history(), seed=3)
        assert [v.variant_id for v in out1.variants] == [v.variant_id for v in out2.variants]

    def test_missing_target_errors(self):
        with pytest.raises(DataError, match="ghost"):
            generate(self._seg(), "ghost", GeneratorKind.FUT_GT)

    def test_prim_without_library_errors(self):
        with pytest.raises(DataError, match="library"):
            generate(self._seg(), "ego", GeneratorKind.HIST_PRIM)

    def test_prim_wrong_duration_errors(self):
        seg = self._seg()
        lib = library(straight_primitive("s", 4, 10.0, DT))
        with pytest.raises(DataError, match="states"):
            generate(seg, "ego", GeneratorKind.HIST_PRIM, lib=lib)


class TestLibraryIO:
    def test_round_trip(self, tmp_path):
        lib = library(
            straight_primitive("a", 9, 8.0, 0.5),
            brake_primitive("b", 9, 10.0, dt=0.5),
        )
        path = tmp_path / "lib.jsonl"
        save_library(lib, path)
        loaded = load_library(path)
        assert len(loaded) == 2
        for orig, back in zip(lib.primitives, loaded.primitives):
            assert back.id == orig.id
            assert back.duration == orig.duration
            assert np.array_equal(back.relative_states, orig.relative_states)

    def test_save_load_save_identical_bytes(self, tmp_path):
        lib = library(turn_primitive("t", 9, 7.0, 0.15, dt=0.5))
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_library(lib, p1)
        save_library(load_library(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
