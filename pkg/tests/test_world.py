import copy
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from helpers import base_scenario, box_hologram, build_world
from holosim.geometry import HUMAN_HEAD, ROBOT, WORLD, compose, hologram_frame, invert
from holosim.world import (
    HumanAgent,
    PlacementCollision,
    ScenarioConfig,
    SchemaError,
    UnreachableGoal,
    facing_direction,
    head_frame,
    load_scenario,
    sync_frames,
)


class TestHeadFrame:
    def test_neutral_pose(self):
        h = HumanAgent(position=np.zeros(2), heading=0.0)
        t = head_frame(h)
        assert_allclose(t.rotation_matrix()[:, 0], [1, 0, 0], atol=1e-12)
        assert_allclose(t.translation, [0, 0, 1.6], atol=1e-12)

    def test_half_turn_faces_minus_x(self):
        h = HumanAgent(position=np.zeros(2), heading=0.0, head_yaw=math.pi)
        assert_allclose(facing_direction(h), [-1, 0, 0], atol=1e-12)

    def test_yaw_pitch_matches_spherical_oracle(self):
        yaw, pitch = math.radians(30), math.radians(-20)
        h = HumanAgent(position=np.array([0.5, -0.2]), heading=0.0,
                       head_yaw=yaw, head_pitch=pitch)
        expected = [math.cos(pitch) * math.cos(yaw),
                    math.cos(pitch) * math.sin(yaw),
                    math.sin(pitch)]
        assert_allclose(facing_direction(h), expected, atol=1e-9)

    def test_body_heading_adds_to_head_yaw(self):
        h = HumanAgent(position=np.zeros(2), heading=math.radians(40),
                       head_yaw=math.radians(20))
        yaw = math.radians(60)
        assert_allclose(facing_direction(h), [math.cos(yaw), math.sin(yaw), 0], atol=1e-12)

    def test_facing_is_unit(self):
        h = HumanAgent(position=np.zeros(2), heading=1.1, head_yaw=-0.4, head_pitch=0.6)
        assert abs(np.linalg.norm(facing_direction(h)) - 1.0) < 1e-12

    def test_pitch_clamped_to_limit(self):
        h = HumanAgent(position=np.zeros(2), heading=0.0, head_pitch=math.radians(90))
        assert h.head_pitch == pytest.approx(h.pitch_limit)
        d = facing_direction(h)
        assert d[2] == pytest.approx(math.sin(h.pitch_limit))


class TestScenarioLoading:
    def test_fig5_room_shape(self):
        w = load_scenario(ScenarioConfig.from_file("fig5_room"))
        assert len(w.holograms) == 6
        cabbage = w.hologram(6)
        desk = next(o for o in w.scene.occluders if o.name == "desk_top")
        lo = desk.mesh.vertices.min(axis=0)
        hi = desk.mesh.vertices.max(axis=0)
        pos = cabbage.pose.translation
        assert lo[0] < pos[0] < hi[0] and lo[1] < pos[1] < hi[1]
        assert pos[2] < lo[2]  # underneath the desk top

    def test_empty_hologram_list_is_trivially_complete(self):
        w = load_scenario(ScenarioConfig(base_scenario()))
        assert w.holograms == []

    def test_hologram_in_wall_collides(self):
        doc = base_scenario()
        doc["scene"]["occluders"] = [
            {"name": "wall", "kind": "box", "center": [1.0, 0.0, 1.0], "size": [0.4, 2.0, 2.0]}]
        doc["holograms"] = [{"id": 1, "shape": {"kind": "box", "size": [0.2, 0.2, 0.2]},
                             "position": [1.0, 0.0, 0.1]}]
        with pytest.raises(PlacementCollision):
            load_scenario(ScenarioConfig(doc))

    def test_walled_off_goal_unreachable(self):
        doc = base_scenario()
        # Box the goal zone in completely.
        doc["scene"]["occluders"] = [
            {"name": "ring", "kind": "box", "center": [2.0, 2.0, 1.0], "size": [1.9, 1.9, 2.0],
             "blocks_floor": True}]
        doc["scene"]["goal_zone"] = {"center": [2.0, 2.0], "radius": 0.3}
        with pytest.raises((UnreachableGoal, PlacementCollision)):
            load_scenario(ScenarioConfig(doc))

    def test_schema_violations(self):
        with pytest.raises(SchemaError):
            ScenarioConfig({"name": "x"})  # missing scene/human/robot
        doc = base_scenario()
        doc["holograms"] = [{"id": -1, "shape": {"kind": "box", "size": [1, 1, 1]},
                             "position": [0, 0, 0]}]
        with pytest.raises(SchemaError):
            ScenarioConfig(doc)

    def test_duplicate_hologram_ids_rejected(self):
        doc = base_scenario()
        doc["holograms"] = [
            {"id": 1, "shape": {"kind": "box", "size": [0.2, 0.2, 0.2]}, "position": [1, 0, 0.1]},
            {"id": 1, "shape": {"kind": "box", "size": [0.2, 0.2, 0.2]}, "position": [0, 1, 0.1]},
        ]
        with pytest.raises(SchemaError):
            load_scenario(ScenarioConfig(doc))

    def test_deterministic_for_identical_bytes(self):
        doc = json.dumps(base_scenario())
        w1 = load_scenario(ScenarioConfig(json.loads(doc)))
        w2 = load_scenario(ScenarioConfig(json.loads(doc)))
        assert_allclose(w1.human.position, w2.human.position)
        assert_allclose(w1.robot.position, w2.robot.position)
        assert w1.scene.grid.occupied.tolist() == w2.scene.grid.occupied.tolist()

    def test_jitter_respects_seed(self):
        doc = base_scenario(placement_jitter_m=0.2)
        doc["holograms"] = [{"id": 1, "shape": {"kind": "box", "size": [0.2, 0.2, 0.2]},
                             "position": [1.0, 0.5, 0.1]}]
        w0 = load_scenario(ScenarioConfig({**doc, "seed": 0}))
        w0b = load_scenario(ScenarioConfig({**doc, "seed": 0}))
        w1 = load_scenario(ScenarioConfig({**doc, "seed": 1}))
        assert_allclose(w0.hologram(1).pose.translation, w0b.hologram(1).pose.translation)
        assert not np.allclose(w0.hologram(1).pose.translation,
                               w1.hologram(1).pose.translation)


class TestSyncFrames:
    def test_robot_motion_reflected_exactly(self):
        w = build_world()
        w.robot.position = w.robot.position + np.array([1.0, 0.0])
        sync_frames(w)
        t = w.frames.resolve(WORLD, ROBOT)
        assert_allclose(t.translation[:2], w.robot.position, atol=1e-12)

    def test_carried_hologram_offset_constant(self):
        w = build_world(holograms=[(1, (0.5, 0.0, 0.1), 0.2)])
        h = w.hologram(1)
        h.status = "carried"
        h.carried_by = "robot"
        h.grasp_offset = compose(invert(w.robot.base_transform()), h.pose)
        baseline = w.frames.resolve(ROBOT, hologram_frame(1)).matrix()
        for step in range(5):
            w.robot.position = w.robot.position + np.array([0.3, -0.1])
            w.robot.heading += 0.4
            sync_frames(w)
            now = w.frames.resolve(ROBOT, hologram_frame(1)).matrix()
            assert_allclose(now, baseline, atol=1e-9)

    def test_idempotent(self):
        w = build_world(holograms=[(1, (0.5, 0.0, 0.1), 0.2)])
        sync_frames(w)
        before = w.frames.resolve(WORLD, hologram_frame(1)).matrix()
        sync_frames(w)
        assert_allclose(w.frames.resolve(WORLD, hologram_frame(1)).matrix(), before,
                        atol=1e-15)

    def test_frame_chain_consistency(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            w = build_world(
                human_pos=rng.uniform(-2, 2, 2), heading=rng.uniform(-3, 3),
                head_yaw=rng.uniform(-1, 1), head_pitch=rng.uniform(-0.8, 0.8),
                robot_pos=rng.uniform(-2, 2, 2), robot_heading=rng.uniform(-3, 3),
                holograms=[(1, rng.uniform(-2, 2, 3), 0.2)])
            direct = w.frames.resolve(ROBOT, hologram_frame(1))
            chained = compose(w.frames.resolve(ROBOT, HUMAN_HEAD),
                              w.frames.resolve(HUMAN_HEAD, hologram_frame(1)))
            assert_allclose(direct.matrix(), chained.matrix(), atol=1e-9)
