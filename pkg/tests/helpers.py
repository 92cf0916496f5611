"""Shared scene builders for the test suite."""

from __future__ import annotations

import numpy as np

from holosim.geometry import Circle2D, Transform, TriangleMesh
from holosim.world import (
    HumanAgent,
    Hologram,
    Occluder,
    OccupancyGrid,
    RobotAgent,
    StaticScene,
    WorldState,
    sync_frames,
)


def box_hologram(hid: int, center, size=0.2, color=(0.8, 0.3, 0.2)) -> Hologram:
    if np.isscalar(size):
        size = (size, size, size)
    mesh = TriangleMesh.box(size=size, color=color)
    pose = Transform.identity()
    pose = Transform(pose.rotation, np.asarray(center, dtype=float))
    return Hologram(id=hid, label=f"item_{hid}", mesh=mesh, pose=pose)


def build_world(human_pos=(0.0, 0.0), heading=0.0, head_yaw=0.0, head_pitch=0.0,
                eye_height=1.6, robot_pos=(2.0, -2.0), robot_heading=0.0,
                holograms=(), occluders=(), bounds=(-6.0, -6.0, 6.0, 6.0),
                cell=0.25, goal=((4.0, 4.0), 0.6)) -> WorldState:
    """Hand-assembled world: an open floor plus explicit boxes.

    `holograms` entries are (id, center, size); `occluders` entries are
    (center, size). Occluders here never block the floor grid, so agent
    motion and placement stay unconstrained.
    """
    human = HumanAgent(position=np.asarray(human_pos, dtype=float), heading=heading,
                       head_yaw=head_yaw, head_pitch=head_pitch, eye_height=eye_height)
    robot = RobotAgent(position=np.asarray(robot_pos, dtype=float), heading=robot_heading)
    holo_objs = [box_hologram(hid, center, size) for hid, center, size in holograms]
    occ_objs = []
    for i, (center, size) in enumerate(occluders):
        if np.isscalar(size):
            size = (size, size, size)
        occ_objs.append(Occluder(f"occ_{i}", TriangleMesh.box(size=size, center=center),
                                 blocks_floor=False))
    x0, y0, x1, y1 = bounds
    nx = int(round((x1 - x0) / cell))
    ny = int(round((y1 - y0) / cell))
    grid = OccupancyGrid(np.array([x0, y0]), cell, np.zeros((ny, nx), dtype=bool))
    scene = StaticScene(occluders=occ_objs, grid=grid,
                        goal_zone=Circle2D(np.asarray(goal[0], dtype=float), goal[1]),
                        bounds=bounds)
    w = WorldState(time=0.0, human=human, robot=robot, holograms=holo_objs, scene=scene)
    return sync_frames(w)


def base_scenario(**overrides) -> dict:
    """Minimal schema-valid scenario document; override fields as needed."""
    doc = {
        "name": "test_room",
        "seed": 0,
        "scene": {
            "bounds": [-3.0, -3.0, 3.0, 3.0],
            "cell_size_m": 0.1,
            "goal_zone": {"center": [2.0, 2.0], "radius": 0.6},
            "occluders": [],
        },
        "holograms": [],
        "human": {"position": [0.0, 0.0], "heading_deg": 0.0},
        "robot": {"position": [-2.0, -2.0], "heading_deg": 0.0},
        "policies": {"human": "greedy_lowest_cost", "robot_enabled": True},
    }
    doc.update(overrides)
    return doc
