"""The robot's augmented senses.

Holograms only exist as meshes with poses, so to let the robot "see" them
they are sampled into colored point clouds merged with the sampled static
scene (all in the robot camera frame), and projected into the camera image
as per-hologram 2D outlines. The human head pose the robot reasons from is
either a (noisy) camera detection or, when the human leaves the camera
frustum, the headset's own odometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    HUMAN_HEAD,
    ROBOT,
    ROBOT_CAMERA,
    WORLD,
    PointCloud,
    Transform,
    TriangleMesh,
    compose,
    invert,
    project_point,
    sample_points_on_mesh,
)
from .world import WorldState

CAMERA_DETECTION = "camera_detection"
HEADSET_ODOMETRY = "headset_odometry"

_CLOUD_SEED_TAG = 0xC10D


@dataclass(frozen=True)
class SensorFrame:
    cloud: PointCloud  # robot camera frame
    overlay: list[tuple[int, np.ndarray]]  # (hologram id, (n, 2) pixel polygon)
    stamp: float


@dataclass(frozen=True)
class HumanEstimate:
    frame: Transform  # robot -> human head
    source: str  # camera_detection | headset_odometry
    noise_sigma: tuple[float, float]  # (m, rad)


def augment_point_cloud(w: WorldState, density: float, seed: int) -> PointCloud:
    """Sampled occluders plus sampled holograms in the robot camera frame.

    No frustum culling: clouds are full 3D; what is visible is a question
    for viewers, not for the data.
    """
    cam_from_world = invert(w.frames.resolve(WORLD, ROBOT_CAMERA))

    def entity_cloud(mesh: TriangleMesh, stream: list[int]) -> PointCloud:
        # Independent stream per entity: dropping one entity leaves every
        # other entity's samples untouched.
        rng = np.random.default_rng([_CLOUD_SEED_TAG, seed] + stream)
        return sample_points_on_mesh(mesh, int(round(mesh.area() * density)), rng)

    parts = [entity_cloud(occ.mesh, [0, i]) for i, occ in enumerate(w.scene.occluders)]
    parts += [entity_cloud(h.world_mesh(), [1, h.id]) for h in w.holograms]
    merged = PointCloud.concatenate(parts)
    return PointCloud(cam_from_world.apply(merged.points), merged.colors)


def _convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull; degenerate inputs (< 3 points) pass through."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def turn(o, a, b) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and turn(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def render_overlay(w: WorldState) -> list[tuple[int, np.ndarray]]:
    """Projected outline (convex hull of in-image vertex projections) per
    hologram, ordered by id; holograms with no in-image vertex are omitted."""
    cam_from_world = invert(w.frames.resolve(WORLD, ROBOT_CAMERA))
    intr = w.robot.camera
    overlay = []
    for h in sorted(w.holograms, key=lambda h: h.id):
        pts_cam = cam_from_world.apply(h.world_mesh().vertices)
        pixels = [project_point(intr, p) for p in pts_cam]
        pixels = np.array([p for p in pixels if p is not None], dtype=float).reshape(-1, 2)
        if len(pixels) == 0:
            continue
        overlay.append((h.id, _convex_hull_2d(pixels)))
    return overlay


def sensor_frame(w: WorldState, density: float, seed: int) -> SensorFrame:
    return SensorFrame(cloud=augment_point_cloud(w, density, seed),
                       overlay=render_overlay(w), stamp=w.time)


def human_in_camera_frustum(w: WorldState) -> bool:
    head_in_cam = invert(w.frames.resolve(WORLD, ROBOT_CAMERA)).apply(
        w.human.eye_point())
    return project_point(w.robot.camera, head_in_cam) is not None


def estimate_human_frame(w: WorldState, noise: tuple[float, float],
                         seed: int) -> HumanEstimate:
    """Robot->human-head transform, as the robot would estimate it.

    In-frustum humans come from the simulated camera detector: ground truth
    perturbed by noise of magnitude N(0, sigma) along/about a random unit
    direction/axis. Outside the frustum the headset's odometry is treated
    as authoritative, so the estimate is exact.
    """
    truth = w.frames.resolve(ROBOT, HUMAN_HEAD)
    sigma_pos, sigma_rot = noise
    if not human_in_camera_frustum(w):
        return HumanEstimate(frame=truth, source=HEADSET_ODOMETRY, noise_sigma=noise)
    rng = np.random.default_rng([0xE57, seed])
    estimate = truth
    if sigma_pos > 0 or sigma_rot > 0:
        def unit(r):
            v = r.normal(size=3)
            return v / np.linalg.norm(v)

        t_err = unit(rng) * rng.normal(0.0, sigma_pos) if sigma_pos > 0 else np.zeros(3)
        if sigma_rot > 0:
            wobble = Transform.from_axis_angle(unit(rng), rng.normal(0.0, sigma_rot))
        else:
            wobble = Transform.identity()
        estimate = Transform(compose(truth, wobble).rotation, truth.translation + t_err)
    return HumanEstimate(frame=estimate, source=CAMERA_DETECTION, noise_sigma=noise)
