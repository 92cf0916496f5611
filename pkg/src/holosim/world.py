"""Authoritative world state: agents, holograms, occluders, and scenarios.

Agents live in 2.5D: a floor position plus a body heading, and for the
human an additional head yaw/pitch on top of the body. All angles are
radians internally; scenario JSON uses degrees (fields suffixed `_deg`).
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import meshio
from .geometry import (
    HUMAN_HEAD,
    ROBOT,
    ROBOT_CAMERA,
    WORLD,
    CameraIntrinsics,
    Transform,
    TransformGraph,
    TriangleMesh,
    Circle2D,
    compose,
    hologram_frame,
    invert,
)

HUMAN_ID = "human"
ROBOT_ID = "robot"

FREE = "free"
CARRIED = "carried"
DELIVERED = "delivered"

DEFAULT_PITCH_LIMIT = math.radians(80.0)

# Occluders whose lowest point is below this clear a ground robot's path;
# anything lower blocks floor cells unless the scenario says otherwise.
FLOOR_CLEARANCE_M = 0.35

# Rotation taking robot-camera axes (z fwd, x right, y down) to robot-body
# axes (x fwd, y left, z up).
_CAMERA_IN_BODY = np.array([
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])


class SchemaError(ValueError):
    """Scenario document does not match the scenario schema."""


class PlacementCollision(ValueError):
    """A hologram or agent placement lands in occupied space."""


class UnreachableGoal(ValueError):
    """The goal zone is not grid-connected to the agents."""


def head_pose(yaw: float, pitch: float, origin) -> Transform:
    """World-frame pose with +x facing along (yaw, pitch) and +z up at pitch 0."""
    qz = Transform.from_axis_angle((0.0, 0.0, 1.0), yaw)
    qy = Transform.from_axis_angle((0.0, 1.0, 0.0), -pitch)
    t = compose(qz, qy)
    return Transform(t.rotation, np.asarray(origin, dtype=float))


@dataclass
class HumanAgent:
    position: np.ndarray  # (2,) floor coordinates, m
    heading: float  # body yaw, rad
    head_yaw: float = 0.0  # relative to body
    head_pitch: float = 0.0
    eye_height: float = 1.6
    fov_h: float = math.radians(30.0)
    fov_v: float = math.radians(17.5)
    max_speed: float = 1.2
    max_turn_rate: float = 2.0
    footprint_radius: float = 0.25
    pitch_limit: float = DEFAULT_PITCH_LIMIT
    carried: int | None = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.head_pitch = float(np.clip(self.head_pitch, -self.pitch_limit, self.pitch_limit))

    def eye_point(self) -> np.ndarray:
        return np.array([self.position[0], self.position[1], self.eye_height])

    def body_transform(self) -> Transform:
        return Transform.from_axis_angle(
            (0.0, 0.0, 1.0), self.heading,
            (self.position[0], self.position[1], 0.0))


def head_frame(h: HumanAgent) -> Transform:
    """World-frame head pose; +x is the facing direction, origin at the eye."""
    return head_pose(h.heading + h.head_yaw, h.head_pitch, h.eye_point())


def facing_direction(h: HumanAgent) -> np.ndarray:
    """Unit vector the human is facing (the head frame's +x axis)."""
    d = head_frame(h).rotation_matrix()[:, 0]
    return d / np.linalg.norm(d)


@dataclass
class RobotAgent:
    position: np.ndarray  # (2,), m
    heading: float  # rad
    footprint_radius: float = 0.18
    max_speed: float = 0.5
    max_turn_rate: float = 1.5
    camera: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(525.0, 525.0, 319.5, 239.5, 640, 480))
    camera_mount: Transform = field(
        default_factory=lambda: Transform.from_matrix(_camera_mount_matrix(0.55)))
    carried: int | None = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        if self.footprint_radius <= 0:
            raise ValueError("robot footprint radius must be positive")

    def base_transform(self) -> Transform:
        return Transform.from_axis_angle(
            (0.0, 0.0, 1.0), self.heading,
            (self.position[0], self.position[1], 0.0))


def _camera_mount_matrix(height: float) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = _CAMERA_IN_BODY
    m[:3, 3] = (0.0, 0.0, height)
    return m


def camera_mount(height: float = 0.55) -> Transform:
    """Forward-looking camera pose in the robot body frame."""
    return Transform.from_matrix(_camera_mount_matrix(height))


@dataclass
class Hologram:
    id: int
    label: str
    mesh: TriangleMesh  # local coordinates
    pose: Transform  # world frame
    status: str = FREE
    carried_by: str | None = None
    grasp_offset: Transform | None = None  # pose in carrier frame while carried

    def world_mesh(self) -> TriangleMesh:
        return self.mesh.transformed(self.pose)


@dataclass
class Occluder:
    name: str
    mesh: TriangleMesh  # world coordinates (pose baked in at load)
    blocks_floor: bool


@dataclass
class OccupancyGrid:
    """Boolean floor grid; True cells are occupied."""

    origin: np.ndarray  # (2,) world position of cell (0, 0)'s corner
    cell_size: float
    occupied: np.ndarray  # (ny, nx) bool

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)
        self.occupied = np.asarray(self.occupied, dtype=bool)

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupied.shape

    def cell_of(self, point) -> tuple[int, int]:
        p = np.asarray(point, dtype=float)
        ix = int(math.floor((p[0] - self.origin[0]) / self.cell_size))
        iy = int(math.floor((p[1] - self.origin[1]) / self.cell_size))
        return (iy, ix)

    def center_of(self, cell: tuple[int, int]) -> np.ndarray:
        iy, ix = cell
        return self.origin + (np.array([ix, iy]) + 0.5) * self.cell_size

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        iy, ix = cell
        ny, nx = self.occupied.shape
        return 0 <= iy < ny and 0 <= ix < nx

    def is_free(self, cell: tuple[int, int]) -> bool:
        return self.in_bounds(cell) and not self.occupied[cell]

    def is_free_point(self, point) -> bool:
        return self.is_free(self.cell_of(point))

    def connected(self, a, b) -> bool:
        """4/8-connected reachability between the cells containing a and b."""
        start, goal = self.cell_of(a), self.cell_of(b)
        if not (self.is_free(start) and self.is_free(goal)):
            return False
        seen = np.zeros_like(self.occupied, dtype=bool)
        seen[start] = True
        queue = deque([start])
        while queue:
            cell = queue.popleft()
            if cell == goal:
                return True
            iy, ix = cell
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    nxt = (iy + dy, ix + dx)
                    if (dy or dx) and self.is_free(nxt) and not seen[nxt]:
                        seen[nxt] = True
                        queue.append(nxt)
        return False


@dataclass
class StaticScene:
    occluders: list[Occluder]
    grid: OccupancyGrid
    goal_zone: Circle2D
    bounds: tuple[float, float, float, float]  # (x0, y0, x1, y1)

    def occluder_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Concatenated triangle corners of every occluder (cached)."""
        cached = getattr(self, "_corner_cache", None)
        if cached is None:
            if self.occluders:
                parts = [o.mesh.triangle_corners() for o in self.occluders]
                cached = tuple(np.concatenate([p[i] for p in parts]) for i in range(3))
            else:
                empty = np.zeros((0, 3))
                cached = (empty, empty.copy(), empty.copy())
            self._corner_cache = cached
        return cached


@dataclass
class WorldState:
    time: float
    human: HumanAgent
    robot: RobotAgent
    holograms: list[Hologram]
    scene: StaticScene
    frames: TransformGraph = field(default_factory=TransformGraph)

    def hologram(self, hologram_id: int) -> Hologram:
        for h in self.holograms:
            if h.id == hologram_id:
                return h
        raise KeyError(f"no hologram with id {hologram_id}")

    def agent(self, agent_id: str):
        if agent_id == HUMAN_ID:
            return self.human
        if agent_id == ROBOT_ID:
            return self.robot
        raise KeyError(f"unknown agent id {agent_id!r}")

    def carrier_transform(self, agent_id: str) -> Transform:
        return (self.human.body_transform() if agent_id == HUMAN_ID
                else self.robot.base_transform())

    def clone_dynamic(self) -> "WorldState":
        """Copy with fresh agent/hologram/frame objects; meshes and the
        static scene are shared (they never mutate)."""
        w = WorldState(
            time=self.time,
            human=replace(self.human),
            robot=replace(self.robot),
            holograms=[replace(h) for h in self.holograms],
            scene=self.scene,
            frames=TransformGraph(),
        )
        sync_frames(w)
        return w


def sync_frames(w: WorldState) -> WorldState:
    """Rebuild frame-graph edges from current poses.

    Carried holograms first get their world pose refreshed from the carrier
    so the graph always mirrors the scene; the call is idempotent.
    """
    for h in w.holograms:
        if h.status == CARRIED and h.grasp_offset is not None:
            h.pose = compose(w.carrier_transform(h.carried_by), h.grasp_offset)
    g = w.frames
    g.set_edge(WORLD, ROBOT, w.robot.base_transform())
    g.set_edge(ROBOT, ROBOT_CAMERA, w.robot.camera_mount)
    g.set_edge(WORLD, HUMAN_HEAD, head_frame(w.human))
    for h in w.holograms:
        g.set_edge(WORLD, hologram_frame(h.id), h.pose)
    return w


# --- scenario loading -------------------------------------------------------

_SCHEMA_CACHE: Draft202012Validator | None = None


def _scenario_validator() -> Draft202012Validator:
    global _SCHEMA_CACHE
    if _SCHEMA_CACHE is None:
        text = resources.files("holosim.scenarios").joinpath("scenario.schema.json").read_text()
        _SCHEMA_CACHE = Draft202012Validator(json.loads(text))
    return _SCHEMA_CACHE


def bundled_scenario_path(name: str) -> Path:
    return Path(str(resources.files("holosim.scenarios").joinpath(f"{name}.json")))


@dataclass
class ScenarioConfig:
    """Validated scenario document plus the directory it was loaded from
    (mesh paths resolve relative to it)."""

    data: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        errors = sorted(_scenario_validator().iter_errors(self.data), key=str)
        if errors:
            where = "/".join(str(p) for p in errors[0].absolute_path) or "<root>"
            raise SchemaError(f"scenario invalid at {where}: {errors[0].message}")

    @staticmethod
    def from_file(path) -> "ScenarioConfig":
        p = Path(path)
        if not p.exists():
            candidate = bundled_scenario_path(p.stem if p.suffix else str(path))
            if candidate.exists():
                p = candidate
            else:
                raise FileNotFoundError(f"no scenario file or bundled scenario named {path!r}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise SchemaError(f"{p}: not valid JSON: {e}") from e
        return ScenarioConfig(data, base_dir=p.parent)

    @property
    def name(self) -> str:
        return self.data.get("name", "unnamed")

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        data = dict(self.data)
        data["seed"] = int(seed)
        return ScenarioConfig(data, base_dir=self.base_dir)

    @property
    def human_policy(self) -> str:
        return self.data.get("policies", {}).get("human", "greedy_lowest_cost")

    @property
    def robot_enabled(self) -> bool:
        return bool(self.data.get("policies", {}).get("robot_enabled", True))


def _build_shape(spec: dict, base_dir: Path, color) -> TriangleMesh:
    if spec["kind"] == "box":
        return TriangleMesh.box(size=spec["size"], color=color)
    if spec["kind"] == "mesh":
        mesh = meshio.load_obj(base_dir / spec["path"])
        if color is not None:
            mesh = TriangleMesh(mesh.vertices, mesh.triangles,
                                np.tile(np.asarray(color, float), (len(mesh.vertices), 1)))
        return mesh
    raise SchemaError(f"unknown shape kind {spec['kind']!r}")


def _build_occluder(spec: dict, base_dir: Path) -> Occluder:
    color = spec.get("color", [0.55, 0.45, 0.35])
    if spec["kind"] == "box":
        mesh = TriangleMesh.box(size=spec["size"], center=spec["center"],
                                color=color, yaw=math.radians(spec.get("yaw_deg", 0.0)))
    else:
        mesh = _build_shape(spec, base_dir, color)
    min_z = float(mesh.vertices[:, 2].min())
    blocks = spec.get("blocks_floor", min_z < FLOOR_CLEARANCE_M)
    return Occluder(spec.get("name", spec["kind"]), mesh, blocks)


def _rasterize(bounds, cell_size: float, occluders: list[Occluder]) -> OccupancyGrid:
    x0, y0, x1, y1 = bounds
    nx = max(1, int(round((x1 - x0) / cell_size)))
    ny = max(1, int(round((y1 - y0) / cell_size)))
    occ = np.zeros((ny, nx), dtype=bool)
    xs = x0 + (np.arange(nx) + 0.5) * cell_size
    ys = y0 + (np.arange(ny) + 0.5) * cell_size
    half = cell_size / 2.0
    for o in occluders:
        if not o.blocks_floor:
            continue
        lo = o.mesh.vertices.min(axis=0)
        hi = o.mesh.vertices.max(axis=0)
        # Any overlap between the cell square and the footprint AABB occupies
        # the cell, so grids always cover full footprints.
        col = (xs + half > lo[0]) & (xs - half < hi[0])
        row = (ys + half > lo[1]) & (ys - half < hi[1])
        occ |= row[:, None] & col[None, :]
    return OccupancyGrid(np.array([x0, y0]), cell_size, occ)


def _hologram_from_spec(spec: dict, base_dir: Path) -> Hologram:
    color = spec.get("color", [0.8, 0.3, 0.2])
    mesh = _build_shape(spec["shape"], base_dir, color)
    pose = Transform.from_axis_angle(
        (0.0, 0.0, 1.0), math.radians(spec.get("yaw_deg", 0.0)), spec["position"])
    return Hologram(id=int(spec["id"]), label=spec.get("label", f"hologram_{spec['id']}"),
                    mesh=mesh, pose=pose)


def _jitter_positions(cfg_data: dict, holograms: list[Hologram],
                      grid: OccupancyGrid, seed: int) -> None:
    default_jitter = float(cfg_data.get("placement_jitter_m", 0.0))
    rng = np.random.default_rng([seed, 0x9A1])
    for h, spec in zip(holograms, cfg_data["holograms"]):
        jitter = float(spec.get("jitter_m", default_jitter))
        if jitter <= 0:
            continue
        base = np.asarray(spec["position"], dtype=float)
        for _ in range(20):
            offset = rng.uniform(-jitter, jitter, size=2)
            candidate = base[:2] + offset
            if grid.is_free_point(candidate):
                h.pose = Transform(h.pose.rotation,
                                   np.array([candidate[0], candidate[1], base[2]]))
                break


def load_scenario(config: ScenarioConfig) -> WorldState:
    """Build a consistent WorldState from a validated scenario.

    Deterministic for identical config bytes: the config's own seed drives
    placement jitter.
    """
    data = config.data
    scene_spec = data["scene"]
    bounds = tuple(scene_spec["bounds"])
    occluders = [_build_occluder(o, config.base_dir) for o in scene_spec.get("occluders", [])]
    grid = _rasterize(bounds, float(scene_spec.get("cell_size_m", 0.1)), occluders)
    gz = scene_spec["goal_zone"]
    goal_zone = Circle2D(np.asarray(gz["center"], dtype=float), float(gz["radius"]))
    scene = StaticScene(occluders, grid, goal_zone, bounds)

    if not grid.is_free_point(goal_zone.center):
        raise PlacementCollision("goal zone center lies in occupied space")

    hspec = data["human"]
    human = HumanAgent(
        position=np.asarray(hspec["position"], dtype=float),
        heading=math.radians(hspec.get("heading_deg", 0.0)),
        eye_height=float(hspec.get("eye_height_m", 1.6)),
        fov_h=math.radians(hspec.get("fov_h_deg", 30.0)),
        fov_v=math.radians(hspec.get("fov_v_deg", 17.5)),
        max_speed=float(hspec.get("max_speed_mps", 1.2)),
        max_turn_rate=math.radians(hspec.get("max_turn_rate_dps", 114.6)),
        footprint_radius=float(hspec.get("footprint_radius_m", 0.25)),
    )
    rspec = data["robot"]
    cam = rspec.get("camera", {})
    robot = RobotAgent(
        position=np.asarray(rspec["position"], dtype=float),
        heading=math.radians(rspec.get("heading_deg", 0.0)),
        footprint_radius=float(rspec.get("footprint_radius_m", 0.18)),
        max_speed=float(rspec.get("max_speed_mps", 0.5)),
        max_turn_rate=math.radians(rspec.get("max_turn_rate_dps", 86.0)),
        camera=CameraIntrinsics(
            fx=float(cam.get("fx", 525.0)), fy=float(cam.get("fy", 525.0)),
            cx=float(cam.get("cx", 319.5)), cy=float(cam.get("cy", 239.5)),
            width=int(cam.get("width", 640)), height=int(cam.get("height", 480))),
        camera_mount=camera_mount(float(cam.get("mount_height_m", 0.55))),
    )

    holograms = [_hologram_from_spec(h, config.base_dir) for h in data.get("holograms", [])]
    ids = [h.id for h in holograms]
    if len(set(ids)) != len(ids):
        raise SchemaError("hologram ids must be unique")
    _jitter_positions(data, holograms, grid, config.seed)

    for h in holograms:
        if not grid.is_free_point(h.pose.translation[:2]):
            raise PlacementCollision(f"hologram {h.id} ({h.label}) placed in occupied space")
    for label, pos in (("human", human.position), ("robot", robot.position)):
        if not grid.is_free_point(pos):
            raise PlacementCollision(f"{label} start position lies in occupied space")
    for label, pos in (("human", human.position), ("robot", robot.position)):
        if not grid.connected(pos, goal_zone.center):
            raise UnreachableGoal(f"goal zone is not reachable from the {label} start")

    w = WorldState(time=0.0, human=human, robot=robot, holograms=holograms, scene=scene)
    return sync_frames(w)
