"""Rigid transforms, frame graphs, pinhole projection, and mesh utilities.

Conventions used throughout:
  - world frame is right-handed with +z up; the floor is the z=0 plane
  - camera frames are +z forward, +x right, +y down
  - quaternions are stored (w, x, y, z) and renormalized after every
    composition to bound drift
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WORLD = "world"
ROBOT = "robot"
HUMAN_HEAD = "human_head"
ROBOT_CAMERA = "robot_camera"


def hologram_frame(hologram_id: int) -> str:
    """Frame id for hologram `hologram_id`."""
    return f"hologram/{hologram_id}"


class UnknownFrame(KeyError):
    """A frame id is not registered in the graph."""


class EmptyMesh(ValueError):
    """The operation needs at least one vertex."""


def _quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _matrix_to_quat(m: np.ndarray) -> np.ndarray:
    # Shepperd's method: pick the largest diagonal combination for stability.
    t = np.trace(m)
    if t > 0:
        s = 0.5 / np.sqrt(t + 1.0)
        w = 0.25 / s
        x = (m[2, 1] - m[1, 2]) * s
        y = (m[0, 2] - m[2, 0]) * s
        z = (m[1, 0] - m[0, 1]) * s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return np.array([w, x, y, z])


@dataclass(frozen=True)
class Transform:
    """Rigid SE(3) transform: rotate by `rotation` then add `translation`."""

    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    translation: np.ndarray  # meters

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float).reshape(4)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        n = float(np.linalg.norm(q))
        if not np.isfinite(n) or n < 1e-12:
            raise ValueError("rotation quaternion has (near-)zero norm")
        object.__setattr__(self, "rotation", q / n)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_axis_angle(axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "Transform":
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            raise ValueError("rotation axis has zero norm")
        axis = axis / n
        half = 0.5 * angle
        q = np.concatenate(([np.cos(half)], np.sin(half) * axis))
        return Transform(q, np.asarray(translation, dtype=float))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Transform":
        m = np.asarray(m, dtype=float)
        return Transform(_matrix_to_quat(m[:3, :3]), m[:3, 3])

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = _quat_to_matrix(self.rotation)
        out[:3, 3] = self.translation
        return out

    def rotation_matrix(self) -> np.ndarray:
        return _quat_to_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to one point (3,) or a stack of points (n, 3)."""
        pts = np.asarray(points, dtype=float)
        return pts @ _quat_to_matrix(self.rotation).T + self.translation


def compose(a: Transform, b: Transform) -> Transform:
    """Transform equivalent to applying `b` first, then `a`."""
    q = _quat_multiply(a.rotation, b.rotation)
    t = a.apply(b.translation)
    return Transform(q, t)


def invert(t: Transform) -> Transform:
    """Inverse transform: compose(t, invert(t)) is the identity."""
    q_inv = t.rotation * np.array([1.0, -1.0, -1.0, -1.0])
    return Transform(q_inv, -(_quat_to_matrix(q_inv) @ t.translation))


class TransformGraph:
    """Tree of frames rooted at `world`.

    Each non-root frame stores a single (parent, transform) edge, where the
    transform expresses the child frame in parent coordinates. Re-adding an
    edge for an existing child re-parents it, which leaves resolve() results
    unchanged when the new edge is consistent with the old path.
    """

    def __init__(self):
        self._parent: dict[str, tuple[str, Transform]] = {}

    def frames(self) -> list[str]:
        return [WORLD] + sorted(self._parent)

    def has_frame(self, frame: str) -> bool:
        return frame == WORLD or frame in self._parent

    def set_edge(self, parent: str, child: str, transform: Transform) -> None:
        if not self.has_frame(parent):
            raise UnknownFrame(parent)
        if child == WORLD:
            raise ValueError("the root frame cannot have a parent")
        # Walk up from `parent`: re-parenting `child` under one of its own
        # descendants would create a cycle.
        node = parent
        while node != WORLD:
            if node == child:
                raise ValueError(f"edge {parent}->{child} would create a cycle")
            node = self._parent[node][0]
        self._parent[child] = (parent, transform)

    def _to_root(self, frame: str) -> Transform:
        if not self.has_frame(frame):
            raise UnknownFrame(frame)
        result = Transform.identity()
        node = frame
        while node != WORLD:
            parent, edge = self._parent[node]
            result = compose(edge, result)
            node = parent
        return result

    def resolve(self, from_frame: str, to_frame: str) -> Transform:
        """Transform expressing `to_frame` in `from_frame` coordinates."""
        root_from = self._to_root(from_frame)
        root_to = self._to_root(to_frame)
        return compose(invert(root_from), root_to)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; pixel coordinates are (u right, v down)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])


def project_point(intr: CameraIntrinsics, p_camera) -> tuple[float, float] | None:
    """Project a camera-frame point to pixel (u, v).

    Returns None for points at or behind the camera plane (z <= 0) and for
    projections falling outside the image rectangle [0, w) x [0, h).
    """
    x, y, z = np.asarray(p_camera, dtype=float)
    if z <= 0:
        return None
    u = intr.fx * x / z + intr.cx
    v = intr.fy * y / z + intr.cy
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        return None
    return (u, v)


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle mesh with one RGB color (0..1) per vertex."""

    vertices: np.ndarray  # (n, 3) float, meters
    triangles: np.ndarray  # (m, 3) int vertex indices
    colors: np.ndarray  # (n, 3) float RGB

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        c = np.asarray(self.colors, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh vertices contain non-finite coordinates")
        if len(c) != len(v):
            raise ValueError("need exactly one color per vertex")
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "colors", c)

    @staticmethod
    def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), color=(0.7, 0.7, 0.7),
            yaw: float = 0.0) -> "TriangleMesh":
        """Axis-aligned box (optionally yawed about +z through its center)."""
        sx, sy, sz = np.asarray(size, dtype=float) / 2.0
        corners = np.array([
            [-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
            [-sx, -sy, sz], [sx, -sy, sz], [sx, sy, sz], [-sx, sy, sz],
        ])
        if yaw:
            c, s = np.cos(yaw), np.sin(yaw)
            rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
            corners = corners @ rot.T
        corners = corners + np.asarray(center, dtype=float)
        faces = np.array([
            [0, 2, 1], [0, 3, 2],  # bottom
            [4, 5, 6], [4, 6, 7],  # top
            [0, 1, 5], [0, 5, 4],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [1, 2, 6], [1, 6, 5],  # +x
            [3, 0, 4], [3, 4, 7],  # -x
        ])
        colors = np.tile(np.asarray(color, dtype=float), (8, 1))
        return TriangleMesh(corners, faces, colors)

    def transformed(self, t: Transform) -> "TriangleMesh":
        return TriangleMesh(t.apply(self.vertices), self.triangles, self.colors)

    def triangle_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-triangle corner arrays (v0, v1, v2), each (m, 3)."""
        v = self.vertices
        t = self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def triangle_areas(self) -> np.ndarray:
        v0, v1, v2 = self.triangle_corners()
        return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)

    def area(self) -> float:
        return float(self.triangle_areas().sum()) if len(self.triangles) else 0.0


@dataclass(frozen=True)
class PointCloud:
    """Colored point set; positions in meters."""

    points: np.ndarray  # (n, 3)
    colors: np.ndarray  # (n, 3)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        c = np.asarray(self.colors, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("point cloud contains non-finite coordinates")
        if len(c) != len(p):
            raise ValueError("need exactly one color per point")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "colors", c)

    @staticmethod
    def empty() -> "PointCloud":
        return PointCloud(np.zeros((0, 3)), np.zeros((0, 3)))

    @staticmethod
    def concatenate(clouds: "list[PointCloud]") -> "PointCloud":
        if not clouds:
            return PointCloud.empty()
        return PointCloud(
            np.concatenate([c.points for c in clouds]),
            np.concatenate([c.colors for c in clouds]),
        )


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray  # (3,)
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if self.radius < 0:
            raise ValueError("sphere radius must be nonnegative")


@dataclass(frozen=True)
class Circle2D:
    center: np.ndarray  # (2,) on the floor plane
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if self.radius < 0:
            raise ValueError("circle radius must be nonnegative")

    def contains(self, point) -> bool:
        return float(np.linalg.norm(np.asarray(point, dtype=float) - self.center)) <= self.radius


def sample_points_on_mesh(mesh: TriangleMesh, count: int, rng: np.random.Generator) -> PointCloud:
    """Draw `count` surface points, area-uniform, with interpolated colors.

    Triangle choice is stratified over the cumulative area distribution so
    per-triangle counts track area fractions closely even for small counts.
    """
    if count <= 0 or len(mesh.triangles) == 0:
        return PointCloud.empty()
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        return PointCloud.empty()
    cdf = np.cumsum(areas) / total
    u = (np.arange(count) + rng.random(count)) / count
    tri_idx = np.searchsorted(cdf, u, side="left").clip(0, len(areas) - 1)

    # Uniform barycentric coordinates via the square-root trick.
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    w0 = 1.0 - r1
    w1 = r1 * (1.0 - r2)
    w2 = r1 * r2

    tris = mesh.triangles[tri_idx]
    v = mesh.vertices
    pts = w0[:, None] * v[tris[:, 0]] + w1[:, None] * v[tris[:, 1]] + w2[:, None] * v[tris[:, 2]]
    c = mesh.colors
    cols = w0[:, None] * c[tris[:, 0]] + w1[:, None] * c[tris[:, 1]] + w2[:, None] * c[tris[:, 2]]
    return PointCloud(pts, cols)


def sample_mesh(mesh: TriangleMesh, density: float, rng_seed: int) -> PointCloud:
    """Sample a mesh at `density` points per square meter.

    The point count is round(total_area * density); a zero-area mesh yields
    an empty cloud. Identical seeds give identical clouds.
    """
    if density <= 0:
        raise ValueError("density must be positive")
    total = mesh.area()
    count = int(round(total * density))
    rng = np.random.default_rng(rng_seed)
    return sample_points_on_mesh(mesh, count, rng)


def circumscribed_sphere(mesh: TriangleMesh) -> Sphere:
    """Sphere centered at the AABB center, radius to the farthest vertex."""
    if len(mesh.vertices) == 0:
        raise EmptyMesh("cannot fit a sphere to a mesh with no vertices")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    center = (lo + hi) / 2.0
    radius = float(np.linalg.norm(mesh.vertices - center, axis=1).max())
    return Sphere(center, radius)
