"""Minimal ASCII mesh I/O.

Input format is an OBJ subset: `v x y z [r g b]` vertex lines (color
components optional, default grey) and `f i j k` triangle lines with
1-based indices; `i/j/k`-style index groups are tolerated by keeping the
vertex index before the first slash. Everything else is ignored.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import PointCloud, TriangleMesh

DEFAULT_COLOR = (0.7, 0.7, 0.7)


def load_obj(path) -> TriangleMesh:
    vertices: list[list[float]] = []
    colors: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) not in (4, 7):
                raise ValueError(f"{path}:{lineno}: vertex needs 3 or 6 numbers")
            nums = [float(p) for p in parts[1:]]
            vertices.append(nums[:3])
            colors.append(nums[3:6] if len(nums) == 6 else list(DEFAULT_COLOR))
        elif parts[0] == "f":
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: only triangle faces are supported")
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            faces.append(idx)
    return TriangleMesh(
        np.array(vertices, dtype=float).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        np.array(colors, dtype=float).reshape(-1, 3),
    )


def save_ply(cloud: PointCloud, path) -> None:
    """Write an ASCII PLY with xyz positions and 8-bit RGB."""
    rgb = np.clip(np.round(cloud.colors * 255.0), 0, 255).astype(int)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud.points)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for p, c in zip(cloud.points, rgb):
        lines.append(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]} {c[1]} {c[2]}")
    Path(path).write_text("\n".join(lines) + "\n")
