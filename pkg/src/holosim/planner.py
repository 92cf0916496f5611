"""Target ranking and grid path planning for the proactive robot.

Ranking puts occluded holograms first (highest cost first within each
group, id as the tie-break), which is what lets the robot go after exactly
the items its human partner struggles to see.

Paths are 8-connected shortest paths on an obstacle-inflated occupancy
grid. Path costs are tracked as integer (straight, diagonal) step counts
and only converted to `s + d*sqrt(2)` floats for priority comparisons, so
optimal lengths are exactly reproducible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .interaction import circles_touch, interaction_circle
from .vpt import CostAssessment
from .world import FREE, OccupancyGrid, WorldState, facing_direction

SQRT2 = math.sqrt(2.0)


class Unreachable(ValueError):
    """No path exists between start and goal on the inflated grid."""


class StartOccupied(ValueError):
    """Start cell is occupied after inflation."""


class GoalOccupied(ValueError):
    """Goal cell is occupied after inflation."""


@dataclass(frozen=True)
class TaskQueue:
    """Free holograms in fetch order with their ranking-time assessments."""

    entries: tuple[CostAssessment, ...]

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(e.hologram_id for e in self.entries)

    def head(self) -> CostAssessment | None:
        return self.entries[0] if self.entries else None


@dataclass(frozen=True)
class Path:
    waypoints: np.ndarray  # (n, 2) cell centers, meters
    total_length: float

    def __post_init__(self):
        object.__setattr__(self, "waypoints",
                           np.asarray(self.waypoints, dtype=float).reshape(-1, 2))


@dataclass(frozen=True)
class RobotCommand:
    kind: str  # move_toward | attach | place | idle
    waypoint: np.ndarray | None = None
    hologram_id: int | None = None
    target: np.ndarray | None = None

    @staticmethod
    def idle() -> "RobotCommand":
        return RobotCommand(kind="idle")


def rank_targets(assessments: list[CostAssessment]) -> TaskQueue:
    """Order free holograms: occluded before visible, then cost descending,
    then id ascending."""
    ordered = sorted(assessments,
                     key=lambda a: (not a.occluded, -a.cost, a.hologram_id))
    return TaskQueue(entries=tuple(ordered))


def inflate(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Grow occupied cells by a disk of `radius` meters."""
    if radius <= 0:
        return grid
    r_cells = int(math.ceil(radius / grid.cell_size))
    yy, xx = np.ogrid[-r_cells:r_cells + 1, -r_cells:r_cells + 1]
    disk = (xx * xx + yy * yy) * grid.cell_size ** 2 <= radius * radius + 1e-12
    grown = ndimage.binary_dilation(grid.occupied, structure=disk)
    return OccupancyGrid(grid.origin, grid.cell_size, grown)


def _neighbors(cell, occupied):
    ny, nx = occupied.shape
    iy, ix = cell
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            jy, jx = iy + dy, ix + dx
            if not (0 <= jy < ny and 0 <= jx < nx) or occupied[jy, jx]:
                continue
            if dy != 0 and dx != 0:
                # Diagonal steps must not cut a blocked corner.
                if occupied[iy, jx] or occupied[jy, ix]:
                    continue
                yield (jy, jx), 1
            else:
                yield (jy, jx), 0


def shortest_cell_path(occupied: np.ndarray, start: tuple[int, int],
                       goal: tuple[int, int]) -> tuple[list[tuple[int, int]], int, int]:
    """A* over the grid; returns (cells, straight_steps, diagonal_steps).

    Octile-distance heuristic; admissible and consistent for this move set.
    """

    def heuristic(cell):
        dy = abs(cell[0] - goal[0])
        dx = abs(cell[1] - goal[1])
        lo, hi = min(dy, dx), max(dy, dx)
        return (hi - lo) + lo * SQRT2

    best: dict[tuple[int, int], tuple[int, int]] = {start: (0, 0)}
    parent: dict[tuple[int, int], tuple[int, int] | None] = {start: None}
    open_heap = [(heuristic(start), 0.0, start)]
    closed = set()
    while open_heap:
        _, g_val, cell = heapq.heappop(open_heap)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal:
            cells = []
            node = cell
            while node is not None:
                cells.append(node)
                node = parent[node]
            cells.reverse()
            s, d = best[goal]
            return cells, s, d
        s, d = best[cell]
        for nxt, is_diag in _neighbors(cell, occupied):
            cand = (s + (1 - is_diag), d + is_diag)
            cand_g = cand[0] + cand[1] * SQRT2
            if nxt not in best or cand_g < best[nxt][0] + best[nxt][1] * SQRT2:
                best[nxt] = cand
                parent[nxt] = cell
                heapq.heappush(open_heap, (cand_g + heuristic(nxt), cand_g, nxt))
    raise Unreachable(f"no path from {start} to {goal}")


def plan_path(grid: OccupancyGrid, start, goal, robot_radius: float = 0.0) -> Path:
    """Shortest 8-connected path between world points on the inflated grid."""
    inflated = inflate(grid, robot_radius)
    start_cell = inflated.cell_of(start)
    goal_cell = inflated.cell_of(goal)
    if not inflated.is_free(start_cell):
        raise StartOccupied(f"start {np.asarray(start).tolist()} occupied after inflation")
    if not inflated.is_free(goal_cell):
        raise GoalOccupied(f"goal {np.asarray(goal).tolist()} occupied after inflation")
    if start_cell == goal_cell:
        return Path(np.asarray(start, dtype=float).reshape(1, 2), 0.0)
    cells, s, d = shortest_cell_path(inflated.occupied, start_cell, goal_cell)
    waypoints = np.array([inflated.center_of(c) for c in cells])
    return Path(waypoints, (s + d * SQRT2) * grid.cell_size)


def nearest_free_cell(grid: OccupancyGrid, point) -> np.ndarray | None:
    """Center of the free cell nearest to `point` (the cell itself if free)."""
    cell = grid.cell_of(point)
    if grid.is_free(cell):
        return grid.center_of(cell)
    free = np.argwhere(~grid.occupied)
    if len(free) == 0:
        return None
    centers = grid.origin + (free[:, ::-1] + 0.5) * grid.cell_size
    dist = np.linalg.norm(centers - np.asarray(point, dtype=float), axis=1)
    return centers[int(np.argmin(dist))]


@dataclass
class PlannerSettings:
    # goal_zone: deliver to the middle of the goal zone. deliver_to_human:
    # drop fetched holograms at the nearest free spot the human is already
    # looking at (their current Focusing direction).
    deliver_mode: str = "goal_zone"
    hand_off_distance: float = 1.0


def delivery_target(w: WorldState, settings: PlannerSettings) -> np.ndarray:
    if settings.deliver_mode == "goal_zone":
        return w.scene.goal_zone.center.copy()
    if settings.deliver_mode == "deliver_to_human":
        d = facing_direction(w.human)[:2]
        n = np.linalg.norm(d)
        d = d / n if n > 1e-9 else np.array([1.0, 0.0])
        raw = w.human.position + d * settings.hand_off_distance
        spot = nearest_free_cell(w.scene.grid, raw)
        return spot if spot is not None else w.human.position.copy()
    raise ValueError(f"unknown deliver mode {settings.deliver_mode!r}")


def next_command(w: WorldState, queue: TaskQueue,
                 settings: PlannerSettings = PlannerSettings()) -> RobotCommand:
    """One decision of the fetch-and-deliver policy.

    Carrying: head for the delivery target and place on arrival. Otherwise
    chase the queue head and attach once the interaction circles touch.
    Stateless; the engine's controller caches paths between calls.
    """
    robot = w.robot
    if robot.carried is not None:
        target = delivery_target(w, settings)
        if settings.deliver_mode == "goal_zone":
            arrived = w.scene.goal_zone.contains(robot.position)
        else:
            arrived = float(np.linalg.norm(robot.position - target)) <= 0.15
        if arrived:
            return RobotCommand(kind="place", target=robot.position.copy())
        return RobotCommand(kind="move_toward", waypoint=target)
    head = queue.head()
    if head is None:
        return RobotCommand.idle()
    try:
        h = w.hologram(head.hologram_id)
    except KeyError:
        return RobotCommand.idle()
    if h.status != FREE:
        return RobotCommand.idle()
    if circles_touch(interaction_circle(robot), interaction_circle(h)):
        return RobotCommand(kind="attach", hologram_id=h.id)
    return RobotCommand(kind="move_toward", waypoint=h.pose.translation[:2].copy())
