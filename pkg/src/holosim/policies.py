"""Scripted and externally-driven human behavior, plus shared path following.

Policies emit intents (a world-frame move direction, head deltas, and an
interact edge); the engine owns kinematics and the actual attach/place
calls so that scripted play and a live client steer through the exact same
machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .interaction import circles_touch, interaction_circle
from .planner import GoalOccupied, Path, StartOccupied, Unreachable, inflate, nearest_free_cell, plan_path
from .vpt import CostAssessment
from .world import FREE, OccupancyGrid, WorldState

GREEDY = "greedy_lowest_cost"
SCRIPTED = "scripted_waypoints"
EXTERNAL = "external"


@dataclass
class HumanIntent:
    move: np.ndarray = field(default_factory=lambda: np.zeros(2))  # [-1,1]^2, world frame
    head_yaw_delta: float = 0.0
    head_pitch_delta: float = 0.0
    interact: bool = False
    hologram_id: int | None = None  # attach preference, if the policy has one


class PathFollower:
    """Follows grid paths to a moving sequence of goals, replanning when the
    goal moves or the agent strays off the planned corridor."""

    def __init__(self, grid: OccupancyGrid, radius: float):
        self.grid = grid
        self.inflated = inflate(grid, radius)
        self.radius = radius
        self.path: Path | None = None
        self.goal: np.ndarray | None = None
        self.index = 0
        self.stuck = False

    def _plan(self, pos, goal) -> None:
        self.goal = np.asarray(goal, dtype=float).copy()
        self.index = 0
        self.stuck = False
        start = np.asarray(pos, dtype=float)
        end = self.goal
        if not self.inflated.is_free_point(start):
            nudged = nearest_free_cell(self.inflated, start)
            if nudged is None:
                self.path, self.stuck = None, True
                return
            start = nudged
        if not self.inflated.is_free_point(end):
            nudged = nearest_free_cell(self.inflated, end)
            if nudged is None:
                self.path, self.stuck = None, True
                return
            end = nudged
        try:
            self.path = plan_path(self.grid, start, end, self.radius)
        except (Unreachable, StartOccupied, GoalOccupied):
            self.path, self.stuck = None, True

    def direction(self, pos, goal) -> np.ndarray | None:
        """Unit step direction, or None when arrived or no path exists."""
        pos = np.asarray(pos, dtype=float)
        goal = np.asarray(goal, dtype=float)
        cell = self.grid.cell_size
        if (self.goal is None or np.linalg.norm(goal - self.goal) > 1.5 * cell
                or (self.path is None and not self.stuck)):
            self._plan(pos, goal)
        if self.path is None:
            return None
        wps = self.path.waypoints
        while self.index < len(wps) and np.linalg.norm(wps[self.index] - pos) < 0.6 * cell:
            self.index += 1
        if self.index >= len(wps):
            d = goal - pos
            n = float(np.linalg.norm(d))
            # Close the gap between the last cell center and the true goal.
            if n > 0.05 and self.inflated.is_free_point(goal):
                return d / n
            return None
        if np.linalg.norm(wps[self.index] - pos) > 4.0 * cell:
            self._plan(pos, goal)
            if self.path is None:
                return None
            wps = self.path.waypoints
            if self.index >= len(wps):
                return None
        d = wps[self.index] - pos
        n = float(np.linalg.norm(d))
        return d / n if n > 1e-9 else None

    def reset(self) -> None:
        self.path = None
        self.goal = None
        self.index = 0
        self.stuck = False


class GreedyHumanPolicy:
    """Always go for the cheapest-looking free hologram, deliver, repeat.

    The target is chosen from the human's own latest assessments and held
    until attached (no mid-route switching), which keeps trajectories
    interpretable and oscillation-free.
    """

    name = GREEDY

    def __init__(self, w: WorldState):
        self.follower = PathFollower(w.scene.grid, w.human.footprint_radius)
        self.target_id: int | None = None
        self._skip: set[int] = set()

    def decide(self, w: WorldState, assessments: dict[int, CostAssessment]) -> HumanIntent:
        human = w.human
        intent = HumanIntent()
        if human.carried is not None:
            zone = w.scene.goal_zone
            if np.linalg.norm(human.position - zone.center) <= max(0.05, zone.radius - 0.1):
                intent.interact = True
                return intent
            d = self.follower.direction(human.position, zone.center)
            if d is not None:
                intent.move = d
            return intent

        if self.target_id is not None:
            try:
                h = w.hologram(self.target_id)
                if h.status != FREE:
                    self.target_id = None
            except KeyError:
                self.target_id = None
        if self.target_id is None:
            candidates = [(a.cost, hid) for hid, a in assessments.items()
                          if hid not in self._skip and w.hologram(hid).status == FREE]
            if not candidates:
                return intent
            self.target_id = min(candidates)[1]
            self.follower.reset()
        h = w.hologram(self.target_id)
        if circles_touch(interaction_circle(human), interaction_circle(h)):
            intent.interact = True
            intent.hologram_id = self.target_id
            return intent
        d = self.follower.direction(human.position, h.pose.translation[:2])
        if d is None and self.follower.stuck:
            self._skip.add(self.target_id)
            self.target_id = None
            return intent
        if d is not None:
            intent.move = d
        return intent

    def notify_attached(self, hologram_id: int) -> None:
        if self.target_id == hologram_id:
            self.target_id = None
            self.follower.reset()


class ScriptedWaypointsPolicy:
    """Walk a fixed list of waypoints, then stop; never interacts."""

    name = SCRIPTED

    def __init__(self, w: WorldState, waypoints):
        self.follower = PathFollower(w.scene.grid, w.human.footprint_radius)
        self.waypoints = [np.asarray(p, dtype=float) for p in waypoints]
        self.index = 0

    def decide(self, w: WorldState, assessments) -> HumanIntent:
        intent = HumanIntent()
        while self.index < len(self.waypoints):
            goal = self.waypoints[self.index]
            if np.linalg.norm(w.human.position - goal) < 0.1:
                self.index += 1
                self.follower.reset()
                continue
            d = self.follower.direction(w.human.position, goal)
            if d is None:
                self.index += 1
                self.follower.reset()
                continue
            intent.move = d
            return intent
        return intent

    def notify_attached(self, hologram_id: int) -> None:
        pass


class ExternalHumanPolicy:
    """Replays whatever a connected client asked for since the last tick.

    Movement does not persist: a tick with no fresh command stands still,
    so a stalled client cannot walk the avatar into a wall forever.
    """

    name = EXTERNAL

    def __init__(self, w: WorldState):
        self._pending: list[dict] = []

    def push_command(self, payload: dict) -> None:
        self._pending.append(payload)

    def decide(self, w: WorldState, assessments) -> HumanIntent:
        intent = HumanIntent()
        if not self._pending:
            return intent
        for cmd in self._pending:
            move = cmd.get("move", [0.0, 0.0])
            intent.move = np.clip(np.asarray(move, dtype=float), -1.0, 1.0)
            intent.head_yaw_delta += float(cmd.get("head_yaw_delta", 0.0))
            intent.head_pitch_delta += float(cmd.get("head_pitch_delta", 0.0))
            intent.interact = intent.interact or bool(cmd.get("interact", False))
        self._pending.clear()
        return intent

    def notify_attached(self, hologram_id: int) -> None:
        pass


def make_human_policy(name: str, w: WorldState, waypoints=None):
    if name == GREEDY:
        return GreedyHumanPolicy(w)
    if name == SCRIPTED:
        return ScriptedWaypointsPolicy(w, waypoints or [])
    if name == EXTERNAL:
        return ExternalHumanPolicy(w)
    raise ValueError(f"unknown human policy {name!r}")
