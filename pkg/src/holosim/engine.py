"""Deterministic fixed-timestep simulation of the resource-collection game.

One engine owns one mutable WorldState and advances it tick by tick:
policies emit intents/commands, kinematics apply speed and turn-rate caps,
carried holograms follow their carriers, and every attach/detach/deliver
lands in an event log whose bytes are fully determined by (scenario,
config, seed). Replay re-runs the recorded scenario and cross-checks every
regenerated entry against the log.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path as FsPath

import numpy as np

from . import interaction
from .geometry import ROBOT, WORLD, Transform, compose
from .perception import estimate_human_frame
from .planner import PlannerSettings, RobotCommand, TaskQueue, next_command, rank_targets
from .policies import (
    EXTERNAL,
    GREEDY,
    PathFollower,
    make_human_policy,
)
from .vpt import CostAssessment, VptParams, assess_free_holograms
from .world import (
    DELIVERED,
    FREE,
    HUMAN_ID,
    ROBOT_ID,
    HumanAgent,
    ScenarioConfig,
    WorldState,
    load_scenario,
)

LOG_SCHEMA_VERSION = 1


class CorruptLog(ValueError):
    """Recorded log disagrees with the deterministic re-run."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    max_time: float = 300.0
    seed: int = 0
    human_policy: str | None = None  # None: take it from the scenario
    robot_enabled: bool | None = None  # None: take it from the scenario
    vpt: VptParams = field(default_factory=VptParams)
    human_speed: float | None = None
    robot_speed: float | None = None
    estimate_noise: tuple[float, float] = (0.0, 0.0)  # (m, rad) for the robot's human estimate
    deliver_mode: str = "goal_zone"
    assess_period: float = 0.5
    summary_period: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_time < 0:
            raise ValueError("max_time must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimate_noise"] = list(self.estimate_noise)
        return d


@dataclass(frozen=True)
class EventLogEntry:
    time: float
    kind: str  # header | rerank | attach | detach | deliver | tick-summary | snapshot-hash | end
    payload: dict

    def canonical(self) -> str:
        return json.dumps({"time": self.time, "kind": self.kind, "payload": self.payload},
                          sort_keys=True, separators=(",", ":"))


@dataclass
class Metrics:
    completion_time: float | None
    complete: bool
    final_time: float
    deliveries: dict[int, dict]  # hologram id -> {"time": s, "by": agent id}
    distance: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "completion_time": self.completion_time,
            "complete": self.complete,
            "final_time": self.final_time,
            "deliveries": {str(k): v for k, v in sorted(self.deliveries.items())},
            "distance": dict(sorted(self.distance.items())),
        }


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def world_hash(w: WorldState) -> str:
    """Digest of the full dynamic state; identical worlds hash identically."""
    state = {
        "time": w.time,
        "human": [*w.human.position.tolist(), w.human.heading, w.human.head_yaw,
                  w.human.head_pitch, w.human.carried],
        "robot": [*w.robot.position.tolist(), w.robot.heading, w.robot.carried],
        "holograms": [
            [h.id, h.status, h.carried_by,
             h.pose.rotation.tolist(), h.pose.translation.tolist()]
            for h in w.holograms
        ],
    }
    text = json.dumps(state, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


class RobotController:
    """Event-driven ranking plus cached path following for the robot."""

    def __init__(self, w: WorldState, settings: PlannerSettings):
        self.settings = settings
        self.queue = TaskQueue(entries=())
        self.follower = PathFollower(w.scene.grid, w.robot.footprint_radius)
        self._ranked_once = False
        self._delivery_pending = False

    def note_delivery(self) -> None:
        self._delivery_pending = True

    def update(self, w: WorldState, assessments: dict[int, CostAssessment]) -> str | None:
        """Refresh the queue; returns a rerank reason when a trigger fired."""
        fresh = rank_targets([assessments[k] for k in sorted(assessments)])
        trigger = None
        if not self._ranked_once:
            trigger = "initial"
        elif self._delivery_pending:
            trigger = "delivery"
        else:
            head = self.queue.head()
            if head is not None and head.hologram_id not in assessments:
                trigger = "target_lost"
            else:
                previous = {e.hologram_id: e.region for e in self.queue.entries}
                for hid, a in assessments.items():
                    if hid in previous and previous[hid] != a.region:
                        trigger = "region_change"
                        break
        if trigger is not None:
            changed = fresh.ids != self.queue.ids
            self.queue = fresh
            self._ranked_once = True
            self._delivery_pending = False
            if changed or trigger == "initial":
                return trigger
        else:
            kept = tuple(e for e in self.queue.entries if e.hologram_id in assessments)
            self.queue = TaskQueue(entries=kept)
        return None

    def decide(self, w: WorldState) -> RobotCommand:
        return next_command(w, self.queue, self.settings)

    def current_path(self) -> np.ndarray | None:
        if self.follower.path is None:
            return None
        return self.follower.path.waypoints[self.follower.index:]


class Engine:
    """Single-writer tick loop over one world."""

    def __init__(self, world: WorldState, cfg: SimConfig,
                 scenario_data: dict | None = None, scenario_dir: str = "."):
        self.world = world
        self.cfg = cfg
        self.scenario_data = scenario_data or {}
        self.scenario_dir = scenario_dir
        self.human_policy_name = cfg.human_policy or self.scenario_data.get(
            "policies", {}).get("human", GREEDY)
        if cfg.robot_enabled is None:
            self.robot_enabled = bool(self.scenario_data.get(
                "policies", {}).get("robot_enabled", True))
        else:
            self.robot_enabled = cfg.robot_enabled
        if cfg.human_speed is not None:
            world.human.max_speed = cfg.human_speed
        if cfg.robot_speed is not None:
            world.robot.max_speed = cfg.robot_speed
        waypoints = self.scenario_data.get("policies", {}).get("human_waypoints", [])
        self.human_policy = make_human_policy(self.human_policy_name, world, waypoints)
        self.controller = RobotController(world, PlannerSettings(deliver_mode=cfg.deliver_mode))
        self.events: list[EventLogEntry] = []
        self.human_assessments: dict[int, CostAssessment] = {}
        self.robot_assessments: dict[int, CostAssessment] = {}
        self.metrics_deliveries: dict[int, dict] = {}
        self.distance = {HUMAN_ID: 0.0, ROBOT_ID: 0.0}
        self._tick_count = 0
        self._next_assess = 0.0
        self._next_summary = cfg.summary_period
        self._assess_dirty = False
        self._emit(0.0, "header", {
            "schema_version": LOG_SCHEMA_VERSION,
            "scenario": self.scenario_data,
            "scenario_dir": str(self.scenario_dir),
            "config": self._resolved_config(),
        })
        self._maybe_assess(force=True)

    def _resolved_config(self) -> dict:
        d = self.cfg.to_dict()
        d["human_policy"] = self.human_policy_name
        d["robot_enabled"] = self.robot_enabled
        d["vpt"] = {"n_rays": self.cfg.vpt.n_rays, "threshold": self.cfg.vpt.threshold,
                    "yaw_step_deg": self.cfg.vpt.yaw_step_deg,
                    "pitch_step_deg": self.cfg.vpt.pitch_step_deg}
        return d

    def _emit(self, time: float, kind: str, payload: dict) -> EventLogEntry:
        entry = EventLogEntry(time=float(time), kind=kind, payload=_jsonable(payload))
        self.events.append(entry)
        return entry

    # -- assessments --------------------------------------------------------

    def _shadow_human(self, estimate_frame: Transform) -> HumanAgent:
        head = compose(self.world.frames.resolve(WORLD, ROBOT), estimate_frame)
        x_axis = head.rotation_matrix()[:, 0]
        pitch = math.asin(float(np.clip(x_axis[2], -1.0, 1.0)))
        yaw = math.atan2(x_axis[1], x_axis[0])
        origin = head.translation
        h = self.world.human
        return replace(h, position=np.array(origin[:2]), heading=yaw,
                       head_yaw=0.0, head_pitch=pitch, eye_height=float(origin[2]))

    def _maybe_assess(self, force: bool = False) -> None:
        w = self.world
        if not (force or self._assess_dirty
                or w.time + 1e-9 >= self._next_assess):
            return
        while self._next_assess <= w.time + 1e-9:
            self._next_assess += self.cfg.assess_period
        self._assess_dirty = False
        self.human_assessments = assess_free_holograms(w, self.cfg.vpt)
        sigma = self.cfg.estimate_noise
        if sigma[0] == 0.0 and sigma[1] == 0.0:
            self.robot_assessments = self.human_assessments
        else:
            est = estimate_human_frame(w, sigma, seed=self.cfg.seed + self._tick_count)
            shadow = replace(w, human=self._shadow_human(est.frame))
            self.robot_assessments = assess_free_holograms(shadow, self.cfg.vpt)
        if self.robot_enabled:
            reason = self.controller.update(w, self.robot_assessments)
            if reason is not None:
                self._emit(w.time, "rerank",
                           {"reason": reason, "queue": list(self.controller.queue.ids)})

    # -- kinematics ---------------------------------------------------------

    def _move_agent(self, agent, agent_id: str, direction: np.ndarray | None) -> None:
        dt = self.cfg.dt
        if direction is not None:
            n = float(np.linalg.norm(direction))
            if n > 1e-9:
                unit = direction / max(n, 1.0)
                step = unit * agent.max_speed * dt
                follower = self._follower_for(agent_id)
                new_pos = agent.position + step
                if follower.inflated.is_free_point(new_pos):
                    moved = new_pos
                else:
                    # Slide along whichever axis stays free.
                    moved = agent.position.copy()
                    for axis in (0, 1):
                        trial = moved.copy()
                        trial[axis] += step[axis]
                        if follower.inflated.is_free_point(trial):
                            moved = trial
                self.distance[agent_id] += float(np.linalg.norm(moved - agent.position))
                agent.position = moved
                target_heading = math.atan2(unit[1], unit[0])
                err = _wrap_angle(target_heading - agent.heading)
                max_turn = agent.max_turn_rate * dt
                agent.heading = _wrap_angle(
                    agent.heading + float(np.clip(err, -max_turn, max_turn)))

    def _follower_for(self, agent_id: str) -> PathFollower:
        if agent_id == HUMAN_ID:
            if not hasattr(self.human_policy, "follower"):
                if not hasattr(self, "_external_follower"):
                    self._external_follower = PathFollower(
                        self.world.scene.grid, self.world.human.footprint_radius)
                return self._external_follower
            return self.human_policy.follower
        return self.controller.follower

    # -- interactions -------------------------------------------------------

    def _record_interaction_event(self, ev) -> None:
        w = self.world
        if isinstance(ev, interaction.AttachEvent):
            self._emit(w.time, "attach", {"agent": ev.agent_id, "hologram": ev.hologram_id,
                                          "position": ev.position})
            if hasattr(self.human_policy, "notify_attached"):
                self.human_policy.notify_attached(ev.hologram_id)
        else:
            kind = "deliver" if ev.delivered else "detach"
            self._emit(w.time, kind, {"agent": ev.agent_id, "hologram": ev.hologram_id,
                                      "position": ev.position})
            if ev.delivered:
                self.metrics_deliveries[ev.hologram_id] = {"time": w.time, "by": ev.agent_id}
                self.controller.note_delivery()
        self._assess_dirty = True

    def _apply_human_interact(self, intent) -> None:
        w = self.world
        human = w.human
        if human.carried is not None:
            try:
                _, ev = interaction.place(w, HUMAN_ID, human.position)
            except interaction.TargetOccupied:
                return
            self._record_interaction_event(ev)
            return
        candidates = []
        if intent.hologram_id is not None:
            candidates = [intent.hologram_id]
        else:
            own = interaction.interaction_circle(human)
            reachable = []
            for h in w.holograms:
                if h.status != FREE:
                    continue
                circle = interaction.interaction_circle(h)
                gap = float(np.linalg.norm(own.center - circle.center))
                if gap <= own.radius + circle.radius:
                    reachable.append((gap, h.id))
            if reachable:
                candidates = [min(reachable)[1]]
        for hid in candidates:
            try:
                _, ev = interaction.try_attach(w, HUMAN_ID, hid)
            except (interaction.AgentBusy, interaction.HologramUnavailable):
                continue
            if ev is not None:
                self._record_interaction_event(ev)
                return

    def _apply_robot_command(self, cmd: RobotCommand) -> np.ndarray | None:
        """Returns a motion direction when the command asks for movement."""
        w = self.world
        if cmd.kind == "move_toward":
            return self.controller.follower.direction(w.robot.position, cmd.waypoint)
        if cmd.kind == "attach":
            try:
                _, ev = interaction.try_attach(w, ROBOT_ID, cmd.hologram_id)
            except (interaction.AgentBusy, interaction.HologramUnavailable):
                return None
            if ev is not None:
                self._record_interaction_event(ev)
                self.controller.follower.reset()
            return None
        if cmd.kind == "place":
            try:
                _, ev = interaction.place(w, ROBOT_ID, cmd.target)
            except (interaction.NotCarrying, interaction.TargetOccupied):
                return None
            self._record_interaction_event(ev)
            self.controller.follower.reset()
            return None
        return None

    # -- the tick -----------------------------------------------------------

    def tick(self) -> list[EventLogEntry]:
        """Advance one dt; returns the events emitted during this tick."""
        w = self.world
        start_index = len(self.events)
        self._maybe_assess()
        intent = self.human_policy.decide(w, self.human_assessments)
        robot_dir = None
        if self.robot_enabled:
            cmd = self.controller.decide(w)
            robot_dir = self._apply_robot_command(cmd)

        move = np.asarray(intent.move, dtype=float)
        self._move_agent(w.human, HUMAN_ID, move if np.linalg.norm(move) > 1e-9 else None)
        max_turn = w.human.max_turn_rate * self.cfg.dt
        if intent.head_yaw_delta or intent.head_pitch_delta:
            w.human.head_yaw = _wrap_angle(
                w.human.head_yaw + float(np.clip(intent.head_yaw_delta, -max_turn, max_turn)))
            w.human.head_pitch = float(np.clip(
                w.human.head_pitch + np.clip(intent.head_pitch_delta, -max_turn, max_turn),
                -w.human.pitch_limit, w.human.pitch_limit))
        if robot_dir is not None:
            self._move_agent(w.robot, ROBOT_ID, robot_dir)

        interaction.carry_tick(w)
        if intent.interact:
            self._apply_human_interact(intent)

        w.time += self.cfg.dt
        self._tick_count += 1
        if w.time + 1e-9 >= self._next_summary:
            while self._next_summary <= w.time + 1e-9:
                self._next_summary += self.cfg.summary_period
            delivered = sum(1 for h in w.holograms if h.status == DELIVERED)
            self._emit(w.time, "tick-summary", {
                "human": w.human.position, "robot": w.robot.position,
                "delivered": delivered})
            self._emit(w.time, "snapshot-hash", {"hash": world_hash(w)})
        return self.events[start_index:]

    def all_delivered(self) -> bool:
        return all(h.status == DELIVERED for h in self.world.holograms)

    def completion_time(self) -> float | None:
        if not self.all_delivered():
            return None
        if not self.world.holograms:
            return 0.0
        return max(d["time"] for d in self.metrics_deliveries.values())

    def run_to_end(self) -> Metrics:
        while not self.all_delivered() and self.world.time < self.cfg.max_time - 1e-9:
            self.tick()
        complete = self.all_delivered()
        self._emit(self.world.time, "snapshot-hash", {"hash": world_hash(self.world)})
        metrics = Metrics(
            completion_time=self.completion_time(),
            complete=complete,
            final_time=self.world.time,
            deliveries=dict(self.metrics_deliveries),
            distance={k: round(v, 9) for k, v in self.distance.items()},
        )
        self._emit(self.world.time, "end", metrics.to_dict())
        return metrics


def step(w: WorldState, cfg: SimConfig) -> tuple[WorldState, list[EventLogEntry]]:
    """One dt over a world value; returns the advanced copy and its events.

    All randomness derives from cfg.seed, so there is no generator to pass.
    Convenience wrapper for tests and one-shot inspection; loops should hold
    an Engine so policy state (targets, cached paths) persists across ticks.
    """
    engine = Engine(w.clone_dynamic(), cfg)
    engine.events.clear()
    events = engine.tick()
    return engine.world, events


def run(scn: ScenarioConfig, cfg: SimConfig) -> tuple[Metrics, list[EventLogEntry]]:
    """Load (with the config seed), simulate to completion or timeout."""
    seeded = scn.with_seed(cfg.seed)
    world = load_scenario(seeded)
    engine = Engine(world, cfg, scenario_data=seeded.data, scenario_dir=str(seeded.base_dir))
    metrics = engine.run_to_end()
    return metrics, engine.events


def write_log(entries: list[EventLogEntry], path) -> None:
    FsPath(path).write_text("".join(e.canonical() + "\n" for e in entries))


def read_log(path) -> list[EventLogEntry]:
    """Parse a JSONL log.

    A final line that fails to parse is treated as a truncated write and
    dropped; an unparseable line anywhere else is corruption.
    """
    lines = [l for l in FsPath(path).read_text().splitlines() if l.strip()]
    entries = []
    for i, line in enumerate(lines):
        try:
            d = json.loads(line)
            entries.append(EventLogEntry(time=d["time"], kind=d["kind"], payload=d["payload"]))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            if i == len(lines) - 1:
                break
            raise CorruptLog(f"unparseable log line {i}: {e}") from e
    return entries


def replay(log: list[EventLogEntry] | str | FsPath):
    """Re-run a recorded log, verifying it entry by entry against the
    deterministic regeneration.

    Yields a WorldState snapshot for each verified snapshot-hash entry.
    A truncated log verifies up to its last complete entry; any content
    mismatch (or a log longer than the re-run) raises CorruptLog.
    """
    entries = read_log(log) if not isinstance(log, list) else log
    if not entries or entries[0].kind != "header":
        raise CorruptLog("log has no header entry")
    head = entries[0].payload
    scn = ScenarioConfig(head["scenario"], base_dir=FsPath(head.get("scenario_dir", ".")))
    cfg_dict = dict(head["config"])
    cfg_dict["vpt"] = VptParams(**cfg_dict.pop("vpt", {}))
    cfg_dict["estimate_noise"] = tuple(cfg_dict.get("estimate_noise", (0.0, 0.0)))
    cfg = SimConfig(**cfg_dict)

    world = load_scenario(scn)
    engine = Engine(world, cfg, scenario_data=scn.data, scenario_dir=str(scn.base_dir))
    cursor = 0  # next log index awaiting verification
    finished = False

    def verify_available() -> list[EventLogEntry]:
        nonlocal cursor
        verified = []
        while cursor < len(engine.events) and cursor < len(entries):
            regenerated = engine.events[cursor]
            if regenerated.canonical() != entries[cursor].canonical():
                raise CorruptLog(
                    f"entry {cursor} mismatch: recorded {entries[cursor].canonical()!r} "
                    f"!= regenerated {regenerated.canonical()!r}")
            verified.append(regenerated)
            cursor += 1
        return verified

    while True:
        for entry in verify_available():
            if entry.kind == "snapshot-hash":
                yield engine.world.clone_dynamic()
        if cursor >= len(entries):
            return
        if finished:
            raise CorruptLog("log contains more entries than the deterministic re-run")
        terminal = engine.all_delivered() or engine.world.time >= cfg.max_time - 1e-9
        if terminal:
            engine.run_to_end()  # emits the final snapshot-hash and end entries
            finished = True
        else:
            engine.tick()


def verify_log(log) -> int:
    """Replay and count verified snapshots; returns the snapshot count."""
    return sum(1 for _ in replay(log))


@dataclass
class ComparisonReport:
    scenario: str
    rows: list[dict]
    summary: dict

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "rows": self.rows, "summary": self.summary}


def _effective_time(m: Metrics) -> float:
    return m.completion_time if m.completion_time is not None else m.final_time


def compare_conditions(scn: ScenarioConfig, cfg: SimConfig, n_seeds: int,
                       robot_a: bool = True, robot_b: bool = False) -> ComparisonReport:
    """Paired runs of two robot conditions over consecutive seeds."""
    if n_seeds < 1:
        raise ValueError("need at least one seed")
    rows = []
    for i in range(n_seeds):
        seed = cfg.seed + i
        metrics = {}
        for label, enabled in (("a", robot_a), ("b", robot_b)):
            run_cfg = replace(cfg, seed=seed, robot_enabled=enabled)
            m, _ = run(scn, run_cfg)
            metrics[label] = m
        rows.append({
            "seed": seed,
            "time_a": _effective_time(metrics["a"]),
            "time_b": _effective_time(metrics["b"]),
            "complete_a": metrics["a"].complete,
            "complete_b": metrics["b"].complete,
            "delivered_by_a": {str(k): v["by"] for k, v in sorted(metrics["a"].deliveries.items())},
            "delivered_by_b": {str(k): v["by"] for k, v in sorted(metrics["b"].deliveries.items())},
        })
    summary = {}
    for label, enabled in (("a", robot_a), ("b", robot_b)):
        times = [r[f"time_{label}"] for r in rows]
        summary[label] = {
            "robot_enabled": enabled,
            "mean": statistics.fmean(times),
            "median": statistics.median(times),
        }
    summary["a_wins"] = sum(1 for r in rows if r["time_a"] < r["time_b"])
    return ComparisonReport(scenario=scn.name, rows=rows, summary=summary)
