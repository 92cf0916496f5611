"""Hologram manipulation via floor-circle intersection.

Every interactable entity carries an enlarged circumscribed sphere whose
floor projection is its interaction circle; overlapping circles switch the
pair into manipulation mode (attach), after which the hologram rigidly
follows its carrier until placed. Mutations happen in place on the
engine-owned world; all functions also return it for chaining.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Circle2D, Sphere, Transform, circumscribed_sphere, compose, invert
from .world import (
    CARRIED,
    DELIVERED,
    FREE,
    Hologram,
    HumanAgent,
    RobotAgent,
    WorldState,
    sync_frames,
)

ENLARGEMENT = 1.2


class AgentBusy(ValueError):
    """Agent already carries a hologram."""


class HologramUnavailable(ValueError):
    """Hologram is carried or delivered and cannot be grabbed."""


class NotCarrying(ValueError):
    """Place requested by an agent that carries nothing."""


class TargetOccupied(ValueError):
    """Placement target falls on an occupied or out-of-bounds cell."""


@dataclass(frozen=True)
class InteractionVolume:
    base: Sphere
    enlargement: float
    circle: Circle2D


@dataclass(frozen=True)
class AttachEvent:
    time: float
    agent_id: str
    hologram_id: int
    position: np.ndarray  # (2,) hologram floor position at attach


@dataclass(frozen=True)
class DetachEvent:
    time: float
    agent_id: str
    hologram_id: int
    position: np.ndarray  # (2,) placement target
    delivered: bool


def interaction_volume(entity) -> InteractionVolume:
    """Enlarged sphere + floor circle for an agent or hologram."""
    if isinstance(entity, Hologram):
        base = circumscribed_sphere(entity.world_mesh())
    elif isinstance(entity, (RobotAgent, HumanAgent)):
        center = np.array([entity.position[0], entity.position[1], 0.0])
        base = Sphere(center, entity.footprint_radius)
    else:
        raise TypeError(f"no interaction volume for {type(entity).__name__}")
    circle = Circle2D(base.center[:2], ENLARGEMENT * base.radius)
    return InteractionVolume(base=base, enlargement=ENLARGEMENT, circle=circle)


def interaction_circle(entity) -> Circle2D:
    return interaction_volume(entity).circle


def circles_touch(a: Circle2D, b: Circle2D) -> bool:
    """Disk intersection with an inclusive boundary."""
    return float(np.linalg.norm(a.center - b.center)) <= a.radius + b.radius


def try_attach(w: WorldState, agent_id: str, hologram_id: int
               ) -> tuple[WorldState, AttachEvent | None]:
    """Attach `hologram_id` to `agent_id` if their circles intersect.

    No intersection is not an error: the world is returned unchanged with
    no event.
    """
    agent = w.agent(agent_id)
    if agent.carried is not None:
        raise AgentBusy(f"{agent_id} already carries hologram {agent.carried}")
    h = w.hologram(hologram_id)
    if h.status != FREE:
        raise HologramUnavailable(f"hologram {hologram_id} is {h.status}")
    if not circles_touch(interaction_circle(agent), interaction_circle(h)):
        return w, None
    carrier = w.carrier_transform(agent_id)
    h.status = CARRIED
    h.carried_by = agent_id
    h.grasp_offset = compose(invert(carrier), h.pose)
    agent.carried = hologram_id
    sync_frames(w)
    return w, AttachEvent(time=w.time, agent_id=agent_id, hologram_id=hologram_id,
                          position=h.pose.translation[:2].copy())


def carry_tick(w: WorldState) -> WorldState:
    """Refresh carried holograms from their carriers; idempotent."""
    return sync_frames(w)


def place(w: WorldState, agent_id: str, target) -> tuple[WorldState, DetachEvent]:
    """Put the carried hologram down at floor position `target`.

    Inside the goal zone the hologram is delivered; elsewhere it returns to
    free. The hologram keeps its height and orientation.
    """
    agent = w.agent(agent_id)
    if agent.carried is None:
        raise NotCarrying(f"{agent_id} carries nothing")
    target = np.asarray(target, dtype=float).reshape(2)
    if not w.scene.grid.is_free_point(target):
        raise TargetOccupied(f"cannot place at {target.tolist()}")
    h = w.hologram(agent.carried)
    delivered = w.scene.goal_zone.contains(target)
    h.pose = Transform(h.pose.rotation,
                       np.array([target[0], target[1], h.pose.translation[2]]))
    h.status = DELIVERED if delivered else FREE
    h.carried_by = None
    h.grasp_offset = None
    agent.carried = None
    sync_frames(w)
    return w, DetachEvent(time=w.time, agent_id=agent_id, hologram_id=h.id,
                          position=target.copy(), delivered=delivered)
