"""Visual perspective taking from the human's viewpoint.

Answers, per hologram: how far from the human's facing direction is it
(view angle), can the human currently see it (raycast occlusion against
occluders and other holograms), and which region is it in:

  - Focusing: inside the human's view frustum and unoccluded
  - Transition: reachable by rotating the head only (body fixed)
  - Blocked: needs body movement, e.g. items under a desk

Cost is the view angle in radians plus a flat pi penalty when occluded,
which makes every occluded item cost more than any unoccluded one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Sphere, circumscribed_sphere, sample_points_on_mesh
from .world import CARRIED, DELIVERED, FREE, HumanAgent, WorldState, facing_direction

OCCLUSION_PENALTY = math.pi

# Stream tag for per-hologram ray sample seeding.
_RAY_SEED_TAG = 0x5EED

_SEGMENT_EPS = 1e-6


class UnknownHologram(KeyError):
    """Hologram id is not present in the world."""


class CarriedHologram(ValueError):
    """No assessment exists for carried or delivered holograms."""


class DegenerateTarget(ValueError):
    """Target point coincides with the eye point."""


class RegionClass(str, Enum):
    FOCUSING = "Focusing"
    TRANSITION = "Transition"
    BLOCKED = "Blocked"


@dataclass(frozen=True)
class VisibilityResult:
    occluded: bool
    blocked_fraction: float
    rays_cast: int


@dataclass(frozen=True)
class CostAssessment:
    hologram_id: int
    angle: float  # radians in [0, pi]
    occluded: bool
    cost: float
    region: RegionClass


@dataclass(frozen=True)
class VptParams:
    """Tunables for occlusion raycasting and the head-rotation search."""

    n_rays: int = 16
    # Occluded when blocked_fraction >= threshold; None means the any-ray
    # rule (a single blocked ray marks the hologram occluded).
    threshold: float | None = None
    yaw_step_deg: float = 5.0
    pitch_step_deg: float = 5.0

    def effective_threshold(self) -> float:
        if self.threshold is None:
            return 1.0 / max(1, self.n_rays)
        if not (0.0 < self.threshold <= 1.0):
            raise ValueError("occlusion threshold must be in (0, 1]")
        return self.threshold


def view_angle(human: HumanAgent, target) -> float:
    """Angle in [0, pi] between the facing direction and the eye->target ray."""
    d = np.asarray(target, dtype=float) - human.eye_point()
    n = float(np.linalg.norm(d))
    if n < 1e-12:
        raise DegenerateTarget("target coincides with the eye point")
    cos = float(np.dot(facing_direction(human), d / n))
    return float(math.acos(np.clip(cos, -1.0, 1.0)))


def segments_blocked(origin, ends: np.ndarray,
                     corners: tuple[np.ndarray, np.ndarray, np.ndarray]) -> np.ndarray:
    """Per-segment hit test (Moller-Trumbore) against a triangle soup.

    A segment origin->end is blocked when it crosses a triangle strictly
    between its endpoints (parameter t in (eps, 1 - eps)).
    """
    v0, v1, v2 = corners
    n_seg = len(ends)
    if len(v0) == 0 or n_seg == 0:
        return np.zeros(n_seg, dtype=bool)
    origin = np.asarray(origin, dtype=float)
    dirs = np.asarray(ends, dtype=float) - origin  # (n, 3)
    edge1 = v1 - v0  # (m, 3)
    edge2 = v2 - v0
    pvec = np.cross(dirs[:, None, :], edge2[None, :, :])  # (n, m, 3)
    det = np.einsum("nmk,mk->nm", pvec, edge1)
    safe = np.abs(det) > 1e-12
    inv_det = np.where(safe, 1.0, np.nan) / np.where(safe, det, 1.0)
    tvec = origin - v0  # (m, 3)
    u = np.einsum("mk,nmk->nm", tvec, pvec) * inv_det
    qvec = np.cross(tvec, edge1)  # (m, 3)
    v = np.einsum("nk,mk->nm", dirs, qvec) * inv_det
    t = np.einsum("mk,mk->m", qvec, edge2)[None, :] * inv_det
    hits = (safe & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0)
            & (t > _SEGMENT_EPS) & (t < 1.0 - _SEGMENT_EPS))
    return hits.any(axis=1)


def _get_hologram(w: WorldState, hologram_id: int):
    try:
        h = w.hologram(hologram_id)
    except KeyError as e:
        raise UnknownHologram(str(e)) from e
    return h


def _blocker_corners(w: WorldState, exclude_id: int):
    """Triangle corners of everything that can block a ray to `exclude_id`:
    static occluders plus every other hologram."""
    parts = [w.scene.occluder_corners()]
    for other in w.holograms:
        if other.id != exclude_id:
            parts.append(other.world_mesh().triangle_corners())
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def target_sphere(w: WorldState, hologram_id: int) -> Sphere:
    return circumscribed_sphere(_get_hologram(w, hologram_id).world_mesh())


def check_occlusion(w: WorldState, hologram_id: int,
                    params: VptParams = VptParams()) -> VisibilityResult:
    """Cast rays from the eye to fixed surface samples of the hologram.

    Sample points are drawn with a seed derived from the hologram id, so
    identical worlds always produce identical results.
    """
    h = _get_hologram(w, hologram_id)
    if params.n_rays < 1:
        raise ValueError("need at least one ray")
    mesh = h.world_mesh()
    rng = np.random.default_rng([_RAY_SEED_TAG, hologram_id])
    samples = sample_points_on_mesh(mesh, params.n_rays, rng).points
    if len(samples) == 0:
        samples = circumscribed_sphere(mesh).center[None, :]
    blocked = segments_blocked(w.human.eye_point(), samples, _blocker_corners(w, hologram_id))
    fraction = float(blocked.sum()) / len(samples)
    return VisibilityResult(
        occluded=fraction >= params.effective_threshold() - 1e-12,
        blocked_fraction=fraction,
        rays_cast=len(samples),
    )


def _direction_in_head(d: np.ndarray, yaw, pitch):
    """Components of world direction `d` in head axes for (absolute yaw,
    pitch) grids; yaw and pitch broadcast against each other."""
    a = d[0] * np.cos(yaw) + d[1] * np.sin(yaw)
    b = -d[0] * np.sin(yaw) + d[1] * np.cos(yaw)
    x = a * np.cos(pitch) + d[2] * np.sin(pitch)
    z = d[2] * np.cos(pitch) - a * np.sin(pitch)
    return x, b, z


def in_frustum(human: HumanAgent, target, yaw: float | None = None,
               pitch: float | None = None) -> bool:
    """Is `target` inside the human's view frustum for the given absolute
    head yaw/pitch (defaults: current pose)?"""
    if yaw is None:
        yaw = human.heading + human.head_yaw
    if pitch is None:
        pitch = human.head_pitch
    d = np.asarray(target, dtype=float) - human.eye_point()
    if np.linalg.norm(d) < 1e-12:
        raise DegenerateTarget("target coincides with the eye point")
    x, y, z = _direction_in_head(d, np.asarray(yaw), np.asarray(pitch))
    return bool((x > 0)
                & (np.arctan2(np.abs(y), x) <= human.fov_h / 2)
                & (np.arctan2(np.abs(z), x) <= human.fov_v / 2))


def _rotation_reaches(human: HumanAgent, target, params: VptParams) -> bool:
    """Grid-search head rotations (body fixed) for one that frames `target`."""
    d = np.asarray(target, dtype=float) - human.eye_point()
    yaws = human.heading + np.deg2rad(
        np.arange(-180.0, 180.0 + 1e-9, params.yaw_step_deg))
    limit = math.degrees(human.pitch_limit)
    pitches = np.deg2rad(np.arange(-limit, limit + 1e-9, params.pitch_step_deg))
    x, y, z = _direction_in_head(d, yaws[:, None], pitches[None, :])
    ok = ((x > 0)
          & (np.arctan2(np.abs(y), x) <= human.fov_h / 2)
          & (np.arctan2(np.abs(z), x) <= human.fov_v / 2))
    return bool(ok.any())


def classify_region(w: WorldState, hologram_id: int,
                    params: VptParams = VptParams(),
                    visibility: VisibilityResult | None = None) -> RegionClass:
    """Focusing / Transition / Blocked for one free hologram.

    Head rotation moves the view direction but not the eye point, so the
    occlusion state is shared by every candidate rotation and is computed
    once.
    """
    h = _get_hologram(w, hologram_id)
    target = circumscribed_sphere(h.world_mesh()).center
    if visibility is None:
        visibility = check_occlusion(w, hologram_id, params)
    if visibility.occluded:
        return RegionClass.BLOCKED
    if in_frustum(w.human, target):
        return RegionClass.FOCUSING
    if _rotation_reaches(w.human, target, params):
        return RegionClass.TRANSITION
    return RegionClass.BLOCKED


def compute_cost(w: WorldState, hologram_id: int,
                 params: VptParams = VptParams()) -> CostAssessment:
    """Full per-hologram assessment; only free holograms are assessable."""
    h = _get_hologram(w, hologram_id)
    if h.status in (CARRIED, DELIVERED):
        raise CarriedHologram(f"hologram {hologram_id} is {h.status}")
    target = circumscribed_sphere(h.world_mesh()).center
    angle = view_angle(w.human, target)
    visibility = check_occlusion(w, hologram_id, params)
    cost = angle + (OCCLUSION_PENALTY if visibility.occluded else 0.0)
    region = classify_region(w, hologram_id, params, visibility=visibility)
    return CostAssessment(hologram_id=hologram_id, angle=angle,
                          occluded=visibility.occluded, cost=cost, region=region)


def assess_free_holograms(w: WorldState,
                          params: VptParams = VptParams()) -> dict[int, CostAssessment]:
    """Assessments for every free hologram, keyed by id."""
    return {h.id: compute_cost(w, h.id, params)
            for h in w.holograms if h.status == FREE}
