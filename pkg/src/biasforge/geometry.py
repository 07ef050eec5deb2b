"""Camera pose math for the variant samplers.

Conventions, fixed once so the geometric invariants are testable:

- World frame is right-handed with +Z up.
- Euler angles are stored in degrees as (roll, pitch, yaw) and applied as an
  intrinsic yaw -> pitch -> roll rotation (Z-Y-X). The camera's forward axis
  is the canonical +X axis rotated by that euler rotation, which gives
  ``forward = (cos yaw * cos pitch, sin yaw * cos pitch, -sin pitch)``.
- Look-at-generated poses keep pitch inside (-90, 90) degrees and roll at 0;
  a view direction with no horizontal component has no well-defined yaw and
  is rejected as degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateLookAt, NonPositiveStep, ZeroLevels

Vec3 = tuple[float, float, float]

# Ring layout (radius_m, height_m) relative to the look-at target, used when a
# pose family does not declare its own rings.
DEFAULT_RING_SPECS: tuple[tuple[float, float], ...] = ((0.4, 0.5), (0.55, 0.6), (0.7, 0.7))
DEFAULT_POSES_PER_RING = 7

_EPS_VERTICAL = 1e-12


@dataclass(frozen=True)
class CameraPose:
    """A camera placement: position in meters, euler (roll, pitch, yaw) in degrees."""

    position: Vec3
    euler: Vec3

    def forward(self) -> Vec3:
        return forward(self.euler)


def forward(euler: Vec3) -> Vec3:
    """Unit forward vector of an euler orientation (roll has no effect)."""
    _, pitch, yaw = (math.radians(a) for a in euler)
    cp = math.cos(pitch)
    return (math.cos(yaw) * cp, math.sin(yaw) * cp, -math.sin(pitch))


def look_at_euler(position: Vec3, target: Vec3) -> Vec3:
    """Euler (roll=0, pitch, yaw) whose forward points from position to target."""
    dx = target[0] - position[0]
    dy = target[1] - position[1]
    dz = target[2] - position[2]
    norm = math.sqrt(dx * dx + dy * dy + dz * dz)
    if norm == 0.0:
        raise DegenerateLookAt("camera position coincides with look-at target")
    horizontal = math.hypot(dx, dy)
    if horizontal <= _EPS_VERTICAL * norm:
        raise DegenerateLookAt("view direction is vertical; yaw is undefined")
    yaw = math.degrees(math.atan2(dy, dx))
    pitch = math.degrees(-math.asin(max(-1.0, min(1.0, dz / norm))))
    return (0.0, pitch, yaw)


def euler_perturbations(base: CameraPose, step_deg: float = 6.0) -> list[CameraPose]:
    """The 3x3 grid of yaw/pitch offsets in {-step, 0, +step} around a pose.

    Returns nine poses ordered lexicographically by (yaw offset, pitch offset);
    the grid center (index 4) is the base pose itself. Position is untouched.
    """
    if not step_deg > 0.0:
        raise NonPositiveStep(f"step_deg must be > 0, got {step_deg}")
    roll, pitch, yaw = base.euler
    poses = []
    for dyaw in (-step_deg, 0.0, step_deg):
        for dpitch in (-step_deg, 0.0, step_deg):
            poses.append(CameraPose(base.position, (roll, pitch + dpitch, yaw + dyaw)))
    return poses


def distance_scale_poses(base: CameraPose, step_m: float = 0.05, levels: int = 8) -> list[CameraPose]:
    """Translate a pose backward along its line of sight in fixed increments.

    Pose k sits at ``base.position - k * step_m * forward(base.euler)`` for
    k = 0..levels; orientation is carried over unchanged, so level 0 is the
    base pose exactly.
    """
    if not step_m > 0.0:
        raise NonPositiveStep(f"step_m must be > 0, got {step_m}")
    if levels < 1:
        raise ZeroLevels(f"levels must be >= 1, got {levels}")
    fx, fy, fz = forward(base.euler)
    px, py, pz = base.position
    poses = []
    for k in range(levels + 1):
        d = k * step_m
        poses.append(CameraPose((px - d * fx, py - d * fy, pz - d * fz), base.euler))
    return poses


def orbit_rings(
    target: Vec3,
    ring_specs: tuple[tuple[float, float], ...] = DEFAULT_RING_SPECS,
    per_ring: int = DEFAULT_POSES_PER_RING,
) -> list[CameraPose]:
    """Concentric look-at rings above a target point.

    Each (radius, height) ring contributes ``per_ring`` poses at equal azimuth
    spacing starting from azimuth 0, every pose oriented to look at the
    target. Rings are emitted in the order given, poses in azimuth order.
    """
    if per_ring < 1:
        raise ZeroLevels(f"per_ring must be >= 1, got {per_ring}")
    poses = []
    for radius, height in ring_specs:
        if not radius > 0.0:
            raise NonPositiveStep(f"ring radius must be > 0, got {radius}")
        for k in range(per_ring):
            azimuth = 2.0 * math.pi * k / per_ring
            position = (
                target[0] + radius * math.cos(azimuth),
                target[1] + radius * math.sin(azimuth),
                target[2] + height,
            )
            poses.append(CameraPose(position, look_at_euler(position, target)))
    return poses
