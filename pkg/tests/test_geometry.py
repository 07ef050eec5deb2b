import math

import pytest
from hypothesis import given, strategies as st

from biasforge.errors import DegenerateLookAt, NonPositiveStep, ZeroLevels
from biasforge.geometry import (
    DEFAULT_RING_SPECS,
    CameraPose,
    distance_scale_poses,
    euler_perturbations,
    forward,
    look_at_euler,
    orbit_rings,
)

BASE = CameraPose((1.0, 0.0, 0.55), (0.0, 20.0, 180.0))

finite_coord = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
angles = st.floats(min_value=-180.0, max_value=180.0, allow_nan=False)


def norm(v):
    return math.sqrt(sum(c * c for c in v))


def test_forward_is_unit_everywhere():
    for euler in [(0, 0, 0), (45, 30, -120), (0, 89, 10), (12, -45, 200)]:
        assert abs(norm(forward(euler)) - 1.0) < 1e-12


def test_forward_identity_points_along_x():
    fx, fy, fz = forward((0.0, 0.0, 0.0))
    assert (fx, fy, fz) == pytest.approx((1.0, 0.0, 0.0), abs=1e-15)


def test_look_at_behind_gives_yaw_180():
    roll, pitch, yaw = look_at_euler((1.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    assert roll == 0.0
    assert pitch == pytest.approx(0.0, abs=1e-12)
    assert yaw == pytest.approx(180.0, abs=1e-12)


def test_look_at_along_x_is_identity():
    assert look_at_euler((0.0, 0.0, 0.0), (2.0, 0.0, 0.0)) == pytest.approx((0.0, 0.0, 0.0))


def test_look_at_coincident_points_degenerate():
    with pytest.raises(DegenerateLookAt):
        look_at_euler((1.0, 2.0, 3.0), (1.0, 2.0, 3.0))


def test_look_at_vertical_degenerate():
    with pytest.raises(DegenerateLookAt):
        look_at_euler((0.0, 0.0, 1.0), (0.0, 0.0, 0.0))


@given(
    px=finite_coord, py=finite_coord, pz=finite_coord,
    tx=finite_coord, ty=finite_coord, tz=finite_coord,
)
def test_look_at_forward_points_at_target(px, py, pz, tx, ty, tz):
    d = (tx - px, ty - py, tz - pz)
    n = norm(d)
    if n < 1e-6 or math.hypot(d[0], d[1]) < 1e-6 * n:
        return  # degenerate inputs are covered by dedicated tests
    euler = look_at_euler((px, py, pz), (tx, ty, tz))
    f = forward(euler)
    dot = sum(fc * dc for fc, dc in zip(f, d)) / n
    assert dot >= 1.0 - 1e-9
    assert -90.0 < euler[1] < 90.0
    assert euler[0] == 0.0


def test_euler_grid_shape_and_center():
    grid = euler_perturbations(BASE, step_deg=6.0)
    assert len(grid) == 9
    assert grid[4] == BASE
    assert sum(1 for p in grid if p == BASE) == 1
    assert len(set(grid)) == 9
    yaws = sorted({p.euler[2] for p in grid})
    pitches = sorted({p.euler[1] for p in grid})
    assert yaws == [174.0, 180.0, 186.0]
    assert pitches == [14.0, 20.0, 26.0]
    for p in grid:
        assert p.position == BASE.position


@given(step=st.floats(min_value=0.5, max_value=30.0, allow_nan=False),
       roll=angles, pitch=st.floats(min_value=-80, max_value=80), yaw=angles)
def test_euler_grid_distinct_for_any_positive_step(step, roll, pitch, yaw):
    base = CameraPose((0.0, 0.0, 0.0), (roll, pitch, yaw))
    grid = euler_perturbations(base, step_deg=step)
    assert len(set(grid)) == 9
    assert grid[4] == base


def test_euler_grid_rejects_zero_step():
    with pytest.raises(NonPositiveStep):
        euler_perturbations(BASE, step_deg=0.0)


def test_distance_poses_spacing_exact():
    poses = distance_scale_poses(BASE, step_m=0.05, levels=8)
    assert len(poses) == 9
    assert poses[0] == BASE
    for k, pose in enumerate(poses):
        d = math.dist(pose.position, BASE.position)
        assert abs(d - 0.05 * k) < 1e-9
        assert pose.euler == BASE.euler  # bitwise: orientation carried over


def test_distance_poses_move_against_forward():
    poses = distance_scale_poses(BASE, step_m=0.1, levels=2)
    f = forward(BASE.euler)
    step = tuple(b - a for a, b in zip(poses[0].position, poses[1].position))
    dot = sum(fc * sc for fc, sc in zip(f, step))
    assert dot == pytest.approx(-0.1, abs=1e-12)


def test_distance_poses_single_level():
    poses = distance_scale_poses(BASE, levels=1)
    assert len(poses) == 2
    assert poses[0] == BASE


def test_distance_poses_rejects_bad_args():
    with pytest.raises(NonPositiveStep):
        distance_scale_poses(BASE, step_m=0.0)
    with pytest.raises(ZeroLevels):
        distance_scale_poses(BASE, levels=0)


def test_orbit_rings_count_and_look_at():
    target = (0.4, 0.0, 0.1)
    poses = orbit_rings(target)
    assert len(poses) == 21
    assert len(set(poses)) == 21
    for pose in poses:
        d = tuple(t - p for t, p in zip(target, pose.position))
        n = norm(d)
        f = forward(pose.euler)
        assert sum(fc * dc for fc, dc in zip(f, d)) / n >= 1.0 - 1e-9


def test_orbit_rings_azimuth_spacing_uniform():
    target = (0.0, 0.0, 0.0)
    per_ring = 7
    poses = orbit_rings(target, ring_specs=((0.5, 0.4),), per_ring=per_ring)
    azimuths = [math.atan2(p.position[1], p.position[0]) for p in poses]
    gaps = []
    for i in range(per_ring):
        gap = (azimuths[(i + 1) % per_ring] - azimuths[i]) % (2 * math.pi)
        gaps.append(gap)
    for gap in gaps:
        assert abs(gap - 2 * math.pi / per_ring) < 1e-9


def test_orbit_rings_radius_and_height_respected():
    target = (1.0, -2.0, 0.5)
    poses = orbit_rings(target, ring_specs=((0.3, 0.8),), per_ring=5)
    for pose in poses:
        dx = pose.position[0] - target[0]
        dy = pose.position[1] - target[1]
        assert math.hypot(dx, dy) == pytest.approx(0.3, abs=1e-12)
        assert pose.position[2] - target[2] == pytest.approx(0.8, abs=1e-12)


def test_orbit_rings_single_pose_per_ring():
    poses = orbit_rings((0.0, 0.0, 0.0), ring_specs=DEFAULT_RING_SPECS, per_ring=1)
    assert len(poses) == 3
    for pose, (radius, _) in zip(poses, DEFAULT_RING_SPECS):
        # azimuth 0 puts the camera on the +x side of the target
        assert pose.position[0] == pytest.approx(radius, abs=1e-12)
        assert pose.position[1] == pytest.approx(0.0, abs=1e-12)


def test_orbit_rings_rejects_bad_specs():
    with pytest.raises(NonPositiveStep):
        orbit_rings((0, 0, 0), ring_specs=((0.0, 0.5),))
    with pytest.raises(ZeroLevels):
        orbit_rings((0, 0, 0), per_ring=0)
