"""Sampler modules and the expansion of assignments into concrete scenes.

Scene generation is a grammar of pure, composable samplers: each sampler
enumerates the values of one dimension (a color scheme, a camera family, a
position grid), and ``expand_variants`` binds one value per dimension into a
fully concrete scene payload. Everything here is deterministic; two runs over
the same inputs produce byte-identical manifests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .colors import color_table
from .errors import MissingDimension, SchemaError, UnknownDimension
from .factor_space import (
    CONTEXT,
    VISUAL,
    CameraPosePayload,
    ColorPayload,
    FactorDimension,
    FactorSpace,
    FactorValue,
    InstructionPayload,
    PositionPayload,
    ScaleLevelPayload,
    ShapePayload,
    build_space,
)
from .geometry import (
    DEFAULT_RING_SPECS,
    CameraPose,
    euler_perturbations,
    forward,
    look_at_euler,
    orbit_rings,
)


@dataclass(frozen=True)
class SceneConfig:
    """A fully-bound scenario: object attributes, camera, and instruction text."""

    object_color: str
    object_shape: str
    object_position: str
    camera: CameraPose
    instruction_text: str


@dataclass(frozen=True)
class SamplerModule:
    """A named, pure enumerator of the values of one dimension.

    ``generate`` must return an identical sequence on every call; that purity
    is what makes recombination of samplers reproducible.
    """

    name: str
    dimension_name: str
    generate: Callable[[], tuple[FactorValue, ...]]

    def dimension(self, kind: str, baseline_id: str | None = None) -> FactorDimension:
        values = self.generate()
        ids = [v.id for v in values]
        index = 0 if baseline_id is None else ids.index(baseline_id)
        return FactorDimension(
            name=self.dimension_name, kind=kind, values=values, baseline_index=index
        )


# --- built-in samplers ----------------------------------------------------------

def color_sampler(dedup: str = "rgb", limit: int | None = None,
                  dimension_name: str = "color") -> SamplerModule:
    def generate() -> tuple[FactorValue, ...]:
        return tuple(
            FactorValue(id=name, label=name, payload=ColorPayload(name=name, rgb=rgb))
            for name, rgb in color_table(dedup=dedup, limit=limit)
        )

    return SamplerModule(name=f"colors[{dedup}]", dimension_name=dimension_name, generate=generate)


def orbit_pose_sampler(target: tuple[float, float, float],
                       ring_specs: tuple[tuple[float, float], ...] = DEFAULT_RING_SPECS,
                       per_ring: int = 7,
                       dimension_name: str = "camera_pose") -> SamplerModule:
    def generate() -> tuple[FactorValue, ...]:
        poses = orbit_rings(target, ring_specs=ring_specs, per_ring=per_ring)
        values = []
        for i, pose in enumerate(poses):
            ring, slot = divmod(i, per_ring)
            values.append(
                FactorValue(
                    id=f"pose_r{ring}_a{slot}",
                    label=f"orbit ring {ring} azimuth {slot}",
                    payload=CameraPosePayload(pose=pose),
                )
            )
        return tuple(values)

    return SamplerModule(name="orbit_rings", dimension_name=dimension_name, generate=generate)


def euler_grid_sampler(base: CameraPose, step_deg: float = 6.0,
                       dimension_name: str = "camera_euler") -> SamplerModule:
    def generate() -> tuple[FactorValue, ...]:
        offsets = (-step_deg, 0.0, step_deg)
        poses = euler_perturbations(base, step_deg=step_deg)
        values = []
        i = 0
        for dyaw in offsets:
            for dpitch in offsets:
                values.append(
                    FactorValue(
                        id=f"euler_y{_offset_tag(dyaw)}_p{_offset_tag(dpitch)}",
                        label=f"yaw {dyaw:+g} pitch {dpitch:+g}",
                        payload=CameraPosePayload(pose=poses[i]),
                    )
                )
                i += 1
        return tuple(values)

    return SamplerModule(name="euler_grid", dimension_name=dimension_name, generate=generate)


def _offset_tag(offset: float) -> str:
    if offset == 0:
        return "0"
    return ("m" if offset < 0 else "p") + f"{abs(offset):g}"


def scale_level_sampler(levels: int = 8, step_m: float = 0.05,
                        dimension_name: str = "dist_scale") -> SamplerModule:
    def generate() -> tuple[FactorValue, ...]:
        return tuple(
            FactorValue(
                id=f"scale_{k}",
                label=f"distance level {k}",
                payload=ScaleLevelPayload(level=k, step_m=step_m),
            )
            for k in range(levels + 1)
        )

    return SamplerModule(name="distance_levels", dimension_name=dimension_name, generate=generate)


def grid_position_sampler(positions: Sequence[tuple[str, tuple[float, float, float]]],
                          dimension_name: str = "position") -> SamplerModule:
    def generate() -> tuple[FactorValue, ...]:
        return tuple(
            FactorValue(id=label, label=label, payload=PositionPayload(label=label, xyz=xyz))
            for label, xyz in positions
        )

    return SamplerModule(name="position_grid", dimension_name=dimension_name, generate=generate)


def shape_sampler(shapes: Sequence[str], dimension_name: str = "shape") -> SamplerModule:
    def generate() -> tuple[FactorValue, ...]:
        return tuple(
            FactorValue(id=s, label=s, payload=ShapePayload(label=s)) for s in shapes
        )

    return SamplerModule(name="shapes", dimension_name=dimension_name, generate=generate)


def instruction_sampler(templates: Sequence[tuple[str, str]],
                        dimension_name: str = "instruction") -> SamplerModule:
    def generate() -> tuple[FactorValue, ...]:
        return tuple(
            FactorValue(id=vid, label=text, payload=InstructionPayload(text=text))
            for vid, text in templates
        )

    return SamplerModule(name="instructions", dimension_name=dimension_name, generate=generate)


# --- assignment expansion --------------------------------------------------------

def instance_id(assignment: Mapping[str, str]) -> str:
    """Stable 16-hex-digit id derived from the sorted assignment pairs."""
    canonical = ";".join(f"{k}={v}" for k, v in sorted(assignment.items()))
    return hashlib.blake2b(canonical.encode("utf-8"), digest_size=8).hexdigest()


def expand_variants(space: FactorSpace, assignment: Mapping[str, str]) -> SceneConfig:
    """Bind one value per dimension into a concrete SceneConfig.

    The assignment must cover every dimension of the space exactly once. The
    camera is composed from all camera-pose-carrying dimensions: the first
    such dimension (in declaration order) contributes its pose absolutely,
    later ones contribute their offset from their own baseline, and a scale
    level finally translates the camera backward along its line of sight.
    """
    missing = [d.name for d in space.dims if d.name not in assignment]
    if missing:
        raise MissingDimension(f"assignment missing dimensions {missing}")
    extra = [name for name in assignment if not space.has_dimension(name)]
    if extra:
        raise UnknownDimension(f"assignment names unknown dimensions {extra}")

    singles: dict[str, FactorValue] = {}
    shape_label: str | None = None
    pose_contributions: list[tuple[FactorDimension, FactorValue]] = []
    scale: ScaleLevelPayload | None = None

    def bind_single(kind: str, value: FactorValue) -> None:
        if kind in singles:
            raise SchemaError(f"more than one {kind} dimension in space")
        singles[kind] = value

    for dim in space.dims:
        value = dim.value(assignment[dim.name])
        payload = value.payload
        if isinstance(payload, ColorPayload):
            bind_single("color", value)
        elif isinstance(payload, ShapePayload):
            bind_single("shape", value)
            shape_label = payload.label
        elif isinstance(payload, PositionPayload):
            bind_single("position", value)
        elif isinstance(payload, InstructionPayload):
            bind_single("instruction", value)
        elif isinstance(payload, CameraPosePayload):
            pose_contributions.append((dim, value))
        elif isinstance(payload, ScaleLevelPayload):
            if scale is not None:
                raise SchemaError("more than one scale_level dimension in space")
            scale = payload

    camera = _compose_camera(pose_contributions, scale)
    color_id = singles["color"].id if "color" in singles else None
    shape_id = singles["shape"].id if "shape" in singles else None
    position_id = singles["position"].id if "position" in singles else None
    instruction_value = singles.get("instruction")
    instruction_template = None
    if instruction_value is not None:
        assert isinstance(instruction_value.payload, InstructionPayload)
        instruction_template = instruction_value.payload.text
    if color_id is None or shape_id is None or position_id is None or camera is None:
        lacking = [
            kind
            for kind, present in (
                ("color", color_id),
                ("shape", shape_id),
                ("position", position_id),
                ("camera_pose", camera),
            )
            if present is None
        ]
        raise SchemaError(f"space lacks required payload kinds: {lacking}")

    instruction_text = ""
    if instruction_template is not None:
        instruction_text = instruction_template.replace("{object}", shape_label or "object")

    return SceneConfig(
        object_color=color_id,
        object_shape=shape_id,
        object_position=position_id,
        camera=camera,
        instruction_text=instruction_text,
    )


def _compose_camera(
    contributions: list[tuple[FactorDimension, FactorValue]],
    scale: ScaleLevelPayload | None,
) -> CameraPose | None:
    if not contributions:
        return None
    base_dim, base_value = contributions[0]
    assert isinstance(base_value.payload, CameraPosePayload)
    pose = base_value.payload.pose
    px, py, pz = pose.position
    roll, pitch, yaw = pose.euler
    for dim, value in contributions[1:]:
        assert isinstance(value.payload, CameraPosePayload)
        ref = dim.baseline.payload
        assert isinstance(ref, CameraPosePayload)
        cur = value.payload.pose
        px += cur.position[0] - ref.pose.position[0]
        py += cur.position[1] - ref.pose.position[1]
        pz += cur.position[2] - ref.pose.position[2]
        roll += cur.euler[0] - ref.pose.euler[0]
        pitch += cur.euler[1] - ref.pose.euler[1]
        yaw += cur.euler[2] - ref.pose.euler[2]
    euler = (roll, pitch, yaw)
    if scale is not None and scale.level > 0:
        fx, fy, fz = forward(euler)
        d = scale.level * scale.step_m
        px, py, pz = px - d * fx, py - d * fy, pz - d * fz
    return CameraPose((px, py, pz), euler)


# --- the shipped example space -----------------------------------------------------

EXAMPLE_WORKSPACE_TARGET = (0.4, 0.0, 0.1)
EXAMPLE_FRONT_CAMERA_POSITION = (1.0, 0.0, 0.55)

EXAMPLE_POSITIONS = (
    ("pos_front_left", (0.35, -0.15, 0.0)),
    ("pos_front_right", (0.35, 0.15, 0.0)),
    ("pos_back_left", (0.5, -0.15, 0.0)),
    ("pos_back_right", (0.5, 0.15, 0.0)),
)
EXAMPLE_SHAPES = ("cube", "cylinder", "pyramid", "sphere")
EXAMPLE_INSTRUCTIONS = (
    ("instr_pick", "pick up the {object}"),
    ("instr_grasp", "grasp the {object}"),
    ("instr_lift", "please lift the {object} off the table"),
)


def build_example_space() -> FactorSpace:
    """The example factor space shipped with the package.

    Four visual dimensions (141 colors, 21 orbital camera poses, a 9-pose
    euler grid around the front camera, 9 distance levels) and three context
    dimensions (4 positions, 4 shapes, 3 instruction phrasings).
    """
    front = CameraPose(
        EXAMPLE_FRONT_CAMERA_POSITION,
        look_at_euler(EXAMPLE_FRONT_CAMERA_POSITION, EXAMPLE_WORKSPACE_TARGET),
    )
    dims = [
        color_sampler(dedup="spelling").dimension(VISUAL, baseline_id="red"),
        orbit_pose_sampler(EXAMPLE_WORKSPACE_TARGET).dimension(VISUAL, baseline_id="pose_r0_a0"),
        euler_grid_sampler(front).dimension(VISUAL, baseline_id="euler_y0_p0"),
        scale_level_sampler().dimension(VISUAL, baseline_id="scale_0"),
        grid_position_sampler(EXAMPLE_POSITIONS).dimension(CONTEXT, baseline_id="pos_front_left"),
        shape_sampler(EXAMPLE_SHAPES).dimension(CONTEXT, baseline_id="cube"),
        instruction_sampler(EXAMPLE_INSTRUCTIONS).dimension(CONTEXT, baseline_id="instr_pick"),
    ]
    return build_space(dims)
