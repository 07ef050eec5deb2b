"""The factor universe: visual and context dimensions with declared baselines.

A FactorSpace partitions every variable of the benchmark into visual
dimensions (the attributes under bias evaluation) and context dimensions
(non-visual variation used to diversify scenarios). Each dimension declares
its baseline value at registration time; nothing is inferred.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .errors import (
    BadBaselineIndex,
    DuplicateDimensionName,
    DuplicateValueId,
    EmptyDimension,
    SchemaError,
    UnknownDimension,
    UnknownValueId,
)
from .formats import FACTORSPACE_FORMAT, check_format
from .geometry import CameraPose

VISUAL = "visual"
CONTEXT = "context"


# --- payload variants ---------------------------------------------------------

@dataclass(frozen=True)
class ColorPayload:
    name: str
    rgb: tuple[int, int, int]

    def __post_init__(self) -> None:
        if len(self.rgb) != 3 or any(not 0 <= c <= 255 for c in self.rgb):
            raise SchemaError(f"rgb components must be in [0, 255], got {self.rgb}")


@dataclass(frozen=True)
class CameraPosePayload:
    pose: CameraPose


@dataclass(frozen=True)
class ScaleLevelPayload:
    level: int
    step_m: float = 0.05

    def __post_init__(self) -> None:
        if not 0 <= self.level <= 8:
            raise SchemaError(f"scale level must be in 0..8, got {self.level}")


@dataclass(frozen=True)
class PositionPayload:
    label: str
    xyz: tuple[float, float, float]


@dataclass(frozen=True)
class ShapePayload:
    label: str


@dataclass(frozen=True)
class InstructionPayload:
    """Instruction template text; ``{object}`` is substituted at expansion time."""

    text: str


Payload = Union[
    ColorPayload,
    CameraPosePayload,
    ScaleLevelPayload,
    PositionPayload,
    ShapePayload,
    InstructionPayload,
]

_PAYLOAD_TAGS = {
    ColorPayload: "color",
    CameraPosePayload: "camera_pose",
    ScaleLevelPayload: "scale_level",
    PositionPayload: "position",
    ShapePayload: "shape",
    InstructionPayload: "instruction",
}


# --- core types ---------------------------------------------------------------

_KEY_SEPARATORS = ("=", ";", "\n")


@dataclass(frozen=True)
class FactorValue:
    """One concrete value of a dimension, identified by a unique id."""

    id: str
    label: str
    payload: Payload

    def __post_init__(self) -> None:
        if not self.id:
            raise SchemaError("factor value id must be non-empty")
        # ids are embedded in the canonical "dim=value;dim=value" key encoding
        if any(c in self.id for c in _KEY_SEPARATORS):
            raise SchemaError(f"value id {self.id!r} may not contain '=', ';' or newlines")


@dataclass(frozen=True)
class FactorDimension:
    """An ordered list of values plus the index of the declared baseline.

    Value order is meaningful: it fixes iteration order for generation and
    report layouts, which is what makes manifests reproducible.
    """

    name: str
    kind: str
    values: tuple[FactorValue, ...]
    baseline_index: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (VISUAL, CONTEXT):
            raise SchemaError(f"dimension kind must be visual or context, got {self.kind!r}")
        if not self.name or any(c in self.name for c in _KEY_SEPARATORS):
            raise SchemaError(f"dimension name {self.name!r} must be non-empty and"
                              f" free of '=', ';' and newlines")
        if not self.values:
            raise EmptyDimension(f"dimension {self.name!r} has no values")
        ids = [v.id for v in self.values]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateValueId(f"dimension {self.name!r} repeats value ids {dupes}")
        if not 0 <= self.baseline_index < len(self.values):
            raise BadBaselineIndex(
                f"baseline index {self.baseline_index} outside 0..{len(self.values) - 1}"
                f" in dimension {self.name!r}"
            )

    @property
    def baseline(self) -> FactorValue:
        return self.values[self.baseline_index]

    @property
    def value_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self.values)

    def value(self, value_id: str) -> FactorValue:
        for v in self.values:
            if v.id == value_id:
                return v
        raise UnknownValueId(f"dimension {self.name!r} has no value {value_id!r}")


@dataclass(frozen=True)
class FactorSpace:
    """The validated partition of all dimensions into visual and context sets."""

    visual_dims: tuple[FactorDimension, ...]
    context_dims: tuple[FactorDimension, ...]

    @property
    def dims(self) -> tuple[FactorDimension, ...]:
        return self.visual_dims + self.context_dims

    def dimension(self, name: str) -> FactorDimension:
        for dim in self.dims:
            if dim.name == name:
                return dim
        raise UnknownDimension(f"no dimension named {name!r}")

    def has_dimension(self, name: str) -> bool:
        return any(dim.name == name for dim in self.dims)

    def value(self, dim_name: str, value_id: str) -> FactorValue:
        return self.dimension(dim_name).value(value_id)

    def color_rgb_index(self) -> dict[str, tuple[int, int, int]]:
        """value id -> RGB for every color payload across all dimensions."""
        index: dict[str, tuple[int, int, int]] = {}
        for dim in self.dims:
            for v in dim.values:
                if isinstance(v.payload, ColorPayload):
                    index[v.id] = v.payload.rgb
        return index


BaselineAssignment = dict[str, str]


# --- operations ---------------------------------------------------------------

def build_space(dims: Iterable[FactorDimension]) -> FactorSpace:
    """Route dimensions by kind into a validated FactorSpace."""
    dims = tuple(dims)
    names = [d.name for d in dims]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateDimensionName(f"dimension names repeated: {dupes}")
    visual = tuple(d for d in dims if d.kind == VISUAL)
    context = tuple(d for d in dims if d.kind == CONTEXT)
    return FactorSpace(visual_dims=visual, context_dims=context)


def visual_baselines(space: FactorSpace) -> BaselineAssignment:
    """Baseline value id per visual dimension."""
    return {dim.name: dim.baseline.id for dim in space.visual_dims}


def context_baseline(space: FactorSpace) -> BaselineAssignment:
    """Baseline value id per context dimension (the default configuration)."""
    return {dim.name: dim.baseline.id for dim in space.context_dims}


# --- serialization --------------------------------------------------------------

def _payload_to_dict(payload: Payload) -> dict:
    tag = _PAYLOAD_TAGS[type(payload)]
    if isinstance(payload, ColorPayload):
        return {"type": tag, "name": payload.name, "rgb": list(payload.rgb)}
    if isinstance(payload, CameraPosePayload):
        return {
            "type": tag,
            "pos": list(payload.pose.position),
            "euler": list(payload.pose.euler),
        }
    if isinstance(payload, ScaleLevelPayload):
        return {"type": tag, "level": payload.level, "step_m": payload.step_m}
    if isinstance(payload, PositionPayload):
        return {"type": tag, "label": payload.label, "xyz": list(payload.xyz)}
    if isinstance(payload, ShapePayload):
        return {"type": tag, "label": payload.label}
    if isinstance(payload, InstructionPayload):
        return {"type": tag, "text": payload.text}
    raise SchemaError(f"unserializable payload {payload!r}")


def _payload_from_dict(obj: dict) -> Payload:
    try:
        tag = obj["type"]
    except (KeyError, TypeError):
        raise SchemaError(f"value payload missing 'type': {obj!r}") from None
    try:
        if tag == "color":
            return ColorPayload(name=obj["name"], rgb=tuple(obj["rgb"]))
        if tag == "camera_pose":
            return CameraPosePayload(
                pose=CameraPose(position=tuple(obj["pos"]), euler=tuple(obj["euler"]))
            )
        if tag == "scale_level":
            return ScaleLevelPayload(level=obj["level"], step_m=obj.get("step_m", 0.05))
        if tag == "position":
            return PositionPayload(label=obj["label"], xyz=tuple(obj["xyz"]))
        if tag == "shape":
            return ShapePayload(label=obj["label"])
        if tag == "instruction":
            return InstructionPayload(text=obj["text"])
    except KeyError as exc:
        raise SchemaError(f"payload {tag!r} missing field {exc}") from None
    raise SchemaError(f"unknown payload type {tag!r}")


def _dimension_to_dict(dim: FactorDimension) -> dict:
    return {
        "name": dim.name,
        "kind": dim.kind,
        "baseline": dim.baseline.id,
        "values": [
            {"id": v.id, "label": v.label, **_payload_to_dict(v.payload)} for v in dim.values
        ],
    }


def _dimension_from_dict(obj: dict) -> FactorDimension:
    try:
        name = obj["name"]
        kind = obj["kind"]
        baseline_id = obj["baseline"]
        raw_values = obj["values"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"dimension object missing field {exc}") from None
    values = []
    for raw in raw_values:
        try:
            values.append(
                FactorValue(id=raw["id"], label=raw["label"], payload=_payload_from_dict(raw))
            )
        except KeyError as exc:
            raise SchemaError(f"value in dimension {name!r} missing field {exc}") from None
    ids = [v.id for v in values]
    if baseline_id not in ids:
        raise BadBaselineIndex(f"baseline {baseline_id!r} not among values of {name!r}")
    return FactorDimension(
        name=name, kind=kind, values=tuple(values), baseline_index=ids.index(baseline_id)
    )


def space_to_dict(space: FactorSpace) -> dict:
    return {
        "format": FACTORSPACE_FORMAT,
        "visual_dims": [_dimension_to_dict(d) for d in space.visual_dims],
        "context_dims": [_dimension_to_dict(d) for d in space.context_dims],
    }


def space_from_dict(obj: dict) -> FactorSpace:
    if not isinstance(obj, dict):
        raise SchemaError("factor space document must be a JSON object")
    check_format(obj.get("format"), FACTORSPACE_FORMAT)
    dims = []
    for key, kind in (("visual_dims", VISUAL), ("context_dims", CONTEXT)):
        for raw in obj.get(key, []):
            dim = _dimension_from_dict(raw)
            if dim.kind != kind:
                raise SchemaError(
                    f"dimension {dim.name!r} has kind {dim.kind!r} but is listed under {key}"
                )
            dims.append(dim)
    return build_space(dims)


def save_space(space: FactorSpace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space_to_dict(space), indent=2, sort_keys=True) + "\n")


def load_space(path: str | Path) -> FactorSpace:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return space_from_dict(obj)
