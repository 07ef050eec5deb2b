"""Construction of the evaluation spaces and the instance-manifest files.

The flow mirrors the factor-isolation protocol: sweep one context dimension
at a time against the baseline configuration (variation subspaces), take the
deduplicated union of those sweeps (the structured-union context set), fix
all visual dimensions except the one under evaluation at their baselines
(generalization contexts), and finally cross the evaluated dimension's values
with those contexts (the task subspace). Factorial subspaces cross two visual
dimensions inside one fixed context for interaction analysis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    IncompleteContext,
    NoContextDimensions,
    NotAContextDimension,
    NotAVisualDimension,
    SameDimension,
    SchemaError,
)
from .factor_space import (
    CONTEXT,
    VISUAL,
    ColorPayload,
    FactorSpace,
    PositionPayload,
    ShapePayload,
    context_baseline,
    visual_baselines,
)
from .formats import MANIFEST_FORMAT, check_format
from .variants import SceneConfig, expand_variants, instance_id

Items = tuple[tuple[str, str], ...]

ContextAssignment = dict[str, str]


def _items(assignment: Mapping[str, str]) -> Items:
    return tuple(sorted(assignment.items()))


def encode_key(assignment: Mapping[str, str]) -> str:
    """Canonical string form of an assignment: sorted ``dim=value`` pairs."""
    return ";".join(f"{k}={v}" for k, v in sorted(assignment.items()))


def decode_key(key: str) -> dict[str, str]:
    if not key:
        return {}
    pairs = {}
    for chunk in key.split(";"):
        dim, sep, value = chunk.partition("=")
        if not sep or not dim:
            raise SchemaError(f"malformed context key chunk {chunk!r}")
        pairs[dim] = value
    return pairs


@dataclass(frozen=True)
class EvaluationContext:
    """One controlled background: a context assignment plus pinned visual values."""

    context: Items
    visual_fixed: Items

    @classmethod
    def make(cls, context: Mapping[str, str], visual_fixed: Mapping[str, str]) -> "EvaluationContext":
        return cls(context=_items(context), visual_fixed=_items(visual_fixed))

    @property
    def context_map(self) -> dict[str, str]:
        return dict(self.context)

    @property
    def visual_fixed_map(self) -> dict[str, str]:
        return dict(self.visual_fixed)

    def key(self) -> str:
        return encode_key({**self.context_map, **self.visual_fixed_map})


@dataclass(frozen=True)
class TaskInstance:
    """One fully-bound scenario: evaluated value(s), background, scene payload.

    ``scene`` is None for instances rehydrated from a manifest, where only the
    assignment is needed (e.g. to draw simulated outcomes)."""

    instance_id: str
    varied: Items
    eval_context: EvaluationContext
    scene: SceneConfig | None

    @property
    def varied_map(self) -> dict[str, str]:
        return dict(self.varied)

    @property
    def assignment(self) -> dict[str, str]:
        full = dict(self.varied)
        full.update(self.eval_context.context_map)
        full.update(self.eval_context.visual_fixed_map)
        return full


# --- subspace construction -------------------------------------------------------

def variation_subspace(space: FactorSpace, k: str) -> list[ContextAssignment]:
    """Sweep context dimension k, all other context dims at baseline."""
    dim = space.dimension(k)
    if dim.kind != CONTEXT:
        raise NotAContextDimension(f"{k!r} is a {dim.kind} dimension")
    base = context_baseline(space)
    out = []
    for value in dim.values:
        assignment = dict(base)
        assignment[k] = value.id
        out.append(assignment)
    return out


def context_union(space: FactorSpace) -> list[ContextAssignment]:
    """Deduplicated union of all variation subspaces.

    The baseline configuration appears once in each subspace; without
    deduplication it would be counted m times and drag every context-averaged
    metric toward baseline behavior. Order is first occurrence under
    (dimension declaration order, value order).
    """
    if not space.context_dims:
        raise NoContextDimensions("space declares no context dimensions")
    seen: set[Items] = set()
    out = []
    for dim in space.context_dims:
        for assignment in variation_subspace(space, dim.name):
            key = _items(assignment)
            if key not in seen:
                seen.add(key)
                out.append(assignment)
    return out


def generalization_context_space(space: FactorSpace, i: str) -> list[EvaluationContext]:
    """Each structured-union context paired with baselines of all visual dims but i."""
    dim = space.dimension(i)
    if dim.kind != VISUAL:
        raise NotAVisualDimension(f"{i!r} is a {dim.kind} dimension")
    fixed = visual_baselines(space)
    del fixed[i]
    return [EvaluationContext.make(ctx, fixed) for ctx in context_union(space)]


def _build_instance(space: FactorSpace, varied: Mapping[str, str],
                    eval_context: EvaluationContext) -> TaskInstance:
    assignment = dict(varied)
    assignment.update(eval_context.context_map)
    assignment.update(eval_context.visual_fixed_map)
    return TaskInstance(
        instance_id=instance_id(assignment),
        varied=_items(varied),
        eval_context=eval_context,
        scene=expand_variants(space, assignment),
    )


def task_subspace(space: FactorSpace, i: str) -> list[TaskInstance]:
    """Cartesian product of dimension i's values with its generalization contexts.

    Ordering is value-major: all contexts for the first value, then the next
    value, following declaration order throughout.
    """
    dim = space.dimension(i)
    if dim.kind != VISUAL:
        raise NotAVisualDimension(f"{i!r} is a {dim.kind} dimension")
    contexts = generalization_context_space(space, i)
    return [
        _build_instance(space, {i: value.id}, ctx)
        for value in dim.values
        for ctx in contexts
    ]


def baseline_evaluation_context(space: FactorSpace, exclude: Sequence[str] = ()) -> EvaluationContext:
    """The all-baseline background, omitting the given visual dims from the pinned set."""
    fixed = visual_baselines(space)
    for name in exclude:
        fixed.pop(name, None)
    return EvaluationContext.make(context_baseline(space), fixed)


def factorial_subspace(space: FactorSpace, i: str, j: str,
                       c_star: EvaluationContext | None = None) -> list[TaskInstance]:
    """Full grid of two visual dimensions inside one fixed context.

    ``c_star`` must bind every context dimension and every visual dimension
    except i and j; it defaults to the all-baseline configuration.
    """
    if i == j:
        raise SameDimension(f"factorial dimensions must differ, got {i!r} twice")
    dim_i = space.dimension(i)
    dim_j = space.dimension(j)
    for dim in (dim_i, dim_j):
        if dim.kind != VISUAL:
            raise NotAVisualDimension(f"{dim.name!r} is a {dim.kind} dimension")
    if c_star is None:
        c_star = baseline_evaluation_context(space, exclude=(i, j))
    expected_fixed = sorted(d.name for d in space.visual_dims if d.name not in (i, j))
    got_fixed = sorted(c_star.visual_fixed_map)
    expected_ctx = sorted(d.name for d in space.context_dims)
    got_ctx = sorted(c_star.context_map)
    if got_fixed != expected_fixed or got_ctx != expected_ctx:
        raise IncompleteContext(
            f"c_star must fix context dims {expected_ctx} and visual dims {expected_fixed}; "
            f"got context {got_ctx}, visual {got_fixed}"
        )
    return [
        _build_instance(space, {i: vi.id, j: vj.id}, c_star)
        for vi in dim_i.values
        for vj in dim_j.values
    ]


# --- manifest files ----------------------------------------------------------------

def instance_to_row(inst: TaskInstance, space: FactorSpace) -> dict:
    """The JSON-lines record for one instance."""
    assignment = inst.assignment
    visual = {d.name: assignment[d.name] for d in space.visual_dims}
    context = {d.name: assignment[d.name] for d in space.context_dims}
    rgb: tuple[int, int, int] | None = None
    xyz: tuple[float, float, float] | None = None
    shape_label = inst.scene.object_shape
    for dim in space.dims:
        payload = dim.value(assignment[dim.name]).payload
        if isinstance(payload, ColorPayload):
            rgb = payload.rgb
        elif isinstance(payload, PositionPayload):
            xyz = payload.xyz
        elif isinstance(payload, ShapePayload):
            shape_label = payload.label
    scene = {
        "camera": {
            "pos": list(inst.scene.camera.position),
            "euler": list(inst.scene.camera.euler),
        },
        "color_rgb": list(rgb) if rgb is not None else None,
        "shape": shape_label,
        "position_xyz": list(xyz) if xyz is not None else None,
        "instruction": inst.scene.instruction_text,
    }
    return {
        "instance_id": inst.instance_id,
        "visual": visual,
        "context": context,
        "scene": scene,
    }


def manifest_header(space: FactorSpace, evaluated_dims: Sequence[str],
                    instances: Sequence[TaskInstance],
                    c_star: EvaluationContext | None = None) -> dict:
    counts: dict[str, int] = {"instances": len(instances)}
    for name in evaluated_dims:
        counts[f"values[{name}]"] = len(space.dimension(name).values)
    contexts = {inst.eval_context for inst in instances}
    counts["contexts"] = len(contexts)
    return {
        "format": MANIFEST_FORMAT,
        "evaluated_dims": list(evaluated_dims),
        "baselines": {
            "visual": visual_baselines(space),
            "context": context_baseline(space),
        },
        "c_star": None if c_star is None else {
            "context": c_star.context_map,
            "visual_fixed": c_star.visual_fixed_map,
        },
        "counts": counts,
    }


def header_path_for(manifest_path: str | Path) -> Path:
    p = Path(manifest_path)
    return p.with_name(p.stem + ".header.json")


def write_manifest(path: str | Path, instances: Sequence[TaskInstance],
                   space: FactorSpace, evaluated_dims: Sequence[str],
                   c_star: EvaluationContext | None = None) -> None:
    """Write instances as JSON lines plus the sidecar header document."""
    path = Path(path)
    with path.open("w") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_row(inst, space), sort_keys=True) + "\n")
    header = manifest_header(space, evaluated_dims, instances, c_star=c_star)
    header_path_for(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class ManifestRow:
    instance_id: str
    visual: dict[str, str]
    context: dict[str, str]
    scene: dict

    @property
    def assignment(self) -> dict[str, str]:
        return {**self.visual, **self.context}


@dataclass(frozen=True)
class Manifest:
    rows: tuple[ManifestRow, ...]
    header: dict

    @property
    def evaluated_dims(self) -> list[str]:
        return list(self.header.get("evaluated_dims", []))

    def varied_of(self, row: ManifestRow) -> dict[str, str]:
        return {d: row.assignment[d] for d in self.evaluated_dims}

    def context_key_of(self, row: ManifestRow) -> str:
        varied = set(self.evaluated_dims)
        return encode_key({k: v for k, v in row.assignment.items() if k not in varied})


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    header_path = header_path_for(path)
    if not header_path.exists():
        raise SchemaError(f"manifest sidecar header not found: {header_path}")
    header = json.loads(header_path.read_text())
    check_format(header.get("format"), MANIFEST_FORMAT)
    rows = []
    with path.open() as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rows.append(
                    ManifestRow(
                        instance_id=obj["instance_id"],
                        visual=dict(obj["visual"]),
                        context=dict(obj["context"]),
                        scene=obj.get("scene", {}),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise SchemaError(f"{path}:{line_no}: bad manifest row ({exc})") from exc
    return Manifest(rows=tuple(rows), header=header)
