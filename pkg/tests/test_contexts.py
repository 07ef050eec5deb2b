import json

import pytest

from biasforge.contexts import (
    EvaluationContext,
    baseline_evaluation_context,
    context_union,
    decode_key,
    encode_key,
    factorial_subspace,
    generalization_context_space,
    read_manifest,
    task_subspace,
    variation_subspace,
    write_manifest,
)
from biasforge.errors import (
    IncompleteContext,
    NoContextDimensions,
    NotAContextDimension,
    NotAVisualDimension,
    SameDimension,
    SchemaError,
)
from biasforge.factor_space import (
    VISUAL,
    FactorDimension,
    build_space,
    context_baseline,
    visual_baselines,
)

from conftest import color_value, make_space, wide_context_space


def brute_force_union(space):
    """Independent oracle: enumerate every per-dimension sweep, collect a set."""
    baseline = context_baseline(space)
    union = set()
    for dim in space.context_dims:
        for value in dim.values:
            assignment = dict(baseline)
            assignment[dim.name] = value.id
            union.add(tuple(sorted(assignment.items())))
    return union


def nested_loop_subspace(space, dim_name):
    """Independent oracle for the task subspace: plain nested loops."""
    contexts = context_union(space)
    fixed = visual_baselines(space)
    del fixed[dim_name]
    out = []
    for value in space.dimension(dim_name).values:
        for ctx in contexts:
            out.append({dim_name: value.id, **fixed, **ctx})
    return out


def test_variation_subspace_sweeps_one_dim():
    space = wide_context_space()
    sweeps = variation_subspace(space, "shape")
    assert len(sweeps) == 4
    baseline = context_baseline(space)
    for assignment, value in zip(sweeps, space.dimension("shape").values):
        assert assignment["shape"] == value.id
        diffs = [k for k in assignment if assignment[k] != baseline[k]]
        assert diffs in ([], ["shape"])


def test_variation_subspace_single_value_dim(tiny_space):
    sweeps = variation_subspace(tiny_space, "shape")
    assert sweeps == [context_baseline(tiny_space)]


def test_variation_subspace_rejects_visual_dim(tiny_space):
    with pytest.raises(NotAContextDimension):
        variation_subspace(tiny_space, "color")


def test_context_union_matches_brute_force():
    space = wide_context_space()  # context sizes 4, 4, 3
    union = context_union(space)
    assert len(union) == 9  # 4 + 4 + 3 minus two duplicate baselines
    assert {tuple(sorted(a.items())) for a in union} == brute_force_union(space)
    # baseline configuration appears exactly once
    baseline = tuple(sorted(context_baseline(space).items()))
    assert sum(1 for a in union if tuple(sorted(a.items())) == baseline) == 1


def test_context_union_single_dim():
    space = make_space(n_positions=3, n_shapes=1, n_instructions=1)
    union = context_union(space)
    assert len(union) == 3
    assert {a["position"] for a in union} == {"p0", "p1", "p2"}


def test_context_union_all_singletons():
    space = make_space(n_positions=1, n_shapes=1, n_instructions=1)
    union = context_union(space)
    assert union == [context_baseline(space)]


def test_context_union_requires_context_dims():
    lone = build_space(
        [FactorDimension("color", VISUAL, (color_value("red", (255, 0, 0)),), 0)]
    )
    with pytest.raises(NoContextDimensions):
        context_union(lone)


def test_union_elements_differ_from_baseline_in_at_most_one_coordinate():
    space = wide_context_space()
    baseline = context_baseline(space)
    for assignment in context_union(space):
        diffs = [k for k, v in assignment.items() if baseline[k] != v]
        assert len(diffs) <= 1


def test_generalization_contexts_fix_other_visual_dims(tiny_space):
    contexts = generalization_context_space(tiny_space, "color")
    union = context_union(tiny_space)
    assert len(contexts) == len(union)
    fixed = visual_baselines(tiny_space)
    del fixed["color"]
    for ctx in contexts:
        assert ctx.visual_fixed_map == fixed


def test_generalization_contexts_empty_fixed_for_single_visual_dim():
    space = wide_context_space()
    space = build_space([d for d in space.dims if d.name != "camera_pose"])
    contexts = generalization_context_space(space, "color")
    assert all(ctx.visual_fixed == () for ctx in contexts)


def test_generalization_rejects_context_dim(tiny_space):
    with pytest.raises(NotAVisualDimension):
        generalization_context_space(tiny_space, "shape")


def test_task_subspace_counts_and_ids(tiny_space):
    instances = task_subspace(tiny_space, "color")
    union = context_union(tiny_space)
    assert len(instances) == 3 * len(union)
    assert len({inst.instance_id for inst in instances}) == len(instances)
    oracle = nested_loop_subspace(tiny_space, "color")
    assert [inst.assignment for inst in instances] == oracle


def test_task_subspace_single_value_dim():
    space = make_space(colors=(("red", (255, 0, 0)),))
    instances = task_subspace(space, "color")
    assert len(instances) == len(context_union(space))


def test_task_subspace_baseline_slice(tiny_space):
    instances = task_subspace(tiny_space, "color")
    baseline_id = visual_baselines(tiny_space)["color"]
    slice_ = [i for i in instances if i.varied_map["color"] == baseline_id]
    contexts = generalization_context_space(tiny_space, "color")
    assert [i.eval_context for i in slice_] == contexts


def test_factorial_counts(tiny_space):
    grid = factorial_subspace(tiny_space, "camera_pose", "color")
    assert len(grid) == 2 * 3
    assert len({i.instance_id for i in grid}) == 6
    for inst in grid:
        assert set(inst.varied_map) == {"camera_pose", "color"}


def test_factorial_single_value_reduces_to_sweep():
    space = make_space(colors=(("red", (255, 0, 0)),), n_poses=3)
    grid = factorial_subspace(space, "color", "camera_pose")
    assert len(grid) == 3
    assert {i.varied_map["camera_pose"] for i in grid} == {"pose0", "pose1", "pose2"}


def test_factorial_same_dimension_rejected(tiny_space):
    with pytest.raises(SameDimension):
        factorial_subspace(tiny_space, "color", "color")


def test_factorial_incomplete_context_rejected(tiny_space):
    bad = EvaluationContext.make({"position": "p0"}, {})
    with pytest.raises(IncompleteContext):
        factorial_subspace(tiny_space, "camera_pose", "color", c_star=bad)


def test_factorial_explicit_context_equals_default(tiny_space):
    c_star = baseline_evaluation_context(tiny_space, exclude=("camera_pose", "color"))
    assert factorial_subspace(tiny_space, "camera_pose", "color", c_star=c_star) == (
        factorial_subspace(tiny_space, "camera_pose", "color")
    )


def test_context_key_round_trip():
    assignment = {"b": "2", "a": "1", "c": "x y"}
    key = encode_key(assignment)
    assert key == "a=1;b=2;c=x y"
    assert decode_key(key) == assignment
    assert decode_key("") == {}


def test_manifest_round_trip(tiny_space, tmp_path):
    instances = task_subspace(tiny_space, "color")
    path = tmp_path / "instances.jsonl"
    write_manifest(path, instances, tiny_space, evaluated_dims=["color"])
    manifest = read_manifest(path)
    assert len(manifest.rows) == len(instances)
    assert manifest.evaluated_dims == ["color"]
    assert manifest.header["counts"]["instances"] == len(instances)
    for row, inst in zip(manifest.rows, instances):
        assert row.instance_id == inst.instance_id
        assert row.assignment == inst.assignment
        assert manifest.varied_of(row) == inst.varied_map
        assert manifest.context_key_of(row) == inst.eval_context.key()


def test_manifest_bytes_deterministic(tiny_space, tmp_path):
    instances = task_subspace(tiny_space, "color")
    paths = []
    for name in ("a.jsonl", "b.jsonl"):
        path = tmp_path / name
        write_manifest(path, instances, tiny_space, evaluated_dims=["color"])
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_manifest_rows_carry_scene_payload(tiny_space, tmp_path):
    instances = task_subspace(tiny_space, "color")
    path = tmp_path / "instances.jsonl"
    write_manifest(path, instances, tiny_space, evaluated_dims=["color"])
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {"instance_id", "visual", "context", "scene"}
    assert set(first["scene"]) == {"camera", "color_rgb", "shape", "position_xyz", "instruction"}
    assert first["scene"]["color_rgb"] == [255, 0, 0]
    assert first["scene"]["instruction"] == "pick up the cube"


def test_manifest_requires_header(tmp_path):
    path = tmp_path / "orphan.jsonl"
    path.write_text("{}\n")
    with pytest.raises(SchemaError):
        read_manifest(path)
