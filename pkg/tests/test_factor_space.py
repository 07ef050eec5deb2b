import dataclasses

import pytest

from biasforge.colors import CSS_NAMED_COLORS, color_table
from biasforge.errors import (
    BadBaselineIndex,
    DuplicateDimensionName,
    DuplicateValueId,
    EmptyDimension,
    SchemaError,
    UnknownDimension,
    UnknownValueId,
    UnsupportedFormat,
)
from biasforge.factor_space import (
    CONTEXT,
    VISUAL,
    ColorPayload,
    FactorDimension,
    build_space,
    context_baseline,
    load_space,
    save_space,
    space_from_dict,
    space_to_dict,
    visual_baselines,
)

from conftest import color_value, shape_value


def test_build_space_routes_dims_by_kind(example_space):
    assert [d.name for d in example_space.visual_dims] == [
        "color", "camera_pose", "camera_euler", "dist_scale",
    ]
    assert [d.name for d in example_space.context_dims] == ["position", "shape", "instruction"]
    assert len(example_space.visual_dims) == 4
    assert len(example_space.context_dims) == 3


def test_build_space_allows_zero_context_dims():
    dim = FactorDimension("color", VISUAL, (color_value("red", (255, 0, 0)),), 0)
    space = build_space([dim])
    assert space.context_dims == ()
    assert context_baseline(space) == {}


def test_duplicate_dimension_name_rejected():
    a = FactorDimension("color", VISUAL, (color_value("red", (255, 0, 0)),), 0)
    b = FactorDimension("color", CONTEXT, (shape_value("cube"),), 0)
    with pytest.raises(DuplicateDimensionName):
        build_space([a, b])


def test_empty_dimension_rejected():
    with pytest.raises(EmptyDimension):
        FactorDimension("color", VISUAL, (), 0)


def test_bad_baseline_index_rejected():
    with pytest.raises(BadBaselineIndex):
        FactorDimension("color", VISUAL, (color_value("red", (255, 0, 0)),), 3)


def test_duplicate_value_ids_rejected():
    values = (color_value("red", (255, 0, 0)), color_value("red", (200, 0, 0)))
    with pytest.raises(DuplicateValueId):
        FactorDimension("color", VISUAL, values, 0)


def test_color_payload_range_checked():
    with pytest.raises(SchemaError):
        ColorPayload(name="bad", rgb=(300, 0, 0))


def test_ids_may_not_contain_key_separators():
    payload = ColorPayload(name="x", rgb=(0, 0, 0))
    with pytest.raises(SchemaError):
        FactorDimension("a;b", VISUAL, (color_value("red", (255, 0, 0)),), 0)
    from biasforge.factor_space import FactorValue as FV

    with pytest.raises(SchemaError):
        FV(id="red=ish", label="x", payload=payload)
    with pytest.raises(SchemaError):
        FV(id="", label="x", payload=payload)


def test_baseline_assignments_total(tiny_space):
    vb = visual_baselines(tiny_space)
    cb = context_baseline(tiny_space)
    assert set(vb) == {d.name for d in tiny_space.visual_dims}
    assert set(cb) == {d.name for d in tiny_space.context_dims}
    assert vb["color"] == "red"
    assert cb["position"] == "p0"


def test_baseline_is_declared_value(example_space):
    assert visual_baselines(example_space)["color"] == "red"
    for dim in example_space.dims:
        assert dim.baseline.id == dim.values[dim.baseline_index].id


def test_single_value_dimension_baseline_forced():
    dim = FactorDimension("shape", CONTEXT, (shape_value("cube"),), 0)
    assert dim.baseline.id == "cube"


def test_partition_property(example_space):
    visual_names = {d.name for d in example_space.visual_dims}
    context_names = {d.name for d in example_space.context_dims}
    assert not visual_names & context_names
    for dim in example_space.dims:
        assert (dim.name in visual_names) == (dim.kind == VISUAL)


def test_value_lookup_errors(tiny_space):
    with pytest.raises(UnknownDimension):
        tiny_space.dimension("nope")
    with pytest.raises(UnknownValueId):
        tiny_space.value("color", "chartreuse")


def test_serialization_round_trip(tiny_space, tmp_path):
    path = tmp_path / "space.json"
    save_space(tiny_space, path)
    assert load_space(path) == tiny_space


def test_example_space_file_round_trip(example_space, tmp_path):
    path = tmp_path / "space.json"
    save_space(example_space, path)
    assert load_space(path) == example_space


def test_shipped_example_space_matches_builder(example_space):
    from importlib import resources

    import json

    shipped = json.loads(
        resources.files("biasforge.data").joinpath("example_space.json").read_text()
    )
    assert space_from_dict(shipped) == example_space


def test_unknown_format_rejected(tiny_space):
    doc = space_to_dict(tiny_space)
    doc["format"] = "biasforge/factorspace/v9"
    with pytest.raises(UnsupportedFormat):
        space_from_dict(doc)
    doc["format"] = "something/else/v1"
    with pytest.raises(SchemaError):
        space_from_dict(doc)


def test_kind_listing_mismatch_rejected(tiny_space):
    doc = space_to_dict(tiny_space)
    doc["context_dims"].append(doc["visual_dims"][0])
    with pytest.raises(SchemaError):
        space_from_dict(doc)


def test_color_table_policies():
    assert len(CSS_NAMED_COLORS) == 148
    rgb = color_table("rgb")
    spelling = color_table("spelling")
    assert len({c for _, c in rgb}) == len(rgb)  # fully deduplicated
    assert all("grey" not in name for name, _ in spelling)
    assert len(spelling) == 141
    assert len(color_table("rgb", limit=24)) == 24
    with pytest.raises(ValueError):
        color_table("nope")
    with pytest.raises(ValueError):
        color_table("rgb", limit=0)


def test_color_table_alias_keeps_first_name():
    names = {name for name, _ in color_table("rgb")}
    assert "aqua" in names and "cyan" not in names
    assert "gray" in names and "grey" not in names


def test_dimension_value_order_is_meaningful(tiny_space):
    dim = tiny_space.dimension("color")
    reordered = dataclasses.replace(dim, values=tuple(reversed(dim.values)))
    assert [v.id for v in reordered.values] != [v.id for v in dim.values]
