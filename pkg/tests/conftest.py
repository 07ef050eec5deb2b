"""Shared fixtures: small factor spaces sized for fast, exact tests."""

from __future__ import annotations

import re

import pytest

_CRITERION_RE = re.compile(r"test_criterion_(\d+)_(\w+)")
_criterion_verdicts: list[str] = []


def pytest_runtest_logreport(report):
    """Collect one PASS/FAIL line per acceptance criterion."""
    if report.when != "call":
        return
    match = _CRITERION_RE.search(report.nodeid)
    if match:
        number = int(match.group(1))
        name = match.group(2).replace("_", " ")
        verdict = "PASS" if report.passed else "FAIL"
        _criterion_verdicts.append(f"[criterion {number:2d}] {verdict}: {name}")


def pytest_terminal_summary(terminalreporter):
    if _criterion_verdicts:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criterion_verdicts):
            terminalreporter.write_line(line)

from biasforge.factor_space import (
    CONTEXT,
    VISUAL,
    CameraPosePayload,
    ColorPayload,
    FactorDimension,
    FactorValue,
    InstructionPayload,
    PositionPayload,
    ScaleLevelPayload,
    ShapePayload,
    build_space,
)
from biasforge.geometry import CameraPose, look_at_euler
from biasforge.variants import build_example_space


def color_value(name: str, rgb: tuple[int, int, int]) -> FactorValue:
    return FactorValue(id=name, label=name, payload=ColorPayload(name=name, rgb=rgb))


def pose_value(vid: str, position: tuple[float, float, float],
               target: tuple[float, float, float] = (0.4, 0.0, 0.1)) -> FactorValue:
    pose = CameraPose(position, look_at_euler(position, target))
    return FactorValue(id=vid, label=vid, payload=CameraPosePayload(pose=pose))


def position_value(vid: str, xyz: tuple[float, float, float]) -> FactorValue:
    return FactorValue(id=vid, label=vid, payload=PositionPayload(label=vid, xyz=xyz))


def shape_value(vid: str) -> FactorValue:
    return FactorValue(id=vid, label=vid, payload=ShapePayload(label=vid))


def instruction_value(vid: str, text: str) -> FactorValue:
    return FactorValue(id=vid, label=text, payload=InstructionPayload(text=text))


def scale_value(level: int, step_m: float = 0.05) -> FactorValue:
    return FactorValue(
        id=f"scale_{level}",
        label=f"level {level}",
        payload=ScaleLevelPayload(level=level, step_m=step_m),
    )


DEFAULT_COLORS = (
    ("red", (255, 0, 0)),
    ("blue", (0, 0, 255)),
    ("gray", (128, 128, 128)),
)


def make_space(colors=DEFAULT_COLORS, n_poses: int = 2, n_positions: int = 2,
               n_shapes: int = 1, n_instructions: int = 1) -> "FactorSpace":
    """A compact space with every payload kind present.

    Defaults: 3 colors x 2 poses visually; 2 positions, 1 shape, 1 instruction
    as context.
    """
    shapes = ("cube", "cylinder", "pyramid", "sphere")[:n_shapes]
    instructions = (
        ("t1", "pick up the {object}"),
        ("t2", "grasp the {object}"),
        ("t3", "please lift the {object} off the table"),
    )[:n_instructions]
    dims = [
        FactorDimension(
            "color", VISUAL, tuple(color_value(n, rgb) for n, rgb in colors), 0
        ),
        FactorDimension(
            "camera_pose",
            VISUAL,
            tuple(pose_value(f"pose{i}", (1.0 + 0.1 * i, 0.0, 0.5)) for i in range(n_poses)),
            0,
        ),
        FactorDimension(
            "position",
            CONTEXT,
            tuple(position_value(f"p{i}", (0.4 + 0.05 * i, 0.0, 0.0)) for i in range(n_positions)),
            0,
        ),
        FactorDimension("shape", CONTEXT, tuple(shape_value(s) for s in shapes), 0),
        FactorDimension(
            "instruction", CONTEXT, tuple(instruction_value(v, t) for v, t in instructions), 0
        ),
    ]
    return build_space(dims)


def wide_context_space(n_colors: int = 20) -> "FactorSpace":
    """Colors under evaluation against the 4-position, 4-shape, 3-instruction context."""
    colors = tuple((f"c{i:02d}", (i * 12 % 256, (i * 37) % 256, (i * 91) % 256))
                   for i in range(n_colors))
    return make_space(colors=colors, n_poses=1, n_positions=4, n_shapes=4, n_instructions=3)


@pytest.fixture(scope="session")
def example_space():
    return build_example_space()


@pytest.fixture()
def tiny_space():
    return make_space()
