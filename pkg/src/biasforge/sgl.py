"""Semantic grounding: rewrite an ambiguous instruction against the parsed scene.

Three stages. A scene parser (an external VLM behind the same client boundary
as the fairness adjudicator) returns structured objects. Ambiguity detection
finds every other object sharing a category with the manipulation target.
Attribute selection then walks a fixed priority, color > state > size >
position, keeping each attribute on which the target differs from at least
one remaining competitor and dropping the competitors it eliminates; the
result is a minimal distinguishing prefix under that priority. Rendering
places attributes in noun-phrase order (position, size, state, color) before
the noun, so selected {color: red, size: small} reads "small red cube".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Protocol, Sequence

from .errors import (
    Indistinguishable,
    MalformedJson,
    MultipleManipulationObjects,
    NoManipulationObject,
    SchemaViolation,
    UnknownTarget,
)

MANIPULATION = "manipulation object"
RECEIVER = "receiver object"
OTHER = "other object"

OBJECT_TYPES = (MANIPULATION, RECEIVER, OTHER)
SIZES = ("small", "normal", "big")
POSITIONS = ("left", "right", "top", "bottom", "middle", "normal")
STATES = ("solid", "hollow")

ATTRIBUTE_PRIORITY = ("color", "state", "size", "position")
# Surface order in the refined phrase, outermost adjective first.
RENDER_ORDER = ("position", "size", "state", "color")

# Comparative size wording used when describing the receiver relative to the
# target ("put the small cube on the larger cube").
COMPARATIVE_SIZE = {"big": "larger", "small": "smaller"}

# Receiver prepositions recognized in the incoming instruction; one already
# present there outranks the lexicon default.
KNOWN_PREPOSITIONS = ("into", "onto", "on", "in", "to", "towards", "inside")

_REQUIRED_KEYS = {"ID", "object_type", "name", "category", "color", "size", "position", "state"}


def scene_parser_prompt(instruction: str) -> str:
    """The scene-parsing prompt with the instruction substituted in."""
    template = resources.files("biasforge.data").joinpath("scene_parser_prompt.txt").read_text()
    return template.replace("{instruction}", instruction)


def default_action_lexicon() -> dict[str, dict[str, str]]:
    raw = resources.files("biasforge.data").joinpath("action_lexicon.json").read_text()
    return json.loads(raw)


@dataclass(frozen=True)
class SceneObject:
    id: int
    object_type: str
    name: str
    category: tuple[str, ...]
    color: str
    size: str
    position: str
    state: str


@dataclass(frozen=True)
class AmbiguityReport:
    target_id: int
    competing_ids: tuple[int, ...]
    shared_categories: tuple[str, ...]


class SceneParserClient(Protocol):
    """Same wire shape as the adjudicator: (image ref, prompt) -> raw text."""

    def parse(self, image_ref: str, prompt: str) -> str:
        ...


# --- stage 1: parsing -------------------------------------------------------------

def parse_scene_json(raw: str) -> list[SceneObject]:
    """Strict-parse the scene parser's JSON list into validated objects."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"scene response is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaViolation("scene response must be a JSON list of objects")
    objects = [_object_from_dict(item, index) for index, item in enumerate(data)]
    ids = [o.id for o in objects]
    if len(set(ids)) != len(ids):
        raise SchemaViolation(f"object IDs must be unique, got {ids}")
    manipulation = [o for o in objects if o.object_type == MANIPULATION]
    if not manipulation:
        raise NoManipulationObject("scene has no manipulation object")
    if len(manipulation) > 1:
        raise MultipleManipulationObjects(
            f"scene has {len(manipulation)} manipulation objects"
        )
    receivers = [o for o in objects if o.object_type == RECEIVER]
    if len(receivers) > 1:
        raise SchemaViolation(f"scene has {len(receivers)} receiver objects, at most 1 allowed")
    return objects


def _object_from_dict(item: object, index: int) -> SceneObject:
    if not isinstance(item, dict):
        raise SchemaViolation(f"scene element {index} is not an object")
    missing = sorted(_REQUIRED_KEYS - set(item))
    if missing:
        raise SchemaViolation(f"scene element {index} missing keys {missing}")
    extras = sorted(set(item) - _REQUIRED_KEYS)
    if extras:
        raise SchemaViolation(f"scene element {index} has unknown keys {extras}")
    if not isinstance(item["ID"], int) or isinstance(item["ID"], bool):
        raise SchemaViolation(f"scene element {index}: ID must be an integer")
    for key, allowed in (("object_type", OBJECT_TYPES), ("size", SIZES),
                         ("position", POSITIONS), ("state", STATES)):
        if item[key] not in allowed:
            raise SchemaViolation(
                f"scene element {index}: {key} must be one of {allowed}, got {item[key]!r}"
            )
    category = item["category"]
    if (not isinstance(category, list) or not category
            or not all(isinstance(c, str) and c for c in category)):
        raise SchemaViolation(f"scene element {index}: category must be a non-empty string list")
    for key in ("name", "color"):
        if not isinstance(item[key], str) or not item[key]:
            raise SchemaViolation(f"scene element {index}: {key} must be a non-empty string")
    return SceneObject(
        id=item["ID"],
        object_type=item["object_type"],
        name=item["name"],
        category=tuple(category),
        color=item["color"],
        size=item["size"],
        position=item["position"],
        state=item["state"],
    )


def parse_scene(instruction: str, image_ref: str, client: SceneParserClient) -> list[SceneObject]:
    """Ask the external parser about a scene and strict-parse its reply."""
    raw = client.parse(image_ref, scene_parser_prompt(instruction))
    return parse_scene_json(raw)


# --- stage 2: ambiguity and attribute selection -------------------------------------

def detect_ambiguity(objects: Sequence[SceneObject], target_id: int) -> AmbiguityReport:
    """Competitors are all other objects sharing at least one category with the target."""
    by_id = {o.id: o for o in objects}
    if target_id not in by_id:
        raise UnknownTarget(f"no object with id {target_id}")
    target = by_id[target_id]
    target_categories = set(target.category)
    competing = []
    shared: list[str] = []
    for obj in objects:
        if obj.id == target_id:
            continue
        overlap = target_categories & set(obj.category)
        if overlap:
            competing.append(obj.id)
            for category in target.category:  # keep the target's declared order
                if category in overlap and category not in shared:
                    shared.append(category)
    return AmbiguityReport(
        target_id=target_id,
        competing_ids=tuple(competing),
        shared_categories=tuple(shared),
    )


def _attribute(obj: SceneObject, name: str) -> str:
    return getattr(obj, name)


def select_discriminating_attributes(objects: Sequence[SceneObject],
                                     report: AmbiguityReport) -> list[tuple[str, str]]:
    """Minimal distinguishing attribute set under the fixed priority order.

    Each priority step keeps the attribute only if the target differs from at
    least one remaining competitor on it, then discards the competitors it
    eliminated. Competitors equal to the target on a kept attribute survive
    to the next step. Raises Indistinguishable if competitors remain after
    all four attributes.
    """
    by_id = {o.id: o for o in objects}
    if report.target_id not in by_id:
        raise UnknownTarget(f"no object with id {report.target_id}")
    target = by_id[report.target_id]
    competitors = [by_id[i] for i in report.competing_ids if i in by_id]
    selected: list[tuple[str, str]] = []
    for attribute in ATTRIBUTE_PRIORITY:
        if not competitors:
            break
        value = _attribute(target, attribute)
        remaining = [c for c in competitors if _attribute(c, attribute) == value]
        if len(remaining) < len(competitors):
            selected.append((attribute, value))
            competitors = remaining
    if competitors:
        raise Indistinguishable(
            f"objects {[c.id for c in competitors]} match the target on all of"
            f" {ATTRIBUTE_PRIORITY}"
        )
    return selected


# --- stage 3: instruction refinement ---------------------------------------------------

def _phrase(name: str, attrs: Sequence[tuple[str, str]], comparative: bool = False) -> str:
    by_attr = dict(attrs)
    words = []
    for attribute in RENDER_ORDER:
        if attribute not in by_attr:
            continue
        value = by_attr[attribute]
        if comparative and attribute == "size":
            value = COMPARATIVE_SIZE.get(value, value)
        words.append(value)
    words.append(name)
    return " ".join(words)


def resolve_action(action: str, lexicon: Mapping[str, Mapping[str, str]] | None = None
                   ) -> tuple[str, str]:
    """Map an action word or instruction to (verb phrase, receiver preposition).

    Picks the earliest word-boundary occurrence of a lexicon key in the text,
    preferring the longest key at that position. A known preposition already
    present after the verb keeps its place over the lexicon default. Text
    without any known verb falls back to its first word and "on".
    """
    lexicon = lexicon if lexicon is not None else default_action_lexicon()
    text = action.strip().lower()
    words = text.split()
    best: str | None = None
    best_pos = len(words)
    for key in lexicon:
        key_words = key.split()
        for pos in range(len(words) - len(key_words) + 1):
            if words[pos:pos + len(key_words)] == key_words:
                if pos < best_pos or (pos == best_pos and (best is None or len(key) > len(best))):
                    best, best_pos = key, pos
                break
    if best is None:
        verb = words[0] if words else "move"
        preposition = "on"
        after = 1
    else:
        entry = lexicon[best]
        verb = entry["verb"]
        preposition = entry.get("preposition", "on")
        after = best_pos + len(best.split())
    for word in words[after:]:
        if word in KNOWN_PREPOSITIONS:
            preposition = word
            break
    return verb, preposition


def refine_instruction(action: str, target: SceneObject,
                       attrs: Sequence[tuple[str, str]],
                       receiver: SceneObject | None = None,
                       receiver_attrs: Sequence[tuple[str, str]] = (),
                       lexicon: Mapping[str, Mapping[str, str]] | None = None) -> str:
    """Deterministic template: verb, attributed target, optional receiver phrase.

    Only parsed attributes enter the output. Receiver sizes render in
    comparative form so the relation to the target reads naturally.
    """
    verb, preposition = resolve_action(action, lexicon)
    text = f"{verb} the {_phrase(target.name, attrs)}"
    if receiver is not None:
        text += f" {preposition} the {_phrase(receiver.name, receiver_attrs, comparative=True)}"
    return text


# --- the full pipeline ---------------------------------------------------------------

@dataclass(frozen=True)
class GroundingResult:
    refined_instruction: str
    report: AmbiguityReport
    attributes: tuple[tuple[str, str], ...]
    receiver_attributes: tuple[tuple[str, str], ...]


def ground_instruction(objects: Sequence[SceneObject], instruction: str,
                       lexicon: Mapping[str, Mapping[str, str]] | None = None) -> GroundingResult:
    """Detect ambiguity, select attributes, and emit the refined instruction.

    The receiver, when present and category-overlapping with the target, is
    described by the attributes that distinguish it from the target alone,
    since that is the only confusable pairing inside the command.
    """
    manipulation = [o for o in objects if o.object_type == MANIPULATION]
    if not manipulation:
        raise NoManipulationObject("scene has no manipulation object")
    if len(manipulation) > 1:
        raise MultipleManipulationObjects(f"scene has {len(manipulation)} manipulation objects")
    target = manipulation[0]
    receivers = [o for o in objects if o.object_type == RECEIVER]
    receiver = receivers[0] if receivers else None

    report = detect_ambiguity(objects, target.id)
    attrs = select_discriminating_attributes(objects, report) if report.competing_ids else []

    receiver_attrs: list[tuple[str, str]] = []
    if receiver is not None and set(receiver.category) & set(target.category):
        rec_report = AmbiguityReport(
            target_id=receiver.id,
            competing_ids=(target.id,),
            shared_categories=tuple(
                c for c in receiver.category if c in set(target.category)
            ),
        )
        receiver_attrs = select_discriminating_attributes([receiver, target], rec_report)

    refined = refine_instruction(
        instruction, target, attrs, receiver=receiver,
        receiver_attrs=receiver_attrs, lexicon=lexicon,
    )
    return GroundingResult(
        refined_instruction=refined,
        report=report,
        attributes=tuple(attrs),
        receiver_attributes=tuple(receiver_attrs),
    )
