"""Two-stage perceptual-fairness validation as a resumable batch state machine.

Stage 1 screens every instance through a visual adjudicator (a VLM behind a
swappable client interface) and loops: when more than the allowed fraction of
instances is flagged, the batch moves to needs-adjustment and waits for a
revised manifest; screening repeats until the pass rate clears the target for
the configured number of consecutive rounds. Stage 2 is a human gate: a batch
is accepted only when offline reviews pass at the threshold, otherwise it
reverts to screening. Every phase change is checkpointed so a run can resume.

Legal phase edges::

    generated -> screening -> needs_adjustment -> screening ...
                 screening -> human_review -> accepted
                                            -> reverted -> screening
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from .errors import (
    AdjudicatorTransportError,
    AllRequestsFailed,
    ExtraneousText,
    IllegalPhaseTransition,
    IncompleteReviews,
    InvalidAnswer,
    MalformedJson,
    MaxIterationsExceeded,
    MissingKey,
    SchemaError,
    UnexpectedKey,
)
from .formats import BATCH_FORMAT, check_format

logger = logging.getLogger(__name__)

YES = "yes"
NO = "no"

GENERATED = "generated"
SCREENING = "screening"
NEEDS_ADJUSTMENT = "needs_adjustment"
HUMAN_REVIEW = "human_review"
ACCEPTED = "accepted"
REVERTED = "reverted"

PHASES = (GENERATED, SCREENING, NEEDS_ADJUSTMENT, HUMAN_REVIEW, ACCEPTED, REVERTED)

LEGAL_EDGES = frozenset(
    {
        (GENERATED, SCREENING),
        (SCREENING, NEEDS_ADJUSTMENT),
        (NEEDS_ADJUSTMENT, SCREENING),
        (SCREENING, HUMAN_REVIEW),
        (HUMAN_REVIEW, ACCEPTED),
        (HUMAN_REVIEW, REVERTED),
        (REVERTED, SCREENING),
    }
)


def adjudicator_prompt() -> str:
    """The screening prompt template shipped with the package."""
    return resources.files("biasforge.data").joinpath("adjudicator_prompt.txt").read_text()


@dataclass(frozen=True)
class AdjudicationRequest:
    image_ref: str
    prompt: str


@dataclass(frozen=True)
class AdjudicationResult:
    analysis: str
    final_answer: str


class AdjudicatorClient(Protocol):
    """Anything that can answer an adjudication request with raw response text."""

    def adjudicate(self, request: AdjudicationRequest) -> str:
        ...


def parse_adjudication(raw: str) -> AdjudicationResult:
    """Strict parse of the adjudicator contract.

    The response must be exactly one JSON object with the keys ``analysis``
    and ``final_answer`` and nothing else; the prompt forbids any surrounding
    text, so leading or trailing content is rejected rather than salvaged.
    """
    stripped = raw.strip()
    if not stripped:
        raise MalformedJson("empty adjudicator response")
    if not stripped.startswith("{"):
        if "{" in stripped:
            raise ExtraneousText("text before the JSON object")
        raise MalformedJson("response is not a JSON object")
    decoder = json.JSONDecoder()
    try:
        obj, end = decoder.raw_decode(stripped)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"invalid JSON: {exc}") from exc
    if stripped[end:].strip():
        raise ExtraneousText("text after the JSON object")
    if not isinstance(obj, dict):
        raise MalformedJson("response JSON is not an object")
    for key in ("analysis", "final_answer"):
        if key not in obj:
            raise MissingKey(f"response missing key {key!r}")
    extras = sorted(set(obj) - {"analysis", "final_answer"})
    if extras:
        raise UnexpectedKey(f"response carries unexpected keys {extras}")
    answer = obj["final_answer"]
    if answer not in (YES, NO):
        raise InvalidAnswer(f"final_answer must be 'yes' or 'no', got {answer!r}")
    if not isinstance(obj["analysis"], str):
        raise MalformedJson("analysis must be a string")
    return AdjudicationResult(analysis=obj["analysis"], final_answer=answer)


# --- clients -----------------------------------------------------------------------

class HttpAdjudicator:
    """POSTs {image_ref, prompt} as JSON and returns the raw response body."""

    def __init__(self, url: str, timeout_s: float = 30.0):
        self.url = url
        self.timeout_s = timeout_s

    def adjudicate(self, request: AdjudicationRequest) -> str:
        body = json.dumps(
            {"image_ref": request.image_ref, "prompt": request.prompt}
        ).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                return resp.read().decode("utf-8")
        except (urllib.error.URLError, OSError) as exc:
            raise AdjudicatorTransportError(f"adjudicator at {self.url}: {exc}") from exc


class ScriptedAdjudicator:
    """Deterministic mock: per-instance responses with an optional per-round schedule.

    ``rounds`` is a list of flagged-instance-id sets; an instance's round index
    is how many times it has been asked so far (capped at the last round), so
    the schedule is stable under concurrent screening. Explicit ``responses``
    override the schedule and are returned verbatim, which is how tests inject
    malformed payloads.
    """

    def __init__(self, rounds: Sequence[set[str]] | None = None,
                 responses: Mapping[str, str] | None = None,
                 default_answer: str = YES):
        self.rounds = [set(r) for r in (rounds or [])]
        self.responses = dict(responses or {})
        self.default_answer = default_answer
        self.calls = 0
        self._asked: dict[str, int] = {}
        self._lock = threading.Lock()

    def adjudicate(self, request: AdjudicationRequest) -> str:
        with self._lock:
            self.calls += 1
            round_index = self._asked.get(request.image_ref, 0)
            self._asked[request.image_ref] = round_index + 1
        if request.image_ref in self.responses:
            return self.responses[request.image_ref]
        answer = self.default_answer
        if self.rounds:
            flagged = self.rounds[min(round_index, len(self.rounds) - 1)]
            answer = NO if request.image_ref in flagged else YES
        return json.dumps({"analysis": "scripted", "final_answer": answer})


def flag_schedule(instance_ids: Sequence[str], flag_rates: Sequence[float]) -> list[set[str]]:
    """Per-round flagged sets hitting each target rate on the given instances.

    Flags the first ceil(rate * n) ids in sorted order, so the schedule is a
    pure function of the id set. The tiny slack absorbs float artifacts like
    0.07 * 100 = 7.000000000000001.
    """
    ordered = sorted(instance_ids)
    n = len(ordered)
    rounds = []
    for rate in flag_rates:
        count = min(n, math.ceil(rate * n - 1e-9))
        rounds.append(set(ordered[:max(count, 0)]))
    return rounds


def scripted_adjudicator_from_file(path: str | Path) -> ScriptedAdjudicator:
    """Build a mock from a JSON script: {responses?, flag_instances?, default_answer?}."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: adjudicator script must be a JSON object")
    rounds = None
    if "flag_instances" in obj:
        rounds = [set(obj["flag_instances"])]
    return ScriptedAdjudicator(
        rounds=rounds,
        responses=obj.get("responses"),
        default_answer=obj.get("default_answer", YES),
    )


# --- batch state ---------------------------------------------------------------------

@dataclass
class BatchState:
    """The loop state of one instance batch, checkpointable as JSON."""

    batch_id: str
    instance_ids: tuple[str, ...]
    phase: str = GENERATED
    iteration: int = 0
    screening_pass_rate: float | None = None
    human_pass_rate: float | None = None
    flagged_instances: tuple[str, ...] = ()
    consecutive_passes: int = 0
    history: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": BATCH_FORMAT,
            "batch_id": self.batch_id,
            "instance_ids": list(self.instance_ids),
            "phase": self.phase,
            "iteration": self.iteration,
            "screening_pass_rate": self.screening_pass_rate,
            "human_pass_rate": self.human_pass_rate,
            "flagged_instances": list(self.flagged_instances),
            "consecutive_passes": self.consecutive_passes,
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "BatchState":
        check_format(obj.get("format"), BATCH_FORMAT)
        return cls(
            batch_id=obj["batch_id"],
            instance_ids=tuple(obj["instance_ids"]),
            phase=obj["phase"],
            iteration=obj["iteration"],
            screening_pass_rate=obj["screening_pass_rate"],
            human_pass_rate=obj["human_pass_rate"],
            flagged_instances=tuple(obj["flagged_instances"]),
            consecutive_passes=obj["consecutive_passes"],
            history=list(obj["history"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BatchState":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _transition(state: BatchState, new_phase: str,
                checkpoint_path: str | Path | None = None) -> None:
    if new_phase == state.phase:
        return
    if (state.phase, new_phase) not in LEGAL_EDGES:
        raise IllegalPhaseTransition(f"{state.phase} -> {new_phase}")
    state.history.append(
        {"from": state.phase, "to": new_phase, "iteration": state.iteration}
    )
    state.phase = new_phase
    if checkpoint_path is not None:
        state.save(checkpoint_path)


# --- screening ------------------------------------------------------------------------

@dataclass
class ScreeningConfig:
    flag_threshold: float = 0.05
    pass_target: float = 0.95
    consecutive_required: int = 1
    max_iterations: int = 10
    retries: int = 3
    backoff_base_s: float = 0.5
    concurrency: int = 8


class AdjudicationCache:
    """Memo of raw adjudicator responses keyed by (instance id, prompt hash)."""

    def __init__(self) -> None:
        self._store: dict[tuple[str, str], str] = {}
        self._lock = threading.Lock()

    @staticmethod
    def _key(instance_id: str, prompt: str) -> tuple[str, str]:
        return instance_id, hashlib.blake2b(prompt.encode("utf-8"), digest_size=8).hexdigest()

    def get(self, instance_id: str, prompt: str) -> str | None:
        with self._lock:
            return self._store.get(self._key(instance_id, prompt))

    def put(self, instance_id: str, prompt: str, raw: str) -> None:
        with self._lock:
            self._store[self._key(instance_id, prompt)] = raw


def _adjudicate_one(instance_id: str, client: AdjudicatorClient, prompt: str,
                    config: ScreeningConfig, cache: AdjudicationCache | None,
                    sleep: Callable[[float], None] | None) -> AdjudicationResult | None:
    """One instance through the client with retries; None means unverifiable."""
    if cache is not None:
        cached = cache.get(instance_id, prompt)
        if cached is not None:
            try:
                return parse_adjudication(cached)
            except Exception:  # noqa: BLE001 - stale cache entry falls through to a live call
                pass
    request = AdjudicationRequest(image_ref=instance_id, prompt=prompt)
    sleep = sleep if sleep is not None else time.sleep
    for attempt in range(config.retries):
        try:
            raw = client.adjudicate(request)
            result = parse_adjudication(raw)
        except (AdjudicatorTransportError, MalformedJson, ExtraneousText, MissingKey,
                UnexpectedKey, InvalidAnswer) as exc:
            logger.warning("adjudication attempt %d for %s failed: %s",
                           attempt + 1, instance_id, exc)
            if attempt + 1 < config.retries:
                sleep(config.backoff_base_s * (2 ** attempt))
            continue
        if cache is not None:
            cache.put(instance_id, prompt, raw)
        return result
    return None


def screen_batch(instance_ids: Sequence[str], client: AdjudicatorClient,
                 config: ScreeningConfig | None = None,
                 prompt: str | None = None,
                 cache: AdjudicationCache | None = None,
                 sleep: Callable[[float], None] | None = None) -> tuple[list[str], float]:
    """Adjudicate every instance once; returns (flagged ids, pass rate).

    An instance is flagged when the adjudicator answers no, or when it stays
    unverifiable after all retries: an instance that cannot be verified must
    not enter the benchmark. Raises AllRequestsFailed only when not a single
    instance could be adjudicated at all.
    """
    if not instance_ids:
        raise SchemaError("cannot screen an empty manifest")
    config = config or ScreeningConfig()
    prompt = prompt if prompt is not None else adjudicator_prompt()

    def worker(instance_id: str) -> tuple[str, AdjudicationResult | None]:
        return instance_id, _adjudicate_one(instance_id, client, prompt, config, cache, sleep)

    results: dict[str, AdjudicationResult | None] = {}
    if config.concurrency <= 1 or len(instance_ids) == 1:
        for iid in instance_ids:
            results[iid] = worker(iid)[1]
    else:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            for iid, result in pool.map(worker, instance_ids):
                results[iid] = result

    if all(result is None for result in results.values()):
        raise AllRequestsFailed(
            f"no instance could be adjudicated after {config.retries} attempts each"
        )
    flagged = [
        iid for iid in instance_ids
        if results[iid] is None or results[iid].final_answer == NO
    ]
    pass_rate = 1.0 - len(flagged) / len(instance_ids)
    return flagged, pass_rate


AdjustHook = Callable[[BatchState, Sequence[str]], Sequence[str]]


def refinement_loop(batch: BatchState, client: AdjudicatorClient,
                    config: ScreeningConfig | None = None,
                    adjust_hook: AdjustHook | None = None,
                    prompt: str | None = None,
                    cache: AdjudicationCache | None = None,
                    checkpoint_path: str | Path | None = None,
                    sleep: Callable[[float], None] | None = None) -> BatchState:
    """Run screening rounds until the pass target holds, then hand off to review.

    Between rounds that exceed the flag threshold the batch enters
    needs_adjustment and the adjust hook (an external repair action) may
    replace the instance list. The loop ends in human_review only when the
    pass target has held for the required consecutive rounds and the final
    round's flag fraction is within threshold.
    """
    config = config or ScreeningConfig()
    if batch.phase not in (GENERATED, NEEDS_ADJUSTMENT, REVERTED):
        raise IllegalPhaseTransition(
            f"refinement loop cannot start from phase {batch.phase!r}"
        )
    instances: Sequence[str] = batch.instance_ids
    while True:
        if batch.iteration >= config.max_iterations:
            raise MaxIterationsExceeded(
                f"batch {batch.batch_id}: {batch.iteration} screenings without"
                f" reaching pass target {config.pass_target}"
            )
        _transition(batch, SCREENING, checkpoint_path)
        flagged, pass_rate = screen_batch(
            instances, client, config, prompt=prompt, cache=cache, sleep=sleep
        )
        batch.iteration += 1
        batch.screening_pass_rate = pass_rate
        batch.flagged_instances = tuple(flagged)
        flag_fraction = len(flagged) / len(instances)
        if pass_rate >= config.pass_target:
            batch.consecutive_passes += 1
        else:
            batch.consecutive_passes = 0
        logger.info("batch %s screening %d: pass rate %.3f, flagged %d",
                    batch.batch_id, batch.iteration, pass_rate, len(flagged))
        if (batch.consecutive_passes >= config.consecutive_required
                and flag_fraction <= config.flag_threshold):
            _transition(batch, HUMAN_REVIEW, checkpoint_path)
            return batch
        if flag_fraction > config.flag_threshold:
            _transition(batch, NEEDS_ADJUSTMENT, checkpoint_path)
            if adjust_hook is not None:
                instances = tuple(adjust_hook(batch, instances))
                batch.instance_ids = tuple(instances)


def human_gate(batch: BatchState, reviews: Sequence[tuple[str, str]],
               threshold: float = 0.95,
               checkpoint_path: str | Path | None = None) -> BatchState:
    """Stage 2: accept the batch or revert it to screening based on human verdicts."""
    if batch.phase != HUMAN_REVIEW:
        raise IllegalPhaseTransition(f"human gate requires phase human_review,"
                                     f" batch is in {batch.phase!r}")
    if not batch.instance_ids:
        raise IncompleteReviews("batch has no instances to review")
    verdicts: dict[str, str] = {}
    for instance_id, verdict in reviews:
        if verdict not in (YES, NO):
            raise InvalidAnswer(f"review verdict must be 'yes' or 'no', got {verdict!r}")
        if instance_id in verdicts:
            raise IncompleteReviews(f"duplicate review for instance {instance_id}")
        verdicts[instance_id] = verdict
    missing = sorted(set(batch.instance_ids) - set(verdicts))
    unknown = sorted(set(verdicts) - set(batch.instance_ids))
    if missing or unknown:
        raise IncompleteReviews(
            f"reviews must cover the batch exactly; missing {missing}, unknown {unknown}"
        )
    passed = sum(1 for iid in batch.instance_ids if verdicts[iid] == YES)
    batch.human_pass_rate = passed / len(batch.instance_ids)
    if batch.human_pass_rate >= threshold:
        _transition(batch, ACCEPTED, checkpoint_path)
    else:
        _transition(batch, REVERTED, checkpoint_path)
    return batch


def read_reviews_csv(path: str | Path) -> list[tuple[str, str]]:
    """Review file: ``instance_id,verdict`` per line, verdict yes or no."""
    reviews = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if row_no == 1 and [c.strip().lower() for c in row] == ["instance_id", "verdict"]:
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}:{row_no}: expected 'instance_id,verdict'")
            reviews.append((row[0].strip(), row[1].strip()))
    return reviews
