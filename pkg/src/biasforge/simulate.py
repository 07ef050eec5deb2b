"""Planted-bias simulation: synthetic trial logs plus their exact metric values.

A planted model assigns every full assignment a success probability through a
logistic link over additive logit effects. Trials are drawn from a
counter-based random stream keyed by (seed, instance id, repetition), so the
log is a pure function of the run spec: thread count, chunking, and execution
order cannot change a single draw. The analytic path evaluates the same
metrics with the true probabilities substituted for observed success rates,
giving the infinite-repetition limit every estimator must converge to.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .contexts import TaskInstance
from .errors import SchemaError, UnknownValueId
from .factor_space import FactorSpace
from .formats import MODEL_FORMAT, check_format
from .metrics import CellKey, MetricConfig, TrialRecord

EffectKey = tuple[str, str]
PairKey = tuple[EffectKey, EffectKey]


def _pair_key(a: EffectKey, b: EffectKey) -> PairKey:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class PlantedBiasModel:
    """Ground-truth success probabilities: logistic(base + mains + interactions)."""

    base_logit: float = 0.0
    main_effects: tuple[tuple[EffectKey, float], ...] = ()
    interaction_effects: tuple[tuple[PairKey, float], ...] = ()

    @classmethod
    def make(cls, base_logit: float = 0.0,
             main_effects: Mapping[EffectKey, float] | None = None,
             interaction_effects: Mapping[PairKey, float] | None = None) -> "PlantedBiasModel":
        mains = tuple(sorted((main_effects or {}).items()))
        inters = tuple(
            sorted((_pair_key(a, b), logit) for (a, b), logit in (interaction_effects or {}).items())
        )
        for value in [base_logit, *(v for _, v in mains), *(v for _, v in inters)]:
            if not math.isfinite(value):
                raise SchemaError(f"model logits must be finite, got {value}")
        return cls(base_logit=base_logit, main_effects=mains, interaction_effects=inters)

    @property
    def main_map(self) -> dict[EffectKey, float]:
        return dict(self.main_effects)

    @property
    def interaction_map(self) -> dict[PairKey, float]:
        return dict(self.interaction_effects)

    def referenced_effects(self) -> list[EffectKey]:
        refs = [key for key, _ in self.main_effects]
        for (a, b), _ in self.interaction_effects:
            refs.extend((a, b))
        return refs

    def validate_against(self, space: FactorSpace) -> None:
        for dim, value in self.referenced_effects():
            space.value(dim, value)  # raises on unknown dim or value


def success_probability(model: PlantedBiasModel, assignment: Mapping[str, str],
                        space: FactorSpace | None = None) -> float:
    """Logistic of base plus all main and interaction effects active in the assignment.

    The assignment must bind every dimension the model references; with a
    space given, every (dimension, value) pair is also resolved against it.
    """
    if space is not None:
        for dim, value in assignment.items():
            space.value(dim, value)
    for dim, _ in model.referenced_effects():
        if dim not in assignment:
            raise UnknownValueId(
                f"assignment missing dimension {dim!r} referenced by the model"
            )
    pairs = set(assignment.items())
    logit = model.base_logit
    for key, effect in model.main_effects:
        if key in pairs:
            logit += effect
    for (a, b), effect in model.interaction_effects:
        if a in pairs and b in pairs:
            logit += effect
    return 1.0 / (1.0 + math.exp(-logit))


@dataclass(frozen=True)
class SimRunSpec:
    """One simulation run: model, instances, repetition count, stream seed."""

    model: PlantedBiasModel
    subspace: tuple[TaskInstance, ...]
    repetitions: int
    seed: int
    agent_id: str = "sim"

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise SchemaError(f"repetitions must be >= 1, got {self.repetitions}")
        if not 0 <= self.seed < 2 ** 64:
            raise SchemaError(f"seed must fit in 64 bits, got {self.seed}")

    @classmethod
    def make(cls, model: PlantedBiasModel, subspace: Sequence[TaskInstance],
             repetitions: int, seed: int, agent_id: str = "sim") -> "SimRunSpec":
        return cls(model=model, subspace=tuple(subspace), repetitions=repetitions,
                   seed=seed, agent_id=agent_id)


def _uniform(seed: int, instance_id: str, repetition: int) -> float:
    """Deterministic uniform in [0, 1) from the (seed, instance, repetition) counter."""
    h = hashlib.blake2b(digest_size=8)
    h.update(seed.to_bytes(8, "little"))
    h.update(instance_id.encode("utf-8"))
    h.update(repetition.to_bytes(8, "little"))
    word = int.from_bytes(h.digest(), "little")
    return (word >> 11) * (1.0 / (1 << 53))


def simulate_trials(spec: SimRunSpec, workers: int = 1) -> list[TrialRecord]:
    """Draw Bernoulli outcomes for every (instance, repetition) in the spec.

    The output is sorted by (instance id, repetition) and is identical for
    any worker count.
    """
    probabilities = {
        inst.instance_id: success_probability(spec.model, inst.assignment)
        for inst in spec.subspace
    }

    def run_chunk(instances: Sequence[TaskInstance]) -> list[TrialRecord]:
        chunk = []
        for inst in instances:
            p = probabilities[inst.instance_id]
            for rep in range(spec.repetitions):
                chunk.append(
                    TrialRecord(
                        instance_id=inst.instance_id,
                        agent_id=spec.agent_id,
                        repetition=rep,
                        success=_uniform(spec.seed, inst.instance_id, rep) < p,
                        varied=inst.varied,
                        context_key=inst.eval_context.key(),
                    )
                )
        return chunk

    if workers <= 1 or len(spec.subspace) < 2:
        trials = run_chunk(spec.subspace)
    else:
        chunks = [spec.subspace[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = pool.map(run_chunk, chunks)
        trials = [t for chunk in results for t in chunk]
    trials.sort(key=lambda t: (t.instance_id, t.repetition))
    return trials


def analytic_rates(model: PlantedBiasModel,
                   subspace: Sequence[TaskInstance]) -> dict[CellKey, float]:
    """The infinite-repetition success table: each cell's rate is its true probability."""
    rates: dict[CellKey, float] = {}
    for inst in subspace:
        key = (inst.varied, inst.eval_context.key())
        p = success_probability(model, inst.assignment)
        if key in rates and rates[key] != p:
            raise SchemaError(f"subspace maps cell {key} to conflicting probabilities")
        rates[key] = p
    return rates


def analytic_metrics(model: PlantedBiasModel, subspace: Sequence[TaskInstance],
                     cfg: MetricConfig | None = None,
                     space: FactorSpace | None = None,
                     agent_id: str = "analytic"):
    """Exact metric values at the model's true probabilities.

    This is the verification oracle for the Monte-Carlo path: the same metric
    definitions evaluated on probabilities instead of estimated rates, so an
    estimator disagreeing with it beyond sampling noise is wrong.
    """
    from .reports import build_report

    return build_report({agent_id: analytic_rates(model, subspace)}, cfg, space)


# --- model spec files -----------------------------------------------------------------

def model_to_dict(model: PlantedBiasModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "base_logit": model.base_logit,
        "main_effects": [
            {"dim": dim, "value": value, "logit": logit}
            for (dim, value), logit in model.main_effects
        ],
        "interactions": [
            {"a": {"dim": a[0], "value": a[1]}, "b": {"dim": b[0], "value": b[1]}, "logit": logit}
            for (a, b), logit in model.interaction_effects
        ],
    }


def model_from_dict(obj: dict) -> PlantedBiasModel:
    if not isinstance(obj, dict):
        raise SchemaError("model document must be a JSON object")
    check_format(obj.get("format"), MODEL_FORMAT)
    try:
        mains = {
            (e["dim"], e["value"]): float(e["logit"]) for e in obj.get("main_effects", [])
        }
        inters = {
            ((e["a"]["dim"], e["a"]["value"]), (e["b"]["dim"], e["b"]["value"])): float(e["logit"])
            for e in obj.get("interactions", [])
        }
        return PlantedBiasModel.make(
            base_logit=float(obj.get("base_logit", 0.0)),
            main_effects=mains,
            interaction_effects=inters,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad model document: {exc}") from exc


def save_model(model: PlantedBiasModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> PlantedBiasModel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(obj)
