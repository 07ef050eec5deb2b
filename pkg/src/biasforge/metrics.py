"""Bias metrics over trial logs.

The success table keys every tally by (varied values, context key), where the
context key canonically encodes everything held fixed for that cell. Metrics
then follow three formulas, all reported on a percent scale:

- conditional CV: population sigma of the success rates swept over one
  dimension's values at a fixed background, divided by (mean + epsilon);
- bias coefficient: unweighted mean of the conditional CVs over backgrounds;
- interaction effect IEC(i; j): within each context, the plain coefficient of
  variation (sigma/mean, no epsilon) across j's values of i's conditional
  CVs, averaged over contexts.

Success-rate lists are sorted before aggregation so every metric is exactly
permutation-invariant in value and context order. Cells with no trials are
excluded from means, never imputed.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

from .contexts import decode_key
from .errors import (
    DuplicateTrialKey,
    EmptyLog,
    EmptyTable,
    InconsistentLog,
    InsufficientFactorialData,
    InsufficientValues,
    MetricsError,
    MixedAgents,
    SchemaError,
    UncategorizedColor,
)
from .factor_space import FactorSpace
from .variants import instance_id as compute_instance_id

Items = tuple[tuple[str, str], ...]
CellKey = tuple[Items, str]

REPORT_NA = "report_na"
REPORT_ZERO = "report_zero"


@dataclass(frozen=True)
class TrialRecord:
    """One agent attempt on one instance."""

    instance_id: str
    agent_id: str
    repetition: int
    success: bool
    varied: Items
    context_key: str

    @classmethod
    def make(cls, instance_id: str, agent_id: str, repetition: int, success: bool,
             varied: Mapping[str, str], context_key: str) -> "TrialRecord":
        return cls(
            instance_id=instance_id,
            agent_id=agent_id,
            repetition=repetition,
            success=success,
            varied=tuple(sorted(varied.items())),
            context_key=context_key,
        )

    @property
    def varied_map(self) -> dict[str, str]:
        return dict(self.varied)


@dataclass
class MetricConfig:
    """Epsilon for the CV denominator plus the all-zero-context policy.

    ``epsilon`` lives on the [0, 1] success-rate scale. Zero is permitted so
    the exact scale-invariance property of the CV can be tested; production
    configs should keep it positive. Percent is the only reporting scale.
    """

    epsilon: float = 1e-6
    report_scale: str = "percent"
    degenerate_policy: str = REPORT_NA

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise MetricsError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.report_scale != "percent":
            raise MetricsError(f"unsupported report scale {self.report_scale!r}")
        if self.degenerate_policy not in (REPORT_NA, REPORT_ZERO):
            raise MetricsError(f"unknown degenerate policy {self.degenerate_policy!r}")


@dataclass
class SuccessTable:
    """Exact tallies per (varied values, context key) cell for one agent."""

    cells: dict[CellKey, tuple[int, int]] = field(default_factory=dict)
    agent_id: str | None = None

    def sr(self, key: CellKey) -> float:
        successes, trials = self.cells[key]
        return successes / trials

    def rates(self) -> dict[CellKey, float]:
        return {key: s / t for key, (s, t) in self.cells.items()}


RateTable = Union[SuccessTable, Mapping[CellKey, float]]


def _rates(table: RateTable) -> Mapping[CellKey, float]:
    if isinstance(table, SuccessTable):
        return table.rates()
    return table


# --- tallying -----------------------------------------------------------------------

def build_success_table(trials: Sequence[TrialRecord]) -> SuccessTable:
    """Tally trials of a single agent into per-cell counts."""
    if not trials:
        raise EmptyLog("no trial records")
    agents = {t.agent_id for t in trials}
    if len(agents) > 1:
        raise MixedAgents(
            f"trials span agents {sorted(agents)}; use build_success_tables"
        )
    seen: set[tuple[str, str, int]] = set()
    cells: dict[CellKey, list[int]] = {}
    for t in trials:
        trial_key = (t.instance_id, t.agent_id, t.repetition)
        if trial_key in seen:
            raise DuplicateTrialKey(f"duplicate trial {trial_key}")
        seen.add(trial_key)
        cell = cells.setdefault((t.varied, t.context_key), [0, 0])
        cell[0] += int(t.success)
        cell[1] += 1
    return SuccessTable(
        cells={k: (s, n) for k, (s, n) in cells.items()},
        agent_id=next(iter(agents)),
    )


def build_success_tables(trials: Sequence[TrialRecord]) -> dict[str, SuccessTable]:
    """Partition a mixed-agent log and tally each agent separately."""
    if not trials:
        raise EmptyLog("no trial records")
    by_agent: dict[str, list[TrialRecord]] = {}
    for t in trials:
        by_agent.setdefault(t.agent_id, []).append(t)
    return {agent: build_success_table(group) for agent, group in sorted(by_agent.items())}


# --- conditions ----------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    """Everything held fixed while one dimension sweeps: the context key plus
    any other varied dimensions pinned to specific values (factorial data)."""

    context_key: str
    fixed: Items = ()


def conditions_for(table: RateTable, dim: str) -> list[Condition]:
    """All distinct backgrounds against which ``dim`` sweeps in this table."""
    found: set[Condition] = set()
    for (varied, context_key) in _rates(table):
        varied_map = dict(varied)
        if dim not in varied_map:
            continue
        fixed = tuple(sorted((d, v) for d, v in varied_map.items() if d != dim))
        found.add(Condition(context_key=context_key, fixed=fixed))
    return sorted(found, key=lambda c: (c.context_key, c.fixed))


def sr_sweep(table: RateTable, dim: str, condition: Condition) -> dict[str, float]:
    """value id -> success rate for ``dim`` under one condition."""
    fixed = dict(condition.fixed)
    out: dict[str, float] = {}
    for (varied, context_key), rate in _rates(table).items():
        if context_key != condition.context_key:
            continue
        varied_map = dict(varied)
        if dim not in varied_map:
            continue
        if {d: v for d, v in varied_map.items() if d != dim} != fixed:
            continue
        out[varied_map[dim]] = rate
    return out


# --- metrics -------------------------------------------------------------------------

def mean_success_rate(table: RateTable, dim: str | None = None) -> float:
    """Unweighted mean success rate over cells, as a percent.

    With ``dim`` given, only cells in which that dimension was evaluated
    contribute (the dimension's task-subspace mean).
    """
    rates = _rates(table)
    if dim is not None:
        values = sorted(r for (varied, _), r in rates.items() if dim in dict(varied))
    else:
        values = sorted(rates.values())
    if not values:
        raise EmptyTable("no cells to average" if dim is None else f"no cells sweep {dim!r}")
    return 100.0 * statistics.fmean(values)


def conditional_cv(table: RateTable, dim: str, condition: Condition | str,
                   cfg: MetricConfig | None = None) -> float | None:
    """Population sigma over (mean + epsilon) of SR across dim's values, percent.

    Returns None (N/A) when every rate in the sweep is exactly zero and the
    policy is report_na; an all-zero sweep carries no usable spread signal.
    """
    cfg = cfg or MetricConfig()
    if isinstance(condition, str):
        condition = Condition(context_key=condition)
    sweep = sr_sweep(table, dim, condition)
    if len(sweep) < 2:
        raise InsufficientValues(
            f"need >= 2 values of {dim!r} under {condition}, found {len(sweep)}"
        )
    rates = sorted(sweep.values())
    if all(r == 0.0 for r in rates):
        if cfg.degenerate_policy == REPORT_NA:
            return None
        return 0.0
    sigma = statistics.pstdev(rates)
    mu = statistics.fmean(rates)
    return 100.0 * sigma / (mu + cfg.epsilon)


def bias_coefficient(table: RateTable, dim: str,
                     cfg: MetricConfig | None = None) -> float | None:
    """Mean conditional CV over all backgrounds of ``dim``, percent.

    Backgrounds whose conditional CV is N/A are skipped; the result is N/A
    only when every background is. Backgrounds with fewer than two observed
    values are skipped as missing data (never imputed).
    """
    cfg = cfg or MetricConfig()
    conds = conditions_for(table, dim)
    if not conds:
        raise InsufficientValues(f"table has no cells sweeping {dim!r}")
    ccvs = []
    usable = 0
    for cond in conds:
        if len(sr_sweep(table, dim, cond)) < 2:
            continue
        usable += 1
        ccv = conditional_cv(table, dim, cond, cfg)
        if ccv is not None:
            ccvs.append(ccv)
    if usable == 0:
        raise InsufficientValues(f"no background has >= 2 observed values of {dim!r}")
    if not ccvs:
        return None
    return statistics.fmean(sorted(ccvs))


def interaction_effect(table: RateTable, dim_i: str, dim_j: str,
                       cfg: MetricConfig | None = None) -> float | None:
    """IEC(i; j): how much dim_j's value modulates dim_i's conditional CV.

    Within each context, dim_i's conditional CV is computed once per value of
    dim_j; the spread of those numbers is summarized by a plain coefficient
    of variation and averaged across contexts, as a percent. Inner N/A CVs
    are skipped; a context with no defined inner CVs is skipped; the result
    is N/A only if every context is.
    """
    cfg = cfg or MetricConfig()
    if dim_i == dim_j:
        raise MetricsError(f"interaction needs two distinct dimensions, got {dim_i!r}")
    rates = _rates(table)
    outer: dict[tuple[str, Items], set[str]] = {}
    for (varied, context_key) in rates:
        varied_map = dict(varied)
        if dim_i not in varied_map or dim_j not in varied_map:
            continue
        rest = tuple(sorted((d, v) for d, v in varied_map.items() if d not in (dim_i, dim_j)))
        outer.setdefault((context_key, rest), set()).add(varied_map[dim_j])
    if not outer:
        raise InsufficientFactorialData(
            f"no cells vary both {dim_i!r} and {dim_j!r} together"
        )
    per_context: list[float] = []
    for (context_key, rest), j_values in sorted(outer.items()):
        inner: list[float] = []
        for vj in sorted(j_values):
            cond = Condition(
                context_key=context_key,
                fixed=tuple(sorted(rest + ((dim_j, vj),))),
            )
            if len(sr_sweep(table, dim_i, cond)) < 2:
                raise InsufficientFactorialData(
                    f"background {cond} has < 2 values of {dim_i!r}"
                )
            ccv = conditional_cv(table, dim_i, cond, cfg)
            if ccv is not None:
                inner.append(ccv)
        if not inner:
            continue
        inner.sort()
        mu = statistics.fmean(inner)
        if mu == 0.0:
            # All inner CVs are exactly zero; 0/0 falls back to the
            # degenerate policy, mirroring the all-zero sweep case.
            if cfg.degenerate_policy == REPORT_ZERO:
                per_context.append(0.0)
            continue
        per_context.append(100.0 * statistics.pstdev(inner) / mu)
    if not per_context:
        return None
    return statistics.fmean(sorted(per_context))


def color_category_summary(table: RateTable, categorizer: Callable[[str], str],
                           dim: str = "color") -> dict[str, float]:
    """Per-category unweighted mean SR (percent) over cells sweeping ``dim``."""
    rates = _rates(table)
    buckets: dict[str, list[float]] = {}
    for (varied, _), rate in rates.items():
        varied_map = dict(varied)
        if dim not in varied_map:
            continue
        category = categorizer(varied_map[dim])
        if not category:
            raise UncategorizedColor(f"no category for color {varied_map[dim]!r}")
        buckets.setdefault(category, []).append(rate)
    return {
        category: 100.0 * statistics.fmean(sorted(values))
        for category, values in sorted(buckets.items())
    }


# --- trial-log files -----------------------------------------------------------------

def trial_to_row(trial: TrialRecord) -> dict:
    return {
        "instance_id": trial.instance_id,
        "agent_id": trial.agent_id,
        "repetition": trial.repetition,
        "success": trial.success,
        "varied": trial.varied_map,
        "context_key": trial.context_key,
    }


def trial_from_row(obj: dict) -> TrialRecord:
    try:
        repetition = obj["repetition"]
        success = obj["success"]
        if not isinstance(repetition, int) or isinstance(repetition, bool) or repetition < 0:
            raise SchemaError(f"repetition must be a non-negative integer, got {repetition!r}")
        if not isinstance(success, bool):
            raise SchemaError(f"success must be a JSON boolean, got {success!r}")
        return TrialRecord.make(
            instance_id=obj["instance_id"],
            agent_id=obj["agent_id"],
            repetition=repetition,
            success=success,
            varied=dict(obj["varied"]),
            context_key=obj["context_key"],
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise SchemaError(f"bad trial record {obj!r}: {exc}") from exc


def write_trials(path: str | Path, trials: Iterable[TrialRecord],
                 header: dict | None = None) -> None:
    """Write a trial log as JSON lines, with an optional sidecar header."""
    path = Path(path)
    with path.open("w") as fh:
        for trial in trials:
            fh.write(json.dumps(trial_to_row(trial), sort_keys=True) + "\n")
    if header is not None:
        sidecar = path.with_name(path.stem + ".header.json")
        sidecar.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def read_trials(path: str | Path) -> list[TrialRecord]:
    path = Path(path)
    trials = []
    with path.open() as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{line_no}: not valid JSON ({exc})") from exc
            try:
                trials.append(trial_from_row(obj))
            except SchemaError as exc:
                raise SchemaError(f"{path}:{line_no}: {exc}") from exc
    if not trials:
        raise EmptyLog(f"{path}: no trial records")
    return trials


def validate_trials_against_space(trials: Sequence[TrialRecord], space: FactorSpace) -> None:
    """Check every record resolves in the space and its instance id is consistent.

    The full assignment is reconstructible from varied plus the context key;
    re-hashing it must reproduce the record's instance id, which catches logs
    produced against a different space or a mangled manifest.
    """
    for t in trials:
        assignment = dict(t.varied)
        for dim, value in decode_key(t.context_key).items():
            assignment[dim] = value
        for dim, value in assignment.items():
            if not space.has_dimension(dim):
                raise InconsistentLog(f"trial {t.instance_id}: unknown dimension {dim!r}")
            space.value(dim, value)  # raises UnknownValueId
        expected = compute_instance_id(assignment)
        if expected != t.instance_id:
            raise InconsistentLog(
                f"trial instance id {t.instance_id} does not match its assignment"
                f" (expected {expected}); log and space are inconsistent"
            )
