"""Bias report assembly and the CSV / text renderings.

A report collects, per agent: mean SR and bias coefficient per evaluated
dimension, an unweighted average column, interaction coefficients per
dimension pair with factorial data, and color-category SR aggregates. The
average CV is N/A whenever any contributing dimension's CV is N/A, matching
the convention that an undefined component poisons the row summary.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .colors import hsl_categorizer
from .errors import InsufficientFactorialData, SchemaError
from .factor_space import ColorPayload, FactorSpace
from .formats import REPORT_FORMAT, check_format
from .metrics import (
    MetricConfig,
    RateTable,
    SuccessTable,
    _rates,
    bias_coefficient,
    color_category_summary,
    conditions_for,
    interaction_effect,
    mean_success_rate,
    sr_sweep,
)

NA = "N/A"


@dataclass
class DimensionStats:
    mu_sr: float
    cv_sr: float | None
    cells: int
    contexts: int


@dataclass
class AgentReport:
    agent_id: str
    dimensions: dict[str, DimensionStats]
    average_sr: float | None
    average_cv: float | None
    interactions: dict[str, float | None] = field(default_factory=dict)
    color_categories: dict[str, float] = field(default_factory=dict)


@dataclass
class BiasReport:
    epsilon: float
    degenerate_policy: str
    agents: list[AgentReport]
    warnings: list[str] = field(default_factory=list)


def _pair_name(dim_i: str, dim_j: str) -> str:
    return f"{dim_i};{dim_j}"


def _evaluated_dims(table: RateTable, space: FactorSpace | None) -> list[str]:
    present: set[str] = set()
    for (varied, _) in _rates(table):
        present.update(dict(varied))
    if space is None:
        return sorted(present)
    ordered = [d.name for d in space.dims if d.name in present]
    ordered.extend(sorted(present - set(ordered)))
    return ordered


def _factorial_pairs(table: RateTable) -> list[tuple[str, str]]:
    pairs: set[tuple[str, str]] = set()
    for (varied, _) in _rates(table):
        dims = sorted(dict(varied))
        for a in dims:
            for b in dims:
                if a != b:
                    pairs.add((a, b))
    return sorted(pairs)


def _color_dims(space: FactorSpace | None) -> list[str]:
    if space is None:
        return []
    return [
        dim.name
        for dim in space.dims
        if any(isinstance(v.payload, ColorPayload) for v in dim.values)
    ]


def build_report(tables: Mapping[str, RateTable], cfg: MetricConfig | None = None,
                 space: FactorSpace | None = None) -> BiasReport:
    """Compute the full metric suite for each agent's table."""
    cfg = cfg or MetricConfig()
    report = BiasReport(epsilon=cfg.epsilon, degenerate_policy=cfg.degenerate_policy, agents=[])
    color_dims = _color_dims(space)
    categorizer = None
    if space is not None and color_dims:
        categorizer = hsl_categorizer(space.color_rgb_index())
    for agent_id in sorted(tables):
        table = tables[agent_id]
        dims = _evaluated_dims(table, space)
        stats: dict[str, DimensionStats] = {}
        for dim in dims:
            conds = conditions_for(table, dim)
            usable = [c for c in conds if len(sr_sweep(table, dim, c)) >= 2]
            skipped = len(conds) - len(usable)
            if skipped:
                report.warnings.append(
                    f"{agent_id}/{dim}: {skipped} background(s) skipped with < 2 observed values"
                )
            if not usable:
                report.warnings.append(
                    f"{agent_id}/{dim}: no usable backgrounds; dimension omitted"
                )
                continue
            cell_count = sum(
                1 for (varied, _) in _rates(table) if dim in dict(varied)
            )
            stats[dim] = DimensionStats(
                mu_sr=mean_success_rate(table, dim),
                cv_sr=bias_coefficient(table, dim, cfg),
                cells=cell_count,
                contexts=len(usable),
            )
        average_sr = average_cv = None
        if stats:
            ordered = [stats[d] for d in stats]
            average_sr = sum(s.mu_sr for s in ordered) / len(ordered)
            cvs = [s.cv_sr for s in ordered]
            average_cv = None if any(v is None for v in cvs) else sum(cvs) / len(cvs)
        interactions: dict[str, float | None] = {}
        for dim_i, dim_j in _factorial_pairs(table):
            try:
                interactions[_pair_name(dim_i, dim_j)] = interaction_effect(
                    table, dim_i, dim_j, cfg
                )
            except InsufficientFactorialData as exc:
                report.warnings.append(f"{agent_id}/{_pair_name(dim_i, dim_j)}: {exc}")
        categories: dict[str, float] = {}
        if categorizer is not None:
            for dim in color_dims:
                if dim in stats:
                    categories.update(color_category_summary(table, categorizer, dim=dim))
        report.agents.append(
            AgentReport(
                agent_id=agent_id,
                dimensions=stats,
                average_sr=average_sr,
                average_cv=average_cv,
                interactions=interactions,
                color_categories=categories,
            )
        )
    return report


# --- JSON round-trip -------------------------------------------------------------------

def report_to_dict(report: BiasReport) -> dict:
    return {
        "format": REPORT_FORMAT,
        "config": {"epsilon": report.epsilon, "degenerate_policy": report.degenerate_policy},
        "agents": [
            {
                "agent_id": a.agent_id,
                "dimensions": {
                    name: {
                        "mu_sr": s.mu_sr,
                        "cv_sr": s.cv_sr,
                        "cells": s.cells,
                        "contexts": s.contexts,
                    }
                    for name, s in a.dimensions.items()
                },
                "average": {"mu_sr": a.average_sr, "cv_sr": a.average_cv},
                "interactions": a.interactions,
                "color_categories": a.color_categories,
            }
            for a in report.agents
        ],
        "warnings": report.warnings,
    }


def report_from_dict(obj: dict) -> BiasReport:
    if not isinstance(obj, dict):
        raise SchemaError("report document must be a JSON object")
    check_format(obj.get("format"), REPORT_FORMAT)
    try:
        config = obj["config"]
        agents = []
        for raw in obj["agents"]:
            dimensions = {
                name: DimensionStats(
                    mu_sr=s["mu_sr"], cv_sr=s["cv_sr"], cells=s["cells"], contexts=s["contexts"]
                )
                for name, s in raw["dimensions"].items()
            }
            agents.append(
                AgentReport(
                    agent_id=raw["agent_id"],
                    dimensions=dimensions,
                    average_sr=raw["average"]["mu_sr"],
                    average_cv=raw["average"]["cv_sr"],
                    interactions=dict(raw.get("interactions", {})),
                    color_categories=dict(raw.get("color_categories", {})),
                )
            )
        return BiasReport(
            epsilon=config["epsilon"],
            degenerate_policy=config["degenerate_policy"],
            agents=agents,
            warnings=list(obj.get("warnings", [])),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad report document: {exc}") from exc


def save_report(report: BiasReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")


def load_report(path: str | Path) -> BiasReport:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return report_from_dict(obj)


# --- renderings --------------------------------------------------------------------------

def _fmt(value: float | None) -> str:
    return NA if value is None else f"{value:.2f}"


def _report_dims(report: BiasReport) -> list[str]:
    dims: list[str] = []
    for agent in report.agents:
        for name in agent.dimensions:
            if name not in dims:
                dims.append(name)
    return dims


def write_table_csv(report: BiasReport, path: str | Path) -> None:
    """One row per agent; SR/CV column pair per dimension plus the average pair."""
    dims = _report_dims(report)
    header = ["agent"]
    for dim in dims:
        header += [f"{dim}_sr", f"{dim}_cv"]
    header += ["average_sr", "average_cv"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for agent in report.agents:
            row = [agent.agent_id]
            for dim in dims:
                stats = agent.dimensions.get(dim)
                row += [NA, NA] if stats is None else [_fmt(stats.mu_sr), _fmt(stats.cv_sr)]
            row += [_fmt(agent.average_sr), _fmt(agent.average_cv)]
            writer.writerow(row)


def write_iec_csv(report: BiasReport, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "dim_i", "dim_j", "iec"])
        for agent in report.agents:
            for pair, value in sorted(agent.interactions.items()):
                dim_i, _, dim_j = pair.partition(";")
                writer.writerow([agent.agent_id, dim_i, dim_j, _fmt(value)])


def write_color_category_csv(report: BiasReport, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "category", "mean_sr"])
        for agent in report.agents:
            for category, value in sorted(agent.color_categories.items()):
                writer.writerow([agent.agent_id, category, _fmt(value)])


def write_heatmap_csv(table: SuccessTable, dim_i: str, dim_j: str, path: str | Path,
                      space: FactorSpace | None = None) -> None:
    """Success-count grid: rows are dim_i values, columns dim_j values."""
    counts: dict[tuple[str, str], int] = {}
    rows_seen: set[str] = set()
    cols_seen: set[str] = set()
    for (varied, _), (successes, _trials) in table.cells.items():
        varied_map = dict(varied)
        if dim_i not in varied_map or dim_j not in varied_map:
            continue
        vi, vj = varied_map[dim_i], varied_map[dim_j]
        counts[(vi, vj)] = counts.get((vi, vj), 0) + successes
        rows_seen.add(vi)
        cols_seen.add(vj)

    def ordered(dim: str, seen: set[str]) -> list[str]:
        if space is not None and space.has_dimension(dim):
            declared = [v for v in space.dimension(dim).value_ids if v in seen]
            declared.extend(sorted(seen - set(declared)))
            return declared
        return sorted(seen)

    row_ids = ordered(dim_i, rows_seen)
    col_ids = ordered(dim_j, cols_seen)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{dim_i}/{dim_j}"] + col_ids)
        for vi in row_ids:
            writer.writerow([vi] + [counts.get((vi, vj), 0) for vj in col_ids])


def render_text(report: BiasReport) -> str:
    """Aligned text table; the best (lowest) value per CV column is starred."""
    dims = _report_dims(report)
    header = ["agent"]
    for dim in dims:
        header += [f"{dim} SR", f"{dim} CV"]
    header += ["avg SR", "avg CV"]

    grid: list[list[str]] = []
    cv_columns: dict[int, list[tuple[int, float]]] = {}
    for row_idx, agent in enumerate(report.agents):
        row = [agent.agent_id]
        for dim in dims:
            stats = agent.dimensions.get(dim)
            row.append(NA if stats is None else _fmt(stats.mu_sr))
            cv = None if stats is None else stats.cv_sr
            col_idx = len(row)
            row.append(_fmt(cv))
            if cv is not None:
                cv_columns.setdefault(col_idx, []).append((row_idx, cv))
        row.append(_fmt(agent.average_sr))
        col_idx = len(row)
        row.append(_fmt(agent.average_cv))
        if agent.average_cv is not None:
            cv_columns.setdefault(col_idx, []).append((row_idx, agent.average_cv))
        grid.append(row)

    if len(report.agents) > 1:
        for col_idx, entries in cv_columns.items():
            best_row = min(entries, key=lambda e: e[1])[0]
            grid[best_row][col_idx] += " *"

    widths = [
        max(len(header[c]), *(len(row[c]) for row in grid)) if grid else len(header[c])
        for c in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(widths[c]) for c, h in enumerate(header)).rstrip(),
        "  ".join("-" * widths[c] for c in range(len(header))).rstrip(),
    ]
    for row in grid:
        lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip())
    if report.warnings:
        lines.append("")
        lines.extend(f"warning: {w}" for w in report.warnings)
    return "\n".join(lines) + "\n"
