"""Command-line surface: generate, screen, simulate, analyze, sgl, report.

Exit codes: 0 success, 1 usage error, 2 data error (bad files, inconsistent
logs), 3 external-service failure (adjudicator unreachable). The BIASFORGE_LOG
environment variable sets the logging level (e.g. DEBUG, INFO, WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import contexts, fairness, metrics, reports, simulate
from .errors import (
    AdjudicatorTransportError,
    AllRequestsFailed,
    BiasforgeError,
    SchemaError,
)
from .factor_space import FactorSpace, load_space
from .metrics import MetricConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SERVICE = 3

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the contract says 1."""

    def error(self, message: str):  # noqa: D102
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="biasforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[], help="emit instance manifests from a factor space")
    gen.add_argument("--space", required=True, help="factor-space definition file")
    gen.add_argument("--eval-dim", action="append", default=[],
                     help="visual dimension to evaluate; repeatable")
    gen.add_argument("--factorial", help="two visual dimensions as dimA,dimB")
    gen.add_argument("--context", default="baseline",
                     help="'baseline' or a JSON file fixing the factorial context")
    gen.add_argument("--out", required=True, help="output directory")

    sim = sub.add_parser("simulate", help="draw planted-model trials for a manifest")
    sim.add_argument("manifest", help="instance manifest (JSONL with sidecar header)")
    sim.add_argument("--space", required=True, help="factor-space definition file")
    sim.add_argument("--model", required=True, help="planted-bias model file")
    sim.add_argument("--seed", type=int, default=0, help="64-bit stream seed")
    sim.add_argument("--reps", type=int, default=5, help="repetitions per instance")
    sim.add_argument("--out", required=True, help="output directory")

    ana = sub.add_parser("analyze", help="compute the bias report from a trial log")
    ana.add_argument("--trials", required=True, help="trial log (JSONL)")
    ana.add_argument("--space", required=True, help="factor-space definition file")
    ana.add_argument("--epsilon", type=float, default=1e-6,
                     help="CV denominator bias term on the [0,1] scale")
    ana.add_argument("--out", required=True, help="output directory")

    rep = sub.add_parser("report", help="render a report JSON as an aligned text table")
    rep.add_argument("report", help="report JSON file")

    scr = sub.add_parser("screen", help="run the fairness screening loop over a manifest")
    scr.add_argument("manifest", help="instance manifest (JSONL with sidecar header)")
    scr.add_argument("--adjudicator", required=True,
                     help="adjudicator service URL, or mock:<script.json>")
    scr.add_argument("--out", required=True, help="output directory")

    sgl_cmd = sub.add_parser("sgl", help="refine an instruction against a parsed scene")
    sgl_cmd.add_argument("scene", help="scene JSON file (parser output schema)")
    sgl_cmd.add_argument("instruction", help="the original instruction text")
    sgl_cmd.add_argument("--out", help="optional directory for the grounding trace")

    return parser


def _load_space(path: str) -> FactorSpace:
    return load_space(path)


def _context_from_arg(arg: str) -> contexts.EvaluationContext | None:
    if arg == "baseline":
        return None
    try:
        obj = json.loads(Path(arg).read_text())
        return contexts.EvaluationContext.make(
            context=obj["context"], visual_fixed=obj["visual_fixed"]
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SchemaError(f"bad context file {arg}: {exc}") from exc


def _cmd_generate(args: argparse.Namespace) -> int:
    space = _load_space(args.space)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wrote_any = False
    for dim in args.eval_dim:
        instances = contexts.task_subspace(space, dim)
        path = out / f"task_subspace_{dim}.jsonl"
        contexts.write_manifest(path, instances, space, evaluated_dims=[dim])
        print(f"wrote {path} ({len(instances)} instances)")
        wrote_any = True
    if args.factorial:
        try:
            dim_a, dim_b = (part.strip() for part in args.factorial.split(","))
        except ValueError:
            raise SchemaError("--factorial expects exactly two names: dimA,dimB") from None
        c_star = _context_from_arg(args.context)
        instances = contexts.factorial_subspace(space, dim_a, dim_b, c_star=c_star)
        used_c_star = c_star or contexts.baseline_evaluation_context(space, exclude=(dim_a, dim_b))
        path = out / f"factorial_{dim_a}x{dim_b}.jsonl"
        contexts.write_manifest(
            path, instances, space, evaluated_dims=[dim_a, dim_b], c_star=used_c_star
        )
        print(f"wrote {path} ({len(instances)} instances)")
        wrote_any = True
    if not wrote_any:
        raise SchemaError("nothing to generate: pass --eval-dim and/or --factorial")
    return EXIT_OK


def _instances_from_manifest(manifest: contexts.Manifest, space: FactorSpace
                             ) -> list[contexts.TaskInstance]:
    out = []
    for row in manifest.rows:
        varied = manifest.varied_of(row)
        rest = {k: v for k, v in row.assignment.items() if k not in varied}
        ctx = {k: v for k, v in rest.items() if any(d.name == k for d in space.context_dims)}
        fixed = {k: v for k, v in rest.items() if k not in ctx}
        instance = contexts.TaskInstance(
            instance_id=row.instance_id,
            varied=tuple(sorted(varied.items())),
            eval_context=contexts.EvaluationContext.make(ctx, fixed),
            scene=None,  # scenes are not needed to draw outcomes
        )
        out.append(instance)
    return out


def _cmd_simulate(args: argparse.Namespace) -> int:
    space = _load_space(args.space)
    manifest = contexts.read_manifest(args.manifest)
    model = simulate.load_model(args.model)
    model.validate_against(space)
    instances = _instances_from_manifest(manifest, space)
    spec = simulate.SimRunSpec.make(
        model=model, subspace=instances, repetitions=args.reps, seed=args.seed
    )
    trials = simulate.simulate_trials(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trials.jsonl"
    metrics.write_trials(
        path,
        trials,
        header={
            "format": "biasforge/trials/v1",
            "seed": args.seed,
            "repetitions": args.reps,
            "agent_id": spec.agent_id,
            "instances": len(instances),
        },
    )
    print(f"wrote {path} ({len(trials)} trials)")
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    space = _load_space(args.space)
    trials = metrics.read_trials(args.trials)
    metrics.validate_trials_against_space(trials, space)
    cfg = MetricConfig(epsilon=args.epsilon)
    tables = metrics.build_success_tables(trials)
    report = reports.build_report(tables, cfg, space)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports.save_report(report, out / "report.json")
    reports.write_table_csv(report, out / "table.csv")
    reports.write_iec_csv(report, out / "iec.csv")
    reports.write_color_category_csv(report, out / "color_categories.csv")
    for agent_id, table in tables.items():
        pairs = {
            tuple(sorted(dict(varied))) for (varied, _) in table.cells if len(varied) == 2
        }
        for dim_i, dim_j in sorted(pairs):
            path = out / f"heatmap_{dim_i}x{dim_j}_{agent_id}.csv"
            reports.write_heatmap_csv(table, dim_i, dim_j, path, space=space)
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    report = reports.load_report(args.report)
    sys.stdout.write(reports.render_text(report))
    return EXIT_OK


def _cmd_screen(args: argparse.Namespace) -> int:
    manifest = contexts.read_manifest(args.manifest)
    instance_ids = [row.instance_id for row in manifest.rows]
    if args.adjudicator.startswith("mock:"):
        client = fairness.scripted_adjudicator_from_file(args.adjudicator[len("mock:"):])
    else:
        client = fairness.HttpAdjudicator(args.adjudicator)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    batch = fairness.BatchState(batch_id=Path(args.manifest).stem,
                                instance_ids=tuple(instance_ids))
    checkpoint = out / "batch_state.json"
    batch = fairness.refinement_loop(batch, client, checkpoint_path=checkpoint)
    (out / "flagged.txt").write_text("".join(f"{iid}\n" for iid in batch.flagged_instances))
    print(
        f"batch {batch.batch_id}: phase {batch.phase} after {batch.iteration} screening(s),"
        f" pass rate {batch.screening_pass_rate:.3f}"
    )
    return EXIT_OK


def _cmd_sgl(args: argparse.Namespace) -> int:
    from . import sgl as sgl_mod

    raw = Path(args.scene).read_text()
    objects = sgl_mod.parse_scene_json(raw)
    result = sgl_mod.ground_instruction(objects, args.instruction)
    print(result.refined_instruction)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        trace = {
            "refined_instruction": result.refined_instruction,
            "ambiguity": {
                "target_id": result.report.target_id,
                "competing_ids": list(result.report.competing_ids),
                "shared_categories": list(result.report.shared_categories),
            },
            "attributes": [list(a) for a in result.attributes],
            "receiver_attributes": [list(a) for a in result.receiver_attributes],
        }
        (out / "sgl_trace.json").write_text(json.dumps(trace, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "report": _cmd_report,
    "screen": _cmd_screen,
    "sgl": _cmd_sgl,
}


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("BIASFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (AdjudicatorTransportError, AllRequestsFailed) as exc:
        logger.error("external service failure: %s", exc)
        print(f"biasforge: external service failure: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except BiasforgeError as exc:
        logger.error("data error: %s", exc)
        print(f"biasforge: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"biasforge: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
