"""Command-line entry points: corpus synthesis, pipeline runs, evaluation,
statistics, the concatenation importer, and the HTTP service."""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import dataio, metrics
from .backends import build_backend
from .errors import QuerySplitError
from .pipeline import PipelineConfig, gold_generation_table, run_pipeline, two_stage_once_config
from .service import load_service_config, serve
from .synthesizer import ConjunctionTable, synthesize, table_for_query_count
from .textkit import train_char_lm


def _read_source_groups(path) -> list[list[str]]:
    """Sources file: one instance per line, sub-queries separated by tabs."""
    groups = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        queries = [q.strip() for q in line.split("\t") if q.strip()]
        if len(queries) < 2:
            raise QuerySplitError(f"{path}:{line_no}: need at least two tab-separated queries")
        groups.append(queries)
    return groups


def _cmd_synthesize(args) -> int:
    groups = _read_source_groups(args.sources)
    lm_corpus = [q for group in groups for q in group]
    lm = train_char_lm(lm_corpus, n=args.lm_order, smoothing=args.lm_smoothing)
    rng = random.Random(args.seed)
    custom_table = ConjunctionTable.from_file(args.table) if args.table else None
    instances = []
    for index, group in enumerate(groups):
        if custom_table is not None:
            if custom_table.junction_count != len(group):
                raise QuerySplitError(
                    f"group {index} has {len(group)} queries but the table covers "
                    f"{custom_table.junction_count} junctions"
                )
            table = custom_table
        else:
            table = table_for_query_count(len(group))
        trace = synthesize(group, table, lm.perplexity, rng, pool_size=args.pool_size)
        instances.append(dataio.instance_from_trace(trace, f"syn-{index:06d}"))
    dataio.save(instances, args.output)
    print(f"wrote {len(instances)} instances to {args.output}")
    return 0


def _build_registry(args, corpus) -> dict:
    registry = {}
    if args.backends:
        specs = json.loads(Path(args.backends).read_text(encoding="utf-8"))
        gold_table = gold_generation_table(corpus)
        for backend_id, spec in specs.items():
            registry[backend_id] = build_backend(spec, gold_table=gold_table)
    return registry


def _cmd_run(args) -> int:
    corpus = dataio.load(args.input)
    config = (
        PipelineConfig.from_file(args.pipeline) if args.pipeline else two_stage_once_config()
    )
    registry = _build_registry(args, corpus)
    records = []
    for inst in corpus:
        trace = run_pipeline(config, inst.aggregated, registry)
        record = {"id": inst.id, "sub_queries": list(trace.final)}
        if args.trace:
            record["trace"] = trace.to_dict()
        records.append(record)
    with open(args.output, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(records)} predictions to {args.output}")
    return 0


def _cmd_eval(args) -> int:
    references = {inst.id: inst for inst in dataio.load(args.references)}
    instances = []
    with open(args.predictions, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            ref = references.get(record["id"])
            if ref is None:
                raise QuerySplitError(f"prediction id {record['id']!r} not in references")
            instances.append(
                metrics.make_instance(
                    record["sub_queries"], ref.completed_queries, ref.rewrite_flags
                )
            )
    report = metrics.evaluate(instances)
    print(report.table_row(label=args.label))
    if args.output:
        Path(args.output).write_text(
            json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
    return 0


def _cmd_stats(args) -> int:
    corpus = dataio.load(args.corpus)
    print(json.dumps(dataio.stats(corpus).to_dict(), ensure_ascii=False, indent=2))
    return 0


def _cmd_import_concat(args) -> int:
    queries = [
        line.strip()
        for line in Path(args.sources).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    rng = random.Random(args.seed) if args.shuffle else None
    instances = dataio.import_concat_corpus(
        queries, args.conjunction, args.queries_per_instance, rng
    )
    dataio.save(instances, args.output)
    print(f"wrote {len(instances)} instances to {args.output}")
    return 0


def _cmd_serve(args) -> int:  # pragma: no cover - long-running entry point
    config = load_service_config(args.config, listen=args.listen)
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="querysplit",
        description="Split multi-intent queries into complete single-intent sub-queries.",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for every stochastic step")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="aggregate sub-query groups into a corpus")
    p.add_argument("--sources", required=True, help="tab-separated sub-queries, one group per line")
    p.add_argument("--output", required=True)
    p.add_argument("--table", help="conjunction table file (default: built-in per group size)")
    p.add_argument("--pool-size", type=int, default=10)
    p.add_argument("--lm-order", type=int, default=3)
    p.add_argument("--lm-smoothing", type=float, default=1.0)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("run", help="run a pipeline over a corpus")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--output", required=True, help="predictions JSONL")
    p.add_argument("--pipeline", help="pipeline config JSON (default: rule two-stage)")
    p.add_argument("--backends", help="backend registry JSON")
    p.add_argument("--trace", action="store_true", help="store per-query traces")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--predictions", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--output", help="write the report as JSON")
    p.add_argument("--label", default="run")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="print corpus statistics")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("import-concat", help="import single-intent queries by concatenation")
    p.add_argument("--sources", required=True, help="one query per line")
    p.add_argument("--output", required=True)
    p.add_argument("--conjunction", default=" and ")
    p.add_argument("--queries-per-instance", type=int, default=2)
    p.add_argument("--shuffle", action="store_true")
    p.set_defaults(func=_cmd_import_concat)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", help="service config JSON")
    p.add_argument("--listen", help="host:port override")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (QuerySplitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
