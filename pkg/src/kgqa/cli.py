"""Command-line interface.

Verbs: index build/search, embed build, rel match, kg load/query,
preprocess, answer, run, eval run, sweep, curves. Exit codes: 0 success,
1 usage error, 2 data error, 3 KG unreachable. The endpoint URL may come
from --endpoint or the KGQA_ENDPOINT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import embeddings as emb
from . import evaluation, ingest, pipeline
from .errors import DataError, KgqaError, KgUnreachable, TransportError
from .label_index import LabelIndex, read_label_file
from .mini_kg import LocalKg, SparqlEndpoint, load_triples, local_query
from .relation_match import RelationMatcher, load_query_vectors, load_relation_catalog

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_KG = 3

ENDPOINT_ENV = "KGQA_ENDPOINT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(message)


class SystemExit2(Exception):
    """Usage error carrying the message; mapped to exit code 1."""


def _build_parser() -> _Parser:
    parser = _Parser(prog="kgqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    index = sub.add_parser("index", help="entity label index").add_subparsers(
        dest="subcommand", required=True)
    index_build = index.add_parser("build")
    index_build.add_argument("--labels", required=True, help="<id>\\t<label> file")
    index_build.add_argument("--out", required=True)
    index_search = index.add_parser("search")
    index_search.add_argument("--index", required=True)
    index_search.add_argument("--query", required=True)
    index_search.add_argument("-k", type=int, default=100)

    embed = sub.add_parser("embed", help="entity embedding store").add_subparsers(
        dest="subcommand", required=True)
    embed_build = embed.add_parser("build")
    embed_build.add_argument("--vectors", required=True, help="<id>\\t<v1..v200> file")
    embed_build.add_argument("--out", required=True)

    rel = sub.add_parser("rel", help="relation matching").add_subparsers(
        dest="subcommand", required=True)
    rel_match = rel.add_parser("match")
    rel_match.add_argument("--catalog", required=True)
    rel_match.add_argument("--query-vectors")
    rel_match.add_argument("--label", required=True)
    rel_match.add_argument("-k", type=int, default=3)

    kg = sub.add_parser("kg", help="triple store / endpoint").add_subparsers(
        dest="subcommand", required=True)
    kg_load = kg.add_parser("load")
    kg_load.add_argument("--triples", required=True)
    kg_query = kg.add_parser("query")
    kg_query.add_argument("--sparql", required=True)
    kg_query.add_argument("--triples")
    kg_query.add_argument("--endpoint")

    preprocess = sub.add_parser("preprocess", help="build training pairs")
    preprocess.add_argument("--dataset", required=True)
    preprocess.add_argument("--kind", required=True,
                            choices=[d.value for d in ingest.Dataset])
    preprocess.add_argument("--labels", required=True)
    preprocess.add_argument("--relations", required=True)
    preprocess.add_argument("--embeddings")
    preprocess.add_argument("--no-embeddings", action="store_true")
    preprocess.add_argument("--out", required=True)

    for name in ("answer", "run", "sweep"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--beams", required=True)
        cmd.add_argument("--labels", help="label TSV (small runs)")
        cmd.add_argument("--index", help="prebuilt label index")
        cmd.add_argument("--embeddings")
        cmd.add_argument("--relations", required=True)
        cmd.add_argument("--query-vectors")
        cmd.add_argument("--triples")
        cmd.add_argument("--endpoint")
        cmd.add_argument("--config")
        if name == "answer":
            cmd.add_argument("--qid", required=True)
            cmd.add_argument("--trace-out")
        else:
            cmd.add_argument("--dataset", required=True)
            cmd.add_argument("--kind", required=True,
                             choices=[d.value for d in ingest.Dataset])
            cmd.add_argument("--split")
            cmd.add_argument("--out-dir", required=True)

    eval_cmd = sub.add_parser("eval").add_subparsers(dest="subcommand", required=True)
    eval_run = eval_cmd.add_parser("run")
    eval_run.add_argument("--beams", required=True)
    eval_run.add_argument("--dataset", required=True)
    eval_run.add_argument("--kind", required=True, choices=[d.value for d in ingest.Dataset])
    eval_run.add_argument("--kg", required=True,
                          help="endpoint URL or local:<triples file>")
    eval_run.add_argument("--labels", required=True)
    eval_run.add_argument("--embeddings")
    eval_run.add_argument("--relations", required=True)
    eval_run.add_argument("--query-vectors")
    eval_run.add_argument("--split")
    eval_run.add_argument("--config")
    eval_run.add_argument("--out-dir", required=True)

    curves = sub.add_parser("curves", help="per-epoch embedding similarity")
    curves.add_argument("--epoch", action="append", required=True,
                        metavar="LABEL=BEAMS_FILE")
    curves.add_argument("--gold", required=True, help="training pairs JSONL")
    curves.add_argument("--out", required=True)

    return parser


def _load_label_index(args) -> LabelIndex:
    if getattr(args, "index", None):
        return LabelIndex.open(args.index)
    if getattr(args, "labels", None):
        return LabelIndex.build(read_label_file(args.labels))
    raise SystemExit2("one of --index / --labels is required")


def _load_embedding_store(path: str | None) -> emb.EmbeddingStore | None:
    if not path:
        return None
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"EMBV":
        return emb.EmbeddingStore.open(path)
    return emb.EmbeddingStore.from_records(emb.read_embedding_file(path))


def _make_kg(triples: str | None, endpoint: str | None):
    endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
    if triples:
        return LocalKg(load_triples(triples))
    if endpoint:
        return SparqlEndpoint(endpoint)
    raise SystemExit2("one of --triples / --endpoint (or KGQA_ENDPOINT) is required")


def _make_stores(args) -> pipeline.Stores:
    matcher = RelationMatcher(
        load_relation_catalog(args.relations),
        load_query_vectors(args.query_vectors) if args.query_vectors else None,
    )
    return pipeline.Stores(
        label_index=_load_label_index(args),
        relation_matcher=matcher,
        kg=_make_kg(getattr(args, "triples", None), getattr(args, "endpoint", None)),
        embedding_store=_load_embedding_store(getattr(args, "embeddings", None)),
    )


def _make_config(args) -> pipeline.PipelineConfig:
    if getattr(args, "config", None):
        return pipeline.PipelineConfig.from_file(args.config)
    return pipeline.PipelineConfig()


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True))


def _cmd_index(args) -> int:
    if args.subcommand == "build":
        index = LabelIndex.build(read_label_file(args.labels))
        index.save(args.out)
        print(f"indexed {len(index)} labels -> {args.out}")
        return EXIT_OK
    index = LabelIndex.open(args.index)
    hits = index.search(args.query, args.k)
    _print_json([{"rank": h.rank, "id": h.entity.id, "label": h.entity.label,
                  "score": h.score} for h in hits])
    return EXIT_OK


def _cmd_embed(args) -> int:
    store = emb.EmbeddingStore.from_records(emb.read_embedding_file(args.vectors))
    store.save(args.out)
    print(f"stored {len(store)} embeddings -> {args.out}")
    return EXIT_OK


def _cmd_rel(args) -> int:
    matcher = RelationMatcher(
        load_relation_catalog(args.catalog),
        load_query_vectors(args.query_vectors) if args.query_vectors else None,
    )
    hits = matcher.candidates_for_label(args.label, args.k)
    _print_json([{"rank": h.rank, "id": h.relation.id, "label": h.relation.label,
                  "cosine": h.cosine} for h in hits])
    return EXIT_OK


def _cmd_kg(args) -> int:
    if args.subcommand == "load":
        store = load_triples(args.triples)
        print(f"loaded {len(store)} triples from {args.triples}")
        return EXIT_OK
    if args.triples:
        result = local_query(load_triples(args.triples), args.sparql)
    else:
        result = _make_kg(None, args.endpoint).query(args.sparql)
    _print_json(result.to_json())
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    records = ingest.load_dataset(args.dataset, ingest.Dataset(args.kind))
    entity_labels = {r.id: r.label for r in read_label_file(args.labels)}
    relation_labels = {}
    for line in Path(args.relations).read_text(encoding="utf-8").splitlines():
        if line.strip():
            parts = line.split("\t")
            relation_labels[parts[0]] = parts[1]
    store = _load_embedding_store(args.embeddings)
    manifest = ingest.make_training_file(
        records, args.out,
        entity_labels=entity_labels, relation_labels=relation_labels,
        entity_embeddings=store,
        with_embeddings=not args.no_embeddings,
    )
    print(f"wrote {manifest['written']} pairs, skipped {len(manifest['skipped'])}")
    return EXIT_OK


def _cmd_answer(args) -> int:
    stores = _make_stores(args)
    config = _make_config(args)
    entries = {e.qid: e.beams for e in ingest.load_beams(args.beams)}
    if args.qid not in entries:
        raise DataError(f"qid {args.qid} not in beams file")
    answer, trace = pipeline.answer_question(entries[args.qid], config, stores, args.qid)
    if args.trace_out:
        Path(args.trace_out).write_text(
            json.dumps(trace.to_json(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")
    if trace.execution.get("kg_unreachable"):
        print("KG unreachable", file=sys.stderr)
        return EXIT_KG
    _print_json(answer.to_json() if answer is not None else {"kind": "empty"})
    return EXIT_OK


def _run_common(args, *, sweep: bool) -> int:
    stores = _make_stores(args)
    config = _make_config(args)
    records = ingest.load_dataset(args.dataset, ingest.Dataset(args.kind))
    beams = ingest.load_beams(args.beams)
    split = ingest.load_split(args.split) if args.split else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if sweep:
        reports = pipeline.policy_sweep(records, beams, config, stores, split=split)
        for name, report in reports.items():
            safe = name.replace(" ", "").replace("+", "_")
            pipeline.save_report(report, out_dir / f"report_{safe}.json")
            print(f"{name}: macro P@1 {report.macro_p_at_1:.3f} "
                  f"macro F1 {report.macro_f1:.3f}")
        return EXIT_OK

    report, traces, timing = pipeline.run_batch(records, beams, config, stores, split=split)
    pipeline.save_report(report, out_dir / "report.json")
    pipeline.save_traces(traces, out_dir / "traces.jsonl")
    (out_dir / "timings.json").write_text(
        json.dumps(timing, indent=2) + "\n", encoding="utf-8")
    print(f"{report.question_count} questions: macro P@1 {report.macro_p_at_1:.3f}, "
          f"macro F1 {report.macro_f1:.3f} "
          f"(coverage {report.diagnostics['beam_coverage']:.0%})")
    return EXIT_OK


def _cmd_eval_run(args) -> int:
    if args.kg.startswith("local:"):
        args.triples, args.endpoint = args.kg[len("local:"):], None
    else:
        args.triples, args.endpoint = None, args.kg
    args.index = None
    return _run_common(args, sweep=False)


def _cmd_curves(args) -> int:
    gold = {row["qid"]: row["skeleton"]
            for row in ingest.load_training_file(args.gold)}
    epochs = []
    for spec_item in args.epoch:
        if "=" not in spec_item:
            raise SystemExit2(f"--epoch needs LABEL=FILE, got {spec_item!r}")
        label, path = spec_item.split("=", 1)
        epochs.append((label, ingest.load_beams(path)))
    curves = evaluation.similarity_curves(epochs, gold)
    Path(args.out).write_text(evaluation.curves_to_csv(curves), encoding="utf-8")
    for row in curves:
        print(f"{row.epoch}: mean cosine {row.mean_cosine:.4f}, "
              f"mean dot {row.mean_dot:.4f} over {row.pairs} pairs")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "index":
            return _cmd_index(args)
        if args.command == "embed":
            return _cmd_embed(args)
        if args.command == "rel":
            return _cmd_rel(args)
        if args.command == "kg":
            return _cmd_kg(args)
        if args.command == "preprocess":
            return _cmd_preprocess(args)
        if args.command == "answer":
            return _cmd_answer(args)
        if args.command == "run":
            return _run_common(args, sweep=False)
        if args.command == "sweep":
            return _run_common(args, sweep=True)
        if args.command == "eval":
            return _cmd_eval_run(args)
        if args.command == "curves":
            return _cmd_curves(args)
        raise SystemExit2(f"unknown command {args.command!r}")
    except SystemExit2 as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KgUnreachable, TransportError) as exc:
        print(f"KG unreachable: {exc}", file=sys.stderr)
        return EXIT_KG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KgqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
