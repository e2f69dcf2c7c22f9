"""Command-line interface: ingest, index, query tooling, search, datasets, serving.

Every subcommand is a thin deterministic wrapper over a library operation.
Success prints JSON on stdout and exits 0; failures print a machine-readable
error object on stderr and exit 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import bootstrap, engine, extractor, patterns, querylang
from .corpus import Corpus, load_corpus, read_conllu, save_corpus
from .errors import SynsearchError
from .project import Project, config_from_dict
from .querylang import QueryParseError


def _print(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False) + "\n")


def cmd_ingest(args) -> int:
    sentences = []
    for path in args.conllu:
        sentences.extend(read_conllu(path, strict=not args.lenient))
    corpus = Corpus(sentences)
    save_corpus(corpus, args.out)
    _print({"sentences": len(corpus), "tokens": corpus.token_count(), "out": args.out})
    return 0


def cmd_index(args) -> int:
    corpus = load_corpus(args.store)
    index = engine.build_index(corpus)
    # record the store relative to the index dir so the pair stays relocatable
    store_rel = os.path.relpath(os.path.abspath(args.store), os.path.abspath(args.out))
    engine.save_index(index, args.out, store_path=store_rel)
    _print({"sentences": len(corpus), "out": args.out,
            "corpus_hash": index.corpus_hash})
    return 0


def cmd_query_parse(args) -> int:
    query = querylang.parse_query(args.text, query_id=args.id)
    _print({
        "id": query.id,
        "stripped": querylang.strip(query),
        "elements": [
            {
                "surface": el.surface,
                "role": el.role,
                "capture_name": el.capture_name,
                "expand": el.expand,
                "constraints": [
                    {"key": c.key, "values": list(c.values), "bare": c.bare}
                    for c in el.constraints
                ],
            }
            for el in query.elements
        ],
    })
    return 0


def cmd_query_compile(args) -> int:
    queries = querylang.load_query_file(args.queryfile)
    parses = read_conllu(args.parses)
    if len(parses) != len(queries):
        raise SynsearchError(
            f"{len(queries)} queries but {len(parses)} parses; they align by position")
    trigger_map = querylang.load_trigger_map(args.triggers) if args.triggers else None
    compiled = []
    used_keys = set()
    for query, parse in zip(queries, parses):
        if trigger_map:
            used_keys |= querylang.trigger_keys_used(query, trigger_map)
            query = querylang.expand_triggers(query, trigger_map, warn_unused=False)
        compiled.append(patterns.compile_query(query, parse, pattern_id=query.id))
    if trigger_map:
        for key in trigger_map:
            if key.lower() not in used_keys:
                logging.getLogger(__name__).warning(
                    "trigger list %r matched no query in %s", key, args.queryfile)
    patterns.save_patterns(compiled, args.out)
    _print({"patterns": [p.id for p in compiled], "out": args.out})
    return 0


def _load_one_pattern(path, pattern_id):
    loaded = patterns.load_patterns(path)
    if pattern_id is not None:
        for p in loaded:
            if p.id == pattern_id:
                return p
        raise SynsearchError(f"pattern {pattern_id!r} not found in {path}")
    if len(loaded) != 1:
        raise SynsearchError(
            f"{path} holds {len(loaded)} patterns; pick one with --pattern")
    return loaded[0]


def _load_index(args) -> engine.CorpusIndex:
    corpus = load_corpus(args.store) if args.store else None
    return engine.load_index(args.index, corpus)


def cmd_search(args) -> int:
    index = _load_index(args)
    pattern = _load_one_pattern(args.pattern_file, args.pattern)
    page, total = engine.search(pattern, index, limit=args.limit, offset=args.offset)
    _print({"total": total, "matches": [engine.match_to_dict(m) for m in page]})
    return 0


def cmd_sample(args) -> int:
    index = _load_index(args)
    pattern = _load_one_pattern(args.pattern_file, args.pattern)
    sample = engine.sample_matches(pattern, index, args.n, args.seed)
    _print({"seed": args.seed, "n": args.n,
            "matches": [engine.match_to_dict(m) for m in sample]})
    return 0


def cmd_dataset_build(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    for key in ("index", "patterns", "out_dir"):
        if key not in raw:
            raise SynsearchError(f"dataset config is missing {key!r}")
    config = config_from_dict(raw)
    corpus = load_corpus(raw["store"]) if raw.get("store") else None
    index = engine.load_index(raw["index"], corpus)
    pats = patterns.load_patterns(raw["patterns"])
    result = bootstrap.build_dataset(config, index, pats,
                                     verdicts=raw.get("verdicts"),
                                     include_pending=bool(raw.get("include_pending")))
    files = bootstrap.write_dataset(result, raw["out_dir"])
    _print({"files": files, "stats": result.stats})
    return 0


def cmd_eval(args) -> int:
    pats = patterns.load_patterns(args.patterns)
    gold = extractor.load_gold(args.gold, parses_path=args.parses)
    report = extractor.evaluate(pats, gold)
    sys.stderr.write(extractor.report_table(report) + "\n")
    _print(extractor.report_to_dict(report))
    return 0


def cmd_project_init(args) -> int:
    Project.init(args.dir, store_path=args.store, index_path=args.index,
                 parser_cmd=args.parser_cmd)
    _print({"project": args.dir})
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app
    project = Project(args.project)
    app = create_app(project, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synsearch",
        description="By-example syntactic search and relation-extraction dataset bootstrapping.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read CoNLL-U files into a corpus snapshot")
    p.add_argument("conllu", nargs="+", help="CoNLL-U input file(s)")
    p.add_argument("--out", required=True, help="snapshot output path")
    p.add_argument("--lenient", action="store_true",
                   help="skip malformed sentences instead of aborting")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build the inverted index for a corpus snapshot")
    p.add_argument("store", help="corpus snapshot")
    p.add_argument("--out", required=True, help="index directory")
    p.set_defaults(func=cmd_index)

    q = sub.add_parser("query", help="query tooling")
    qsub = q.add_subparsers(dest="query_command", required=True)
    p = qsub.add_parser("parse", help="parse query markup and print its elements")
    p.add_argument("text")
    p.add_argument("--id", default=None)
    p.set_defaults(func=cmd_query_parse)
    p = qsub.add_parser("compile", help="compile a query file against frozen parses")
    p.add_argument("queryfile", help="one query per line, optional leading id<TAB>")
    p.add_argument("--parses", required=True,
                   help="CoNLL-U with one parse per query, aligned by position")
    p.add_argument("--triggers", default=None, help="JSON trigger map to expand first")
    p.add_argument("--out", required=True, help="patterns JSON output")
    p.set_defaults(func=cmd_query_compile)

    p = sub.add_parser("search", help="run a pattern over an index")
    p.add_argument("index", help="index directory")
    p.add_argument("pattern_file", help="pattern JSON")
    p.add_argument("--pattern", default=None, help="pattern id when the file holds several")
    p.add_argument("--limit", type=int, default=10)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--store", default=None, help="corpus snapshot override")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sample", help="deterministic uniform sample of matches")
    p.add_argument("index")
    p.add_argument("pattern_file")
    p.add_argument("--pattern", default=None)
    p.add_argument("-n", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--store", default=None)
    p.set_defaults(func=cmd_sample)

    d = sub.add_parser("dataset", help="dataset builds")
    dsub = d.add_subparsers(dest="dataset_command", required=True)
    p = dsub.add_parser("build", help="build a training set from a JSON config")
    p.add_argument("config", help="JSON config with relation/query_ids/paths")
    p.set_defaults(func=cmd_dataset_build)

    p = sub.add_parser("eval", help="evaluate patterns against gold instances")
    p.add_argument("patterns", help="patterns JSON")
    p.add_argument("gold", help="gold JSONL (inline conllu or sidecar)")
    p.add_argument("--parses", default=None, help="sidecar CoNLL-U keyed by example id")
    p.set_defaults(func=cmd_eval)

    pr = sub.add_parser("project", help="project directory tooling")
    prsub = pr.add_subparsers(dest="project_command", required=True)
    p = prsub.add_parser("init", help="create a project directory from store + index")
    p.add_argument("dir")
    p.add_argument("--store", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--parser-cmd", default=None,
                   help="external command: stripped sentence on stdin, CoNLL-U on stdout")
    p.set_defaults(func=cmd_project_init)

    p = sub.add_parser("serve", help="serve the HTTP API for a project")
    p.add_argument("project")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("SYNSEARCH_PORT", "8000")))
    p.add_argument("--ui", default=None, help="static directory with the built workbench")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except QueryParseError as err:
        json.dump({"error": type(err).__name__, "message": str(err),
                   "position": err.position}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except SynsearchError as err:
        json.dump({"error": type(err).__name__, "message": str(err)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except OSError as err:
        json.dump({"error": "OSError", "message": str(err)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
