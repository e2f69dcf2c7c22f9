"""Project directory: corpus store + index + registered queries + built datasets.

Layout (stable, version-controllable):

    project/
      project.json     settings (store/index paths, optional parser command)
      store.jsonl      corpus snapshot
      index/           inverted index (manifest.json, postings.json)
      queries.json     registered queries with compile status and quality labels
      datasets/<id>/   immutable build artifacts (dataset.jsonl, markers.txt, stats.json)

Reads are unrestricted; mutations go through a single writer lock.
"""

from __future__ import annotations

import json
import shlex
import shutil
import subprocess
import threading
from pathlib import Path

from . import bootstrap, engine, patterns, querylang
from .bootstrap import BootstrapConfig
from .corpus import load_corpus, parse_conllu
from .errors import SynsearchError

PROJECT_FORMAT = "synsearch-project"
PROJECT_VERSION = 1


class ProjectError(SynsearchError):
    """Missing or inconsistent project directory."""


def _signature_from_json(raw) -> tuple[frozenset, frozenset] | None:
    if raw is None:
        return None
    return (frozenset(raw[0]), frozenset(raw[1]))


def config_from_dict(data: dict) -> BootstrapConfig:
    try:
        return BootstrapConfig(
            relation=data["relation"],
            query_ids=tuple(data["query_ids"]),
            max_positives=int(data.get("max_positives", 100)),
            neg_ratio=int(data.get("neg_ratio", 10)),
            seed=int(data.get("seed", 0)),
            signature_override=_signature_from_json(data.get("signature_override")),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise bootstrap.BootstrapError(f"bad dataset config: {err}") from None


def config_to_dict(config: BootstrapConfig) -> dict:
    return {
        "relation": config.relation,
        "query_ids": list(config.query_ids),
        "max_positives": config.max_positives,
        "neg_ratio": config.neg_ratio,
        "seed": config.seed,
        "signature_override": (
            [sorted(config.signature_override[0]), sorted(config.signature_override[1])]
            if config.signature_override else None),
    }


class Project:
    """Persistent workbench state around one corpus and its index."""

    def __init__(self, root):
        self.root = Path(root)
        settings_path = self.root / "project.json"
        if not settings_path.exists():
            raise ProjectError(f"{self.root}: not a project (missing project.json)")
        self.settings = json.loads(settings_path.read_text(encoding="utf-8"))
        if self.settings.get("format") != PROJECT_FORMAT:
            raise ProjectError(f"{self.root}: not a synsearch project")
        if self.settings.get("version") != PROJECT_VERSION:
            raise ProjectError(f"{self.root}: project version mismatch")
        self.corpus = load_corpus(self.root / "store.jsonl")
        self.index = engine.load_index(self.root / "index", self.corpus)
        self.queries: dict[str, dict] = {}
        queries_path = self.root / "queries.json"
        if queries_path.exists():
            self.queries = json.loads(queries_path.read_text(encoding="utf-8"))
        self.lock = threading.Lock()

    @classmethod
    def init(cls, root, store_path, index_path, parser_cmd: str | None = None) -> "Project":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(store_path, root / "store.jsonl")
        index_dst = root / "index"
        if index_dst.exists():
            shutil.rmtree(index_dst)
        shutil.copytree(index_path, index_dst)
        (root / "datasets").mkdir(exist_ok=True)
        settings = {
            "format": PROJECT_FORMAT,
            "version": PROJECT_VERSION,
            "parser_cmd": parser_cmd,
        }
        (root / "project.json").write_text(
            json.dumps(settings, indent=2) + "\n", encoding="utf-8")
        (root / "queries.json").write_text("{}\n", encoding="utf-8")
        return cls(root)

    # -- persistence ---------------------------------------------------------

    def _save_queries(self) -> None:
        (self.root / "queries.json").write_text(
            json.dumps(self.queries, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def dataset_dir(self, dataset_id: str) -> Path:
        return self.root / "datasets" / dataset_id

    def dataset_ids(self) -> list[str]:
        base = self.root / "datasets"
        if not base.exists():
            return []
        return sorted(p.name for p in base.iterdir() if p.is_dir())

    # -- queries -------------------------------------------------------------

    def _parse_for(self, stripped: str, conllu_text: str | None):
        if conllu_text:
            sentences = parse_conllu(conllu_text)
            if len(sentences) != 1:
                raise patterns.PatternCompileError(
                    "query parse must contain exactly one sentence")
            return sentences[0]
        parser_cmd = self.settings.get("parser_cmd")
        if not parser_cmd:
            raise patterns.PatternCompileError(
                "no parse available: supply CoNLL-U or configure parser_cmd")
        proc = subprocess.run(
            shlex.split(parser_cmd), input=stripped.encode("utf-8"),
            capture_output=True, timeout=120)
        if proc.returncode != 0:
            raise patterns.PatternCompileError(
                f"parser command failed: {proc.stderr.decode('utf-8', 'replace').strip()}")
        sentences = parse_conllu(proc.stdout)
        if len(sentences) != 1:
            raise patterns.PatternCompileError(
                "parser command must emit exactly one sentence")
        return sentences[0]

    def register_query(self, query_id: str, raw: str, conllu_text: str | None = None,
                       trigger_map: dict | None = None) -> dict:
        """Parse, optionally expand triggers, compile, and persist a query record.

        Grammar errors propagate (nothing is registered); compile failures are
        recorded on the query with status "error".  Re-registering the same id
        with identical inputs is a no-op.
        """
        query = querylang.parse_query(raw, query_id=query_id)
        if trigger_map:
            query = querylang.expand_triggers(query, trigger_map)
        record = {
            "id": query_id,
            "raw": raw,
            "stripped": querylang.strip(query),
            "trigger_map": trigger_map or None,
            "compile": {"status": "ok"},
            "pattern": None,
            "quality": None,
        }
        with self.lock:
            existing = self.queries.get(query_id)
            if existing is not None and existing["raw"] == raw \
                    and existing.get("trigger_map") == (trigger_map or None):
                return existing
            try:
                pattern = patterns.compile_query(
                    query, self._parse_for(record["stripped"], conllu_text),
                    pattern_id=query_id)
                record["pattern"] = patterns.pattern_to_dict(pattern)
            except SynsearchError as err:
                record["compile"] = {"status": "error", "message": str(err)}
            self.queries[query_id] = record
            self._save_queries()
        return record

    def get_query(self, query_id: str) -> dict:
        try:
            return self.queries[query_id]
        except KeyError:
            raise ProjectError(f"unknown query id {query_id!r}") from None

    def pattern_for(self, query_id: str) -> patterns.Pattern:
        record = self.get_query(query_id)
        if record["compile"]["status"] != "ok" or not record["pattern"]:
            raise ProjectError(f"query {query_id!r} has no compiled pattern")
        return patterns.pattern_from_dict(record["pattern"])

    def verdict_for(self, query_id: str) -> str:
        record = self.get_query(query_id)
        quality = record.get("quality")
        if not quality:
            return "pending"
        return quality.get("verdict", "pending")

    def sample_for_validation(self, query_id: str, n: int = 5, seed: int = 0) -> dict:
        """Draw the validation sample and reset the quality record to pending."""
        pattern = self.pattern_for(query_id)
        sample = engine.sample_matches(pattern, self.index, n, seed)
        refs = [engine.match_to_dict(m) for m in sample]
        with self.lock:
            record = self.get_query(query_id)
            record["quality"] = {
                "sample_seed": seed,
                "n": n,
                "matches": refs,
                "labels": [None] * len(refs),
                "verdict": "pending",
            }
            self._save_queries()
        return record["quality"]

    def submit_labels(self, query_id: str, labels: list[bool]) -> str:
        with self.lock:
            record = self.get_query(query_id)
            quality = record.get("quality")
            if not quality or not quality["matches"]:
                raise ProjectError(
                    f"query {query_id!r} has no validation sample to label")
            if len(labels) != len(quality["matches"]):
                raise ProjectError(
                    f"expected {len(quality['matches'])} labels, got {len(labels)}")
            quality["labels"] = list(labels)
            quality["verdict"] = bootstrap.quality_filter(labels)
            self._save_queries()
            return quality["verdict"]

    # -- datasets ------------------------------------------------------------

    def build_dataset(self, dataset_id: str, config: BootstrapConfig,
                      include_pending: bool = False) -> dict:
        """Build and persist an immutable dataset artifact under datasets/<id>."""
        with self.lock:
            out_dir = self.dataset_dir(dataset_id)
            config_path = out_dir / "config.json"
            desired = config_to_dict(config)
            if config_path.exists():
                existing = json.loads(config_path.read_text(encoding="utf-8"))
                if existing == desired:
                    return self.dataset_info(dataset_id)
                raise ProjectError(
                    f"dataset {dataset_id!r} already exists with a different config")
            pats = [self.pattern_for(qid) for qid in config.query_ids]
            verdicts = {qid: self.verdict_for(qid) for qid in config.query_ids}
            result = bootstrap.build_dataset(
                config, self.index, pats, verdicts=verdicts,
                include_pending=include_pending)
            out_dir.mkdir(parents=True, exist_ok=True)
            bootstrap.write_dataset(result, out_dir)
            config_path.write_text(json.dumps(desired, indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")
            (out_dir / "status.json").write_text(
                json.dumps({"status": "done"}) + "\n", encoding="utf-8")
        return self.dataset_info(dataset_id)

    def dataset_info(self, dataset_id: str) -> dict:
        out_dir = self.dataset_dir(dataset_id)
        stats_path = out_dir / "stats.json"
        if not stats_path.exists():
            raise ProjectError(f"unknown dataset id {dataset_id!r}")
        return {
            "id": dataset_id,
            "status": json.loads((out_dir / "status.json").read_text())["status"],
            "config": json.loads((out_dir / "config.json").read_text(encoding="utf-8")),
            "stats": json.loads(stats_path.read_text(encoding="utf-8")),
        }
