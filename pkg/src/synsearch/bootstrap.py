"""Training-set assembly: pattern-matched positives, signature-gated negatives.

Positives are the deduplicated union of matches across the kept patterns.
Negative candidates are (sentence, ordered mention pair) units whose entity
types satisfy the relation signature; a candidate is excluded when any kept
pattern connects that exact pair, then the remainder is sampled uniformly at
a configured ratio (10 negatives per positive by default).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus
from .engine import CorpusIndex, candidate_positions, iter_matches, match_pattern
from .errors import SynsearchError
from .patterns import Pattern

E1_START, E1_END = "[E1start]", "[E1end]"
E2_START, E2_END = "[E2start]", "[E2end]"
MARKER_TOKENS = (E1_START, E1_END, E2_START, E2_END)

POSITIVE = "positive"
NEGATIVE = "negative"
NEGATIVE_SOURCE = "sampled-negative"


class BootstrapError(SynsearchError):
    """Dataset assembly cannot proceed (empty positives, untyped relation, ...)."""


@dataclass(frozen=True, slots=True)
class DatasetExample:
    id: str
    relation: str
    label: str  # positive | negative
    tokens: tuple[str, ...]
    e1_span: tuple[int, int]
    e2_span: tuple[int, int]
    source: str  # pattern id, or "sampled-negative"
    sentence_id: str


@dataclass(frozen=True, slots=True)
class BootstrapConfig:
    relation: str
    query_ids: tuple[str, ...]
    max_positives: int = 100
    neg_ratio: int = 10
    seed: int = 0
    signature_override: tuple[frozenset[str], frozenset[str]] | None = None

    def __post_init__(self):
        if self.max_positives < 1:
            raise BootstrapError("max_positives must be >= 1")
        if self.neg_ratio < 0:
            raise BootstrapError("neg_ratio must be >= 0")


@dataclass
class QueryQualityRecord:
    """Validation state for one pattern: 5 sampled matches, yes/no labels."""
    pattern_id: str
    sample_seed: int | None = None
    match_refs: list[dict] = field(default_factory=list)
    labels: list[bool | None] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if not self.match_refs or len(self.labels) < len(self.match_refs) \
                or any(l is None for l in self.labels):
            return "pending"
        return quality_filter([l for l in self.labels if l is not None])


def quality_filter(labels: list[bool]) -> str:
    """Keep a pattern unless more than one sampled result fails validation."""
    if not 1 <= len(labels) <= 5:
        raise ValueError("expected between 1 and 5 labels")
    return "excluded" if labels.count(False) >= 2 else "kept"


def parse_labels(raw: list) -> list[bool]:
    labels = []
    for item in raw:
        if isinstance(item, bool):
            labels.append(item)
        elif isinstance(item, str) and item.lower() in ("yes", "no"):
            labels.append(item.lower() == "yes")
        else:
            raise ValueError(f"label must be yes/no, got {item!r}")
    return labels


def _example_tokens(corpus: Corpus, sentence_id: str) -> tuple[str, ...]:
    return tuple(corpus.get(sentence_id).words())


def collect_positives(patterns: list[Pattern], index: CorpusIndex, relation: str,
                      max_positives: int, seed: int) -> list[DatasetExample]:
    """Deduplicated union of matches across patterns, capped deterministically.

    One example per (sentence, argument pair); when several patterns fire on
    the same pair the first pattern in id order wins as the source.
    """
    units: dict[tuple[int, tuple[int, int], tuple[int, int]], str] = {}
    for pattern in sorted(patterns, key=lambda p: p.id):
        for match in iter_matches(pattern, index):
            key = (index.corpus.position(match.sentence_id),
                   match.bindings["e1"], match.bindings["e2"])
            units.setdefault(key, pattern.id)
    if not units:
        raise BootstrapError("empty positive set: no pattern matched the corpus")
    keys = sorted(units)
    if len(keys) > max_positives:
        rng = random.Random(seed)
        keys = sorted(rng.sample(keys, max_positives))
    examples = []
    for i, key in enumerate(keys, start=1):
        pos, e1, e2 = key
        sent = index.corpus[pos]
        examples.append(DatasetExample(
            id=f"p{i:04d}", relation=relation, label=POSITIVE,
            tokens=tuple(sent.words()), e1_span=e1, e2_span=e2,
            source=units[key], sentence_id=sent.id))
    return examples


def relation_signature(patterns: list[Pattern]) -> tuple[frozenset[str], frozenset[str]]:
    """Union of the e1 / e2 entity-type sets across patterns."""
    e1_types: frozenset[str] = frozenset()
    e2_types: frozenset[str] = frozenset()
    for p in patterns:
        e1_types |= p.signature[0]
        e2_types |= p.signature[1]
    for name, types in (("e1", e1_types), ("e2", e2_types)):
        if not types:
            raise BootstrapError(
                f"untyped relation: no entity constraint on {name} in any pattern")
    return (e1_types, e2_types)


def sample_negatives(index: CorpusIndex, signature: tuple[frozenset[str], frozenset[str]],
                     kept_patterns: list[Pattern], positives: list[DatasetExample],
                     neg_ratio: int, seed: int,
                     relation: str) -> tuple[list[DatasetExample], dict]:
    """Signature-compatible, pattern-disconnected pairs, sampled at the ratio.

    Returns (negatives, report); when fewer candidates exist than the target,
    every candidate is returned and the report carries the shortfall.
    """
    if not positives:
        raise BootstrapError("sample_negatives requires a non-empty positive set")
    corpus = index.corpus
    positive_keys = {
        (corpus.position(x.sentence_id), x.e1_span, x.e2_span) for x in positives
    }

    connected: dict[int, set[tuple[tuple[int, int], tuple[int, int]]]] = {}
    for pattern in kept_patterns:
        for pos in candidate_positions(pattern, index):
            pairs = connected.setdefault(pos, set())
            for m in match_pattern(pattern, corpus[pos], index.mentions_for(pos)):
                pairs.add((m.bindings["e1"], m.bindings["e2"]))

    e1_types, e2_types = signature
    candidates: list[tuple[int, tuple[int, int], tuple[int, int]]] = []
    for pos in range(len(corpus)):
        mentions = index.mentions_for(pos)
        firsts = [m for m in mentions if m.entity_type in e1_types]
        seconds = [m for m in mentions if m.entity_type in e2_types]
        if not firsts or not seconds:
            continue
        pattern_pairs = connected.get(pos, ())
        for m1 in firsts:
            for m2 in seconds:
                if m1.span == m2.span:
                    continue
                key = (pos, m1.span, m2.span)
                if key in positive_keys:
                    continue
                if (m1.span, m2.span) in pattern_pairs:
                    continue
                candidates.append(key)

    target = neg_ratio * len(positives)
    if len(candidates) > target:
        rng = random.Random(seed)
        chosen = sorted(rng.sample(candidates, target))
    else:
        chosen = candidates
    report = {
        "target": target,
        "available": len(candidates),
        "sampled": len(chosen),
        "shortfall": max(0, target - len(candidates)),
    }
    negatives = []
    for i, (pos, e1, e2) in enumerate(chosen, start=1):
        sent = corpus[pos]
        negatives.append(DatasetExample(
            id=f"n{i:05d}", relation=relation, label=NEGATIVE,
            tokens=tuple(sent.words()), e1_span=e1, e2_span=e2,
            source=NEGATIVE_SOURCE, sentence_id=sent.id))
    return negatives, report


@dataclass
class BuildResult:
    relation: str
    positives: list[DatasetExample]
    negatives: list[DatasetExample]
    stats: dict

    @property
    def examples(self) -> list[DatasetExample]:
        return self.positives + self.negatives


def build_dataset(config: BootstrapConfig, index: CorpusIndex,
                  patterns: list[Pattern], verdicts: dict[str, str] | None = None,
                  include_pending: bool = False) -> BuildResult:
    """Run the full assembly: kept patterns -> positives -> ratio-sampled negatives.

    ``verdicts`` maps pattern id to kept/excluded/pending (absent means kept,
    the scripted-pipeline default).  Excluded patterns are skipped silently and
    noted in the stats; pending ones abort unless ``include_pending``.
    """
    by_id = {p.id: p for p in patterns}
    missing = [q for q in config.query_ids if q not in by_id]
    if missing:
        raise BootstrapError(f"unknown query ids: {', '.join(missing)}")
    verdicts = verdicts or {}
    kept, skipped, pending = [], [], []
    for qid in config.query_ids:
        verdict = verdicts.get(qid, "kept")
        if verdict == "excluded":
            skipped.append(qid)
        elif verdict == "pending":
            pending.append(qid)
        else:
            kept.append(by_id[qid])
    if pending and not include_pending:
        raise BootstrapError(
            f"queries with pending verdicts: {', '.join(pending)} "
            f"(label them or force with include_pending)")
    kept.extend(by_id[qid] for qid in pending)
    kept.sort(key=lambda p: p.id)
    if not kept:
        raise BootstrapError("no kept patterns to build from")

    per_pattern: dict[str, int] = {}
    unique_units: set = set()
    for p in kept:
        count = 0
        for m in iter_matches(p, index):
            count += 1
            unique_units.add((m.sentence_id, m.bindings["e1"], m.bindings["e2"]))
        per_pattern[p.id] = count
    positives = collect_positives(kept, index, config.relation,
                                  config.max_positives, config.seed)
    signature = config.signature_override or relation_signature(kept)
    if config.neg_ratio > 0:
        negatives, report = sample_negatives(
            index, signature, kept, positives, config.neg_ratio, config.seed,
            config.relation)
    else:
        negatives, report = [], {"target": 0, "available": 0, "sampled": 0, "shortfall": 0}

    raw_total = sum(per_pattern.values())
    stats = {
        "relation": config.relation,
        "patterns_used": [p.id for p in kept],
        "patterns_skipped": skipped,
        "patterns_forced_pending": pending,
        "per_pattern_matches": per_pattern,
        "raw_matches": raw_total,
        "unique_pairs": len(unique_units),
        "dedup_losses": raw_total - len(unique_units),
        "positives": len(positives),
        "max_positives": config.max_positives,
        "neg_ratio": config.neg_ratio,
        "negatives": len(negatives),
        "achieved_ratio": (len(negatives) / len(positives)) if positives else 0.0,
        "negative_sampling": report,
        "signature": [sorted(signature[0]), sorted(signature[1])],
        "seed": config.seed,
    }
    return BuildResult(relation=config.relation, positives=positives,
                       negatives=negatives, stats=stats)


def example_to_dict(x: DatasetExample) -> dict:
    return {
        "id": x.id,
        "relation": x.relation,
        "label": x.label,
        "tokens": list(x.tokens),
        "e1": list(x.e1_span),
        "e2": list(x.e2_span),
        "source": x.source,
        "sentence_id": x.sentence_id,
    }


def example_from_dict(d: dict) -> DatasetExample:
    return DatasetExample(
        id=d["id"], relation=d["relation"], label=d["label"],
        tokens=tuple(d["tokens"]), e1_span=tuple(d["e1"]), e2_span=tuple(d["e2"]),
        source=d["source"], sentence_id=d["sentence_id"])


def dataset_jsonl(examples: list[DatasetExample]) -> str:
    return "".join(json.dumps(example_to_dict(x), ensure_ascii=False) + "\n"
                   for x in examples)


def render_entity_markers(x: DatasetExample) -> str:
    """One training line: tokens with argument markers, a tab, then the label."""
    parts = []
    for i, tok in enumerate(x.tokens):
        if i == x.e1_span[0]:
            parts.append(E1_START)
        if i == x.e2_span[0]:
            parts.append(E2_START)
        parts.append(tok)
        if i == x.e1_span[1]:
            parts.append(E1_END)
        if i == x.e2_span[1]:
            parts.append(E2_END)
    return " ".join(parts) + "\t" + x.label


def export_entity_markers(examples: list[DatasetExample]) -> str:
    return "".join(render_entity_markers(x) + "\n" for x in examples)


def strip_entity_markers(line: str) -> list[str]:
    text = line.split("\t", 1)[0]
    return [tok for tok in text.split(" ") if tok not in MARKER_TOKENS]


def write_dataset(result: BuildResult, out_dir) -> dict:
    """Write dataset.jsonl, markers.txt and stats.json; returns the file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "jsonl": out / "dataset.jsonl",
        "markers": out / "markers.txt",
        "stats": out / "stats.json",
    }
    files["jsonl"].write_text(dataset_jsonl(result.examples), encoding="utf-8")
    files["markers"].write_text(export_entity_markers(result.examples), encoding="utf-8")
    files["stats"].write_text(
        json.dumps(result.stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {name: str(p) for name, p in files.items()}
