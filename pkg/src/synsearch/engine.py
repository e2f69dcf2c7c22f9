"""Inverted index over parse attributes and tree-pattern matching.

The index maps (attribute kind, value) pairs to posting lists of
(sentence position, token positions).  Word and lemma postings are keyed
lowercase (matching is case-insensitive for those attributes); pos tags,
entity types and dependency labels are exact.  Entity postings list mention
head positions only.  The index is immutable after build and safe for
concurrent readers.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .corpus import Corpus, Mention, Sentence, extract_mentions, load_corpus
from .errors import SynsearchError
from .patterns import Pattern

INDEX_FORMAT = "synsearch-index"
INDEX_VERSION = 1

KINDS = ("word", "lemma", "pos", "entity_type", "dep_label")


class IndexError_(SynsearchError):
    """Unreadable index directory or corpus/index mismatch."""


@dataclass(frozen=True, slots=True)
class Match:
    sentence_id: str
    pattern_id: str
    bindings: dict[str, tuple[int, int]]  # capture name -> inclusive token span
    node_tokens: tuple[int, ...]  # matched token per pattern node

    def sort_key(self, root_node: int):
        return (self.node_tokens[root_node], sorted(self.bindings.items()))


def match_to_dict(match: Match) -> dict:
    return {
        "sentence_id": match.sentence_id,
        "pattern_id": match.pattern_id,
        "bindings": {name: list(span) for name, span in sorted(match.bindings.items())},
    }


class CorpusIndex:
    """Immutable inverted index over a corpus; build once, query concurrently."""

    def __init__(self, corpus: Corpus,
                 postings: dict[str, dict[str, list[tuple[int, tuple[int, ...]]]]],
                 mentions: list[list[Mention]], metadata: dict):
        self.corpus = corpus
        self._postings = postings
        self._mentions = mentions
        self.metadata = metadata

    @property
    def corpus_hash(self) -> str:
        return self.metadata["corpus_hash"]

    def postings(self, kind: str, value: str) -> list[tuple[int, tuple[int, ...]]]:
        if kind not in KINDS:
            raise KeyError(f"unknown attribute kind {kind!r}")
        return self._postings[kind].get(value, [])

    def posting_sentences(self, kind: str, value: str) -> set[int]:
        return {pos for pos, _ in self.postings(kind, value)}

    def mentions_for(self, pos: int) -> list[Mention]:
        return self._mentions[pos]

    def stats(self) -> dict:
        return {
            "sentences": len(self.corpus),
            "tokens": self.metadata["tokens"],
            "corpus_hash": self.corpus_hash,
            "postings": {kind: len(vals) for kind, vals in self._postings.items()},
            "entity_types": {
                etype: sum(len(positions) for _, positions in entries)
                for etype, entries in sorted(self._postings["entity_type"].items())
            },
        }


def build_index(corpus: Corpus) -> CorpusIndex:
    postings: dict[str, dict[str, list]] = {kind: {} for kind in KINDS}

    def add(kind: str, value: str, pos: int, tok: int) -> None:
        entries = postings[kind].setdefault(value, [])
        if entries and entries[-1][0] == pos:
            entries[-1][1].append(tok)
        else:
            entries.append([pos, [tok]])

    mentions_per_sentence: list[list[Mention]] = []
    token_count = 0
    for pos, sent in enumerate(corpus):
        token_count += len(sent.tokens)
        for t in sent.tokens:
            add("word", t.word.lower(), pos, t.index)
            add("lemma", t.lemma.lower(), pos, t.index)
            add("pos", t.pos, pos, t.index)
            add("dep_label", t.dep_label, pos, t.index)
        mentions = extract_mentions(sent)
        mentions_per_sentence.append(mentions)
        for m in mentions:
            add("entity_type", m.entity_type, pos, m.head_token)

    frozen = {
        kind: {value: [(p, tuple(toks)) for p, toks in entries]
               for value, entries in vals.items()}
        for kind, vals in postings.items()
    }
    metadata = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "corpus_hash": corpus.content_hash(),
        "sentences": len(corpus),
        "tokens": token_count,
    }
    return CorpusIndex(corpus, frozen, mentions_per_sentence, metadata)


def candidate_positions(pattern: Pattern, index: CorpusIndex) -> list[int]:
    """Sentence positions that can possibly match: intersection of the posting
    sentence sets of every hard node constraint and required dep label
    (disjunctive value sets union their postings first).  Superset-safe."""
    terms: list[set[int]] = []
    for nd in pattern.nodes:
        for kind, values in (("word", nd.word_set), ("lemma", nd.lemma_set),
                             ("pos", nd.pos_set), ("entity_type", nd.entity_set)):
            if values is None:
                continue
            ids: set[int] = set()
            for v in values:
                ids |= index.posting_sentences(kind, v)
            terms.append(ids)
    for edge in pattern.edges:
        terms.append(index.posting_sentences("dep_label", edge.dep_label))
    if not terms:
        return list(range(len(index.corpus)))
    terms.sort(key=len)
    result = terms[0]
    for t in terms[1:]:
        result = result & t
        if not result:
            break
    return sorted(result)


def candidates(pattern: Pattern, index: CorpusIndex) -> list[str]:
    return [index.corpus[pos].id for pos in candidate_positions(pattern, index)]


def match_pattern(pattern: Pattern, sentence: Sentence,
                  mentions: list[Mention] | None = None) -> list[Match]:
    """All injective embeddings of the pattern tree into the sentence's parse.

    Every pattern edge must map onto a dependency edge with the same label and
    direction; entity constraints are satisfied only by mention head tokens of
    an admissible type.  Captures are expanded per the ``<>`` rules
    (entity-constrained node: full mention span; otherwise: covering span of
    the node's subtree).  Matches whose e1/e2 bindings overlap are dropped.
    """
    n = len(sentence.tokens)
    if mentions is None:
        mentions = extract_mentions(sentence)
    mention_by_head = {m.head_token: m for m in mentions}

    children: list[list[int]] = [[] for _ in range(n)]
    for t in sentence.tokens:
        if t.head >= 0:
            children[t.head].append(t.index)

    subtree_cache: dict[int, tuple[int, int]] = {}

    def subtree_span(i: int) -> tuple[int, int]:
        if i not in subtree_cache:
            lo = hi = i
            stack = [i]
            while stack:
                j = stack.pop()
                lo, hi = min(lo, j), max(hi, j)
                stack.extend(children[j])
            subtree_cache[i] = (lo, hi)
        return subtree_cache[i]

    def node_ok(node_idx: int, tok_idx: int) -> bool:
        nd = pattern.nodes[node_idx]
        tok = sentence.tokens[tok_idx]
        if nd.word_set is not None and tok.word.lower() not in nd.word_set:
            return False
        if nd.lemma_set is not None and tok.lemma.lower() not in nd.lemma_set:
            return False
        if nd.pos_set is not None and tok.pos not in nd.pos_set:
            return False
        if nd.entity_set is not None:
            m = mention_by_head.get(tok_idx)
            if m is None or m.entity_type not in nd.entity_set:
                return False
        return True

    root = pattern.root()
    # preorder: (node, parent node, edge label); parent always precedes child
    order: list[tuple[int, int | None, str | None]] = []
    stack = [(root, None, None)]
    while stack:
        node, parent, label = stack.pop()
        order.append((node, parent, label))
        for child, lab in pattern.children(node):
            stack.append((child, node, lab))

    results: list[Match] = []
    assignment: list[int | None] = [None] * len(pattern.nodes)
    used: set[int] = set()

    def bindings_of() -> dict[str, tuple[int, int]] | None:
        bindings: dict[str, tuple[int, int]] = {}
        for node_idx, nd in enumerate(pattern.nodes):
            if nd.capture_name is None:
                continue
            tok_idx = assignment[node_idx]
            if nd.expand and nd.entity_set is not None:
                m = mention_by_head[tok_idx]
                bindings[nd.capture_name] = (m.start, m.end)
            elif nd.expand:
                bindings[nd.capture_name] = subtree_span(tok_idx)
            else:
                bindings[nd.capture_name] = (tok_idx, tok_idx)
        e1, e2 = bindings.get("e1"), bindings.get("e2")
        if e1 is not None and e2 is not None \
                and e1[0] <= e2[1] and e2[0] <= e1[1]:  # overlapping argument spans
            return None
        return bindings

    def backtrack(k: int) -> None:
        if k == len(order):
            bindings = bindings_of()
            if bindings is not None:
                results.append(Match(
                    sentence_id=sentence.id, pattern_id=pattern.id,
                    bindings=bindings, node_tokens=tuple(assignment)))
            return
        node, parent, label = order[k]
        if parent is None:
            choices = range(n)
        else:
            parent_tok = assignment[parent]
            choices = [c for c in children[parent_tok]
                       if sentence.tokens[c].dep_label == label]
        for tok_idx in choices:
            if tok_idx in used or not node_ok(node, tok_idx):
                continue
            assignment[node] = tok_idx
            used.add(tok_idx)
            backtrack(k + 1)
            used.discard(tok_idx)
            assignment[node] = None

    backtrack(0)
    results.sort(key=lambda m: m.sort_key(root))
    return results


def iter_matches(pattern: Pattern, index: CorpusIndex) -> Iterator[Match]:
    """Matches over the whole corpus in ascending sentence-store order."""
    for pos in candidate_positions(pattern, index):
        yield from match_pattern(pattern, index.corpus[pos], index.mentions_for(pos))


def search(pattern: Pattern, index: CorpusIndex,
           limit: int | None = None, offset: int = 0) -> tuple[list[Match], int]:
    """Paginated corpus search; returns (page, total match count)."""
    matches = list(iter_matches(pattern, index))
    total = len(matches)
    if limit is None:
        page = matches[offset:]
    else:
        page = matches[offset:offset + limit]
    return page, total


def sample_matches(pattern: Pattern, index: CorpusIndex, n: int, seed: int) -> list[Match]:
    """Uniform sample of n matches without replacement, deterministic by seed.

    Single-pass reservoir sampling over the match stream; fewer than n matches
    returns them all.
    """
    if n < 0:
        raise ValueError("sample size must be non-negative")
    rng = random.Random(seed)
    reservoir: list[Match] = []
    for i, match in enumerate(iter_matches(pattern, index)):
        if i < n:
            reservoir.append(match)
        else:
            j = rng.randint(0, i)
            if j < n:
                reservoir[j] = match
    reservoir.sort(key=lambda m: (index.corpus.position(m.sentence_id), m.node_tokens))
    return reservoir


def save_index(index: CorpusIndex, path, store_path: str | None = None) -> None:
    """Write the index as a versioned directory: manifest + postings."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = dict(index.metadata)
    if store_path is not None:
        manifest["store_path"] = str(store_path)
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    serializable = {
        kind: {value: [[pos, list(toks)] for pos, toks in entries]
               for value, entries in vals.items()}
        for kind, vals in index._postings.items()
    }
    (root / "postings.json").write_text(json.dumps(serializable), encoding="utf-8")


def load_index(path, corpus: Corpus | None = None) -> CorpusIndex:
    """Load an index directory; verifies the manifest hash against the corpus."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise IndexError_(f"{path}: not an index directory (missing manifest.json)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != INDEX_FORMAT:
        raise IndexError_(f"{path}: not a synsearch index")
    if manifest.get("version") != INDEX_VERSION:
        raise IndexError_(
            f"{path}: index version mismatch "
            f"(found {manifest.get('version')!r}, expected {INDEX_VERSION})")
    if corpus is None:
        store_path = manifest.get("store_path")
        if store_path is None:
            raise IndexError_(f"{path}: no corpus supplied and manifest has no store_path")
        store = Path(store_path)
        if not store.is_absolute():
            store = root / store
        corpus = load_corpus(store)
    if corpus.content_hash() != manifest["corpus_hash"]:
        raise IndexError_(f"{path}: corpus hash mismatch; re-index the corpus")
    raw = json.loads((root / "postings.json").read_text(encoding="utf-8"))
    postings = {
        kind: {value: [(pos, tuple(toks)) for pos, toks in entries]
               for value, entries in raw.get(kind, {}).items()}
        for kind in KINDS
    }
    mentions = [extract_mentions(sent) for sent in corpus]
    return CorpusIndex(corpus, postings, mentions, manifest)
