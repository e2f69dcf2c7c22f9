"""Tree patterns over dependency parses and their compilation from queries.

A pattern is a small rooted tree of constrained nodes joined by labelled
dependency edges.  Compilation takes a markup query plus a dependency parse of
its stripped sentence, keeps the minimal connecting subgraph over the marked
tokens, and attaches the declared constraints (interior tokens on the
connecting path keep their lemma, which preserves lexical specificity while
tolerating inflection).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Mention, Sentence, Token, extract_mentions
from .errors import SynsearchError
from .querylang import (
    ROLE_ANCHOR,
    ROLE_CAPTURE,
    ROLE_CONTEXT,
    Constraint,
    QueryElement,
    QueryExample,
)

PATTERNS_FORMAT = "synsearch-patterns"
PATTERNS_VERSION = 1


class PatternError(SynsearchError):
    """Structurally invalid pattern."""


class PatternCompileError(SynsearchError):
    """Query cannot be compiled against the supplied parse."""


@dataclass(frozen=True, slots=True)
class PatternNode:
    word_set: frozenset[str] | None = None  # lowercased
    lemma_set: frozenset[str] | None = None  # lowercased
    pos_set: frozenset[str] | None = None
    entity_set: frozenset[str] | None = None
    capture_name: str | None = None
    expand: bool = False

    def is_vacuous(self) -> bool:
        return (self.word_set is None and self.lemma_set is None
                and self.pos_set is None and self.entity_set is None
                and self.capture_name is None)


@dataclass(frozen=True, slots=True)
class PatternEdge:
    parent: int
    child: int
    dep_label: str


@dataclass(frozen=True, slots=True)
class Pattern:
    id: str
    nodes: tuple[PatternNode, ...]
    edges: tuple[PatternEdge, ...]
    signature: tuple[frozenset[str], frozenset[str]]

    def root(self) -> int:
        children = {e.child for e in self.edges}
        roots = [i for i in range(len(self.nodes)) if i not in children]
        if len(roots) != 1:
            raise PatternError(f"pattern {self.id!r} has {len(roots)} roots")
        return roots[0]

    def children(self, node: int) -> list[tuple[int, str]]:
        return [(e.child, e.dep_label) for e in self.edges if e.parent == node]

    def node_for(self, capture_name: str) -> int:
        for i, nd in enumerate(self.nodes):
            if nd.capture_name == capture_name:
                return i
        raise KeyError(capture_name)


def validate_pattern(pattern: Pattern) -> None:
    n = len(pattern.nodes)
    if n == 0:
        raise PatternError("pattern has no nodes")
    if len(pattern.edges) != n - 1:
        raise PatternError("pattern edges do not form a tree")
    for e in pattern.edges:
        if not (0 <= e.parent < n and 0 <= e.child < n) or e.parent == e.child:
            raise PatternError(f"bad edge {e}")
    root = pattern.root()  # raises on multiple roots
    seen = set()
    stack = [root]
    while stack:
        i = stack.pop()
        if i in seen:
            raise PatternError("pattern edges contain a cycle")
        seen.add(i)
        stack.extend(c for c, _ in pattern.children(i))
    if len(seen) != n:
        raise PatternError("pattern edges do not connect all nodes")
    captures = [nd.capture_name for nd in pattern.nodes if nd.capture_name]
    if len(captures) != len(set(captures)):
        raise PatternError("duplicate capture names")
    for required in ("e1", "e2"):
        if required not in captures:
            raise PatternError(f"pattern lacks an {required} capture")
    for i, nd in enumerate(pattern.nodes):
        if nd.is_vacuous():
            raise PatternError(f"node {i} is fully unconstrained and uncaptured")


def minimal_connecting_subgraph(heads: Sequence[int], marked: Iterable[int]) -> set[int]:
    """Smallest connected node set of the tree containing all marked nodes.

    In a tree this is the union of the unique paths between marked nodes,
    computed here as the union of paths from each marked node to a fixed one.
    """
    marked = list(marked)
    n = len(heads)
    if not marked:
        raise ValueError("marked set is empty")
    for m in marked:
        if not 0 <= m < n:
            raise ValueError(f"marked index {m} out of range")

    depth = [-1] * n

    def depth_of(i: int) -> int:
        trail = []
        while depth[i] < 0:
            trail.append(i)
            if heads[i] == -1:
                depth[i] = 0
                break
            i = heads[i]
            if len(trail) > n:
                raise ValueError("head array does not encode a tree")
        d = depth[i]
        for j in reversed(trail):
            if depth[j] < 0:
                d += 1
                depth[j] = d
        return depth[trail[0]] if trail else depth[i]

    def path(a: int, b: int) -> set[int]:
        nodes = {a, b}
        da, db = depth_of(a), depth_of(b)
        while da > db:
            a = heads[a]
            nodes.add(a)
            da -= 1
        while db > da:
            b = heads[b]
            nodes.add(b)
            db -= 1
        while a != b:
            a, b = heads[a], heads[b]
            if a < 0 or b < 0:
                raise ValueError("head array does not encode a tree")
            nodes.update((a, b))
        return nodes

    base = marked[0]
    result = {base}
    for m in marked[1:]:
        result |= path(base, m)
    return result


def _lower(values: Iterable[str]) -> frozenset[str]:
    return frozenset(v.lower() for v in values)


def _mention_covering(mentions: list[Mention], index: int) -> Mention | None:
    for m in mentions:
        if m.start <= index <= m.end:
            return m
    return None


def _node_from_element(el: QueryElement, token: Token,
                       mention: Mention | None) -> PatternNode:
    word_set = lemma_set = pos_set = entity_set = None
    for c in el.constraints:
        if c.key == "w":
            word_set = _lower((token.word,) if c.bare else c.values)
        elif c.key == "l":
            lemma_set = _lower((token.lemma,) if c.bare else c.values)
        elif c.key == "t":
            pos_set = frozenset((token.pos,) if c.bare else c.values)
        elif c.key == "e":
            if c.bare:
                if mention is None:
                    raise PatternCompileError(
                        f"bare entity constraint on untagged token {token.word!r}")
                entity_set = frozenset((mention.entity_type,))
            else:
                entity_set = frozenset(c.values)
    return PatternNode(
        word_set=word_set, lemma_set=lemma_set, pos_set=pos_set,
        entity_set=entity_set, capture_name=el.capture_name, expand=el.expand,
    )


def compile_query(query: QueryExample, parse: Sentence,
                  pattern_id: str | None = None) -> Pattern:
    """Compile a query against the dependency parse of its stripped sentence.

    The parse tokens must align one to one with the query elements (same count
    and surfaces, case-insensitively).  Marked tokens that sit inside a
    multi-token entity mention anchor the pattern at the mention's head token.
    """
    if len(parse.tokens) != len(query.elements):
        raise PatternCompileError(
            f"alignment failure: query has {len(query.elements)} elements, "
            f"parse {parse.id!r} has {len(parse.tokens)} tokens")
    for el, tok in zip(query.elements, parse.tokens):
        if el.surface.lower() != tok.word.lower():
            raise PatternCompileError(
                f"alignment failure at token {tok.index}: "
                f"query says {el.surface!r}, parse says {tok.word!r}")

    mentions = extract_mentions(parse)
    marked: dict[int, QueryElement] = {}
    anchored_mention: dict[int, Mention | None] = {}
    for i, el in enumerate(query.elements):
        if el.role == ROLE_CONTEXT:
            continue
        mention = _mention_covering(mentions, i)
        anchor_at = i
        if el.role == ROLE_CAPTURE and any(c.key == "e" for c in el.constraints) \
                and mention is not None:
            anchor_at = mention.head_token
        if anchor_at in marked:
            raise PatternCompileError(
                f"elements {marked[anchor_at].surface!r} and {el.surface!r} "
                f"anchor to the same token {anchor_at}")
        marked[anchor_at] = el
        anchored_mention[anchor_at] = _mention_covering(mentions, anchor_at)

    heads = [t.head for t in parse.tokens]
    keep = sorted(minimal_connecting_subgraph(heads, marked.keys()))
    node_pos = {tok: i for i, tok in enumerate(keep)}

    nodes = []
    for tok_idx in keep:
        token = parse.tokens[tok_idx]
        el = marked.get(tok_idx)
        if el is None:
            nodes.append(PatternNode(lemma_set=_lower((token.lemma,))))
        elif el.role == ROLE_ANCHOR:
            nodes.append(PatternNode(word_set=_lower((el.surface,))))
        else:
            nodes.append(_node_from_element(el, token, anchored_mention[tok_idx]))

    edges = []
    for tok_idx in keep:
        h = heads[tok_idx]
        if h in node_pos:
            edges.append(PatternEdge(
                parent=node_pos[h], child=node_pos[tok_idx],
                dep_label=parse.tokens[tok_idx].dep_label))

    def entity_of(name: str) -> frozenset[str]:
        for nd in nodes:
            if nd.capture_name == name:
                return nd.entity_set if nd.entity_set is not None else frozenset()
        raise PatternCompileError(f"missing {name} capture")  # unreachable after parse_query

    pattern = Pattern(
        id=pattern_id or query.id or "pattern",
        nodes=tuple(nodes), edges=tuple(edges),
        signature=(entity_of("e1"), entity_of("e2")),
    )
    validate_pattern(pattern)
    return pattern


def from_annotated_sentence(sentence: Sentence, e1: Mention, e2: Mention,
                            trigger: int | None = None,
                            pattern_id: str | None = None) -> Pattern:
    """Turn an annotated sentence directly into a pattern.

    Equivalent to compiling a synthetic query that marks the two mention heads
    (entity-constrained, expanded) and the optional trigger token (bare lemma
    constraint).
    """
    for name, m in (("e1", e1), ("e2", e2)):
        if m.sentence_id != sentence.id:
            raise PatternCompileError(f"{name} mention belongs to sentence {m.sentence_id!r}")
        if not (0 <= m.start <= m.end < len(sentence.tokens)):
            raise PatternCompileError(f"{name} span out of range")
    if trigger is not None:
        if not 0 <= trigger < len(sentence.tokens):
            raise PatternCompileError("trigger index out of range")
        if e1.start <= trigger <= e1.end or e2.start <= trigger <= e2.end:
            raise PatternCompileError("trigger inside a mention span")

    elements = []
    for tok in sentence.tokens:
        if tok.index == e1.head_token:
            elements.append(QueryElement(
                surface=tok.word, role=ROLE_CAPTURE, capture_name="e1",
                expand=True, constraints=(Constraint("e", (e1.entity_type,)),)))
        elif tok.index == e2.head_token:
            elements.append(QueryElement(
                surface=tok.word, role=ROLE_CAPTURE, capture_name="e2",
                expand=True, constraints=(Constraint("e", (e2.entity_type,)),)))
        elif trigger is not None and tok.index == trigger:
            elements.append(QueryElement(
                surface=tok.word, role=ROLE_CAPTURE, capture_name="t",
                constraints=(Constraint("l", bare=True),)))
        else:
            elements.append(QueryElement(surface=tok.word, role=ROLE_CONTEXT))
    query = QueryExample(
        raw=" ".join(sentence.words()), elements=tuple(elements), id=pattern_id)
    return compile_query(query, sentence, pattern_id=pattern_id)


def _set_to_json(s: frozenset[str] | None):
    return sorted(s) if s is not None else None


def pattern_to_dict(pattern: Pattern) -> dict:
    return {
        "id": pattern.id,
        "nodes": [
            {
                "word": _set_to_json(nd.word_set),
                "lemma": _set_to_json(nd.lemma_set),
                "pos": _set_to_json(nd.pos_set),
                "entity": _set_to_json(nd.entity_set),
                "capture": nd.capture_name,
                "expand": nd.expand,
            }
            for nd in pattern.nodes
        ],
        "edges": [
            {"parent": e.parent, "child": e.child, "label": e.dep_label}
            for e in pattern.edges
        ],
        "signature": {
            "e1": sorted(pattern.signature[0]),
            "e2": sorted(pattern.signature[1]),
        },
    }


def _set_from_json(v) -> frozenset[str] | None:
    return frozenset(v) if v is not None else None


def pattern_from_dict(data: dict) -> Pattern:
    try:
        nodes = tuple(
            PatternNode(
                word_set=_set_from_json(nd.get("word")),
                lemma_set=_set_from_json(nd.get("lemma")),
                pos_set=_set_from_json(nd.get("pos")),
                entity_set=_set_from_json(nd.get("entity")),
                capture_name=nd.get("capture"),
                expand=bool(nd.get("expand", False)),
            )
            for nd in data["nodes"]
        )
        edges = tuple(
            PatternEdge(parent=e["parent"], child=e["child"], dep_label=e["label"])
            for e in data["edges"]
        )
        sig = data.get("signature", {})
        pattern = Pattern(
            id=data["id"], nodes=nodes, edges=edges,
            signature=(frozenset(sig.get("e1", ())), frozenset(sig.get("e2", ()))),
        )
    except (KeyError, TypeError) as err:
        raise PatternError(f"malformed pattern JSON: {err}") from None
    validate_pattern(pattern)
    return pattern


def save_patterns(patterns: Iterable[Pattern], path) -> None:
    doc = {
        "format": PATTERNS_FORMAT,
        "version": PATTERNS_VERSION,
        "patterns": [pattern_to_dict(p) for p in patterns],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_patterns(path) -> list[Pattern]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "patterns" in data:
        if data.get("format") != PATTERNS_FORMAT:
            raise PatternError(f"{path}: not a pattern file")
        items = data["patterns"]
    elif isinstance(data, list):
        items = data
    else:
        items = [data]
    return [pattern_from_dict(d) for d in items]
