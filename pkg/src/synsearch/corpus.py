"""Sentence store for dependency-parsed, entity-tagged corpora.

Sentences arrive pre-parsed as CoNLL-U (NER tags ride in the MISC column as
``NER=B-PER`` style entries); this module validates them, extracts entity
mentions from the BIO tags, and round-trips a versioned JSONL snapshot.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path
from typing import Iterable, Iterator

from .errors import SynsearchError

log = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "synsearch-corpus"
SNAPSHOT_VERSION = 1


class ConlluError(SynsearchError):
    """Malformed CoNLL-U input, reported with sentence id and line number."""

    def __init__(self, message: str, sent_id: str | None = None, line: int | None = None):
        self.sent_id = sent_id
        self.line = line
        where = []
        if sent_id is not None:
            where.append(f"sentence {sent_id!r}")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class SnapshotError(SynsearchError):
    """Unreadable or incompatible corpus snapshot."""


@dataclass(frozen=True, slots=True)
class Token:
    index: int
    word: str
    lemma: str
    pos: str
    entity_tag: str  # "O" or "B-TYPE" / "I-TYPE"
    head: int  # 0-based index of the syntactic head, -1 for the root
    dep_label: str


@dataclass(frozen=True, slots=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]
    source: str | None = None

    def words(self) -> list[str]:
        return [t.word for t in self.tokens]

    def root(self) -> int:
        for t in self.tokens:
            if t.head == -1:
                return t.index
        raise ValueError(f"sentence {self.id!r} has no root")


@dataclass(frozen=True, slots=True)
class Mention:
    sentence_id: str
    start: int  # inclusive
    end: int  # inclusive
    entity_type: str
    head_token: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


def _check_bio(tags: Iterable[str]) -> str | None:
    """Return an error message if the BIO tag sequence is ill-formed."""
    prev = "O"
    for i, tag in enumerate(tags):
        if tag == "O":
            prev = tag
            continue
        if len(tag) < 3 or tag[1] != "-" or tag[0] not in "BI":
            return f"bad entity tag {tag!r} at token {i}"
        if tag[0] == "I":
            if prev == "O" or prev[2:] != tag[2:]:
                return f"I-{tag[2:]} at token {i} not preceded by B-{tag[2:]}/I-{tag[2:]}"
        prev = tag
    return None


def validate_sentence(sent: Sentence) -> None:
    """Enforce the structural invariants: single root, tree-shaped heads, valid BIO."""
    n = len(sent.tokens)
    if n == 0:
        raise ConlluError("sentence has no tokens", sent_id=sent.id)
    roots = []
    for t in sent.tokens:
        if t.head == t.index:
            raise ConlluError(f"self-loop head at token {t.index}", sent_id=sent.id)
        if t.head == -1:
            roots.append(t.index)
        elif not 0 <= t.head < n:
            raise ConlluError(f"head {t.head} out of range at token {t.index}", sent_id=sent.id)
    if len(roots) != 1:
        raise ConlluError(f"expected exactly one root, found {len(roots)}", sent_id=sent.id)
    # DFS from the root must reach every token exactly once, else the head
    # links contain a cycle or a disconnected component.
    children: list[list[int]] = [[] for _ in range(n)]
    for t in sent.tokens:
        if t.head >= 0:
            children[t.head].append(t.index)
    seen = [False] * n
    stack = [roots[0]]
    count = 0
    while stack:
        i = stack.pop()
        if seen[i]:
            raise ConlluError("head cycle detected", sent_id=sent.id)
        seen[i] = True
        count += 1
        stack.extend(children[i])
    if count != n:
        raise ConlluError("head cycle detected", sent_id=sent.id)
    msg = _check_bio(t.entity_tag for t in sent.tokens)
    if msg is not None:
        raise ConlluError(f"ill-formed BIO: {msg}", sent_id=sent.id)


def extract_mentions(sent: Sentence) -> list[Mention]:
    """One mention per maximal BIO run; the head is the first token whose syntactic head falls outside the span."""
    mentions = []
    start = None
    etype = None
    tags = [t.entity_tag for t in sent.tokens]

    def close(end: int) -> None:
        head = start
        for i in range(start, end + 1):
            h = sent.tokens[i].head
            if h == -1 or not start <= h <= end:
                head = i
                break
        mentions.append(Mention(sent.id, start, end, etype, head))

    for i, tag in enumerate(tags):
        if tag.startswith("B-"):
            if start is not None:
                close(i - 1)
            start, etype = i, tag[2:]
        elif tag == "O" and start is not None:
            close(i - 1)
            start = etype = None
    if start is not None:
        close(len(tags) - 1)
    return mentions


def _ner_from_misc(misc: str) -> str:
    if misc and misc != "_":
        for part in misc.split("|"):
            if part.startswith("NER="):
                return part[4:]
    return "O"


def _misc_from_ner(tag: str) -> str:
    return f"NER={tag}" if tag != "O" else "_"


def parse_conllu(source, strict: bool = True) -> list[Sentence]:
    """Parse CoNLL-U content (bytes, text, or a file object) into validated sentences.

    Sentence ids come from ``# sent_id`` comments when present, otherwise they
    are assigned sequentially.  In strict mode any malformed sentence aborts
    the parse; in lenient mode it is skipped and logged.
    """
    if isinstance(source, bytes):
        lines: Iterable[str] = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        lines = io.StringIO(source)
    elif hasattr(source, "read") and isinstance(source.read(0), bytes):
        lines = io.TextIOWrapper(source, encoding="utf-8")
    else:
        lines = source

    sentences: list[Sentence] = []
    rows: list[tuple[int, str]] = []
    comments: dict[str, str] = {}
    ordinal = 0

    def flush() -> None:
        nonlocal ordinal
        if not rows:
            comments.clear()
            return
        ordinal += 1
        sent_id = comments.get("sent_id", f"s{ordinal}")
        source_text = comments.get("source")
        try:
            sentences.append(_parse_block(rows, sent_id, source_text))
        except ConlluError as err:
            if strict:
                raise
            log.warning("skipping sentence: %s", err)
        rows.clear()
        comments.clear()

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                comments[key.strip()] = value.strip()
            continue
        rows.append((lineno, line))
    flush()
    return sentences


def _parse_block(rows: list[tuple[int, str]], sent_id: str, source: str | None) -> Sentence:
    tokens: list[Token] = []
    first_line = rows[0][0]
    for lineno, line in rows:
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(
                f"malformed line: expected 10 tab-separated columns, got {len(cols)}",
                sent_id=sent_id, line=lineno,
            )
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            # multiword-token ranges and empty nodes are not syntactic tokens
            continue
        try:
            index = int(tok_id) - 1
            head = int(cols[6]) - 1
        except ValueError:
            raise ConlluError(f"malformed line: non-numeric ID/HEAD", sent_id=sent_id, line=lineno)
        if index != len(tokens):
            raise ConlluError(f"non-sequential token id {tok_id}", sent_id=sent_id, line=lineno)
        tokens.append(Token(
            index=index,
            word=cols[1],
            lemma=cols[2],
            pos=cols[3],
            entity_tag=_ner_from_misc(cols[9]),
            head=head,
            dep_label=cols[7],
        ))
    sent = Sentence(id=sent_id, tokens=tuple(tokens), source=source)
    try:
        validate_sentence(sent)
    except ConlluError as err:
        raise ConlluError(str(err).rsplit(" (", 1)[0], sent_id=sent_id, line=first_line) from None
    return sent


def read_conllu(path, strict: bool = True) -> list[Sentence]:
    with open(path, "rb") as fh:
        return parse_conllu(fh, strict=strict)


def serialize_conllu(sentences: Iterable[Sentence]) -> str:
    """Render sentences back to CoNLL-U, preserving all fields this package retains."""
    out = []
    for sent in sentences:
        out.append(f"# sent_id = {sent.id}")
        if sent.source:
            out.append(f"# source = {sent.source}")
        out.append(f"# text = {' '.join(sent.words())}")
        for t in sent.tokens:
            out.append("\t".join([
                str(t.index + 1), t.word, t.lemma, t.pos, "_", "_",
                str(t.head + 1), t.dep_label, "_", _misc_from_ner(t.entity_tag),
            ]))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def _sentence_to_record(sent: Sentence) -> dict:
    return {
        "id": sent.id,
        "source": sent.source,
        "tokens": [[t.word, t.lemma, t.pos, t.entity_tag, t.head, t.dep_label]
                   for t in sent.tokens],
    }


def _sentence_from_record(rec: dict) -> Sentence:
    tokens = tuple(
        Token(index=i, word=w, lemma=l, pos=p, entity_tag=e, head=h, dep_label=d)
        for i, (w, l, p, e, h, d) in enumerate(rec["tokens"])
    )
    return Sentence(id=rec["id"], tokens=tokens, source=rec.get("source"))


class Corpus:
    """Immutable, id-addressable sentence store; safe for concurrent readers."""

    def __init__(self, sentences: Iterable[Sentence]):
        self._sentences = list(sentences)
        self._by_id: dict[str, int] = {}
        for pos, sent in enumerate(self._sentences):
            if sent.id in self._by_id:
                raise SnapshotError(f"duplicate sentence id {sent.id!r}")
            self._by_id[sent.id] = pos

    def __len__(self) -> int:
        return len(self._sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self._sentences)

    def __getitem__(self, pos: int) -> Sentence:
        return self._sentences[pos]

    def get(self, sent_id: str) -> Sentence:
        return self._sentences[self.position(sent_id)]

    def position(self, sent_id: str) -> int:
        try:
            return self._by_id[sent_id]
        except KeyError:
            raise SnapshotError(f"unknown sentence id {sent_id!r}") from None

    def __contains__(self, sent_id: str) -> bool:
        return sent_id in self._by_id

    def token_count(self) -> int:
        return sum(len(s.tokens) for s in self._sentences)

    def content_hash(self) -> str:
        """Deterministic digest of the corpus content, shared with index manifests."""
        h = sha256()
        for sent in self._sentences:
            h.update(json.dumps(_sentence_to_record(sent), sort_keys=True).encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


def save_corpus(corpus: Corpus | Iterable[Sentence], path) -> None:
    sentences = list(corpus)
    header = {"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION, "sentences": len(sentences)}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for sent in sentences:
            fh.write(json.dumps(_sentence_to_record(sent), ensure_ascii=False) + "\n")


def load_corpus(path) -> Corpus:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        head_line = fh.readline()
        try:
            header = json.loads(head_line)
        except json.JSONDecodeError:
            raise SnapshotError(f"{path}: corrupted snapshot header")
        if not isinstance(header, dict) or header.get("format") != SNAPSHOT_FORMAT:
            raise SnapshotError(f"{path}: not a corpus snapshot")
        if header.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(
                f"{path}: snapshot version mismatch "
                f"(found {header.get('version')!r}, expected {SNAPSHOT_VERSION})"
            )
        sentences = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                raise SnapshotError(f"{path}:{lineno}: corrupted snapshot record")
            sent = _sentence_from_record(rec)
            validate_sentence(sent)
            sentences.append(sent)
    return Corpus(sentences)
