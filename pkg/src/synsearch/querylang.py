"""By-example query markup: parsing, canonical rendering, trigger expansion.

A query is an example sentence whose words carry light markup:

    <>e2:[e=PER]Mary t:[w]founded <>e1:[e=ORG]Microsoft .

Each whitespace-separated unit is one element.  ``name:`` introduces a named
capture, ``[...]`` holds constraints (``w`` word, ``l`` lemma, ``t`` pos,
``e`` entity type; a bare key takes its value from the example word itself),
``<>`` asks for span expansion of a capture, and ``$word`` requires the word
verbatim without capturing it.  Unmarked words are plain context.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace

from .errors import SynsearchError

log = logging.getLogger(__name__)

CONSTRAINT_KEYS = ("w", "l", "t", "e")
RESERVED_CHARS = "[]$<>|,="

ROLE_CONTEXT = "context"
ROLE_ANCHOR = "anchor"
ROLE_CAPTURE = "capture"

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_UNIT_RE = re.compile(r"\S+")


class QueryParseError(SynsearchError):
    """Query markup that does not conform to the grammar; carries the character offset."""

    def __init__(self, message: str, position: int = 0):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


@dataclass(frozen=True, slots=True)
class Constraint:
    key: str
    values: tuple[str, ...] = ()
    bare: bool = False


@dataclass(frozen=True, slots=True)
class QueryElement:
    surface: str
    role: str  # context | anchor | capture
    capture_name: str | None = None
    expand: bool = False
    constraints: tuple[Constraint, ...] = ()


@dataclass(frozen=True, slots=True)
class QueryExample:
    raw: str
    elements: tuple[QueryElement, ...]
    id: str | None = None

    def element_for(self, capture_name: str) -> QueryElement:
        for el in self.elements:
            if el.capture_name == capture_name:
                return el
        raise KeyError(capture_name)


def _parse_constraints(spec: str, pos: int) -> tuple[Constraint, ...]:
    constraints = []
    seen = set()
    for part in spec.split(","):
        if not part:
            raise QueryParseError("empty constraint", pos)
        if "=" in part:
            key, _, rhs = part.partition("=")
            values = rhs.split("|")
            if any(v == "" for v in values):
                raise QueryParseError(f"empty disjunction in constraint {part!r}", pos)
            constraint = Constraint(key=key, values=tuple(values), bare=False)
        else:
            key = part
            constraint = Constraint(key=key, values=(), bare=True)
        if key not in CONSTRAINT_KEYS:
            raise QueryParseError(f"unknown constraint key {key!r}", pos)
        if key in seen:
            raise QueryParseError(f"duplicate constraint key {key!r}", pos)
        seen.add(key)
        constraints.append(constraint)
    return tuple(constraints)


def _parse_unit(unit: str, pos: int) -> QueryElement:
    if unit.startswith("$"):
        surface = unit[1:]
        if not surface:
            raise QueryParseError("anchor '$' without a word", pos)
        if "[" in surface or "]" in surface:
            raise QueryParseError("anchor cannot carry constraints", pos)
        return QueryElement(surface=surface, role=ROLE_ANCHOR)

    rest = unit
    expand = False
    if rest.startswith("<>"):
        expand = True
        rest = rest[2:]

    name = None
    m = _NAME_RE.match(rest)
    if m and len(rest) > m.end() and rest[m.end()] == ":":
        name = m.group()
        rest = rest[m.end() + 1:]

    constraints: tuple[Constraint, ...] = ()
    if rest.startswith("["):
        close = rest.find("]")
        if close < 0:
            raise QueryParseError("unbalanced brackets", pos)
        constraints = _parse_constraints(rest[1:close], pos)
        rest = rest[close + 1:]
    if "[" in rest or "]" in rest:
        raise QueryParseError("unbalanced brackets", pos)

    surface = rest
    if not surface:
        raise QueryParseError("element without a surface word", pos)

    if name is None:
        if constraints:
            raise QueryParseError("constraint block requires a capture name", pos)
        if expand:
            raise QueryParseError("'<>' requires a capture name", pos)
        return QueryElement(surface=surface, role=ROLE_CONTEXT)
    return QueryElement(
        surface=surface, role=ROLE_CAPTURE, capture_name=name,
        expand=expand, constraints=constraints,
    )


def parse_query(text: str, query_id: str | None = None) -> QueryExample:
    """Parse markup text into a QueryExample; requires exactly one e1 and one e2 capture."""
    elements = []
    names = {}
    for m in _UNIT_RE.finditer(text):
        el = _parse_unit(m.group(), m.start())
        if el.capture_name is not None:
            if el.capture_name in names:
                raise QueryParseError(
                    f"duplicate capture name {el.capture_name!r}", m.start())
            names[el.capture_name] = m.start()
        elements.append(el)
    for required in ("e1", "e2"):
        if required not in names:
            raise QueryParseError(f"missing {required} capture", len(text))
    return QueryExample(raw=text, elements=tuple(elements), id=query_id)


def strip(query: QueryExample) -> str:
    """The plain sentence behind a query: surface words joined by single spaces."""
    return " ".join(el.surface for el in query.elements)


def render(query: QueryExample) -> str:
    """Canonical serialization; parse(render(parse(q))) is a fixed point."""
    units = []
    for el in query.elements:
        if el.role == ROLE_ANCHOR:
            units.append("$" + el.surface)
            continue
        parts = []
        if el.expand:
            parts.append("<>")
        if el.capture_name is not None:
            parts.append(el.capture_name + ":")
        if el.constraints:
            rendered = ",".join(
                c.key if c.bare else c.key + "=" + "|".join(c.values)
                for c in el.constraints
            )
            parts.append("[" + rendered + "]")
        parts.append(el.surface)
        units.append("".join(parts))
    return " ".join(units)


def trigger_keys_used(query: QueryExample, trigger_map: dict[str, list[str]]) -> set[str]:
    """Lowercased map keys that match a capture element with a w/l constraint."""
    lowered = {k.lower() for k in trigger_map}
    return {
        el.surface.lower()
        for el in query.elements
        if el.role == ROLE_CAPTURE and el.surface.lower() in lowered
        and any(c.key in ("w", "l") for c in el.constraints)
    }


def expand_triggers(query: QueryExample, trigger_map: dict[str, list[str]],
                    warn_unused: bool = True) -> QueryExample:
    """Replace the value set of word/lemma constraints with the mapped trigger list.

    Map keys are matched case-insensitively against the surface words of
    capture elements carrying a ``w`` or ``l`` constraint.  Keys that match no
    eligible element are warned about, not rejected: trigger lists are shared
    across queries (callers expanding a whole query file pass
    ``warn_unused=False`` and warn once over the union).
    """
    lowered = {k.lower(): list(v) for k, v in trigger_map.items()}
    used = trigger_keys_used(query, trigger_map)
    elements = []
    for el in query.elements:
        key = el.surface.lower()
        if el.capture_name is not None and key in used and any(
                c.key in ("w", "l") for c in el.constraints):
            new_constraints = tuple(
                replace(c, values=tuple(lowered[key]), bare=False)
                if c.key in ("w", "l") else c
                for c in el.constraints
            )
            elements.append(replace(el, constraints=new_constraints))
        else:
            elements.append(el)
    if warn_unused:
        for key in lowered:
            if key not in used:
                log.warning("trigger list %r matched no eligible query element", key)
    expanded = QueryExample(raw=query.raw, elements=tuple(elements), id=query.id)
    return replace(expanded, raw=render(expanded))


def load_query_file(path) -> list[QueryExample]:
    """One query per line; '#' lines are comments; an optional leading id is tab-separated."""
    queries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" in line:
                qid, raw = line.split("\t", 1)
                qid = qid.strip()
            else:
                qid, raw = f"q{lineno}", line
            try:
                queries.append(parse_query(raw.strip(), query_id=qid))
            except QueryParseError as err:
                raise QueryParseError(f"{path}:{lineno}: {err}", err.position) from None
    return queries


def load_trigger_map(path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, list) and all(isinstance(w, str) for w in v)
        for k, v in data.items()
    ):
        raise SynsearchError(f"{path}: trigger map must be a JSON object of word -> [words]")
    return data
