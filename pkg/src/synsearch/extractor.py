"""Rule-based relation extractor over patterns, with precision/recall/F1 evaluation.

An instance is labelled positive iff some pattern yields a match whose e1/e2
bindings equal the instance's argument spans exactly (relations are directed:
swapping the arguments is a different, non-matching instance).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .corpus import Sentence, parse_conllu, read_conllu, serialize_conllu
from .engine import match_pattern
from .errors import SynsearchError
from .patterns import Pattern


class ExtractorError(SynsearchError):
    """Gold data unusable for evaluation (missing parse, empty gold list)."""


@dataclass(frozen=True, slots=True)
class GoldInstance:
    tokens: tuple[str, ...]
    e1_span: tuple[int, int]
    e2_span: tuple[int, int]
    relation: str
    label: str  # positive | negative
    parse: Sentence | None = None


@dataclass(frozen=True, slots=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    pattern_fires: dict[str, int]


def firing_patterns(patterns: list[Pattern], instance: GoldInstance) -> list[str]:
    """Ids of patterns that match the instance's exact argument pair."""
    if instance.parse is None:
        raise ExtractorError("instance has no parse; matching requires one")
    fired = []
    for pattern in patterns:
        for m in match_pattern(pattern, instance.parse):
            if m.bindings["e1"] == instance.e1_span and m.bindings["e2"] == instance.e2_span:
                fired.append(pattern.id)
                break
    return fired


def classify(patterns: list[Pattern], instance: GoldInstance) -> bool:
    return bool(firing_patterns(patterns, instance))


def evaluate(patterns: list[Pattern], instances: list[GoldInstance]) -> EvalReport:
    if not instances:
        raise ExtractorError("empty gold list")
    tp = fp = fn = tn = 0
    fires: dict[str, int] = {p.id: 0 for p in patterns}
    for inst in instances:
        fired = firing_patterns(patterns, inst)
        for pid in fired:
            fires[pid] += 1
        predicted = bool(fired)
        actual = inst.label == "positive"
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(tp=tp, fp=fp, fn=fn, tn=tn, precision=precision,
                      recall=recall, f1=f1, pattern_fires=fires)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "tp": report.tp, "fp": report.fp, "fn": report.fn, "tn": report.tn,
        "precision": report.precision, "recall": report.recall, "f1": report.f1,
        "pattern_fires": dict(sorted(report.pattern_fires.items())),
    }


def report_table(report: EvalReport) -> str:
    lines = [
        f"{'tp':>10} {'fp':>6} {'fn':>6} {'tn':>6}",
        f"{report.tp:>10} {report.fp:>6} {report.fn:>6} {report.tn:>6}",
        "",
        f"precision  {report.precision:.4f}",
        f"recall     {report.recall:.4f}",
        f"f1         {report.f1:.4f}",
    ]
    if report.pattern_fires:
        lines.append("")
        lines.append("pattern fires:")
        for pid, count in sorted(report.pattern_fires.items()):
            lines.append(f"  {pid:<24} {count}")
    return "\n".join(lines)


def load_gold(path, parses_path=None) -> list[GoldInstance]:
    """Gold JSONL mirroring the dataset schema; the parse comes from an inline
    ``conllu`` field or from a sidecar CoNLL-U file keyed by example id."""
    sidecar: dict[str, Sentence] = {}
    if parses_path is not None:
        for sent in read_conllu(parses_path):
            sidecar[sent.id] = sent
    instances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                raise ExtractorError(f"{path}:{lineno}: invalid JSON") from None
            parse = None
            if "conllu" in rec and rec["conllu"]:
                parsed = parse_conllu(rec["conllu"])
                if len(parsed) != 1:
                    raise ExtractorError(
                        f"{path}:{lineno}: inline conllu must hold exactly one sentence")
                parse = parsed[0]
            elif rec.get("id") in sidecar:
                parse = sidecar[rec["id"]]
            tokens = tuple(rec["tokens"]) if "tokens" in rec else (
                tuple(parse.words()) if parse else ())
            if not tokens:
                raise ExtractorError(f"{path}:{lineno}: instance has no tokens")
            instances.append(GoldInstance(
                tokens=tokens,
                e1_span=tuple(rec["e1"]),
                e2_span=tuple(rec["e2"]),
                relation=rec.get("relation", ""),
                label=rec["label"],
                parse=parse,
            ))
    return instances


def save_gold(instances: list[GoldInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, inst in enumerate(instances, start=1):
            rec = {
                "id": f"g{i:05d}",
                "relation": inst.relation,
                "label": inst.label,
                "tokens": list(inst.tokens),
                "e1": list(inst.e1_span),
                "e2": list(inst.e2_span),
            }
            if inst.parse is not None:
                rec["conllu"] = serialize_conllu([inst.parse])
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
