/**
 * Pure display logic for the workbench. No relation logic lives here beyond
 * the optimistic mirror of the server's verdict rule, which is always
 * reconciled against the server response before anything is persisted.
 */

export type Span = [number, number];

export interface ElementInfo {
    surface: string;
    role: "context" | "anchor" | "capture";
    capture_name: string | null;
    expand: boolean;
    constraints: { key: string; values: string[]; bare: boolean }[];
}

export interface ParseResult {
    elements: ElementInfo[];
    stripped: string;
}

export interface MatchPayload {
    sentence_id: string;
    pattern_id: string;
    bindings: Record<string, Span>;
    tokens: string[];
}

export interface PatternJson {
    id: string;
    nodes: {
        word: string[] | null;
        lemma: string[] | null;
        pos: string[] | null;
        entity: string[] | null;
        capture: string | null;
        expand: boolean;
    }[];
    edges: { parent: number; child: number; label: string }[];
    signature: { e1: string[]; e2: string[] };
}

export interface QuerySummary {
    id: string;
    raw: string;
    compile: { status: "ok" | "error"; message?: string };
    verdict: "kept" | "excluded" | "pending";
}

export type Label = boolean | null;

/** Mirror of the server rule, for optimistic badge display only. */
export function verdictFromLabels(labels: Label[]): "kept" | "excluded" | "pending" {
    if (labels.length === 0 || labels.some((l) => l === null)) {
        return "pending";
    }
    const noes = labels.filter((l) => l === false).length;
    return noes >= 2 ? "excluded" : "kept";
}

export function labelsComplete(labels: Label[]): boolean {
    return labels.length > 0 && labels.every((l) => l !== null);
}

export interface Segment {
    text: string;
    captures: string[]; // capture names covering this token run, [] = plain
}

/**
 * Split a sentence into runs of tokens annotated with the capture names that
 * cover them, straight from server-provided spans (never re-tokenized).
 * Spans are inclusive token ranges.
 */
export function highlightSegments(
    tokens: string[],
    bindings: Record<string, Span>,
): Segment[] {
    const names = Object.keys(bindings).sort();
    const perToken: string[][] = tokens.map((_, i) => {
        const covering = names.filter((name) => {
            const span = bindings[name]!;
            return span[0] <= i && i <= span[1];
        });
        return covering;
    });
    const segments: Segment[] = [];
    for (let i = 0; i < tokens.length; i++) {
        const captures = perToken[i]!;
        const last = segments[segments.length - 1];
        if (last && sameCaptures(last.captures, captures)) {
            last.text += " " + tokens[i];
        } else {
            segments.push({ text: tokens[i]!, captures: [...captures] });
        }
    }
    return segments;
}

function sameCaptures(a: string[], b: string[]): boolean {
    return a.length === b.length && a.every((x, i) => x === b[i]);
}

/** CSS class for a token run; e1/e2 win over other captures. */
export function segmentClass(captures: string[]): string {
    if (captures.includes("e1")) return "hl-e1";
    if (captures.includes("e2")) return "hl-e2";
    if (captures.length > 0) return "hl-cap";
    return "";
}

/** Line of spaces with a caret under the character offset, for <pre> display. */
export function caretLine(position: number): string {
    return " ".repeat(Math.max(0, position)) + "^";
}

export interface PageState {
    offset: number;
    limit: number;
    total: number;
}

export function pageLabel(p: PageState): string {
    if (p.total === 0) return "no matches";
    const first = p.offset + 1;
    const last = Math.min(p.offset + p.limit, p.total);
    return `${first}–${last} of ${p.total}`;
}

export function hasPrev(p: PageState): boolean {
    return p.offset > 0;
}

export function hasNext(p: PageState): boolean {
    return p.offset + p.limit < p.total;
}

export function prevOffset(p: PageState): number {
    return Math.max(0, p.offset - p.limit);
}

export function nextOffset(p: PageState): number {
    return p.offset + p.limit;
}

/** Compact one-line description of a pattern node for the compile preview. */
export function describeNode(node: PatternJson["nodes"][number], index: number): string {
    const parts: string[] = [];
    if (node.capture) {
        parts.push(node.expand ? `<>${node.capture}` : node.capture);
    }
    if (node.word) parts.push(`w=${node.word.join("|")}`);
    if (node.lemma) parts.push(`l=${node.lemma.join("|")}`);
    if (node.pos) parts.push(`t=${node.pos.join("|")}`);
    if (node.entity) parts.push(`e=${node.entity.join("|")}`);
    return `#${index} ${parts.join(" ") || "(any)"}`;
}

export function describeEdge(edge: PatternJson["edges"][number]): string {
    return `#${edge.parent} ─${edge.label}→ #${edge.child}`;
}

/** Roots and leaves for a simple indented tree rendering of the pattern. */
export function patternTreeLines(pattern: PatternJson): string[] {
    const children = new Map<number, { child: number; label: string }[]>();
    const hasParent = new Set<number>();
    for (const e of pattern.edges) {
        hasParent.add(e.child);
        const list = children.get(e.parent) ?? [];
        list.push({ child: e.child, label: e.label });
        children.set(e.parent, list);
    }
    const lines: string[] = [];
    const walk = (node: number, depth: number, via: string | null) => {
        const prefix = depth === 0 ? "" : "  ".repeat(depth) + `└${via} `;
        lines.push(prefix + describeNode(pattern.nodes[node]!, node));
        for (const { child, label } of children.get(node) ?? []) {
            walk(child, depth + 1, label);
        }
    };
    for (let i = 0; i < pattern.nodes.length; i++) {
        if (!hasParent.has(i)) walk(i, 0, null);
    }
    return lines;
}
