/**
 * Workbench UI wiring. Talks exclusively to the synsearch HTTP API; all
 * verdicts, counts and exports are server-computed, the client renders them.
 */

import { ApiError, Client, type QueryRecord } from "./api.js";
import {
    caretLine,
    hasNext,
    hasPrev,
    highlightSegments,
    labelsComplete,
    nextOffset,
    pageLabel,
    patternTreeLines,
    prevOffset,
    segmentClass,
    verdictFromLabels,
    type Label,
    type MatchPayload,
    type PageState,
} from "./model.js";

const client = new Client("");

const $ = <T extends HTMLElement>(id: string): T => {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
};

function esc(text: string): string {
    const div = document.createElement("div");
    div.textContent = text;
    return div.innerHTML;
}

function badge(verdict: string): string {
    return `<span class="badge badge-${esc(verdict)}">${esc(verdict)}</span>`;
}

function renderSentence(match: MatchPayload): string {
    const segments = highlightSegments(match.tokens, match.bindings);
    return segments
        .map((seg) => {
            const cls = segmentClass(seg.captures);
            const text = esc(seg.text);
            if (!cls) return text;
            const title = seg.captures.join(", ");
            return `<mark class="${cls}" title="${esc(title)}">${text}</mark>`;
        })
        .join(" ");
}

// ---------------------------------------------------------------- state

let selectedQuery: string | null = null;
let page: PageState = { offset: 0, limit: 10, total: 0 };
let validationLabels: Label[] = [];

// ---------------------------------------------------------------- editor

const queryInput = $<HTMLTextAreaElement>("query-input");
const queryId = $<HTMLInputElement>("query-id");
const conlluInput = $<HTMLTextAreaElement>("conllu-input");
const parseResult = $<HTMLDivElement>("parse-result");

let debounceTimer: ReturnType<typeof setTimeout> | undefined;

queryInput.addEventListener("input", () => {
    clearTimeout(debounceTimer);
    debounceTimer = setTimeout(livePreview, 250);
});

async function livePreview(): Promise<void> {
    const raw = queryInput.value.trim();
    if (!raw) {
        parseResult.innerHTML = "";
        return;
    }
    try {
        const parsed = await client.dryRunParse(raw);
        const chips = parsed.elements
            .map((el) => {
                const cls = el.role === "capture" ? `chip chip-${esc(el.capture_name ?? "")}`
                    : el.role === "anchor" ? "chip chip-anchor" : "chip";
                const label = el.capture_name ? `${el.capture_name}:` : "";
                return `<span class="${cls}">${esc(label)}${esc(el.surface)}</span>`;
            })
            .join(" ");
        parseResult.innerHTML =
            `<div class="chips">${chips}</div>` +
            `<div class="stripped">stripped: ${esc(parsed.stripped)}</div>`;
    } catch (err) {
        if (err instanceof ApiError && err.position !== null) {
            parseResult.innerHTML =
                `<pre class="parse-error">${esc(raw)}\n` +
                `${caretLine(err.position)}\n${esc(err.message)}</pre>`;
        } else {
            parseResult.innerHTML = `<div class="parse-error">${esc(String(err))}</div>`;
        }
    }
}

$<HTMLButtonElement>("register-btn").addEventListener("click", async () => {
    const raw = queryInput.value.trim();
    const id = queryId.value.trim();
    if (!raw || !id) {
        parseResult.innerHTML = `<div class="parse-error">need both a query id and markup</div>`;
        return;
    }
    try {
        const record = await client.registerQuery(id, raw, conlluInput.value.trim());
        await refreshQueries();
        if (record.compile.status === "ok") {
            await selectQuery(id); // auto-run the first search page
        } else {
            parseResult.innerHTML =
                `<div class="parse-error">compile: ${esc(record.compile.message ?? "")}</div>`;
        }
    } catch (err) {
        if (err instanceof ApiError && err.position !== null) {
            parseResult.innerHTML =
                `<pre class="parse-error">${esc(raw)}\n` +
                `${caretLine(err.position)}\n${esc(err.message)}</pre>`;
        } else {
            parseResult.innerHTML = `<div class="parse-error">${esc(String(err))}</div>`;
        }
    }
});

// ---------------------------------------------------------------- query list

async function refreshQueries(): Promise<void> {
    const { queries } = await client.listQueries();
    const list = $<HTMLUListElement>("queries-list");
    list.innerHTML = queries
        .map((q) => {
            const status = q.compile.status === "ok" ? "" : ` <span class="err">!</span>`;
            const cls = q.id === selectedQuery ? "selected" : "";
            return `<li class="${cls}" data-id="${esc(q.id)}">` +
                `<code>${esc(q.id)}</code>${status} ${badge(q.verdict)}<br>` +
                `<span class="raw">${esc(q.raw)}</span></li>`;
        })
        .join("");
    for (const li of Array.from(list.querySelectorAll("li"))) {
        li.addEventListener("click", () => selectQuery(li.dataset.id!));
    }
    renderDatasetQueryPicker(queries.map((q) => ({ id: q.id, verdict: q.verdict })));
}

async function selectQuery(id: string): Promise<void> {
    selectedQuery = id;
    $<HTMLSpanElement>("selected-query").textContent = id;
    validationLabels = [];
    $<HTMLDivElement>("validation-cards").innerHTML = "";
    $<HTMLSpanElement>("validation-verdict").innerHTML = "";
    const record = await client.getQuery(id);
    renderPatternPreview(record);
    page = { offset: 0, limit: 10, total: 0 };
    await refreshQueries();
    await runSearch();
}

function renderPatternPreview(record: QueryRecord): void {
    const pre = $<HTMLPreElement>("pattern-preview");
    if (record.compile.status !== "ok" || !record.pattern) {
        pre.textContent = record.compile.message ?? "no compiled pattern";
        return;
    }
    pre.textContent = patternTreeLines(record.pattern).join("\n") +
        `\n\nsignature: e1=${record.pattern.signature.e1.join("|") || "*"}` +
        ` e2=${record.pattern.signature.e2.join("|") || "*"}`;
}

// ---------------------------------------------------------------- matches

async function runSearch(): Promise<void> {
    if (!selectedQuery) return;
    try {
        const result = await client.search(selectedQuery, page.limit, page.offset);
        page = { offset: result.offset, limit: result.limit, total: result.total };
        $<HTMLDivElement>("matches").innerHTML = result.matches
            .map((m) =>
                `<div class="match">${renderSentence(m)}` +
                `<div class="provenance">${esc(m.sentence_id)}</div></div>`)
            .join("");
        $<HTMLSpanElement>("page-label").textContent = pageLabel(page);
        $<HTMLButtonElement>("prev-btn").disabled = !hasPrev(page);
        $<HTMLButtonElement>("next-btn").disabled = !hasNext(page);
    } catch (err) {
        $<HTMLDivElement>("matches").innerHTML =
            `<div class="parse-error">${esc(String(err))}</div>`;
    }
}

$<HTMLButtonElement>("prev-btn").addEventListener("click", () => {
    page.offset = prevOffset(page);
    void runSearch();
});
$<HTMLButtonElement>("next-btn").addEventListener("click", () => {
    page.offset = nextOffset(page);
    void runSearch();
});

// ---------------------------------------------------------------- validation

$<HTMLButtonElement>("draw-btn").addEventListener("click", async () => {
    if (!selectedQuery) return;
    const seed = Number($<HTMLInputElement>("sample-seed").value) || 0;
    const sample = await client.sample(selectedQuery, 5, seed);
    validationLabels = sample.matches.map(() => null);
    const cards = $<HTMLDivElement>("validation-cards");
    cards.innerHTML = sample.matches
        .map((m, i) =>
            `<div class="card" data-i="${i}">${renderSentence(m)}` +
            `<div class="provenance">${esc(m.sentence_id)}</div>` +
            `<div class="yn">` +
            `<button class="yes" data-i="${i}">yes</button>` +
            `<button class="no" data-i="${i}">no</button></div></div>`)
        .join("");
    $<HTMLSpanElement>("validation-verdict").innerHTML = "";
    for (const btn of Array.from(cards.querySelectorAll("button"))) {
        btn.addEventListener("click", () => {
            const i = Number(btn.dataset.i);
            validationLabels[i] = btn.classList.contains("yes");
            const card = cards.querySelector(`.card[data-i="${i}"]`)!;
            card.classList.remove("labeled-yes", "labeled-no");
            card.classList.add(validationLabels[i] ? "labeled-yes" : "labeled-no");
            renderOptimisticVerdict();
        });
    }
});

function renderOptimisticVerdict(): void {
    // badge appears only once every sampled match is labeled
    const el = $<HTMLSpanElement>("validation-verdict");
    if (!labelsComplete(validationLabels)) {
        el.innerHTML = "";
        return;
    }
    el.innerHTML = badge(verdictFromLabels(validationLabels)) +
        ` <button id="submit-labels">submit</button>`;
    $<HTMLButtonElement>("submit-labels").addEventListener("click", async () => {
        if (!selectedQuery) return;
        const { verdict } = await client.submitLabels(
            selectedQuery, validationLabels.map((l) => l === true));
        el.innerHTML = badge(verdict) + ` <span class="saved">saved</span>`;
        await refreshQueries(); // reconcile with the server verdict
    });
}

// ---------------------------------------------------------------- datasets

function renderDatasetQueryPicker(queries: { id: string; verdict: string }[]): void {
    const box = $<HTMLDivElement>("dataset-queries");
    box.innerHTML = queries
        .map((q) =>
            `<label><input type="checkbox" value="${esc(q.id)}" ` +
            `${q.verdict === "excluded" ? "disabled" : ""}> ` +
            `<code>${esc(q.id)}</code> ${badge(q.verdict)}</label>`)
        .join("");
}

$<HTMLButtonElement>("build-btn").addEventListener("click", async () => {
    const ids = Array.from(
        $<HTMLDivElement>("dataset-queries").querySelectorAll<HTMLInputElement>(
            "input:checked")).map((el) => el.value);
    const out = $<HTMLDivElement>("dataset-result");
    if (ids.length === 0) {
        out.innerHTML = `<div class="parse-error">pick at least one query</div>`;
        return;
    }
    const body = {
        id: $<HTMLInputElement>("dataset-id").value.trim() || `ds-${Date.now()}`,
        relation: $<HTMLInputElement>("dataset-relation").value.trim() || "relation",
        query_ids: ids,
        max_positives: Number($<HTMLInputElement>("max-positives").value) || 100,
        neg_ratio: Number($<HTMLInputElement>("neg-ratio").value),
        seed: Number($<HTMLInputElement>("dataset-seed").value) || 0,
    };
    const includePending = $<HTMLInputElement>("include-pending").checked;
    out.innerHTML = "building…";
    try {
        const info = await client.buildDataset(body, includePending);
        // poll until the status sub-resource reports done
        let status = info.status;
        while (status !== "done") {
            await new Promise((r) => setTimeout(r, 500));
            status = (await client.datasetStatus(info.id)).status;
        }
        const full = await client.datasetInfo(info.id);
        const stats = full.stats as Record<string, unknown>;
        const shortfall = (stats.negative_sampling as Record<string, number>)?.shortfall;
        out.innerHTML =
            `<table class="stats">` +
            ["positives", "negatives", "achieved_ratio", "raw_matches", "dedup_losses"]
                .map((k) => `<tr><td>${k}</td><td>${esc(String(stats[k]))}</td></tr>`)
                .join("") +
            `</table>` +
            (shortfall ? `<div class="warn">shortfall: ${shortfall} negatives missing</div>` : "") +
            `<div class="downloads">` +
            `<a href="${client.downloadUrl(full.id, "jsonl")}" download>dataset.jsonl</a> ` +
            `<a href="${client.downloadUrl(full.id, "markers")}" download>markers.txt</a>` +
            `</div>`;
    } catch (err) {
        out.innerHTML = `<div class="parse-error">${esc(String(err))}</div>`;
    }
});

// ---------------------------------------------------------------- boot

async function boot(): Promise<void> {
    try {
        const stats = await client.corpusStats();
        $<HTMLSpanElement>("corpus-line").textContent =
            `${stats.sentences} sentences, ${stats.tokens} tokens`;
    } catch (err) {
        $<HTMLSpanElement>("corpus-line").textContent = `server unreachable: ${err}`;
    }
    await refreshQueries();
}

void boot();
