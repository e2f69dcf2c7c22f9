/**
 * Thin typed client over the synsearch HTTP API. Every verdict, count and
 * export comes from the server; the client never computes relation logic.
 */

import type { MatchPayload, ParseResult, PatternJson, QuerySummary } from "./model.js";

export class ApiError extends Error {
    status: number;
    position: number | null;

    constructor(status: number, message: string, position: number | null = null) {
        super(message);
        this.status = status;
        this.position = position;
    }
}

async function parseError(resp: Response): Promise<ApiError> {
    let message = `${resp.status} ${resp.statusText}`;
    let position: number | null = null;
    try {
        const body = await resp.json();
        const detail = body.detail ?? body;
        if (typeof detail === "string") {
            message = detail;
        } else if (detail && typeof detail.message === "string") {
            message = detail.message;
            if (typeof detail.position === "number") position = detail.position;
        }
    } catch {
        // non-JSON error body; keep the status line
    }
    return new ApiError(resp.status, message, position);
}

export interface QueryRecord {
    id: string;
    raw: string;
    stripped: string;
    compile: { status: "ok" | "error"; message?: string };
    pattern: PatternJson | null;
    quality: {
        sample_seed: number;
        n: number;
        matches: Omit<MatchPayload, "tokens">[];
        labels: (boolean | null)[];
        verdict: string;
    } | null;
    verdict?: string;
}

export interface SearchPage {
    total: number;
    limit: number;
    offset: number;
    matches: MatchPayload[];
}

export interface SamplePage {
    seed: number;
    n: number;
    matches: MatchPayload[];
    verdict: string;
}

export interface DatasetInfo {
    id: string;
    status: string;
    config: Record<string, unknown>;
    stats: Record<string, unknown>;
    downloads?: { jsonl: string; markers: string };
}

export class Client {
    base: string;

    constructor(base = "") {
        this.base = base.replace(/\/$/, "");
    }

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const resp = await fetch(this.base + path, {
            method,
            headers: body !== undefined ? { "content-type": "application/json" } : {},
            body: body !== undefined ? JSON.stringify(body) : undefined,
        });
        if (!resp.ok) {
            throw await parseError(resp);
        }
        return (await resp.json()) as T;
    }

    corpusStats(): Promise<Record<string, unknown>> {
        return this.request("GET", "/corpus/stats");
    }

    dryRunParse(raw: string): Promise<ParseResult> {
        return this.request("POST", "/queries", { raw, dry_run: true });
    }

    registerQuery(id: string, raw: string, conllu?: string): Promise<QueryRecord> {
        return this.request("POST", "/queries", { id, raw, conllu: conllu || null });
    }

    listQueries(): Promise<{ queries: QuerySummary[] }> {
        return this.request("GET", "/queries");
    }

    getQuery(id: string): Promise<QueryRecord> {
        return this.request("GET", `/queries/${encodeURIComponent(id)}`);
    }

    search(id: string, limit: number, offset: number): Promise<SearchPage> {
        return this.request(
            "POST",
            `/queries/${encodeURIComponent(id)}/search?limit=${limit}&offset=${offset}`);
    }

    sample(id: string, n: number, seed: number): Promise<SamplePage> {
        return this.request(
            "POST", `/queries/${encodeURIComponent(id)}/sample?n=${n}&seed=${seed}`);
    }

    submitLabels(id: string, labels: boolean[]): Promise<{ id: string; verdict: string }> {
        return this.request("POST", `/queries/${encodeURIComponent(id)}/labels`, {
            labels: labels.map((l) => (l ? "yes" : "no")),
        });
    }

    buildDataset(body: {
        id: string;
        relation: string;
        query_ids: string[];
        max_positives: number;
        neg_ratio: number;
        seed: number;
    }, includePending = false): Promise<DatasetInfo> {
        const qs = includePending ? "?include_pending=true" : "";
        return this.request("POST", `/datasets${qs}`, body);
    }

    datasetInfo(id: string): Promise<DatasetInfo> {
        return this.request("GET", `/datasets/${encodeURIComponent(id)}`);
    }

    datasetStatus(id: string): Promise<{ id: string; status: string }> {
        return this.request("GET", `/datasets/${encodeURIComponent(id)}/status`);
    }

    downloadUrl(id: string, artifact: "jsonl" | "markers"): string {
        return `${this.base}/datasets/${encodeURIComponent(id)}/download/${artifact}`;
    }
}
