/** Thin client for the selection service. Tracks the revision echoed by
 * every state-changing response; a 409 surfaces as StaleRevisionError so
 * the caller can refetch and re-render. */

import type { SelectionDoc, StrokeDoc, CombineMode, Technique } from "./schema.js";
import { validateSelectionDoc } from "./schema.js";

export class StaleRevisionError extends Error {}

export class ServiceError extends Error {
    constructor(readonly status: number, detail: string) {
        super(detail);
    }
}

export interface StatusDoc {
    revision: number;
    particles: number;
    has_labels: boolean;
    field: { state: string; progress: number; dims: number[] | null; error: string | null };
    selection: { technique: string; s: number; threshold: number; count: number } | null;
    combined_count: number | null;
    session?: string;
}

export interface SelectResponse {
    revision: number;
    selection: SelectionDoc;
    mesh: { vertices: number; triangles: number };
}

export interface PointsDoc {
    revision: number;
    count: number;
    stride: number;
    positions: number[][];
    labels: number[] | null;
}

export class ServiceClient {
    revision = 0;

    constructor(
        readonly base: string = "",
        private readonly fetchFn: typeof fetch = fetch,
    ) {}

    private async request(path: string, init?: RequestInit): Promise<Response> {
        const resp = await this.fetchFn(this.base + path, init);
        if (resp.status === 409) {
            throw new StaleRevisionError(await resp.text());
        }
        return resp;
    }

    private async json<T>(path: string, init?: RequestInit): Promise<T> {
        const resp = await this.request(path, init);
        const body = await resp.json();
        if (!resp.ok) {
            throw new ServiceError(resp.status, body?.detail ?? resp.statusText);
        }
        if (typeof body.revision === "number") {
            this.revision = body.revision;
        }
        return body as T;
    }

    async status(): Promise<StatusDoc | null> {
        const resp = await this.request("/api/status");
        const body = await resp.json();
        if (resp.status === 404) return null; // empty session
        if (!resp.ok) throw new ServiceError(resp.status, body?.detail ?? "status failed");
        this.revision = body.revision;
        return body as StatusDoc;
    }

    async uploadCloud(csvBytes: BlobPart, dims = 100): Promise<void> {
        await this.json(`/api/cloud?format=csv&dims=${dims}`, {
            method: "POST",
            body: csvBytes,
        });
    }

    async points(decimate: number): Promise<PointsDoc> {
        return this.json<PointsDoc>(`/api/cloud/points?decimate=${decimate}`);
    }

    async select(technique: Technique, stroke: StrokeDoc, s?: number):
            Promise<SelectResponse> {
        const payload: Record<string, unknown> = { technique, stroke };
        if (s !== undefined) payload.s = s;
        const body = await this.json<SelectResponse>("/api/select", {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(payload),
        });
        validateSelectionDoc(body.selection);
        return body;
    }

    async adjustThreshold(s: number, revision?: number): Promise<SelectResponse> {
        const payload: Record<string, unknown> = { s };
        if (revision !== undefined) payload.revision = revision;
        const body = await this.json<SelectResponse>("/api/threshold", {
            method: "PATCH",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(payload),
        });
        validateSelectionDoc(body.selection);
        return body;
    }

    async combine(mode: CombineMode, stroke: StrokeDoc):
            Promise<{ revision: number; count: number; particles: number[] }> {
        return this.json("/api/combine", {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ mode, stroke }),
        });
    }

    async meshObj(): Promise<string> {
        const resp = await this.request("/api/mesh");
        if (!resp.ok) throw new ServiceError(resp.status, await resp.text());
        return resp.text();
    }
}
