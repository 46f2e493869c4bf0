/** Runtime validation of the wire documents the viewer exchanges. */

import type { StrokeSample } from "./math.js";

export type Technique = "point" | "brush" | "paint" | "baseline";
export type CombineMode = "union" | "subtract";

export interface StrokeDoc {
    technique: Technique;
    radius: number;
    mode: CombineMode;
    samples: StrokeSample[];
}

export interface SelectionDoc {
    technique: string;
    rho0: number;
    s: number;
    threshold: number;
    kept_components: number[];
    particles: number[];
    anchors?: number[][];
    candidates?: number[];
    flags?: string[];
    stats?: Record<string, unknown>;
}

const TECHNIQUES = new Set(["point", "brush", "paint", "baseline"]);
const MODES = new Set(["union", "subtract"]);

function fail(msg: string): never {
    throw new Error(`invalid stroke document: ${msg}`);
}

export function makeStrokeDoc(
    samples: StrokeSample[],
    technique: Technique,
    radius: number,
    mode: CombineMode = "union",
): StrokeDoc {
    const doc = { technique, radius, mode, samples };
    validateStrokeDoc(doc);
    return doc;
}

export function validateStrokeDoc(doc: unknown): asserts doc is StrokeDoc {
    if (typeof doc !== "object" || doc === null) fail("not an object");
    const d = doc as Record<string, unknown>;
    if (!TECHNIQUES.has(d.technique as string)) fail(`technique ${d.technique}`);
    if (typeof d.radius !== "number" || !(d.radius > 0)) fail("radius must be > 0");
    if (!MODES.has(d.mode as string)) fail(`mode ${d.mode}`);
    if (!Array.isArray(d.samples) || d.samples.length < 1) {
        fail("samples must be a non-empty array");
    }
    let lastT = -Infinity;
    for (const s of d.samples) {
        for (const key of ["x", "y", "z", "t"]) {
            const v = (s as Record<string, unknown>)[key];
            if (typeof v !== "number" || !Number.isFinite(v)) {
                fail(`sample field ${key} must be a finite number`);
            }
        }
        const t = (s as { t: number }).t;
        if (t < lastT) fail("timestamps must be non-decreasing");
        lastT = t;
    }
}

export function validateSelectionDoc(doc: unknown): asserts doc is SelectionDoc {
    if (typeof doc !== "object" || doc === null) {
        throw new Error("invalid selection document: not an object");
    }
    const d = doc as Record<string, unknown>;
    for (const key of ["rho0", "s", "threshold"]) {
        if (typeof d[key] !== "number") {
            throw new Error(`invalid selection document: ${key} missing`);
        }
    }
    if (typeof d.technique !== "string") {
        throw new Error("invalid selection document: technique missing");
    }
    if (!Array.isArray(d.kept_components) || !Array.isArray(d.particles)) {
        throw new Error("invalid selection document: component/particle lists missing");
    }
}
