/** Headless application core: everything the viewer does except input
 * capture and rendering. It owns no selection logic of its own; the
 * displayed selection is always the service's latest response, and stale
 * responses (service revision moved on) are dropped. */

import { ServiceClient, SelectResponse, StaleRevisionError } from "./api.js";
import { clampSlider, projectStroke, CameraState } from "./math.js";
import { makeStrokeDoc, CombineMode, StrokeDoc, Technique } from "./schema.js";

export interface CoreEvents {
    selectionChanged(): void;
}

export class ViewerCore {
    technique: Technique = "paint";
    mode: CombineMode = "union";
    sliderS = 0;
    strokeRadius = 0.05;
    depth = 1.0;

    lastResponse: SelectResponse | null = null;
    combinedParticles: number[] | null = null;
    lastEmittedStroke: StrokeDoc | null = null;

    constructor(
        readonly client: ServiceClient,
        private readonly events: CoreEvents = { selectionChanged() {} },
    ) {}

    /** Particle indices the viewer should highlight: exactly the latest
     * service payload, never recomputed locally. */
    displayedParticles(): number[] {
        if (this.combinedParticles !== null) return this.combinedParticles;
        return this.lastResponse?.selection.particles ?? [];
    }

    displayedCount(): number {
        return this.displayedParticles().length;
    }

    emitStroke(screenPoints: { x: number; y: number; timeMs: number }[],
               camera: CameraState): StrokeDoc {
        const samples = projectStroke(screenPoints, camera, this.depth);
        const doc = makeStrokeDoc(samples, this.technique, this.strokeRadius,
                                  this.mode);
        this.lastEmittedStroke = doc;
        return doc;
    }

    async applyStroke(doc: StrokeDoc): Promise<void> {
        if (doc.technique === "baseline" && this.lastResponse !== null) {
            const res = await this.client.combine(doc.mode, doc);
            this.combinedParticles = res.particles;
        } else {
            this.lastResponse = await this.client.select(
                doc.technique, doc, this.sliderS !== 0 ? this.sliderS : undefined);
            this.combinedParticles = null;
            this.sliderS = this.lastResponse.selection.s;
        }
        this.events.selectionChanged();
    }

    async setSlider(s: number): Promise<void> {
        this.sliderS = clampSlider(s);
        if (this.lastResponse === null) return;
        try {
            this.lastResponse = await this.client.adjustThreshold(
                this.sliderS, this.client.revision);
            this.combinedParticles = null;
        } catch (err) {
            if (!(err instanceof StaleRevisionError)) throw err;
            await this.client.status(); // resync revision, keep last payload
        }
        this.events.selectionChanged();
    }
}
