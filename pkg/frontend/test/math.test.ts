import { describe, expect, it } from "vitest";
import {
    CameraState, cameraBasis, dot, length, projectStroke, sub,
    unprojectOnDepthPlane, clampSlider,
} from "../src/math.js";

const cam: CameraState = {
    position: { x: 2, y: -1, z: 3 },
    target: { x: 0.5, y: 0.5, z: 0.5 },
    up: { x: 0, y: 0, z: 1 },
    fovYDegrees: 50,
    aspect: 1.5,
};

describe("unprojectOnDepthPlane", () => {
    it("maps the screen center onto the view axis at the given depth", () => {
        const d = 1.75;
        const p = unprojectOnDepthPlane(cam, { x: 0, y: 0 }, d);
        const { forward } = cameraBasis(cam);
        const offset = sub(p, cam.position);
        expect(length(offset)).toBeCloseTo(d, 12);
        expect(dot(offset, forward)).toBeCloseTo(d, 12);
    });

    it("keeps a horizontal screen segment coplanar on the depth plane", () => {
        const d = 2.2;
        const { forward } = cameraBasis(cam);
        const pts = [-0.8, -0.3, 0.1, 0.6, 0.9].map(
            (x) => unprojectOnDepthPlane(cam, { x, y: 0.25 }, d));
        for (const p of pts) {
            // plane: forward . (p - position) = depth
            expect(dot(sub(p, cam.position), forward)).toBeCloseTo(d, 10);
        }
    });

    it("moves the same polyline only along the view axis between depths", () => {
        const { forward } = cameraBasis(cam);
        const screen = [{ x: -0.5, y: 0.2 }, { x: 0.1, y: -0.4 }, { x: 0.7, y: 0.6 }];
        const scaleDist = 1.0;
        for (const ndc of screen) {
            const a = unprojectOnDepthPlane(cam, ndc, 1.0, scaleDist);
            const b = unprojectOnDepthPlane(cam, ndc, 2.5, scaleDist);
            const delta = sub(b, a);
            const along = dot(delta, forward);
            expect(along).toBeCloseTo(1.5, 10);
            // no component perpendicular to the view axis
            const perp2 = dot(delta, delta) - along * along;
            expect(Math.abs(perp2)).toBeLessThan(1e-12);
        }
    });

    it("rejects a degenerate camera", () => {
        const bad: CameraState = { ...cam, up: cameraBasis(cam).forward };
        expect(() => unprojectOnDepthPlane(bad, { x: 0, y: 0 }, 1)).toThrow(/degenerate/);
    });

    it("rejects non-positive depth", () => {
        expect(() => unprojectOnDepthPlane(cam, { x: 0, y: 0 }, 0)).toThrow();
    });
});

describe("projectStroke", () => {
    it("attaches relative timestamps in seconds", () => {
        const samples = projectStroke(
            [{ x: 0, y: 0, timeMs: 1000 }, { x: 0.1, y: 0, timeMs: 1250 }],
            cam, 1.5);
        expect(samples[0].t).toBe(0);
        expect(samples[1].t).toBeCloseTo(0.25, 12);
    });

    it("rejects an empty polyline", () => {
        expect(() => projectStroke([], cam, 1)).toThrow(/empty/);
    });
});

describe("clampSlider", () => {
    it("clamps to [-4, 4]", () => {
        expect(clampSlider(-9)).toBe(-4);
        expect(clampSlider(9)).toBe(4);
        expect(clampSlider(1.5)).toBe(1.5);
    });
});
