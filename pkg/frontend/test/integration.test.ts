/**
 * End-to-end check against the real Python service: a stroke "drawn" in the
 * viewer (screen polyline -> depth-plane projection -> stroke document)
 * must produce a /api/select payload whose selection JSON is byte-identical
 * to a CLI run on the emitted stroke file, and sweeping the slider from -4
 * to 4 must never increase the displayed count.
 */

import { spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { ViewerCore } from "../src/core.js";
import { CameraState, cameraBasis, dot, sub, Vec3 } from "../src/math.js";

const PKG_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const PYTHON = process.env.PYTHON ?? "python3";
const DIMS = 64;

function freePort(): Promise<number> {
    return new Promise((resolve, reject) => {
        const srv = createServer();
        srv.listen(0, "127.0.0.1", () => {
            const port = (srv.address() as { port: number }).port;
            srv.close(() => resolve(port));
        });
        srv.on("error", reject);
    });
}

function runCli(args: string[]): void {
    const res = spawnSync(PYTHON, ["-m", "metacast.cli", ...args],
                          { cwd: PKG_ROOT, encoding: "utf-8" });
    if (res.status !== 0) {
        throw new Error(`CLI ${args[0]} failed (${res.status}): ${res.stderr}`);
    }
}

function pythonCanonicalJson(rawJson: string, key?: string): string {
    // canonicalize with the Python serializer, from raw text so number
    // formatting survives (a JS JSON roundtrip would turn 0.0 into 0)
    const extract = key ? `[${JSON.stringify(key)}]` : "";
    const res = spawnSync(PYTHON, ["-c",
        "import json,sys\nfrom metacast.data import canonical_json\n"
        + `sys.stdout.write(canonical_json(json.load(sys.stdin)${extract}))`],
        { cwd: PKG_ROOT, input: rawJson, encoding: "utf-8" });
    if (res.status !== 0) throw new Error(res.stderr);
    return res.stdout;
}

/** Screen point that the viewer's unprojection maps to `world` (test-data
 * construction: the inverse of the drawing transform). */
function screenPointFor(world: Vec3, cam: CameraState, depth: number) {
    const basis = cameraBasis(cam);
    const planeCenter = {
        x: cam.position.x + basis.forward.x * depth,
        y: cam.position.y + basis.forward.y * depth,
        z: cam.position.z + basis.forward.z * depth,
    };
    const halfH = Math.tan((cam.fovYDegrees * Math.PI) / 360) * depth;
    const halfW = halfH * cam.aspect;
    const offset = sub(world, planeCenter);
    return { x: dot(offset, basis.right) / halfW, y: dot(offset, basis.up) / halfH };
}

describe("viewer against the live service", () => {
    let server: ReturnType<typeof spawn>;
    let base: string;
    let dir: string;

    beforeAll(async () => {
        const port = await freePort();
        base = `http://127.0.0.1:${port}`;
        dir = mkdtempSync(join(tmpdir(), "metacast-viewer-"));
        runCli(["gen", "shell", "--target", "8000", "--noise", "8000",
                "--seed", "7", "--out", join(dir, "shell.csv")]);
        runCli(["density", "--cloud", join(dir, "shell.csv"),
                "--dims", String(DIMS), "--out", join(dir, "shell.mtcf")]);

        server = spawn(PYTHON, ["-m", "metacast.cli", "serve",
                                "--port", String(port)],
                       { cwd: PKG_ROOT, stdio: "pipe" });
        const deadline = Date.now() + 30_000;
        for (;;) {
            try {
                const resp = await fetch(base + "/api/status");
                if (resp.status === 404 || resp.ok) break;
            } catch { /* not up yet */ }
            if (Date.now() > deadline) throw new Error("service did not start");
            await new Promise((r) => setTimeout(r, 200));
        }
    }, 60_000);

    afterAll(() => {
        server?.kill();
    });

    it("criterion 12: viewer stroke matches the CLI byte for byte and the "
        + "slider sweep never grows the count", async () => {
        const client = new ServiceClient(base, fetch);
        const core = new ViewerCore(client);
        core.technique = "paint";
        core.strokeRadius = 0.08;

        await client.uploadCloud(readFileSync(join(dir, "shell.csv")), DIMS);
        const deadline = Date.now() + 60_000;
        for (;;) {
            const st = await client.status();
            if (st?.field.state === "ready") break;
            if (st?.field.state === "failed") throw new Error(st.field.error!);
            if (Date.now() > deadline) throw new Error("field build timed out");
            await new Promise((r) => setTimeout(r, 100));
        }

        // draw: camera in front of the shell, arc traced on the depth plane
        // through the dataset center (the same mid-shell arc a user would
        // sweep over the target)
        const camera: CameraState = {
            position: { x: 0, y: -2.5, z: 0.4 },
            target: { x: 0, y: 0, z: 0.4 },
            up: { x: 0, y: 0, z: 1 },
            fovYDegrees: 50,
            aspect: 1.5,
        };
        core.depth = 2.5;
        const screenPoints = [];
        for (let i = 0; i < 40; i++) {
            const a = 0.1 + (Math.PI - 0.2) * (i / 39);
            const world = { x: 0.74 * Math.cos(a), y: 0, z: 0.74 * Math.sin(a) };
            screenPoints.push({ ...screenPointFor(world, camera, core.depth),
                                timeMs: i * 16 });
        }
        const strokeDoc = core.emitStroke(screenPoints, camera);
        // emitted samples really sit on the depth plane (y = 0 here)
        for (const s of strokeDoc.samples) expect(Math.abs(s.y)).toBeLessThan(1e-9);

        await core.applyStroke(strokeDoc);
        expect(core.displayedCount()).toBeGreaterThan(0);
        // the displayed set is exactly the service payload, no local logic
        expect(core.displayedParticles())
            .toEqual(core.lastResponse!.selection.particles);

        // CLI run on the stroke file the viewer emitted
        writeFileSync(join(dir, "viewer_stroke.json"),
                      pythonCanonicalJson(JSON.stringify(strokeDoc)));
        runCli(["select", "paint", "--cloud", join(dir, "shell.csv"),
                "--field", join(dir, "shell.mtcf"),
                "--stroke", join(dir, "viewer_stroke.json"),
                "--out", join(dir, "sel_cli.json")]);
        const cliBytes = readFileSync(join(dir, "sel_cli.json"), "utf-8");

        // replay the identical select request and take its raw payload
        // text, so Python-side number formatting is compared untouched
        const replay = await fetch(base + "/api/select", {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ technique: "paint", stroke: strokeDoc }),
        });
        expect(replay.ok).toBe(true);
        const viewerBytes = pythonCanonicalJson(await replay.text(), "selection");
        expect(viewerBytes).toBe(cliBytes);

        // the raw replay advanced the service revision behind the client's
        // back; the next adjust must be rejected as stale, then recover
        const before = core.displayedCount();
        await core.setSlider(1);
        expect(core.displayedCount()).toBe(before); // kept last payload
        await core.setSlider(1); // revision resynced, goes through now

        // slider sweep -4 -> 4: displayed count never increases
        const counts: number[] = [];
        for (let s = -4; s <= 4; s++) {
            await core.setSlider(s);
            counts.push(core.displayedCount());
        }
        for (let i = 1; i < counts.length; i++) {
            expect(counts[i]).toBeLessThanOrEqual(counts[i - 1]);
        }
        expect(counts[0]).toBeGreaterThan(0);
    }, 120_000);
});
