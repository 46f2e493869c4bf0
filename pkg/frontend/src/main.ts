import * as THREE from "three";
import { ServiceClient } from "./api.js";
import { ViewerCore } from "./core.js";
import { RateLimiter } from "./debounce.js";
import { projectStroke } from "./math.js";
import { SceneView } from "./render.js";
import type { Technique, CombineMode } from "./schema.js";

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

const canvas = $<HTMLCanvasElement>("view");
const view = new SceneView(canvas);
const client = new ServiceClient("");
const core = new ViewerCore(client, { selectionChanged: onSelectionChanged });

let pointStride = 1;
let strokeScreen: { x: number; y: number; timeMs: number }[] = [];
let strokeLine: THREE.Line | null = null;

function setStatus(text: string) {
    $("status").textContent = text;
}

function onSelectionChanged() {
    view.applySelection(new Set(core.displayedParticles()), pointStride);
    const sel = core.lastResponse?.selection;
    $("count").textContent =
        `${core.displayedCount()} selected` +
        (sel ? ` | s=${sel.s} threshold=${sel.threshold.toPrecision(4)}` : "");
    if (sel && core.lastResponse!.mesh.triangles > 0) {
        client.meshObj().then((obj) => view.setMeshFromObj(obj))
            .catch(() => view.clearMesh());
    } else {
        view.clearMesh();
    }
}

// threshold slider: debounced to at most 10 requests/s, last write wins
const sliderLimiter = new RateLimiter<number>(100, (s) => {
    core.setSlider(s).catch((err) => setStatus(String(err)));
});
$<HTMLInputElement>("slider").addEventListener("input", (ev) => {
    const s = Number((ev.target as HTMLInputElement).value);
    $("sliderLabel").textContent = `s = ${s.toFixed(1)}`;
    sliderLimiter.push(s);
});

for (const id of ["point", "brush", "paint", "baseline"]) {
    $<HTMLInputElement>(`tech-${id}`).addEventListener("change", () => {
        core.technique = id as Technique;
    });
}
$<HTMLSelectElement>("mode").addEventListener("change", (ev) => {
    core.mode = (ev.target as HTMLSelectElement).value as CombineMode;
});
$<HTMLInputElement>("radius").addEventListener("change", (ev) => {
    core.strokeRadius = Number((ev.target as HTMLInputElement).value);
});
$<HTMLInputElement>("depth").addEventListener("input", (ev) => {
    core.depth = Number((ev.target as HTMLInputElement).value);
});

$<HTMLInputElement>("file").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    setStatus("uploading cloud…");
    await client.uploadCloud(await file.arrayBuffer());
    await pollUntilReady();
});

async function pollUntilReady() {
    for (;;) {
        const st = await client.status();
        if (st && st.field.state === "ready") {
            setStatus(`${st.particles} particles, field ready`);
            const decimate = Math.max(1, Math.floor(st.particles / 60000));
            const pts = await client.points(decimate);
            pointStride = pts.stride;
            view.setCloud(pts.positions, pts.labels);
            return;
        }
        if (st && st.field.state === "failed") {
            setStatus(`field build failed: ${st.field.error}`);
            return;
        }
        setStatus(st ? `building field… ${(st.field.progress * 100).toFixed(0)}%`
                     : "no session: upload a cloud");
        await new Promise((r) => setTimeout(r, 250));
    }
}

// input: left-drag orbits, wheel zooms, shift+drag draws the stroke
// (orbit stays available mid-stroke to verify depth from another angle)
let dragging = false;
let drawing = false;
let last = { x: 0, y: 0 };

function ndcOf(ev: PointerEvent) {
    const r = canvas.getBoundingClientRect();
    return {
        x: ((ev.clientX - r.left) / r.width) * 2 - 1,
        y: -(((ev.clientY - r.top) / r.height) * 2 - 1),
    };
}

canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    last = { x: ev.clientX, y: ev.clientY };
    if (ev.shiftKey) {
        drawing = true;
        strokeScreen = [{ ...ndcOf(ev), timeMs: performance.now() }];
    } else {
        dragging = true;
    }
});
canvas.addEventListener("pointermove", (ev) => {
    if (drawing) {
        strokeScreen.push({ ...ndcOf(ev), timeMs: performance.now() });
        previewStroke();
    } else if (dragging) {
        view.orbit(ev.clientX - last.x, ev.clientY - last.y);
        last = { x: ev.clientX, y: ev.clientY };
    }
});
canvas.addEventListener("pointerup", async () => {
    dragging = false;
    if (!drawing) return;
    drawing = false;
    if (strokeScreen.length === 0) return;
    try {
        const doc = core.emitStroke(strokeScreen, view.cameraState());
        setStatus(`${core.technique}: selecting…`);
        await core.applyStroke(doc);
        setStatus(`${core.technique}: done`);
    } catch (err) {
        setStatus(String(err));
    }
});
canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    view.zoom(ev.deltaY > 0 ? 1.1 : 1 / 1.1);
});

function previewStroke() {
    if (strokeLine) view.scene.remove(strokeLine);
    const world = projectStroke(strokeScreen, view.cameraState(), core.depth);
    const pts = world.map((w) => new THREE.Vector3(w.x, w.y, w.z));
    strokeLine = new THREE.Line(
        new THREE.BufferGeometry().setFromPoints(pts),
        new THREE.LineBasicMaterial({ color: 0xff4444 }));
    view.scene.add(strokeLine);
}

function frame() {
    const w = canvas.clientWidth, h = canvas.clientHeight;
    if (canvas.width !== w || canvas.height !== h) view.resize(w, h);
    view.updatePlaneMarker(core.depth);
    view.render();
    requestAnimationFrame(frame);
}

pollUntilReady().catch((err) => setStatus(String(err)));
frame();
