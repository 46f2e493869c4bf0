/** three.js scene: decimated particle cloud with the study color scheme
 * (targets yellow, interferers blue, selected red), selection mesh, a
 * depth-plane marker, and a minimal orbit camera. */

import * as THREE from "three";
import type { CameraState } from "./math.js";

const COLOR_TARGET = new THREE.Color("#daa520");
const COLOR_INTERFERER = new THREE.Color("#1e90ff");
const COLOR_SELECTED = new THREE.Color("#b22222");

export class SceneView {
    readonly renderer: THREE.WebGLRenderer;
    readonly scene = new THREE.Scene();
    readonly camera: THREE.PerspectiveCamera;

    private points: THREE.Points | null = null;
    private colors: Float32Array | null = null;
    private labels: number[] | null = null;
    private mesh: THREE.Mesh | null = null;
    private planeMarker: THREE.LineLoop;

    private azimuth = 0.8;
    private elevation = 0.5;
    private distance = 3.0;
    target = new THREE.Vector3(0.5, 0.5, 0.5);

    constructor(readonly canvas: HTMLCanvasElement) {
        this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
        this.camera = new THREE.PerspectiveCamera(50, 1, 0.01, 100);
        this.scene.background = new THREE.Color("#10131a");
        this.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
        const sun = new THREE.DirectionalLight(0xffffff, 1.2);
        sun.position.set(2, 3, 4);
        this.scene.add(sun);

        const ring = new THREE.BufferGeometry().setFromPoints(
            Array.from({ length: 64 }, (_, i) => {
                const a = (i / 64) * Math.PI * 2;
                return new THREE.Vector3(Math.cos(a), Math.sin(a), 0);
            }));
        this.planeMarker = new THREE.LineLoop(
            ring, new THREE.LineBasicMaterial({ color: 0x777788 }));
        this.scene.add(this.planeMarker);
        this.updateCamera();
    }

    resize(width: number, height: number): void {
        this.renderer.setSize(width, height, false);
        this.camera.aspect = width / height;
        this.camera.updateProjectionMatrix();
    }

    orbit(dxPixels: number, dyPixels: number): void {
        this.azimuth -= dxPixels * 0.008;
        this.elevation = Math.min(1.5, Math.max(-1.5, this.elevation + dyPixels * 0.008));
        this.updateCamera();
    }

    zoom(factor: number): void {
        this.distance = Math.min(50, Math.max(0.05, this.distance * factor));
        this.updateCamera();
    }

    private updateCamera(): void {
        const ce = Math.cos(this.elevation);
        this.camera.position.set(
            this.target.x + this.distance * ce * Math.cos(this.azimuth),
            this.target.y + this.distance * ce * Math.sin(this.azimuth),
            this.target.z + this.distance * Math.sin(this.elevation),
        );
        this.camera.up.set(0, 0, 1);
        this.camera.lookAt(this.target);
    }

    cameraState(): CameraState {
        return {
            position: { ...this.camera.position },
            target: { x: this.target.x, y: this.target.y, z: this.target.z },
            up: { x: 0, y: 0, z: 1 },
            fovYDegrees: this.camera.fov,
            aspect: this.camera.aspect,
        };
    }

    setCloud(positions: number[][], labels: number[] | null): void {
        if (this.points) this.scene.remove(this.points);
        const flat = new Float32Array(positions.length * 3);
        positions.forEach((p, i) => flat.set(p, i * 3));
        this.colors = new Float32Array(positions.length * 3);
        this.labels = labels;
        const geo = new THREE.BufferGeometry();
        geo.setAttribute("position", new THREE.BufferAttribute(flat, 3));
        geo.setAttribute("color", new THREE.BufferAttribute(this.colors, 3));
        geo.computeBoundingBox();
        const bb = geo.boundingBox!;
        bb.getCenter(this.target);
        this.distance = bb.getSize(new THREE.Vector3()).length() * 1.2;
        this.points = new THREE.Points(geo, new THREE.PointsMaterial({
            size: this.distance / 300, vertexColors: true,
        }));
        this.scene.add(this.points);
        this.applySelection(new Set(), 1);
        this.updateCamera();
    }

    /** Recolor the cloud from the service's selected set; the stride maps
     * full-cloud particle indices onto the decimated buffer. */
    applySelection(selected: Set<number>, stride: number): void {
        if (!this.points || !this.colors) return;
        const n = this.colors.length / 3;
        for (let i = 0; i < n; i++) {
            const full = i * stride;
            const color = selected.has(full)
                ? COLOR_SELECTED
                : (this.labels && this.labels[i] ? COLOR_TARGET : COLOR_INTERFERER);
            this.colors[i * 3] = color.r;
            this.colors[i * 3 + 1] = color.g;
            this.colors[i * 3 + 2] = color.b;
        }
        (this.points.geometry.getAttribute("color") as THREE.BufferAttribute)
            .needsUpdate = true;
    }

    setMeshFromObj(objText: string): void {
        if (this.mesh) this.scene.remove(this.mesh);
        const verts: number[] = [];
        const tris: number[] = [];
        for (const line of objText.split("\n")) {
            if (line.startsWith("v ")) {
                const [x, y, z] = line.slice(2).trim().split(/\s+/).map(Number);
                verts.push(x, y, z);
            } else if (line.startsWith("f ")) {
                const [a, b, c] = line.slice(2).trim().split(/\s+/).map(Number);
                tris.push(a - 1, b - 1, c - 1);
            }
        }
        const geo = new THREE.BufferGeometry();
        geo.setAttribute("position",
                         new THREE.BufferAttribute(new Float32Array(verts), 3));
        geo.setIndex(tris);
        geo.computeVertexNormals();
        this.mesh = new THREE.Mesh(geo, new THREE.MeshStandardMaterial({
            color: 0xcc5544, transparent: true, opacity: 0.33,
            side: THREE.DoubleSide, depthWrite: false,
        }));
        this.scene.add(this.mesh);
    }

    clearMesh(): void {
        if (this.mesh) {
            this.scene.remove(this.mesh);
            this.mesh = null;
        }
    }

    /** Keep the depth-plane marker facing the camera at the given depth. */
    updatePlaneMarker(depth: number): void {
        const dir = new THREE.Vector3();
        this.camera.getWorldDirection(dir);
        const center = this.camera.position.clone().addScaledVector(dir, depth);
        this.planeMarker.position.copy(center);
        this.planeMarker.quaternion.copy(this.camera.quaternion);
        const radius = Math.tan((this.camera.fov * Math.PI) / 360) * depth * 0.5;
        this.planeMarker.scale.setScalar(radius);
    }

    render(): void {
        this.renderer.render(this.scene, this.camera);
    }
}
