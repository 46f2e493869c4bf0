/** Camera math for stroke input: pure functions, no renderer types. */

export interface Vec3 { x: number; y: number; z: number; }

export interface CameraState {
    position: Vec3;
    target: Vec3;
    up: Vec3;
    fovYDegrees: number;
    aspect: number;
}

export function add(a: Vec3, b: Vec3): Vec3 {
    return { x: a.x + b.x, y: a.y + b.y, z: a.z + b.z };
}

export function sub(a: Vec3, b: Vec3): Vec3 {
    return { x: a.x - b.x, y: a.y - b.y, z: a.z - b.z };
}

export function scale(a: Vec3, s: number): Vec3 {
    return { x: a.x * s, y: a.y * s, z: a.z * s };
}

export function dot(a: Vec3, b: Vec3): number {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

export function cross(a: Vec3, b: Vec3): Vec3 {
    return {
        x: a.y * b.z - a.z * b.y,
        y: a.z * b.x - a.x * b.z,
        z: a.x * b.y - a.y * b.x,
    };
}

export function length(a: Vec3): number {
    return Math.sqrt(dot(a, a));
}

export function normalize(a: Vec3): Vec3 {
    const n = length(a);
    if (n === 0) throw new Error("cannot normalize a zero vector");
    return scale(a, 1 / n);
}

/** Right-handed camera basis; throws if the view direction degenerates. */
export function cameraBasis(cam: CameraState) {
    const forward = normalize(sub(cam.target, cam.position));
    const rightRaw = cross(forward, cam.up);
    if (length(rightRaw) < 1e-12) {
        throw new Error("degenerate camera: view direction parallel to up");
    }
    const right = normalize(rightRaw);
    const up = cross(right, forward);
    return { forward, right, up };
}

/**
 * Map a screen point in NDC ([-1, 1] each axis, +y up) onto the
 * camera-facing plane at `depth` along the view axis.
 *
 * `screenScaleDistance` fixes the world size of the screen rectangle (the
 * frustum cross-section at that distance). Drawing uses the stroke's own
 * depth here, which makes this the exact pixel-ray/plane intersection;
 * re-depthing an existing stroke keeps the scale, so the points slide
 * along the view axis only.
 */
export function unprojectOnDepthPlane(
    cam: CameraState,
    ndc: { x: number; y: number },
    depth: number,
    screenScaleDistance?: number,
): Vec3 {
    if (!(depth > 0)) throw new Error("depth must be positive");
    const basis = cameraBasis(cam);
    const scaleDist = screenScaleDistance ?? depth;
    const halfH = Math.tan((cam.fovYDegrees * Math.PI) / 360) * scaleDist;
    const halfW = halfH * cam.aspect;
    let p = add(cam.position, scale(basis.forward, depth));
    p = add(p, scale(basis.right, ndc.x * halfW));
    p = add(p, scale(basis.up, ndc.y * halfH));
    return p;
}

export interface StrokeSample { x: number; y: number; z: number; t: number; }

/**
 * Project a screen polyline onto the depth plane, attaching event
 * timestamps (seconds, relative to the first event).
 */
export function projectStroke(
    screenPoints: { x: number; y: number; timeMs: number }[],
    cam: CameraState,
    depth: number,
): StrokeSample[] {
    if (screenPoints.length < 1) throw new Error("empty screen polyline");
    const t0 = screenPoints[0].timeMs;
    return screenPoints.map((sp) => {
        const w = unprojectOnDepthPlane(cam, sp, depth, depth);
        return { x: w.x, y: w.y, z: w.z, t: (sp.timeMs - t0) / 1000 };
    });
}

export function clampSlider(s: number): number {
    return Math.min(4, Math.max(-4, s));
}
