"""Numba kernels for the hot loops: KDE scatter, trilinear sampling,
gradient ascent, polyline distances, and ellipsoid rasterization.

Everything here is deterministic: loops run in a fixed order and no
parallel reductions are used, so results are independent of thread
scheduling and identical across runs.
"""

import numpy as np
from numba import njit

# Fractional coordinates within this distance of a node snap onto it so that
# sampling at a node position returns the stored node value exactly.
_SNAP = 1e-9

# Ascent termination status codes.
ASCEND_MAX_STEPS = 0
ASCEND_GRAD_TOL = 1
ASCEND_STALL = 2
ASCEND_BOUNDARY = 3


@njit(cache=True, inline="always")
def _trilinear(values, box_min, h, x, y, z):
    nx, ny, nz = values.shape
    tx = (x - box_min[0]) / h[0]
    ty = (y - box_min[1]) / h[1]
    tz = (z - box_min[2]) / h[2]
    ix = int(np.floor(tx))
    iy = int(np.floor(ty))
    iz = int(np.floor(tz))
    if ix > nx - 2:
        ix = nx - 2
    if iy > ny - 2:
        iy = ny - 2
    if iz > nz - 2:
        iz = nz - 2
    if ix < 0:
        ix = 0
    if iy < 0:
        iy = 0
    if iz < 0:
        iz = 0
    fx = tx - ix
    fy = ty - iy
    fz = tz - iz
    if fx < _SNAP:
        fx = 0.0
    elif fx > 1.0 - _SNAP:
        fx = 1.0
    if fy < _SNAP:
        fy = 0.0
    elif fy > 1.0 - _SNAP:
        fy = 1.0
    if fz < _SNAP:
        fz = 0.0
    elif fz > 1.0 - _SNAP:
        fz = 1.0
    c000 = values[ix, iy, iz]
    c100 = values[ix + 1, iy, iz]
    c010 = values[ix, iy + 1, iz]
    c110 = values[ix + 1, iy + 1, iz]
    c001 = values[ix, iy, iz + 1]
    c101 = values[ix + 1, iy, iz + 1]
    c011 = values[ix, iy + 1, iz + 1]
    c111 = values[ix + 1, iy + 1, iz + 1]
    c00 = c000 + fx * (c100 - c000)
    c10 = c010 + fx * (c110 - c010)
    c01 = c001 + fx * (c101 - c001)
    c11 = c011 + fx * (c111 - c011)
    c0 = c00 + fy * (c10 - c00)
    c1 = c01 + fy * (c11 - c01)
    return c0 + fz * (c1 - c0)


@njit(cache=True, inline="always")
def _gradient(values, box_min, box_max, h, x, y, z):
    """Finite differences of the trilinear field with step = half cell size
    per axis; one-sided where a central stencil would leave the box."""
    hx = 0.5 * h[0]
    hy = 0.5 * h[1]
    hz = 0.5 * h[2]
    if x + hx > box_max[0]:
        gx = (_trilinear(values, box_min, h, x, y, z)
              - _trilinear(values, box_min, h, x - hx, y, z)) / hx
    elif x - hx < box_min[0]:
        gx = (_trilinear(values, box_min, h, x + hx, y, z)
              - _trilinear(values, box_min, h, x, y, z)) / hx
    else:
        gx = (_trilinear(values, box_min, h, x + hx, y, z)
              - _trilinear(values, box_min, h, x - hx, y, z)) / (2.0 * hx)
    if y + hy > box_max[1]:
        gy = (_trilinear(values, box_min, h, x, y, z)
              - _trilinear(values, box_min, h, x, y - hy, z)) / hy
    elif y - hy < box_min[1]:
        gy = (_trilinear(values, box_min, h, x, y + hy, z)
              - _trilinear(values, box_min, h, x, y, z)) / hy
    else:
        gy = (_trilinear(values, box_min, h, x, y + hy, z)
              - _trilinear(values, box_min, h, x, y - hy, z)) / (2.0 * hy)
    if z + hz > box_max[2]:
        gz = (_trilinear(values, box_min, h, x, y, z)
              - _trilinear(values, box_min, h, x, y, z - hz)) / hz
    elif z - hz < box_min[2]:
        gz = (_trilinear(values, box_min, h, x, y, z + hz)
              - _trilinear(values, box_min, h, x, y, z)) / hz
    else:
        gz = (_trilinear(values, box_min, h, x, y, z + hz)
              - _trilinear(values, box_min, h, x, y, z - hz)) / (2.0 * hz)
    return gx, gy, gz


@njit(cache=True)
def sample_batch(values, box_min, h, points, out):
    for i in range(points.shape[0]):
        out[i] = _trilinear(values, box_min, h,
                            points[i, 0], points[i, 1], points[i, 2])


@njit(cache=True)
def gradient_batch(values, box_min, box_max, h, points, out):
    for i in range(points.shape[0]):
        gx, gy, gz = _gradient(values, box_min, box_max, h,
                               points[i, 0], points[i, 1], points[i, 2])
        out[i, 0] = gx
        out[i, 1] = gy
        out[i, 2] = gz


@njit(cache=True)
def kde_scatter(positions, lengths, box_min, h, dims, out):
    """Accumulate the anisotropic finite-support quadratic kernel of every
    particle onto the grid nodes its ellipsoid overlaps.

    `out` must be zero-initialized with shape `dims`. Particle order is
    fixed, so the node sums are reproducible.
    """
    n = positions.shape[0]
    norm = 15.0 / (8.0 * np.pi * n)
    for j in range(n):
        px = positions[j, 0]
        py = positions[j, 1]
        pz = positions[j, 2]
        lx = lengths[j, 0]
        ly = lengths[j, 1]
        lz = lengths[j, 2]
        w = norm / (lx * ly * lz)
        ix0 = int(np.ceil((px - lx - box_min[0]) / h[0]))
        ix1 = int(np.floor((px + lx - box_min[0]) / h[0]))
        iy0 = int(np.ceil((py - ly - box_min[1]) / h[1]))
        iy1 = int(np.floor((py + ly - box_min[1]) / h[1]))
        iz0 = int(np.ceil((pz - lz - box_min[2]) / h[2]))
        iz1 = int(np.floor((pz + lz - box_min[2]) / h[2]))
        if ix0 < 0:
            ix0 = 0
        if iy0 < 0:
            iy0 = 0
        if iz0 < 0:
            iz0 = 0
        if ix1 > dims[0] - 1:
            ix1 = dims[0] - 1
        if iy1 > dims[1] - 1:
            iy1 = dims[1] - 1
        if iz1 > dims[2] - 1:
            iz1 = dims[2] - 1
        for ix in range(ix0, ix1 + 1):
            tx = (px - (box_min[0] + ix * h[0])) / lx
            ux = tx * tx
            if ux >= 1.0:
                continue
            for iy in range(iy0, iy1 + 1):
                ty = (py - (box_min[1] + iy * h[1])) / ly
                uxy = ux + ty * ty
                if uxy >= 1.0:
                    continue
                for iz in range(iz0, iz1 + 1):
                    tz = (pz - (box_min[2] + iz * h[2])) / lz
                    u = uxy + tz * tz
                    if u < 1.0:
                        out[ix, iy, iz] += w * (1.0 - u)


@njit(cache=True)
def ascend_trace(values, box_min, box_max, h, seed, step, min_disp,
                 g_tol, max_steps, path):
    """Single-seed variant of :func:`ascend_kernel` that records the visited
    positions into `path` ((max_steps + 1, 3)); returns the point count."""
    seeds = seed.reshape(1, 3)
    dest = np.empty((1, 3))
    nsteps = np.empty(1, dtype=np.int64)
    status = np.empty(1, dtype=np.int64)
    ascend_kernel(values, box_min, box_max, h, seeds, step, min_disp,
                  g_tol, max_steps, dest, nsteps, status, path, True)
    return nsteps[0] + 1


@njit(cache=True)
def ascend_kernel(values, box_min, box_max, h, seeds, step, min_disp,
                  g_tol, max_steps, dest, nsteps, status, path, record):
    """Backtracking gradient ascent from each seed.

    Moves a fixed spatial step along the normalized finite-difference
    gradient, halving the step whenever it would decrease the sampled value,
    so the path is monotone by construction. Positions are clamped to the
    box. Status codes: 0 step budget exhausted, 1 gradient below tolerance,
    2 interior stall (step underflow at a resolution maximum), 3 stall
    against the box boundary.
    """
    for i in range(seeds.shape[0]):
        px = seeds[i, 0]
        py = seeds[i, 1]
        pz = seeds[i, 2]
        fp = _trilinear(values, box_min, h, px, py, pz)
        st = ASCEND_MAX_STEPS
        taken = 0
        if record:
            path[0, 0] = px
            path[0, 1] = py
            path[0, 2] = pz
        for _ in range(max_steps):
            gx, gy, gz = _gradient(values, box_min, box_max, h, px, py, pz)
            gn = np.sqrt(gx * gx + gy * gy + gz * gz)
            if gn <= g_tol:
                st = ASCEND_GRAD_TOL
                break
            dx = gx / gn
            dy = gy / gn
            dz = gz / gn
            dt = step
            accepted = False
            qx = px
            qy = py
            qz = pz
            fq = fp
            clamped = False
            while dt >= min_disp:
                cx = px + dt * dx
                cy = py + dt * dy
                cz = pz + dt * dz
                qx = min(max(cx, box_min[0]), box_max[0])
                qy = min(max(cy, box_min[1]), box_max[1])
                qz = min(max(cz, box_min[2]), box_max[2])
                clamped = qx != cx or qy != cy or qz != cz
                fq = _trilinear(values, box_min, h, qx, qy, qz)
                if fq >= fp:
                    accepted = True
                    break
                dt *= 0.5
            if not accepted:
                st = ASCEND_STALL
                break
            ddx = qx - px
            ddy = qy - py
            ddz = qz - pz
            disp = np.sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
            px = qx
            py = qy
            pz = qz
            fp = fq
            taken += 1
            if record:
                path[taken, 0] = px
                path[taken, 1] = py
                path[taken, 2] = pz
            if disp <= min_disp:
                st = ASCEND_BOUNDARY if clamped else ASCEND_STALL
                break
        dest[i, 0] = px
        dest[i, 1] = py
        dest[i, 2] = pz
        nsteps[i] = taken
        status[i] = st


@njit(cache=True)
def min_dist_to_polyline(points, polyline, out):
    """Exact Euclidean distance from each point to a polyline (min over
    segments; a single-point polyline degenerates to point distance)."""
    m = polyline.shape[0]
    for i in range(points.shape[0]):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        best = 1e300
        if m == 1:
            dx = px - polyline[0, 0]
            dy = py - polyline[0, 1]
            dz = pz - polyline[0, 2]
            best = dx * dx + dy * dy + dz * dz
        for s in range(m - 1):
            ax = polyline[s, 0]
            ay = polyline[s, 1]
            az = polyline[s, 2]
            bx = polyline[s + 1, 0] - ax
            by = polyline[s + 1, 1] - ay
            bz = polyline[s + 1, 2] - az
            seg2 = bx * bx + by * by + bz * bz
            if seg2 > 0.0:
                t = ((px - ax) * bx + (py - ay) * by + (pz - az) * bz) / seg2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            dx = px - (ax + t * bx)
            dy = py - (ay + t * by)
            dz = pz - (az + t * bz)
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
        out[i] = np.sqrt(best)


@njit(cache=True)
def capsule_mask(polyline, radius, origin, spacing, npts, out):
    """Mark grid points within `radius` of the polyline (union of segment
    capsules; a single-point polyline marks a ball)."""
    m = polyline.shape[0]
    nseg = m - 1 if m > 1 else 1
    for s in range(nseg):
        ax = polyline[s, 0]
        ay = polyline[s, 1]
        az = polyline[s, 2]
        if m > 1:
            ex = polyline[s + 1, 0]
            ey = polyline[s + 1, 1]
            ez = polyline[s + 1, 2]
        else:
            ex, ey, ez = ax, ay, az
        bx = ex - ax
        by = ey - ay
        bz = ez - az
        seg2 = bx * bx + by * by + bz * bz
        lox = min(ax, ex) - radius
        loy = min(ay, ey) - radius
        loz = min(az, ez) - radius
        hix = max(ax, ex) + radius
        hiy = max(ay, ey) + radius
        hiz = max(az, ez) + radius
        ix0 = max(0, int(np.ceil((lox - origin[0]) / spacing[0])))
        ix1 = min(npts[0] - 1, int(np.floor((hix - origin[0]) / spacing[0])))
        iy0 = max(0, int(np.ceil((loy - origin[1]) / spacing[1])))
        iy1 = min(npts[1] - 1, int(np.floor((hiy - origin[1]) / spacing[1])))
        iz0 = max(0, int(np.ceil((loz - origin[2]) / spacing[2])))
        iz1 = min(npts[2] - 1, int(np.floor((hiz - origin[2]) / spacing[2])))
        r2 = radius * radius
        for ix in range(ix0, ix1 + 1):
            px = origin[0] + ix * spacing[0]
            for iy in range(iy0, iy1 + 1):
                py = origin[1] + iy * spacing[1]
                for iz in range(iz0, iz1 + 1):
                    if out[ix, iy, iz]:
                        continue
                    pz = origin[2] + iz * spacing[2]
                    if seg2 > 0.0:
                        t = ((px - ax) * bx + (py - ay) * by + (pz - az) * bz) / seg2
                        if t < 0.0:
                            t = 0.0
                        elif t > 1.0:
                            t = 1.0
                    else:
                        t = 0.0
                    dx = px - (ax + t * bx)
                    dy = py - (ay + t * by)
                    dz = pz - (az + t * bz)
                    if dx * dx + dy * dy + dz * dz <= r2:
                        out[ix, iy, iz] = True


@njit(cache=True)
def ellipsoid_mask(centers, lengths, origin, spacing, npts, out):
    """Mark grid points (spaced `spacing` from `origin`) covered by any of
    the axis-aligned ellipsoids; the boundary is inclusive."""
    for j in range(centers.shape[0]):
        cx = centers[j, 0]
        cy = centers[j, 1]
        cz = centers[j, 2]
        lx = lengths[j, 0]
        ly = lengths[j, 1]
        lz = lengths[j, 2]
        ix0 = max(0, int(np.ceil((cx - lx - origin[0]) / spacing[0])))
        ix1 = min(npts[0] - 1, int(np.floor((cx + lx - origin[0]) / spacing[0])))
        iy0 = max(0, int(np.ceil((cy - ly - origin[1]) / spacing[1])))
        iy1 = min(npts[1] - 1, int(np.floor((cy + ly - origin[1]) / spacing[1])))
        iz0 = max(0, int(np.ceil((cz - lz - origin[2]) / spacing[2])))
        iz1 = min(npts[2] - 1, int(np.floor((cz + lz - origin[2]) / spacing[2])))
        for ix in range(ix0, ix1 + 1):
            tx = ((origin[0] + ix * spacing[0]) - cx) / lx
            ux = tx * tx
            if ux > 1.0:
                continue
            for iy in range(iy0, iy1 + 1):
                ty = ((origin[1] + iy * spacing[1]) - cy) / ly
                uxy = ux + ty * ty
                if uxy > 1.0:
                    continue
                for iz in range(iz0, iz1 + 1):
                    tz = ((origin[2] + iz * spacing[2]) - cz) / lz
                    if uxy + tz * tz <= 1.0:
                        out[ix, iy, iz] = True
