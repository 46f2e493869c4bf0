"""Iso-density selection volumes: connected super-threshold components on
the cell grid, Marching-Cubes meshes over chosen components, and particle
classification against them.

A cell counts as super-threshold when any of its 8 corner nodes reaches the
threshold, which makes the labeled components line up one-to-one with the
closed Marching-Cubes shells (component adjacency is 6-connected, matching
the face adjacency the mesh is stitched across).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import ndimage

from ._mc_tables import CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE
from .errors import InvalidInputError, OutOfDomainError
from .field import DensityGrid, GridSpec, ParticleCloud, _as_points, sample_density

_SIX_CONNECTED = ndimage.generate_binary_structure(3, 1)


@dataclass
class ComponentGrid:
    """Connected component label per cell (0 = below threshold or outside
    the mask); ids run 1..component_count in scan order of first cell."""

    spec: GridSpec
    threshold: float
    labels: np.ndarray
    component_count: int
    mask: np.ndarray | None = None


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    triangle_components: np.ndarray

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64),
                   np.zeros(0, dtype=np.int64))


def _super_threshold_cells(values: np.ndarray, threshold: float) -> np.ndarray:
    corner_max = np.maximum.reduce([
        values[:-1, :-1, :-1], values[1:, :-1, :-1],
        values[:-1, 1:, :-1], values[1:, 1:, :-1],
        values[:-1, :-1, 1:], values[1:, :-1, 1:],
        values[:-1, 1:, 1:], values[1:, 1:, 1:],
    ])
    return corner_max >= threshold


def _xfastest_order(mask_3d: np.ndarray) -> np.ndarray:
    """Flat indices of True cells, ordered with the x index varying fastest."""
    flat = np.flatnonzero(mask_3d.transpose(2, 1, 0).ravel())
    z, y, x = np.unravel_index(flat, mask_3d.shape[::-1])
    return np.stack([x, y, z], axis=1)


def label_components(grid: DensityGrid, threshold: float,
                     mask: np.ndarray | None = None) -> ComponentGrid:
    """Label maximal 6-connected groups of super-threshold cells.

    `mask` (a boolean cell array) excludes cells before labeling. Component
    ids are renumbered so id 1 is the component whose first cell comes
    earliest in x-fastest scan order.
    """
    if threshold <= 0:
        raise InvalidInputError("threshold must be positive")
    cells = _super_threshold_cells(grid.values, threshold)
    if mask is not None:
        if mask.shape != cells.shape:
            raise InvalidInputError(
                f"mask shape {mask.shape} does not match cell grid {cells.shape}")
        cells &= mask
    labels, count = ndimage.label(cells, structure=_SIX_CONNECTED)
    labels = labels.astype(np.int32)
    if count > 1:
        flat = labels.transpose(2, 1, 0).ravel()
        nonzero = flat[flat > 0]
        ids, first = np.unique(nonzero, return_index=True)
        order = ids[np.argsort(first, kind="stable")]
        remap = np.zeros(count + 1, dtype=np.int32)
        remap[order] = np.arange(1, count + 1, dtype=np.int32)
        labels = remap[labels]
    return ComponentGrid(grid.spec, float(threshold), labels, int(count), mask)


def component_containing(components: ComponentGrid, point) -> int | None:
    """Component id of the cell containing `point`, or None if that cell is
    unlabeled. Points on shared cell faces resolve to the lower-index cell."""
    p = _as_points(point)[0]
    spec = components.spec
    if not spec.contains(p)[0]:
        raise OutOfDomainError(f"position {p.tolist()} outside the field box")
    ix, iy, iz = spec.cell_index(p)[0]
    label = int(components.labels[ix, iy, iz])
    return label if label > 0 else None


def extract_mesh(grid: DensityGrid, threshold: float,
                 components: ComponentGrid, keep: Iterable[int]) -> TriangleMesh:
    """Marching Cubes over the cells of the kept components.

    Vertices are deduplicated on their grid edge and placed by linear
    interpolation of the two node values; each triangle carries the
    component id of its emitting cell. Cell scan order and the shared case
    table fix the output ordering, so identical inputs produce identical
    meshes.
    """
    keep = sorted(set(int(k) for k in keep))
    if any(k < 1 or k > components.component_count for k in keep):
        raise InvalidInputError(f"unknown component ids in {keep}")
    if not keep:
        return TriangleMesh.empty()
    kept_cells = np.isin(components.labels, keep)
    cells = _xfastest_order(kept_cells)
    if len(cells) == 0:
        return TriangleMesh.empty()

    v = grid.values
    cx, cy, cz = cells[:, 0], cells[:, 1], cells[:, 2]
    corner_vals = np.empty((len(cells), 8), dtype=np.float64)
    for k, (ox, oy, oz) in enumerate(CORNER_OFFSETS):
        corner_vals[:, k] = v[cx + ox, cy + oy, cz + oz]
    case = ((corner_vals < threshold) << np.arange(8)).sum(axis=1)

    rows = TRI_TABLE[case]
    valid = rows >= 0
    edge_ids = rows[valid]
    if edge_ids.size == 0:
        return TriangleMesh.empty()
    cell_of_vertex = np.repeat(np.arange(len(cells)), valid.sum(axis=1))

    corners = EDGE_CORNERS[edge_ids]
    off_a = CORNER_OFFSETS[corners[:, 0]]
    off_b = CORNER_OFFSETS[corners[:, 1]]
    base = cells[cell_of_vertex]
    axis = np.argmax(off_a != off_b, axis=1)
    lower = base + np.minimum(off_a, off_b)

    nx, ny, nz = (int(d) for d in grid.spec.dims)
    key = ((axis * nx + lower[:, 0]) * ny + lower[:, 1]) * nz + lower[:, 2]
    unique_keys, inverse = np.unique(key, return_inverse=True)

    uaxis, rem = np.divmod(unique_keys, nx * ny * nz)
    gx, rem = np.divmod(rem, ny * nz)
    gy, gz = np.divmod(rem, nz)
    node0 = np.stack([gx, gy, gz], axis=1)
    node1 = node0.copy()
    node1[np.arange(len(node1)), uaxis] += 1
    v0 = v[node0[:, 0], node0[:, 1], node0[:, 2]]
    v1 = v[node1[:, 0], node1[:, 1], node1[:, 2]]
    den = v1 - v0
    t = np.where(den != 0, (threshold - v0) / np.where(den != 0, den, 1.0), 0.5)
    t = np.clip(t, 0.0, 1.0)
    spacing = grid.spec.spacing
    vertices = grid.spec.box_min + node0 * spacing
    vertices[np.arange(len(vertices)), uaxis] += t * spacing[uaxis]

    triangles = inverse.reshape(-1, 3).astype(np.int64)
    tri_cells = cell_of_vertex[::3]
    tri_components = components.labels[cx[tri_cells], cy[tri_cells], cz[tri_cells]]
    return TriangleMesh(vertices, triangles, tri_components.astype(np.int64))


def classify_particles(cloud: ParticleCloud, grid: DensityGrid, threshold: float,
                       components: ComponentGrid, keep: Iterable[int]) -> np.ndarray:
    """Indices of particles whose interpolated density reaches the threshold
    AND whose containing cell belongs to a kept component, sorted ascending.

    Both tests are required: the cell test alone would pick up low-density
    stragglers inside a component's bounding cells, the density test alone
    would merge separate components.
    """
    keep = set(int(k) for k in keep)
    if any(k < 1 or k > components.component_count for k in keep):
        raise InvalidInputError(f"unknown component ids in {keep}")
    if not keep or cloud.n == 0:
        return np.zeros(0, dtype=np.int64)
    inside = grid.spec.contains(cloud.positions)
    dens = np.zeros(cloud.n, dtype=np.float64)
    if inside.any():
        dens[inside] = sample_density(grid, cloud.positions[inside])
    idx = grid.spec.cell_index(cloud.positions)
    labels = components.labels[idx[:, 0], idx[:, 1], idx[:, 2]]
    selected = inside & (dens >= threshold) & np.isin(labels, sorted(keep))
    return np.flatnonzero(selected).astype(np.int64)


def mesh_to_obj(mesh: TriangleMesh, threshold: float, keep: Iterable[int]) -> str:
    """ASCII OBJ text; the header comment carries the threshold and the kept
    component ids, and `g` groups tag each triangle run's component."""
    ids = ",".join(str(k) for k in sorted(set(int(k) for k in keep)))
    lines = [f"# metacast iso-surface threshold={float(threshold)!r} components={ids}"]
    for x, y, z in mesh.vertices.tolist():
        lines.append(f"v {x!r} {y!r} {z!r}")
    current = None
    for (a, b, c), comp in zip(mesh.triangles.tolist(),
                               mesh.triangle_components.tolist()):
        if comp != current:
            lines.append(f"g component_{comp}")
            current = comp
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    return "\n".join(lines) + "\n"
