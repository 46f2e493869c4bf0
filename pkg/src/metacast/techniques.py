"""The four selection strategies.

* point: a pointer drag; each sample sets the threshold from the density
  under the pointer and keeps the component around the maximum its ascent
  reaches, so the target can switch as the user drags.
* brush: a stroke along a filament; stroke-sample ascents give a maxima
  chain, candidate particles are the ones flowing into a tube around that
  chain, and components are extracted inside the union of their bandwidth
  ellipsoids.
* paint: a rough scribble over a cluster; the threshold is the mean node
  density in a tube around the stroke and the single component around the
  most-voted ascent destination is kept.
* baseline: a purely geometric capsule sweep with no density awareness.

All techniques return a :class:`Selection` whose threshold can be re-scaled
afterwards with :func:`adjust_threshold` (threshold = 2^s * rho0, s in
[-4, 4]).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np

from . import _kernels
from .errors import InvalidInputError
from .field import DensityGrid, ParticleCloud, _as_points, sample_density
from .flow import DEFAULT_PULL_WEIGHT, ascend_batch, build_maxline, dedupe_maxima
from .surface import (ComponentGrid, TriangleMesh, classify_particles,
                      component_containing, extract_mesh, label_components)

S_MIN, S_MAX = -4.0, 4.0
TECHNIQUES = ("point", "brush", "paint", "baseline")

FLAG_NO_STRUCTURE = "no structure"
FLAG_NO_STRUCTURE_NEAR_STROKE = "no structure near stroke"
FLAG_S_CLAMPED = "s clamped to [-4, 4]"


@dataclass
class Stroke:
    """Ordered 3D input polyline with timestamps and a marker radius."""

    samples: np.ndarray
    radius: float
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        self.samples = _as_points(self.samples, "samples")
        if len(self.samples) < 1:
            raise InvalidInputError("a stroke needs at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidInputError("stroke samples must be finite")
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise InvalidInputError("stroke radius must be positive")
        if self.timestamps is None:
            self.timestamps = np.zeros(len(self.samples))
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if self.timestamps.shape != (len(self.samples),):
            raise InvalidInputError("timestamps must match the sample count")
        if np.any(np.diff(self.timestamps) < 0):
            raise InvalidInputError("timestamps must be non-decreasing")

    def resampled(self, spacing: float) -> np.ndarray:
        """Uniform arc-length resampling (endpoints preserved)."""
        return resample_polyline(self.samples, spacing)


def resample_polyline(points: np.ndarray, spacing: float) -> np.ndarray:
    points = _as_points(points)
    if len(points) == 1:
        return points.copy()
    deltas = np.linalg.norm(np.diff(points, axis=0), axis=1)
    keep = np.concatenate([[True], deltas > 0])
    points = points[keep]
    if len(points) == 1:
        return points.copy()
    arclen = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    total = arclen[-1]
    n_intervals = max(1, int(np.ceil(total / spacing)))
    ts = np.linspace(0.0, total, n_intervals + 1)
    out = np.column_stack([np.interp(ts, arclen, points[:, k]) for k in range(3)])
    out[0] = points[0]
    out[-1] = points[-1]
    return out


@dataclass
class Selection:
    """Output of a technique: threshold state, kept components, selected
    particle indices, iso-surface mesh, and the anchor data needed to
    re-derive the kept set when the threshold is adjusted."""

    technique: str
    rho0: float
    s: float
    threshold: float
    kept_components: tuple[int, ...]
    particles: np.ndarray
    mesh: TriangleMesh
    anchors: np.ndarray
    components: ComponentGrid | None = None
    cell_mask: np.ndarray | None = None
    candidates: np.ndarray | None = None
    flags: tuple[str, ...] = ()

    @property
    def count(self) -> int:
        return int(len(self.particles))


def _empty_selection(technique: str, rho0: float, s: float, threshold: float,
                     anchors=None, cell_mask=None, candidates=None,
                     flags: Iterable[str] = ()) -> Selection:
    return Selection(technique, float(rho0), float(s), float(threshold), (),
                     np.zeros(0, dtype=np.int64), TriangleMesh.empty(),
                     np.zeros((0, 3)) if anchors is None else _as_points(anchors),
                     None, cell_mask, candidates, tuple(flags))


def _finish(technique: str, grid: DensityGrid, cloud: ParticleCloud,
            rho0: float, s: float, threshold: float, components: ComponentGrid,
            keep: set[int], anchors, cell_mask=None, candidates=None,
            flags: Iterable[str] = ()) -> Selection:
    particles = classify_particles(cloud, grid, threshold, components, keep)
    mesh = extract_mesh(grid, threshold, components, keep)
    return Selection(technique, float(rho0), float(s), float(threshold),
                     tuple(sorted(keep)), particles, mesh, _as_points(anchors),
                     components, cell_mask, candidates, tuple(flags))


def meta_point(grid: DensityGrid, cloud: ParticleCloud, pointer_samples,
               on_update: Callable[[Selection], None] | None = None) -> Selection:
    """Pointer-drag selection.

    Every sample inside the box sets the threshold to the density under the
    pointer, ascends to the nearby maximum, and keeps the component that
    contains it; intermediate selections stream to `on_update` and the final
    one (reflecting the last sample, with rho0 = its threshold at s = 0) is
    returned.
    """
    samples = _as_points(pointer_samples, "pointer_samples")
    inside = grid.spec.contains(samples)
    if not inside.any():
        raise InvalidInputError("no pointer sample lies inside the field box")
    selection = None
    for p in samples[inside]:
        threshold = sample_density(grid, p)
        if threshold <= 0:
            selection = _empty_selection("point", threshold, 0.0, threshold,
                                         flags=(FLAG_NO_STRUCTURE,))
        else:
            res = ascend_batch(grid, p.reshape(1, 3))[0]
            components = label_components(grid, threshold)
            cid = component_containing(components, res.destination)
            if cid is None:
                selection = _empty_selection("point", threshold, 0.0, threshold,
                                             anchors=res.destination,
                                             flags=(FLAG_NO_STRUCTURE,))
            else:
                selection = _finish("point", grid, cloud, threshold, 0.0,
                                    threshold, components, {cid},
                                    res.destination)
        if on_update is not None:
            on_update(selection)
    return selection


def _particle_destinations(grid: DensityGrid, cloud: ParticleCloud) -> np.ndarray:
    spec = grid.spec
    pos = np.ascontiguousarray(cloud.positions)
    dest = np.empty_like(pos)
    nsteps = np.empty(len(pos), dtype=np.int64)
    status = np.empty(len(pos), dtype=np.int64)
    _kernels.ascend_kernel(grid.values, spec.box_min, spec.box_max, spec.spacing,
                           pos, 0.5 * float(spec.spacing.min()),
                           1e-3 * float(spec.spacing.min()),
                           1e-8 * grid.peak / float(spec.spacing.min()),
                           10_000, dest, nsteps, status, np.zeros((1, 3)), False)
    return dest


def _ellipsoid_cell_mask(grid: DensityGrid, centers: np.ndarray,
                         lengths: np.ndarray) -> np.ndarray:
    spec = grid.spec
    mask = np.zeros(tuple(spec.cell_dims), dtype=bool)
    _kernels.ellipsoid_mask(np.ascontiguousarray(centers),
                            np.ascontiguousarray(lengths),
                            spec.box_min + 0.5 * spec.spacing, spec.spacing,
                            spec.cell_dims, mask)
    return mask


def _ellipsoid_node_mask(grid: DensityGrid, centers: np.ndarray,
                         lengths: np.ndarray) -> np.ndarray:
    spec = grid.spec
    mask = np.zeros(tuple(spec.dims), dtype=bool)
    _kernels.ellipsoid_mask(np.ascontiguousarray(centers),
                            np.ascontiguousarray(lengths),
                            spec.box_min, spec.spacing, spec.dims, mask)
    return mask


def _dist_to_polyline(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    out = np.empty(len(points), dtype=np.float64)
    _kernels.min_dist_to_polyline(np.ascontiguousarray(points),
                                  np.ascontiguousarray(polyline), out)
    return out


def _stroke_maxima(grid: DensityGrid, stroke: Stroke):
    """Resample the stroke, ascend from every in-box sample, and dedupe the
    destinations (ordered by first contributing stroke sample)."""
    seeds = stroke.resampled(0.5 * float(grid.spec.spacing.min()))
    inside = grid.spec.contains(seeds)
    if not inside.any():
        raise InvalidInputError("no stroke sample lies inside the field box")
    results = ascend_batch(grid, seeds[inside])
    return seeds, dedupe_maxima(results, tol=grid.spec.cell_diagonal)


def meta_brush(grid: DensityGrid, cloud: ParticleCloud, stroke: Stroke,
               pull_weight: float = DEFAULT_PULL_WEIGHT) -> Selection:
    """Stroke-guided filament selection.

    The deduped ascent destinations of the stroke samples are chained into a
    ridge path; particles whose own ascents land within the stroke radius of
    that path become candidates, the union of their bandwidth ellipsoids
    restricts component extraction, and the mean node density inside that
    region sets rho0. Kept components are exactly the ones containing a
    chain maximum.
    """
    if cloud.adaptive_lengths is None:
        raise InvalidInputError("cloud needs adaptive lengths; call prepare_cloud first")
    _, maxima = _stroke_maxima(grid, stroke)
    if not maxima:
        return _empty_selection("brush", 0.0, 0.0, 0.0,
                                flags=(FLAG_NO_STRUCTURE_NEAR_STROKE,))
    anchor_points = np.array([m.position for m in maxima])
    maxline = build_maxline(grid, anchor_points, pull_weight=pull_weight)

    destinations = _particle_destinations(grid, cloud)
    # Cheap bounding-box reject before the exact tube test.
    lo = maxline.polyline.min(axis=0) - stroke.radius
    hi = maxline.polyline.max(axis=0) + stroke.radius
    near = np.all((destinations >= lo) & (destinations <= hi), axis=1)
    candidates = np.flatnonzero(near)
    if len(candidates):
        dist = _dist_to_polyline(destinations[candidates], maxline.polyline)
        candidates = candidates[dist <= stroke.radius]
    if len(candidates) == 0:
        return _empty_selection("brush", 0.0, 0.0, 0.0, anchors=anchor_points,
                                flags=(FLAG_NO_STRUCTURE_NEAR_STROKE,))

    centers = cloud.positions[candidates]
    lengths = cloud.adaptive_lengths[candidates]
    node_mask = _ellipsoid_node_mask(grid, centers, lengths)
    if not node_mask.any():
        return _empty_selection("brush", 0.0, 0.0, 0.0, anchors=anchor_points,
                                candidates=candidates,
                                flags=(FLAG_NO_STRUCTURE_NEAR_STROKE,))
    rho0 = float(grid.values[node_mask].mean())
    cell_mask = _ellipsoid_cell_mask(grid, centers, lengths)
    if rho0 <= 0:
        return _empty_selection("brush", rho0, 0.0, rho0, anchors=anchor_points,
                                cell_mask=cell_mask, candidates=candidates,
                                flags=(FLAG_NO_STRUCTURE_NEAR_STROKE,))
    components = label_components(grid, rho0, mask=cell_mask)
    keep = {cid for p in anchor_points
            if (cid := component_containing(components, p)) is not None}
    if not keep:
        return _empty_selection("brush", rho0, 0.0, rho0, anchors=anchor_points,
                                cell_mask=cell_mask, candidates=candidates,
                                flags=(FLAG_NO_STRUCTURE_NEAR_STROKE,))
    return _finish("brush", grid, cloud, rho0, 0.0, rho0, components, keep,
                   anchor_points, cell_mask=cell_mask, candidates=candidates)


def meta_paint(grid: DensityGrid, cloud: ParticleCloud, stroke: Stroke) -> Selection:
    """Scribble selection of the most heavily brushed cluster.

    rho0 is the mean node density inside a tube of radius mean(global
    smoothing lengths) around the stroke; the single component (over the
    full field) containing the ascent destination with the most stroke-
    sample votes is kept.
    """
    seeds = stroke.resampled(0.5 * float(grid.spec.spacing.min()))
    radius = float(np.mean(grid.global_lengths))
    spec = grid.spec
    node_mask = np.zeros(tuple(spec.dims), dtype=bool)
    _kernels.capsule_mask(np.ascontiguousarray(seeds), radius, spec.box_min,
                          spec.spacing, spec.dims, node_mask)
    n_tunnel = int(node_mask.sum())
    if n_tunnel == 0:
        raise InvalidInputError("stroke tunnel contains no grid nodes "
                                "(stroke outside the field box?)")
    rho0 = float(grid.values[node_mask].mean())

    inside = spec.contains(seeds)
    if not inside.any():
        raise InvalidInputError("no stroke sample lies inside the field box")
    maxima = dedupe_maxima(ascend_batch(grid, seeds[inside]),
                           tol=spec.cell_diagonal)
    if not maxima or rho0 <= 0:
        return _empty_selection("paint", rho0, 0.0, rho0,
                                flags=(FLAG_NO_STRUCTURE,))
    best = maxima[0]
    for m in maxima[1:]:
        if m.votes > best.votes:  # ties keep the earliest representative
            best = m
    components = label_components(grid, rho0)
    cid = component_containing(components, best.position)
    if cid is None:
        return _empty_selection("paint", rho0, 0.0, rho0, anchors=best.position,
                                flags=(FLAG_NO_STRUCTURE,))
    return _finish("paint", grid, cloud, rho0, 0.0, rho0, components, {cid},
                   best.position)


def adjust_threshold(grid: DensityGrid, cloud: ParticleCloud, sel: Selection,
                     s: float) -> Selection:
    """Re-derive `sel` at threshold 2^s * rho0 (s clamped to [-4, 4]).

    Components are relabeled under the selection's own mask and the kept set
    is re-derived from its anchors, so the particle set stays consistent
    with the technique's rule at every slider position.
    """
    flags = []
    if s < S_MIN or s > S_MAX:
        s = min(max(s, S_MIN), S_MAX)
        flags.append(FLAG_S_CLAMPED)
    threshold = (2.0 ** s) * sel.rho0
    if sel.technique not in ("point", "brush", "paint"):
        raise InvalidInputError(f"cannot adjust a {sel.technique!r} selection")
    if threshold <= 0 or len(sel.anchors) == 0:
        return replace(_empty_selection(sel.technique, sel.rho0, s, threshold,
                                        anchors=sel.anchors,
                                        cell_mask=sel.cell_mask,
                                        candidates=sel.candidates),
                       flags=tuple(sel.flags) + tuple(flags))
    components = label_components(grid, threshold, mask=sel.cell_mask)
    keep = {cid for p in sel.anchors
            if (cid := component_containing(components, p)) is not None}
    if not keep:
        return _empty_selection(sel.technique, sel.rho0, s, threshold,
                                anchors=sel.anchors, cell_mask=sel.cell_mask,
                                candidates=sel.candidates,
                                flags=tuple(flags) + (FLAG_NO_STRUCTURE,))
    out = _finish(sel.technique, grid, cloud, sel.rho0, s, threshold,
                  components, keep, sel.anchors, cell_mask=sel.cell_mask,
                  candidates=sel.candidates, flags=flags)
    return out


def baseline_brush(cloud: ParticleCloud, stroke: Stroke) -> np.ndarray:
    """Region-based sweep: indices of particles within the stroke radius of
    the stroke polyline. Pure geometry, no density involved."""
    dist = _dist_to_polyline(cloud.positions, stroke.samples)
    return np.flatnonzero(dist <= stroke.radius).astype(np.int64)


def combine(a, b, mode: str) -> np.ndarray:
    """Combine two particle index sets: union or subtraction (a minus b)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if mode == "union":
        return np.union1d(a, b)
    if mode == "subtract":
        return np.setdiff1d(a, b)
    raise InvalidInputError(f"unknown combine mode {mode!r}")


def selection_to_dict(sel: Selection, stats: dict | None = None) -> dict:
    """JSON-ready view of a selection; key order is fixed so serialization
    is reproducible."""
    out = {
        "technique": sel.technique,
        "rho0": sel.rho0,
        "s": sel.s,
        "threshold": sel.threshold,
        "kept_components": [int(k) for k in sel.kept_components],
        "particles": [int(i) for i in sel.particles],
        "anchors": [[float(c) for c in p] for p in sel.anchors],
    }
    if sel.candidates is not None:
        out["candidates"] = [int(i) for i in sel.candidates]
    if sel.flags:
        out["flags"] = list(sel.flags)
    if stats is not None:
        out["stats"] = stats
    return out


def selection_from_dict(d: dict, grid: DensityGrid | None = None,
                        cloud: ParticleCloud | None = None) -> Selection:
    """Rebuild a selection from its JSON form. The brush mask is
    reconstructed from the stored candidate indices when field and cloud are
    available, which is all :func:`adjust_threshold` needs."""
    try:
        technique = d["technique"]
        rho0 = float(d["rho0"])
        s = float(d["s"])
        threshold = float(d["threshold"])
        kept = tuple(int(k) for k in d["kept_components"])
        particles = np.asarray(d["particles"], dtype=np.int64)
        anchors = np.asarray(d.get("anchors", []), dtype=np.float64).reshape(-1, 3)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed selection object: {exc}") from exc
    candidates = None
    cell_mask = None
    if "candidates" in d:
        candidates = np.asarray(d["candidates"], dtype=np.int64)
        if grid is not None and cloud is not None and len(candidates):
            if cloud.adaptive_lengths is None:
                raise InvalidInputError("cloud needs adaptive lengths to "
                                        "rebuild the brush mask")
            cell_mask = _ellipsoid_cell_mask(grid, cloud.positions[candidates],
                                             cloud.adaptive_lengths[candidates])
    return Selection(technique, rho0, s, threshold, kept, particles,
                     TriangleMesh.empty(), anchors, None, cell_mask,
                     candidates, tuple(d.get("flags", ())))
