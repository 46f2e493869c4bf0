"""Continuous particle-density field on a regular grid.

The field is estimated once per cloud with an adaptive two-stage kernel
density estimator (fixed-bandwidth pilot pass, then per-particle bandwidth
scaling) and afterwards sampled anywhere inside the box through trilinear
interpolation. Everything downstream (gradient flow, iso-surfaces, the
selection techniques) works on the sampled field only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import _kernels
from .errors import InvalidInputError, OutOfDomainError

DEFAULT_GRID_DIMS = (100, 100, 100)
#: Second-stage bandwidth exponent: per-particle scale is
#: (pilot / geometric_mean)^(-ALPHA).
BANDWIDTH_ALPHA = 0.5
#: Cap on the per-particle bandwidth scale factor, so isolated particles in
#: near-empty space cannot blow their kernel up without bound.
LAMBDA_MAX = 10.0
_PILOT_GRID_DIMS = 64


def _as_points(a, name="points"):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, 3) if arr.size == 3 else arr
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInputError(f"{name} must have shape (n, 3), got {arr.shape}")
    return arr


@dataclass
class ParticleCloud:
    """Particle positions with optional ground-truth labels and per-particle
    smoothing lengths.

    Attributes
    ----------
    positions : (n, 3) float64 array
        World-space particle positions.
    labels : (n,) bool array, optional
        True marks a target particle, False an interferer.
    adaptive_lengths : (n, 3) float64 array, optional
        Per-particle kernel semi-axes, filled in by
        :func:`adaptive_smoothing_lengths`.
    """

    positions: np.ndarray
    labels: np.ndarray | None = None
    adaptive_lengths: np.ndarray | None = None

    def __post_init__(self):
        self.positions = _as_points(self.positions, "positions")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=bool)
            if self.labels.shape != (len(self.positions),):
                raise InvalidInputError(
                    "labels must have one entry per particle "
                    f"({self.labels.shape} vs {len(self.positions)} particles)")
        if self.adaptive_lengths is not None:
            self.adaptive_lengths = np.asarray(self.adaptive_lengths, dtype=np.float64)
            if self.adaptive_lengths.shape != self.positions.shape:
                raise InvalidInputError("adaptive_lengths must be (n, 3)")

    @property
    def n(self) -> int:
        return len(self.positions)


@dataclass
class GridSpec:
    """Axis-aligned box with a regular node lattice (dims nodes per axis)."""

    box_min: np.ndarray
    box_max: np.ndarray
    dims: np.ndarray = dataclass_field(
        default_factory=lambda: np.array(DEFAULT_GRID_DIMS, dtype=np.int64))

    def __post_init__(self):
        self.box_min = np.asarray(self.box_min, dtype=np.float64).reshape(3)
        self.box_max = np.asarray(self.box_max, dtype=np.float64).reshape(3)
        self.dims = np.asarray(self.dims, dtype=np.int64).reshape(3)
        if not np.all(self.box_max > self.box_min):
            raise InvalidInputError("box_max must exceed box_min on every axis")
        if np.any(self.dims < 2):
            raise InvalidInputError("need at least 2 nodes per axis")

    @property
    def spacing(self) -> np.ndarray:
        """Node spacing (cell edge length) per axis."""
        return (self.box_max - self.box_min) / (self.dims - 1)

    @property
    def cell_dims(self) -> np.ndarray:
        return self.dims - 1

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    def node_axis(self, k: int) -> np.ndarray:
        return np.linspace(self.box_min[k], self.box_max[k], self.dims[k])

    def contains(self, points) -> np.ndarray:
        # tolerate float noise from node-position arithmetic at the box faces
        p = _as_points(points)
        eps = 1e-9 * (self.box_max - self.box_min)
        return np.all((p >= self.box_min - eps) & (p <= self.box_max + eps), axis=1)

    def cell_index(self, points) -> np.ndarray:
        """Cell index per point; positions exactly on a shared cell face
        resolve to the lower-index cell."""
        p = _as_points(points)
        t = (p - self.box_min) / self.spacing
        idx = np.ceil(t).astype(np.int64) - 1
        return np.clip(idx, 0, self.cell_dims - 1)


@dataclass
class DensityGrid:
    """Density values on the nodes of a :class:`GridSpec`, plus the global
    smoothing lengths the estimate was derived from."""

    spec: GridSpec
    values: np.ndarray
    global_lengths: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != tuple(self.spec.dims):
            raise InvalidInputError(
                f"values shape {self.values.shape} does not match dims {tuple(self.spec.dims)}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise InvalidInputError("node values must be finite and non-negative")
        self.global_lengths = np.asarray(self.global_lengths, dtype=np.float64).reshape(3)

    @property
    def peak(self) -> float:
        return float(self.values.max())

    def sample(self, points) -> np.ndarray | float:
        return sample_density(self, points)

    def gradient(self, points) -> np.ndarray:
        return sample_gradient(self, points)


def epanechnikov(x):
    """Quadratic finite-support kernel: 1 - x^2 on |x| < 1, else 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) < 1.0, 1.0 - x * x, 0.0)
    return float(out) if out.ndim == 0 else out


def global_smoothing_lengths(cloud: ParticleCloud, log_base: float = math.e) -> np.ndarray:
    """Per-axis kernel bandwidth from the 20th/80th coordinate percentiles:
    2 * (P80 - P20) / log(n).

    Percentiles interpolate linearly between order statistics. Axes with a
    degenerate inter-percentile range fall back to 1e-6 of the cloud extent
    so planar or linear clouds stay usable.
    """
    if cloud.n < 2:
        raise InvalidInputError("smoothing lengths need at least 2 particles")
    pos = cloud.positions
    p20, p80 = np.percentile(pos, [20.0, 80.0], axis=0)
    extents = pos.max(axis=0) - pos.min(axis=0)
    fallback_extent = extents.max() if extents.max() > 0 else 1.0
    denom = math.log(cloud.n) / math.log(log_base)
    lengths = 2.0 * (p80 - p20) / denom
    for k in range(3):
        if p80[k] - p20[k] <= 0:
            ext = extents[k] if extents[k] > 0 else fallback_extent
            lengths[k] = 1e-6 * ext
    return lengths


def adaptive_smoothing_lengths(cloud: ParticleCloud, global_lengths,
                               alpha: float = BANDWIDTH_ALPHA,
                               lambda_max: float = LAMBDA_MAX,
                               pilot_dims: int = _PILOT_GRID_DIMS) -> np.ndarray:
    """Two-stage per-particle bandwidths.

    A pilot density is estimated with the fixed global lengths and sampled
    at every particle position; each particle then scales the global lengths
    by (pilot_j / g)^(-alpha) with g the geometric mean of the pilot
    densities, so dense regions get narrower kernels. The pilot is evaluated
    on an auxiliary grid and interpolated at the particles, which keeps the
    pass linear in the particle count. Scale factors are capped at
    `lambda_max` (particles whose pilot density vanishes get the cap).
    """
    global_lengths = np.asarray(global_lengths, dtype=np.float64).reshape(3)
    if np.any(global_lengths <= 0):
        raise InvalidInputError("global lengths must be positive")
    pos = cloud.positions
    lo = pos.min(axis=0) - global_lengths
    hi = pos.max(axis=0) + global_lengths
    spec = GridSpec(lo, hi, np.array([pilot_dims] * 3, dtype=np.int64))
    uniform = np.broadcast_to(global_lengths, pos.shape)
    pilot_grid = np.zeros(tuple(spec.dims), dtype=np.float64)
    _kernels.kde_scatter(pos, np.ascontiguousarray(uniform), spec.box_min,
                         spec.spacing, spec.dims, pilot_grid)
    pilot = np.empty(cloud.n, dtype=np.float64)
    _kernels.sample_batch(pilot_grid, spec.box_min, spec.spacing, pos, pilot)

    lam = np.full(cloud.n, lambda_max, dtype=np.float64)
    positive = pilot > 0
    if np.any(positive):
        g = math.exp(float(np.mean(np.log(pilot[positive]))))
        lam[positive] = np.minimum((pilot[positive] / g) ** (-alpha), lambda_max)
    return lam[:, None] * global_lengths


def prepare_cloud(cloud: ParticleCloud, log_base: float = math.e) -> np.ndarray:
    """Fill in `cloud.adaptive_lengths`; returns the global lengths."""
    lengths = global_smoothing_lengths(cloud, log_base=log_base)
    cloud.adaptive_lengths = adaptive_smoothing_lengths(cloud, lengths)
    return lengths


def grid_spec_for_cloud(cloud: ParticleCloud, dims=DEFAULT_GRID_DIMS) -> GridSpec:
    """Box covering the cloud, expanded by the largest adaptive length per
    axis so no finite-support kernel is truncated."""
    if cloud.adaptive_lengths is None:
        raise InvalidInputError("cloud needs adaptive lengths; call prepare_cloud first")
    margin = cloud.adaptive_lengths.max(axis=0)
    lo = cloud.positions.min(axis=0) - margin
    hi = cloud.positions.max(axis=0) + margin
    # Degenerate axes (planar clouds with tiny kernels) still need a box.
    flat = hi <= lo
    if np.any(flat):
        pad = 1e-6 * max((hi - lo).max(), 1.0)
        lo[flat] -= pad
        hi[flat] += pad
    return GridSpec(lo, hi, np.asarray(dims, dtype=np.int64))


def estimate_density(cloud: ParticleCloud, spec: GridSpec,
                     global_lengths=None) -> DensityGrid:
    """Evaluate the adaptive-kernel density estimate at every grid node.

    Each particle contributes 15/(8 pi n) * (1 - |d|^2) / (lx*ly*lz) to the
    nodes inside its bandwidth ellipsoid, with d the position offset scaled
    by the per-particle lengths; nodes outside every ellipsoid stay 0.
    """
    if cloud.adaptive_lengths is None:
        raise InvalidInputError("cloud needs adaptive lengths; call prepare_cloud first")
    inside = spec.contains(cloud.positions)
    if not np.all(inside):
        raise InvalidInputError(
            f"{int((~inside).sum())} particles fall outside the grid box")
    if global_lengths is None:
        global_lengths = global_smoothing_lengths(cloud) if cloud.n >= 2 \
            else cloud.adaptive_lengths[0]
    values = np.zeros(tuple(spec.dims), dtype=np.float64)
    _kernels.kde_scatter(cloud.positions,
                         np.ascontiguousarray(cloud.adaptive_lengths),
                         spec.box_min, spec.spacing, spec.dims, values)
    return DensityGrid(spec, values, global_lengths)


def _require_inside(spec: GridSpec, points):
    p = _as_points(points)
    inside = spec.contains(p)
    if not np.all(inside):
        bad = p[~inside][0]
        raise OutOfDomainError(f"position {bad.tolist()} outside the field box")
    return p


def sample_density(grid: DensityGrid, points):
    """Trilinear interpolation of the node values; node positions return the
    stored values exactly. Raises for positions outside the box."""
    single = np.asarray(points).ndim == 1
    p = _require_inside(grid.spec, points)
    out = np.empty(len(p), dtype=np.float64)
    _kernels.sample_batch(grid.values, grid.spec.box_min, grid.spec.spacing, p, out)
    return float(out[0]) if single else out


def sample_gradient(grid: DensityGrid, points):
    """Finite-difference gradient of :func:`sample_density` with step = half
    the cell size per axis (one-sided next to the boundary)."""
    single = np.asarray(points).ndim == 1
    p = _require_inside(grid.spec, points)
    out = np.empty((len(p), 3), dtype=np.float64)
    _kernels.gradient_batch(grid.values, grid.spec.box_min, grid.spec.box_max,
                            grid.spec.spacing, p, out)
    return out[0] if single else out
