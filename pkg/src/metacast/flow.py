"""Gradient-flow machinery: steepest-ascent paths from seed points to local
density maxima, vote-based deduplication of the reached maxima, and the
ridge polyline that chains successive maxima together."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidInputError, OutOfDomainError
from .field import DensityGrid, _as_points

DEFAULT_MAX_STEPS = 10_000
#: Weight of the pull toward the next maximum in the ridge-path blend.
DEFAULT_PULL_WEIGHT = 2.0


def _step_size(grid: DensityGrid) -> float:
    return 0.5 * float(grid.spec.spacing.min())


def _grad_tol(grid: DensityGrid) -> float:
    return 1e-8 * grid.peak / float(grid.spec.spacing.min())


@dataclass
class FlowResult:
    """Outcome of one ascent: where it started, where it ended, and how.

    `lambda1` (largest Hessian eigenvalue at the destination, diagnostic)
    is only filled in on request; a converged interior destination whose
    lambda1 is not negative is flagged degenerate (a plateau or saddle
    rather than a strict maximum).
    """

    seed: np.ndarray
    destination: np.ndarray
    steps: int
    converged: bool
    lambda1: float | None = None
    degenerate: bool = False
    error: str | None = None


@dataclass
class Maximum:
    """A deduplicated ascent destination with its supporting seeds."""

    position: np.ndarray
    votes: int
    seed_indices: list[int]


@dataclass
class MaxLine:
    """Ordered maxima and the dense ridge polyline connecting them."""

    maxima: np.ndarray
    polyline: np.ndarray
    truncated: bool = False


def _largest_hessian_eigenvalue(grid: DensityGrid, p: np.ndarray) -> float | None:
    """Finite-difference Hessian diagnostic; None next to the boundary."""
    spec = grid.spec
    hs = 0.5 * spec.spacing
    if np.any(p - 2 * hs < spec.box_min) or np.any(p + 2 * hs > spec.box_max):
        return None
    f = grid.sample
    H = np.empty((3, 3))
    f0 = f(p)
    for a in range(3):
        ea = np.zeros(3)
        ea[a] = hs[a]
        H[a, a] = (f(p + ea) - 2.0 * f0 + f(p - ea)) / hs[a] ** 2
        for b in range(a + 1, 3):
            eb = np.zeros(3)
            eb[b] = hs[b]
            H[a, b] = H[b, a] = (f(p + ea + eb) - f(p + ea - eb)
                                 - f(p - ea + eb) + f(p - ea - eb)) / (4 * hs[a] * hs[b])
    return float(np.linalg.eigvalsh(H)[-1])


def ascend_batch(grid: DensityGrid, seeds, max_steps: int = DEFAULT_MAX_STEPS,
                 compute_hessian: bool = False) -> list[FlowResult]:
    """Run :func:`ascend` for every seed; out-of-box seeds yield an element
    carrying the error instead of aborting the batch. Results are identical
    to per-seed sequential calls."""
    pts = _as_points(seeds, "seeds")
    inside = grid.spec.contains(pts) if len(pts) else np.zeros(0, dtype=bool)
    results: list[FlowResult] = [None] * len(pts)  # type: ignore[list-item]
    valid = np.flatnonzero(inside)
    if len(valid):
        sub = np.ascontiguousarray(pts[valid])
        dest = np.empty_like(sub)
        nsteps = np.empty(len(sub), dtype=np.int64)
        status = np.empty(len(sub), dtype=np.int64)
        spec = grid.spec
        _kernels.ascend_kernel(grid.values, spec.box_min, spec.box_max,
                               spec.spacing, sub, _step_size(grid),
                               1e-3 * float(spec.spacing.min()),
                               _grad_tol(grid), max_steps,
                               dest, nsteps, status, np.zeros((1, 3)), False)
        for row, i in enumerate(valid):
            converged = status[row] in (_kernels.ASCEND_GRAD_TOL, _kernels.ASCEND_STALL)
            lam = None
            if compute_hessian and converged:
                lam = _largest_hessian_eigenvalue(grid, dest[row])
            degenerate = lam is not None and lam >= 0
            results[i] = FlowResult(pts[i].copy(), dest[row].copy(),
                                    int(nsteps[row]), converged, lam, degenerate)
    for i in np.flatnonzero(~inside):
        results[i] = FlowResult(pts[i].copy(), pts[i].copy(), 0, False,
                                error="seed outside the field box")
    return results


def ascend_path(grid: DensityGrid, seed,
                max_steps: int = DEFAULT_MAX_STEPS) -> np.ndarray:
    """The positions an ascent from `seed` visits, seed included, in order.
    Useful for inspecting the monotone-ascent guarantee."""
    p = _as_points(seed, "seed")
    if not grid.spec.contains(p)[0]:
        raise OutOfDomainError(f"seed {p[0].tolist()} outside the field box")
    spec = grid.spec
    buf = np.zeros((max_steps + 1, 3))
    count = _kernels.ascend_trace(grid.values, spec.box_min, spec.box_max,
                                  spec.spacing, p[0].copy(), _step_size(grid),
                                  1e-3 * float(spec.spacing.min()),
                                  _grad_tol(grid), max_steps, buf)
    return buf[:count]


def ascend(grid: DensityGrid, seed, max_steps: int = DEFAULT_MAX_STEPS,
           compute_hessian: bool = False) -> FlowResult:
    """Follow the density gradient from `seed` to a local maximum.

    Fixed spatial steps (half a cell) along the normalized gradient with
    backtracking, so the sampled density never decreases along the path.
    Converges when the gradient magnitude drops below tolerance or the step
    underflows at an interior stationary point; a stall against the box
    boundary or an exhausted step budget reports converged=False.
    """
    p = _as_points(seed, "seed")
    if not grid.spec.contains(p)[0]:
        raise OutOfDomainError(f"seed {p[0].tolist()} outside the field box")
    return ascend_batch(grid, p, max_steps=max_steps,
                        compute_hessian=compute_hessian)[0]


def dedupe_maxima(results: list[FlowResult], tol: float) -> list[Maximum]:
    """Greedy agglomeration of converged destinations, in input order: a
    destination joins the first representative within `tol`, otherwise it
    founds a new one. Representative positions and their order are fixed by
    first appearance."""
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    maxima: list[Maximum] = []
    for i, res in enumerate(results):
        if res.error is not None or not res.converged:
            continue
        for m in maxima:
            if float(np.linalg.norm(res.destination - m.position)) <= tol:
                m.votes += 1
                m.seed_indices.append(i)
                break
        else:
            maxima.append(Maximum(res.destination.copy(), 1, [i]))
    return maxima


def build_maxline(grid: DensityGrid, maxima,
                  pull_weight: float = DEFAULT_PULL_WEIGHT,
                  max_steps: int = DEFAULT_MAX_STEPS) -> MaxLine:
    """Chain consecutive maxima with a path that blends the normalized
    density gradient with a double-weighted pull toward the next maximum,
    keeping the connection on high-density ridges.

    Each segment integrates with the same spatial step as :func:`ascend`
    and terminates (snapping onto the target) once within one step of it;
    a segment that exhausts its step budget is closed with a straight jump
    and the result is flagged truncated.
    """
    pts = _as_points(maxima, "maxima")
    if len(pts) == 0:
        raise InvalidInputError("need at least one maximum")
    inside = grid.spec.contains(pts)
    if not np.all(inside):
        raise OutOfDomainError("maxima must lie inside the field box")
    for a, b in zip(pts[:-1], pts[1:]):
        if np.array_equal(a, b):
            raise InvalidInputError("consecutive maxima must be distinct")
    if len(pts) == 1:
        return MaxLine(pts.copy(), pts.copy())

    spec = grid.spec
    step = _step_size(grid)
    g_tol = _grad_tol(grid)
    polyline = [pts[0].copy()]
    truncated = False
    for a, b in zip(pts[:-1], pts[1:]):
        p = a.astype(np.float64).copy()
        reached = False
        for _ in range(max_steps):
            to_b = b - p
            dist = float(np.linalg.norm(to_b))
            if dist <= step:
                reached = True
                break
            g = grid.gradient(p)
            gn = float(np.linalg.norm(g))
            direction = (g / gn if gn > g_tol else np.zeros(3)) \
                + pull_weight * to_b / dist
            direction /= np.linalg.norm(direction)
            p = np.clip(p + step * direction, spec.box_min, spec.box_max)
            polyline.append(p.copy())
        if not reached:
            truncated = True
        polyline.append(b.copy())
    return MaxLine(pts.copy(), np.array(polyline), truncated)
