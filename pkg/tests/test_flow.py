import numpy as np
import pytest

from metacast import (InvalidInputError, OutOfDomainError, ascend,
                      ascend_batch, build_maxline, dedupe_maxima,
                      sample_density)
from metacast.field import DensityGrid, GridSpec
from metacast.flow import FlowResult, ascend_path

from conftest import TWO_BUMP_CENTERS, analytic_grid, gaussian_bump


def _cell_diag(grid):
    return float(np.linalg.norm(grid.spec.spacing))


def test_seed_at_symmetric_peak_node_stays_put():
    # bump centered exactly on a node: finite differences cancel there
    grid = analytic_grid(gaussian_bump((0.0, 0.0, 0.0), sigma=0.3), dims=33)
    res = ascend(grid, [0.0, 0.0, 0.0])
    assert res.converged
    assert res.steps == 0
    np.testing.assert_array_equal(res.destination, [0.0, 0.0, 0.0])


def test_radial_bump_seeds_reach_center(radial_bump_grid):
    grid = radial_bump_grid
    rng = np.random.default_rng(0)
    seeds = rng.uniform(-0.8, 0.8, (20, 3))
    for res in ascend_batch(grid, seeds):
        assert res.converged
        assert np.linalg.norm(res.destination - [0.11, -0.23, 0.05]) <= _cell_diag(grid)


def test_flat_field_converges_at_seed():
    spec = GridSpec([0, 0, 0], [1, 1, 1], [9, 9, 9])
    grid = DensityGrid(spec, np.zeros((9, 9, 9)), [0.1] * 3)
    res = ascend(grid, [0.31, 0.62, 0.47])
    assert res.converged
    assert res.steps == 0
    np.testing.assert_array_equal(res.destination, [0.31, 0.62, 0.47])


def test_seed_outside_box_raises(radial_bump_grid):
    with pytest.raises(OutOfDomainError):
        ascend(radial_bump_grid, [5.0, 0.0, 0.0])


def test_monotone_ascent_along_path(radial_bump_grid):
    grid = radial_bump_grid
    rng = np.random.default_rng(1)
    slack = 1e-9 * grid.peak
    for seed in rng.uniform(-0.9, 0.9, (10, 3)):
        path = ascend_path(grid, seed)
        dens = sample_density(grid, path)
        assert np.all(np.diff(dens) >= -slack)


def test_idempotence(radial_bump_grid):
    grid = radial_bump_grid
    step = 0.5 * float(grid.spec.spacing.min())
    first = ascend(grid, [0.7, 0.5, -0.6])
    second = ascend(grid, first.destination)
    assert np.linalg.norm(second.destination - first.destination) <= step


def test_batch_matches_single_bit_identical(two_bump_grid):
    rng = np.random.default_rng(2)
    seeds = rng.uniform(-0.9, 0.9, (30, 3))
    batch = ascend_batch(two_bump_grid, seeds)
    for seed, from_batch in zip(seeds, batch):
        solo = ascend(two_bump_grid, seed)
        np.testing.assert_array_equal(solo.destination, from_batch.destination)
        assert solo.steps == from_batch.steps
        assert solo.converged == from_batch.converged


def test_batch_empty_and_duplicates(two_bump_grid):
    assert ascend_batch(two_bump_grid, np.zeros((0, 3))) == []
    seeds = np.array([[0.3, 0.1, 0.0], [0.3, 0.1, 0.0]])
    a, b = ascend_batch(two_bump_grid, seeds)
    np.testing.assert_array_equal(a.destination, b.destination)


def test_batch_out_of_domain_element_carries_error(two_bump_grid):
    seeds = np.array([[0.3, 0.1, 0.0], [9.0, 0.0, 0.0], [-0.3, 0.1, 0.0]])
    results = ascend_batch(two_bump_grid, seeds)
    assert results[1].error is not None
    assert not results[1].converged
    assert results[0].error is None and results[2].error is None
    assert results[0].converged and results[2].converged


def test_two_bump_partition(two_bump_grid):
    grid = two_bump_grid
    rng = np.random.default_rng(3)
    seeds = rng.uniform(-0.85, 0.85, (64, 3))
    results = ascend_batch(grid, seeds)
    assert all(r.converged for r in results)
    centers = np.asarray(TWO_BUMP_CENTERS)
    for r in results:
        d = np.linalg.norm(centers - r.destination, axis=1)
        assert d.min() <= _cell_diag(grid)
    maxima = dedupe_maxima(results, tol=2 * _cell_diag(grid))
    assert len(maxima) == 2
    assert sum(m.votes for m in maxima) == len(results)


def test_basin_stability(two_bump_grid):
    grid = two_bump_grid
    cell = float(grid.spec.spacing.min())
    base = np.array([-0.3, 0.15, -0.1])
    rng = np.random.default_rng(4)
    seeds = base + rng.uniform(-0.1, 0.1, (8, 3)) * cell
    results = ascend_batch(grid, np.vstack([base, seeds]))
    maxima = dedupe_maxima(results, tol=_cell_diag(grid))
    assert len(maxima) == 1
    assert maxima[0].votes == 9


def test_hessian_diagnostic_negative_at_maximum(radial_bump_grid):
    res = ascend(radial_bump_grid, [0.3, -0.1, 0.2], compute_hessian=True)
    assert res.converged
    assert res.lambda1 is not None
    assert res.lambda1 < 0
    assert not res.degenerate


def test_flat_stationary_point_flagged_degenerate():
    spec = GridSpec([0, 0, 0], [1, 1, 1], [9, 9, 9])
    grid = DensityGrid(spec, np.full((9, 9, 9), 0.5), [0.1] * 3)
    res = ascend(grid, [0.5, 0.5, 0.5], compute_hessian=True)
    assert res.converged
    assert res.lambda1 == 0.0
    assert res.degenerate


class TestDedupeMaxima:
    def _result(self, pos, converged=True, error=None):
        p = np.asarray(pos, dtype=float)
        return FlowResult(p, p, 5, converged, error=error)

    def test_identical_destinations_merge(self):
        results = [self._result([0.5, 0.5, 0.5]) for _ in range(6)]
        maxima = dedupe_maxima(results, tol=0.1)
        assert len(maxima) == 1
        assert maxima[0].votes == 6
        assert maxima[0].seed_indices == list(range(6))

    def test_far_destinations_stay_separate(self):
        results = [self._result([0.0, 0.0, 0.0]), self._result([1.0, 0.0, 0.0])]
        maxima = dedupe_maxima(results, tol=0.1)
        assert len(maxima) == 2
        assert [m.votes for m in maxima] == [1, 1]

    def test_chain_follows_greedy_rule(self):
        # three destinations, each 0.9*tol from the previous: the second
        # joins the first, the third (1.8*tol from the representative)
        # founds a new one
        tol = 0.2
        results = [self._result([0.0, 0.0, 0.0]),
                   self._result([0.9 * tol, 0.0, 0.0]),
                   self._result([1.8 * tol, 0.0, 0.0])]
        maxima = dedupe_maxima(results, tol=tol)
        assert len(maxima) == 2
        assert maxima[0].votes == 2
        assert maxima[1].votes == 1
        np.testing.assert_array_equal(maxima[0].position, [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(maxima[1].position, [1.8 * tol, 0.0, 0.0])

    def test_unconverged_and_errors_excluded(self):
        results = [self._result([0.0, 0.0, 0.0]),
                   self._result([0.0, 0.0, 0.0], converged=False),
                   self._result([0.0, 0.0, 0.0], error="outside")]
        maxima = dedupe_maxima(results, tol=0.1)
        assert maxima[0].votes == 1

    def test_requires_positive_tol(self):
        with pytest.raises(InvalidInputError):
            dedupe_maxima([], tol=0.0)


class TestBuildMaxline:
    def test_single_maximum_degenerates_to_point(self, radial_bump_grid):
        line = build_maxline(radial_bump_grid, [[0.11, -0.23, 0.05]])
        assert line.polyline.shape == (1, 3)
        np.testing.assert_array_equal(line.polyline[0], [0.11, -0.23, 0.05])

    def test_flat_field_gives_straight_path(self):
        spec = GridSpec([0, 0, 0], [1, 1, 1], [11, 11, 11])
        grid = DensityGrid(spec, np.full((11, 11, 11), 0.5), [0.1] * 3)
        a, b = np.array([0.2, 0.2, 0.2]), np.array([0.8, 0.7, 0.6])
        line = build_maxline(grid, [a, b])
        np.testing.assert_array_equal(line.polyline[0], a)
        np.testing.assert_array_equal(line.polyline[-1], b)
        # zero gradient everywhere: only the pull term acts, path is straight
        ab = (b - a) / np.linalg.norm(b - a)
        offsets = line.polyline - a
        cross = np.linalg.norm(np.cross(offsets, ab), axis=1)
        assert cross.max() < 1e-9

    def test_polyline_spacing_bounded_by_step(self, two_bump_grid):
        step = 0.5 * float(two_bump_grid.spec.spacing.min())
        line = build_maxline(two_bump_grid, list(TWO_BUMP_CENTERS))
        gaps = np.linalg.norm(np.diff(line.polyline, axis=0), axis=1)
        assert gaps.max() <= step + 1e-12
        assert not line.truncated

    def test_endpoints_snap_to_maxima(self, two_bump_grid):
        line = build_maxline(two_bump_grid, list(TWO_BUMP_CENTERS))
        np.testing.assert_array_equal(line.polyline[0], TWO_BUMP_CENTERS[0])
        np.testing.assert_array_equal(line.polyline[-1], TWO_BUMP_CENTERS[1])

    def test_ridge_beats_straight_chord(self):
        # curved ridge: gaussians strung along an arc, stronger at the ends
        t = np.linspace(0.0, 1.0, 21)
        arc = np.column_stack([1.2 * (t - 0.5), 0.5 - 1.4 * (t - 0.5) ** 2,
                               np.zeros_like(t)])
        amps = np.where((t == 0.0) | (t == 1.0), 1.3, 1.0)

        def fn(X, Y, Z):
            total = np.zeros_like(X)
            for (cx, cy, cz), a in zip(arc, amps):
                total += a * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2
                                      + (Z - cz) ** 2) / (2 * 0.12 ** 2))
            return total

        grid = analytic_grid(fn, dims=41)
        a, b = arc[0], arc[-1]
        line = build_maxline(grid, [a, b])
        chord = a + np.linspace(0, 1, 200)[:, None] * (b - a)
        min_on_line = sample_density(grid, line.polyline).min()
        min_on_chord = sample_density(grid, chord).min()
        assert min_on_line >= min_on_chord
        assert min_on_line > 2.0 * min_on_chord  # the ridge is clearly higher

    def test_empty_maxima_rejected(self, two_bump_grid):
        with pytest.raises(InvalidInputError):
            build_maxline(two_bump_grid, np.zeros((0, 3)))

    def test_consecutive_duplicates_rejected(self, two_bump_grid):
        with pytest.raises(InvalidInputError):
            build_maxline(two_bump_grid, [[0.1, 0, 0], [0.1, 0, 0]])
