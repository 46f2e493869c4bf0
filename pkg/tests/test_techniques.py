import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metacast import (InvalidInputError, ParticleCloud, Selection, Stroke,
                      adjust_threshold, baseline_brush, combine,
                      component_containing, meta_brush, meta_paint, meta_point,
                      prepare_cloud, sample_density, selection_from_dict,
                      selection_to_dict)
from metacast.data import canonical_json
from metacast.field import estimate_density, grid_spec_for_cloud
from metacast.techniques import resample_polyline

from conftest import TWO_BUMP_CENTERS, analytic_grid


# ---------------------------------------------------------------------------
# shared scenario: two well-separated clusters and a KDE field over them
# ---------------------------------------------------------------------------

CLUSTER_A = np.array([-0.45, 0.0, 0.0])
CLUSTER_B = np.array([0.45, 0.1, 0.05])


@pytest.fixture(scope="module")
def clusters():
    rng = np.random.default_rng(100)
    a = rng.normal(CLUSTER_A, 0.07, (1200, 3))
    b = rng.normal(CLUSTER_B, 0.07, (1200, 3))
    cloud = ParticleCloud(np.vstack([a, b]),
                          labels=np.arange(2400) < 1200)
    prepare_cloud(cloud)
    spec = grid_spec_for_cloud(cloud, dims=(48, 48, 48))
    grid = estimate_density(cloud, spec)
    return cloud, grid


@pytest.fixture(scope="module")
def mini_filament():
    rng = np.random.default_rng(200)
    t = rng.random(2500)
    spine = np.column_stack([t, 0.5 + 0.15 * np.sin(2.5 * t), np.full_like(t, 0.5)])
    targets = spine + rng.normal(0, 0.03, (2500, 3))
    noise = rng.uniform(-0.1, 1.1, (2500, 3))
    cloud = ParticleCloud(np.vstack([targets, noise]),
                          labels=np.arange(5000) < 2500)
    prepare_cloud(cloud)
    spec = grid_spec_for_cloud(cloud, dims=(64, 64, 64))
    grid = estimate_density(cloud, spec)
    ts = np.linspace(0, 1, 32)
    spine_line = np.column_stack([ts, 0.5 + 0.15 * np.sin(2.5 * ts),
                                  np.full_like(ts, 0.5)])
    return cloud, grid, spine_line


def best_f1(grid, cloud, sel):
    from metacast.data import confusion_stats
    scores = []
    for s in range(-4, 5):
        cur = adjust_threshold(grid, cloud, sel, float(s))
        scores.append(confusion_stats(cur.particles, cloud.labels).f1)
    return max(scores)


class TestStroke:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            Stroke(np.zeros((0, 3)), radius=0.1)
        with pytest.raises(InvalidInputError):
            Stroke([[0, 0, 0]], radius=0.0)
        with pytest.raises(InvalidInputError):
            Stroke([[0, 0, 0], [1, 0, 0]], radius=0.1, timestamps=[1.0, 0.5])
        with pytest.raises(InvalidInputError):
            Stroke([[np.nan, 0, 0]], radius=0.1)
        with pytest.raises(InvalidInputError):
            Stroke([[0, 0, 0]], radius=float("inf"))

    def test_resample_uniform_spacing_and_endpoints(self):
        # unevenly spaced input on a straight line: output arc steps uniform
        x = np.array([0.0, 0.03, 0.5, 0.55, 1.3])
        pts = np.column_stack([x, np.zeros_like(x), np.zeros_like(x)])
        out = resample_polyline(pts, spacing=0.24)
        gaps = np.linalg.norm(np.diff(out, axis=0), axis=1)
        assert gaps.max() <= 0.24 + 1e-12
        assert gaps.std() < 1e-9  # uniform arc-length steps
        np.testing.assert_array_equal(out[0], pts[0])
        np.testing.assert_array_equal(out[-1], pts[-1])

    def test_resample_corner_stays_on_polyline(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [1, 2, 0]], dtype=float)
        out = resample_polyline(pts, spacing=0.24)
        gaps = np.linalg.norm(np.diff(out, axis=0), axis=1)
        assert gaps.max() <= 0.24 + 1e-12
        # every resampled point lies on one of the two segments
        on_first = (np.abs(out[:, 1]) < 1e-12) & (out[:, 0] <= 1 + 1e-12)
        on_second = (np.abs(out[:, 0] - 1) < 1e-12)
        assert np.all(on_first | on_second)

    def test_resample_single_point(self):
        out = resample_polyline(np.array([[0.3, 0.2, 0.1]]), spacing=0.1)
        assert out.shape == (1, 3)

    def test_resample_collapses_duplicates(self):
        pts = np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0]], dtype=float)
        out = resample_polyline(pts, spacing=0.5)
        assert np.all(np.diff(out[:, 0]) > 0)


class TestMetaPoint:
    def test_single_sample_selects_pointed_cluster(self, clusters):
        cloud, grid = clusters
        p = CLUSTER_A + [0.05, 0.02, 0.0]
        sel = meta_point(grid, cloud, [p])
        assert sel.technique == "point"
        assert sel.rho0 == sample_density(grid, p)
        assert sel.s == 0.0 and sel.threshold == sel.rho0
        assert len(sel.kept_components) == 1
        # all selected particles belong to cluster A and clear the threshold
        assert len(sel.particles) > 0
        assert np.all(sel.particles < 1200)
        dens = sample_density(grid, cloud.positions[sel.particles])
        assert np.all(dens >= sel.threshold)
        # independent count: every cluster-A particle at/above the threshold
        # inside A's component must be selected
        dens_a = sample_density(grid, cloud.positions[:1200])
        assert len(sel.particles) >= np.count_nonzero(dens_a >= sel.threshold) * 0.98

    def test_sample_at_peak_shrinks_selection(self, clusters):
        cloud, grid = clusters
        peak_node = np.unravel_index(np.argmax(grid.values), grid.values.shape)
        p = grid.spec.box_min + grid.spec.spacing * np.array(peak_node, float)
        sel = meta_point(grid, cloud, [p])
        assert sel.threshold == grid.peak
        assert sel.count <= 5

    def test_drag_switches_target(self, clusters):
        cloud, grid = clusters
        drag = np.linspace(CLUSTER_A + [0.05, 0, 0], CLUSTER_B + [0.02, 0, 0], 7)
        seen = []
        sel = meta_point(grid, cloud, drag, on_update=seen.append)
        assert len(seen) == 7
        assert seen[-1] is sel
        first, last = seen[0], sel
        assert np.all(first.particles < 1200)      # starts on A
        assert np.all(last.particles >= 1200)      # ends on B
        assert component_containing(last.components, CLUSTER_B) == last.kept_components[0]

    def test_zero_density_sample_flags_no_structure(self, clusters):
        cloud, grid = clusters
        corner = grid.spec.box_min + 1e-4
        sel = meta_point(grid, cloud, [corner])
        assert sel.count == 0
        assert "no structure" in sel.flags

    def test_all_samples_outside_rejected(self, clusters):
        cloud, grid = clusters
        with pytest.raises(InvalidInputError):
            meta_point(grid, cloud, [grid.spec.box_max + 1.0])


class TestMetaBrush:
    def test_filament_selection_accuracy(self, mini_filament):
        cloud, grid, spine = mini_filament
        cell = float(grid.spec.spacing.min())
        sel = meta_brush(grid, cloud, Stroke(spine, radius=2 * cell))
        assert sel.technique == "brush"
        assert not sel.flags
        assert sel.candidates is not None and len(sel.candidates) > 0
        from metacast.data import confusion_stats
        assert confusion_stats(sel.particles, cloud.labels).f1 >= 0.9  # at s=0
        assert best_f1(grid, cloud, sel) >= 0.9

    def test_kept_components_contain_maxline_maxima(self, mini_filament):
        cloud, grid, spine = mini_filament
        cell = float(grid.spec.spacing.min())
        sel = meta_brush(grid, cloud, Stroke(spine, radius=2 * cell))
        hit = {component_containing(sel.components, p) for p in sel.anchors}
        assert set(sel.kept_components) <= hit

    def test_stroke_in_empty_space_flags(self, clusters):
        cloud, grid = clusters
        lo = grid.spec.box_min
        stroke = Stroke(np.array([lo + 1e-3, lo + [0.02, 1e-3, 1e-3]]), radius=0.02)
        sel = meta_brush(grid, cloud, stroke)
        assert sel.count == 0
        assert "no structure near stroke" in sel.flags

    def test_offset_strokes_select_identically(self, mini_filament):
        cloud, grid, spine = mini_filament
        cell = float(grid.spec.spacing.min())
        sels = []
        for off in (0.0, 1.0, 2.0):
            stroke = Stroke(spine + np.array([0, off * cell, 0]), radius=2 * cell)
            sels.append(meta_brush(grid, cloud, stroke))
        assert sels[0].kept_components == sels[1].kept_components == sels[2].kept_components
        np.testing.assert_array_equal(sels[0].particles, sels[1].particles)
        np.testing.assert_array_equal(sels[0].particles, sels[2].particles)


class TestMetaPaint:
    def test_majority_vote_wins(self, clusters):
        cloud, grid = clusters
        # 70% of the stroke arcs around A, 30% strays toward B
        t = np.linspace(0, 1, 20)
        near_a = CLUSTER_A + 0.05 * np.column_stack([np.cos(6 * t[:14]),
                                                     np.sin(6 * t[:14]),
                                                     np.zeros(14)])
        near_b = CLUSTER_B + 0.04 * np.column_stack([np.cos(6 * t[14:]),
                                                     np.sin(6 * t[14:]),
                                                     np.zeros(6)])
        sel = meta_paint(grid, cloud, Stroke(np.vstack([near_a, near_b]), radius=0.05))
        assert len(sel.kept_components) == 1
        assert component_containing(sel.components, CLUSTER_A) == sel.kept_components[0]
        assert np.all(sel.particles < 1200)

    def test_loop_stroke_selects_enclosed_cluster(self, clusters):
        cloud, grid = clusters
        t = np.linspace(0, 2 * np.pi, 24)
        loop = CLUSTER_A + 0.1 * np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
        sel = meta_paint(grid, cloud, Stroke(loop, radius=0.05))
        assert len(sel.kept_components) == 1
        assert np.all(sel.particles < 1200)
        assert best_f1(grid, cloud, sel) >= 0.9

    def test_flat_field_flags_empty(self):
        grid = analytic_grid(lambda X, Y, Z: np.zeros_like(X), dims=9)
        cloud = ParticleCloud(np.zeros((4, 3)))
        sel = meta_paint(grid, cloud, Stroke([[0, 0, 0], [0.3, 0, 0]], radius=0.2))
        assert sel.count == 0
        assert "no structure" in sel.flags

    def test_stroke_outside_box_rejected(self, clusters):
        cloud, grid = clusters
        far = grid.spec.box_max + 5.0
        with pytest.raises(InvalidInputError):
            meta_paint(grid, cloud, Stroke([far, far + [0.1, 0, 0]], radius=0.01))

    def test_single_component_guarantee(self, clusters):
        cloud, grid = clusters
        rng = np.random.default_rng(7)
        for _ in range(5):
            pts = rng.uniform(-0.5, 0.5, (6, 3))
            sel = meta_paint(grid, cloud, Stroke(pts, radius=0.05))
            assert len(sel.kept_components) <= 1
            for s in (-4.0, 1.0, 3.0):
                assert len(adjust_threshold(grid, cloud, sel, s).kept_components) <= 1


class TestAdjustThreshold:
    def test_s_zero_is_identity(self, clusters):
        cloud, grid = clusters
        sel = meta_point(grid, cloud, [CLUSTER_A + [0.03, 0, 0]])
        back = adjust_threshold(grid, cloud, sel, 0.0)
        assert back.threshold == sel.rho0
        np.testing.assert_array_equal(back.particles, sel.particles)
        assert back.kept_components == sel.kept_components

    def test_s_four_is_sixteen_fold(self, clusters):
        cloud, grid = clusters
        sel = meta_point(grid, cloud, [CLUSTER_A + [0.03, 0, 0]])
        up = adjust_threshold(grid, cloud, sel, 4.0)
        assert up.threshold == 16.0 * sel.rho0
        assert up.rho0 == sel.rho0

    def test_exact_power_law(self, clusters):
        cloud, grid = clusters
        sel = meta_paint(grid, cloud, Stroke([CLUSTER_A, CLUSTER_A + [0.06, 0, 0]],
                                             radius=0.05))
        for s in (-4.0, -2.0, 0.0, 2.0, 4.0):
            cur = adjust_threshold(grid, cloud, sel, s)
            assert cur.threshold == (2.0 ** s) * sel.rho0
            assert cur.s == s

    def test_lowering_s_merges_and_grows(self, two_bump_grid):
        # analytic two-bump field whose saddle (~0.159 of peak 1.0) sits
        # between rho0/16 and rho0: at s=-4 the components merge
        grid = two_bump_grid
        rng = np.random.default_rng(55)
        pts = np.vstack([rng.normal(TWO_BUMP_CENTERS[0], 0.2, (500, 3)),
                         rng.normal(TWO_BUMP_CENTERS[1], 0.2, (500, 3))])
        cloud = ParticleCloud(np.clip(pts, -0.99, 0.99))
        a = np.asarray(TWO_BUMP_CENTERS[0])
        sel = meta_paint(grid, cloud, Stroke([a, a + [0.05, 0, 0]], radius=0.05))
        assert sel.rho0 / 16.0 < 0.159 < sel.rho0
        assert len(adjust_threshold(grid, cloud, sel, 0.0).kept_components) == 1
        merged = adjust_threshold(grid, cloud, sel, -4.0)
        assert len(merged.kept_components) == 1
        # the merged component now contains both bump centers
        assert component_containing(merged.components, TWO_BUMP_CENTERS[0]) \
            == component_containing(merged.components, TWO_BUMP_CENTERS[1])
        prev = set()
        for s in (4.0, 2.0, 0.0, -2.0, -4.0):
            cur = set(adjust_threshold(grid, cloud, sel, s).particles.tolist())
            assert cur >= prev
            prev = cur
        assert len(prev) > 800  # most of both clusters selected at s=-4

    def test_out_of_range_s_clamps_and_flags(self, clusters):
        cloud, grid = clusters
        sel = meta_point(grid, cloud, [CLUSTER_A])
        out = adjust_threshold(grid, cloud, sel, 9.0)
        assert out.s == 4.0
        assert any("clamped" in f for f in out.flags)

    def test_baseline_cannot_adjust(self, clusters):
        cloud, grid = clusters
        sel = Selection("baseline", 0.0, 0.0, 0.0, (), np.zeros(0, np.int64),
                        None, np.zeros((0, 3)))
        with pytest.raises(InvalidInputError):
            adjust_threshold(grid, cloud, sel, 1.0)


class TestBaselineBrush:
    def test_single_sample_picks_covered_particle(self):
        cloud = ParticleCloud([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        got = baseline_brush(cloud, Stroke([[0.05, 0.0, 0.0]], radius=0.1))
        np.testing.assert_array_equal(got, [0])

    def test_matches_brute_force_capsule_oracle(self):
        rng = np.random.default_rng(31)
        cloud = ParticleCloud(rng.random((500, 3)))
        poly = rng.random((6, 3))
        radius = 0.18
        got = baseline_brush(cloud, Stroke(poly, radius=radius))

        def point_seg(p, a, b):
            ab = b - a
            denom = ab @ ab
            t = 0.0 if denom == 0 else np.clip((p - a) @ ab / denom, 0, 1)
            return np.linalg.norm(p - (a + t * ab))

        expected = [i for i, p in enumerate(cloud.positions)
                    if min(point_seg(p, poly[k], poly[k + 1])
                           for k in range(len(poly) - 1)) <= radius]
        np.testing.assert_array_equal(got, expected)

    def test_vanishing_radius_selects_nothing(self):
        rng = np.random.default_rng(32)
        cloud = ParticleCloud(rng.random((100, 3)))
        got = baseline_brush(cloud, Stroke(rng.random((4, 3)), radius=1e-12))
        assert len(got) == 0


class TestCombine:
    def test_examples(self):
        a = np.array([1, 2, 3])
        np.testing.assert_array_equal(combine(a, [], "union"), a)
        np.testing.assert_array_equal(combine(a, a, "subtract"), [])
        np.testing.assert_array_equal(combine(a, [2], "subtract"), [1, 3])

    def test_unknown_mode(self):
        with pytest.raises(InvalidInputError):
            combine([1], [2], "xor")

    @given(st.sets(st.integers(0, 50)), st.sets(st.integers(0, 50)),
           st.sets(st.integers(0, 50)))
    @settings(max_examples=60, deadline=None)
    def test_set_laws(self, a, b, c):
        A, B, C = (np.array(sorted(s), dtype=np.int64) for s in (a, b, c))
        union_ab = combine(A, B, "union")
        np.testing.assert_array_equal(union_ab, combine(B, A, "union"))
        np.testing.assert_array_equal(combine(union_ab, C, "union"),
                                      combine(A, combine(B, C, "union"), "union"))
        np.testing.assert_array_equal(combine(A, A, "union"), A)
        if not (a & b):
            np.testing.assert_array_equal(combine(A, B, "subtract"), A)


class TestSerialization:
    def test_roundtrip_through_dict(self, clusters):
        cloud, grid = clusters
        sel = meta_point(grid, cloud, [CLUSTER_A + [0.03, 0, 0]])
        doc = selection_to_dict(sel)
        assert set(doc) >= {"technique", "rho0", "s", "threshold",
                            "kept_components", "particles"}
        back = selection_from_dict(json.loads(canonical_json(doc)))
        assert back.technique == sel.technique
        assert back.rho0 == sel.rho0
        assert back.threshold == sel.threshold
        np.testing.assert_array_equal(back.particles, sel.particles)

    def test_byte_identical_reruns(self, clusters):
        cloud, grid = clusters
        stroke = Stroke([CLUSTER_A, CLUSTER_A + [0.06, 0.02, 0]], radius=0.05)
        a = canonical_json(selection_to_dict(meta_paint(grid, cloud, stroke)))
        b = canonical_json(selection_to_dict(meta_paint(grid, cloud, stroke)))
        assert a == b

    def test_brush_mask_rebuilt_from_candidates(self, mini_filament):
        cloud, grid, spine = mini_filament
        cell = float(grid.spec.spacing.min())
        sel = meta_brush(grid, cloud, Stroke(spine, radius=2 * cell))
        doc = json.loads(canonical_json(selection_to_dict(sel)))
        rebuilt = selection_from_dict(doc, grid, cloud)
        np.testing.assert_array_equal(rebuilt.cell_mask, sel.cell_mask)
        for s in (-2.0, 1.0):
            a = adjust_threshold(grid, cloud, sel, s)
            b = adjust_threshold(grid, cloud, rebuilt, s)
            np.testing.assert_array_equal(a.particles, b.particles)
