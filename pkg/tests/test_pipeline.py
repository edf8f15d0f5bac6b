"""Behavioral tests for the interactive refinement loop: ROI polygon
handling, per-iteration mechanics, convergence, stroke editing, and the
determinism / seed invariants of live sessions."""

import json
import math

import numpy as np
import pytest

from nccut.config import Config
from nccut.errors import InvalidInputError, InvalidRoiError
from nccut.imagegraph import RgbImage
from nccut.pipeline import (
    apply_edit,
    init_session,
    load_roi_polygon,
    normalize_polygon,
    pixel_constraints,
    rasterize_polygon,
    run_iteration,
    save_roi_polygon,
    segment,
    trace_json,
    updated_seeds,
    validate_polygon,
)
from nccut.synthetic import gradient_bar, ring_with_pocket, two_tone_square


def flat_noise_image(height, width, seed=7):
    rng = np.random.default_rng(seed)
    px = rng.normal(128.0, 12.0, (height, width, 3)).clip(0, 255)
    return RgbImage(px.astype(np.uint8))


def roi_error_rate(scene, mask):
    roi = rasterize_polygon(scene.roi, scene.image.height, scene.image.width)
    return (mask != scene.truth)[roi].sum() / roi.sum()


def truth_fraction_per_region(session, truth):
    counts = np.bincount(session.regions.labels.ravel(),
                         weights=truth.ravel().astype(float),
                         minlength=session.regions.n_regions)
    return counts / session.regions.pixel_counts


@pytest.fixture(scope="module")
def square_run():
    scene = two_tone_square()
    session = init_session(scene.image, scene.roi)
    mask, trace = segment(session)
    return scene, session, mask, trace


@pytest.fixture(scope="module")
def bar_run():
    scene = gradient_bar()
    session = init_session(scene.image, scene.roi)
    mask, trace = segment(session)
    return scene, session, mask, trace


@pytest.fixture(scope="module")
def ring_no_indeterminacy_run():
    scene = ring_with_pocket()
    config = Config().with_updates(indeterminacy_enabled=False)
    session = init_session(scene.image, scene.roi, config)
    mask, trace = segment(session)
    return scene, session, mask, trace


class TestNormalizePolygon:
    def test_floats_out(self):
        poly = normalize_polygon([(0, 0), (10, 0), (5, 8)])
        assert poly == ((0.0, 0.0), (10.0, 0.0), (5.0, 8.0))
        assert all(isinstance(v, float) for xy in poly for v in xy)

    def test_drops_closing_duplicate(self):
        poly = normalize_polygon([(0, 0), (10, 0), (5, 8), (0, 0)])
        assert poly == ((0.0, 0.0), (10.0, 0.0), (5.0, 8.0))

    def test_drops_consecutive_duplicates(self):
        poly = normalize_polygon([(0, 0), (0, 0), (10, 0), (10, 0), (5, 8)])
        assert poly == ((0.0, 0.0), (10.0, 0.0), (5.0, 8.0))

    def test_two_distinct_vertices_rejected(self):
        with pytest.raises(InvalidRoiError):
            normalize_polygon([(0, 0), (10, 10)])

    def test_closed_pair_rejected(self):
        with pytest.raises(InvalidRoiError):
            normalize_polygon([(0, 0), (10, 10), (0, 0)])


class TestValidatePolygon:
    def test_square_accepted(self):
        validate_polygon(normalize_polygon([(0, 0), (9, 0), (9, 9), (0, 9)]))

    def test_concave_accepted(self):
        validate_polygon(normalize_polygon(
            [(0, 0), (10, 0), (10, 10), (5, 4), (0, 10)]))

    def test_bowtie_rejected(self):
        with pytest.raises(InvalidRoiError):
            validate_polygon(normalize_polygon(
                [(0, 0), (10, 10), (10, 0), (0, 10)]))

    def test_vertex_on_non_adjacent_edge_rejected(self):
        with pytest.raises(InvalidRoiError):
            validate_polygon(normalize_polygon(
                [(0, 0), (10, 0), (10, 10), (5, 0)]))


class TestRasterizePolygon:
    def test_rectangle_fills_exact_pixel_block(self):
        mask = rasterize_polygon([(5, 5), (15, 5), (15, 15), (5, 15)], 20, 20)
        expected = np.zeros((20, 20), dtype=bool)
        expected[5:15, 5:15] = True
        np.testing.assert_array_equal(mask, expected)

    def test_matches_brute_force_crossing_count(self):
        poly = ((2.0, 1.0), (17.0, 2.0), (16.0, 9.0), (9.0, 5.0), (3.0, 12.0))
        mask = rasterize_polygon(poly, 14, 19)
        for y in range(14):
            for x in range(19):
                cx, cy = x + 0.5, y + 0.5
                inside = False
                for i in range(len(poly)):
                    xa, ya = poly[i]
                    xb, yb = poly[(i + 1) % len(poly)]
                    if (ya <= cy) != (yb <= cy):
                        xint = xa + (cy - ya) * (xb - xa) / (yb - ya)
                        if cx < xint:
                            inside = not inside
                assert mask[y, x] == inside

    def test_subpixel_polygon_covers_nothing(self):
        mask = rasterize_polygon([(0.1, 0.1), (0.3, 0.1), (0.2, 0.3)], 8, 8)
        assert not mask.any()


class TestInitSession:
    def test_rectangle_roi_labels_interior(self, square_run):
        scene, _, _, _ = square_run
        session = init_session(scene.image, scene.roi)
        expected = np.zeros((120, 120), dtype=np.uint8)
        expected[15:105, 15:105] = 1
        np.testing.assert_array_equal(session.labeling, expected)
        assert session.labeling.dtype == np.uint8
        assert session.iteration == 0
        assert session.hard_constraints == {}

    def test_border_roi_seeds_are_exactly_border_regions(self):
        # with one region per pixel, the bounds-minus-one-pixel polygon must
        # seed precisely the one-pixel border ring
        image = flat_noise_image(20, 20)
        session = init_session(image, [(1, 1), (19, 1), (19, 19), (1, 19)],
                               Config().with_updates(n_regions=400))
        border = np.zeros((20, 20), dtype=bool)
        border[0, :] = border[-1, :] = True
        border[:, 0] = border[:, -1] = True
        border_regions = set(session.regions.labels[border].tolist())
        assert set(session.roi_seeds) == border_regions
        np.testing.assert_array_equal(session.labeling,
                                      (~border).astype(np.uint8))

    def test_seeds_match_majority_outside_count(self, square_run):
        _, session, _, _ = square_run
        outside = np.bincount(session.regions.labels[~session.roi_mask],
                              minlength=session.regions.n_regions)
        expected = set(np.flatnonzero(
            outside > 0.5 * session.regions.pixel_counts).tolist())
        assert set(session.roi_seeds) == expected
        assert len(expected) > 0

    def test_two_vertex_polygon_rejected(self):
        with pytest.raises(InvalidRoiError):
            init_session(flat_noise_image(20, 20), [(2, 2), (15, 15)],
                         Config().with_updates(n_regions=16))

    def test_self_intersecting_polygon_rejected(self):
        with pytest.raises(InvalidRoiError):
            init_session(flat_noise_image(20, 20),
                         [(2, 2), (18, 18), (18, 2), (2, 18)],
                         Config().with_updates(n_regions=16))

    def test_polygon_covering_whole_image_rejected(self):
        with pytest.raises(InvalidRoiError):
            init_session(flat_noise_image(20, 20),
                         [(-5, -5), (25, -5), (25, 25), (-5, 25)],
                         Config().with_updates(n_regions=16))

    def test_polygon_covering_no_pixels_rejected(self):
        with pytest.raises(InvalidRoiError):
            init_session(flat_noise_image(20, 20),
                         [(0.1, 0.1), (0.3, 0.1), (0.2, 0.3)],
                         Config().with_updates(n_regions=16))


class TestRunIteration:
    def test_square_separated_after_one_iteration(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        run_iteration(session)
        np.testing.assert_array_equal(session.labeling, scene.truth)
        assert session.iteration == 1

    def test_outside_roi_regions_background_every_iteration(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        seed_pixels = np.isin(session.regions.labels,
                              sorted(session.roi_seeds))
        for _ in range(3):
            run_iteration(session)
            assert (session.labeling[seed_pixels] == 0).all()

    def test_fixed_point_repeats_exactly(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        segment(session)
        settled = session.labeling.copy()
        run_iteration(session)
        np.testing.assert_array_equal(session.labeling, settled)


class TestSegment:
    def test_two_tone_square_exact_within_three_iterations(self, square_run):
        scene, _, mask, trace = square_run
        assert len(trace) <= 3
        assert trace[-1].changed_pixels == 0
        assert roi_error_rate(scene, mask) == 0.0
        np.testing.assert_array_equal(mask, scene.truth)

    def test_trace_covers_every_iteration(self, square_run):
        _, _, _, trace = square_run
        assert [t.iteration for t in trace] == list(range(1, len(trace) + 1))
        for t in trace:
            assert math.isfinite(t.energy)
            assert 0.0 <= t.gamma <= 1.0
            assert t.n_seeds > 0

    def test_trace_json_round_trip(self, square_run):
        _, _, _, trace = square_run
        decoded = json.loads(trace_json(trace))
        assert len(decoded) == len(trace)
        for entry, t in zip(decoded, trace):
            assert entry["iteration"] == t.iteration
            assert entry["changed_pixels"] == t.changed_pixels
            assert entry["gamma"] == t.gamma
            assert entry["energy"] == t.energy
            assert entry["n_seeds"] == t.n_seeds
            assert entry["n_obj_candidates"] == t.n_obj_candidates
            assert entry["n_bkg_candidates"] == t.n_bkg_candidates

    def test_resegmenting_converged_session_is_stable(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        first, _ = segment(session)
        second, trace = segment(session)
        assert len(trace) == 1
        assert trace[0].changed_pixels == 0
        np.testing.assert_array_equal(first, second)

    def test_gradient_bar_low_error(self, bar_run):
        scene, _, mask, trace = bar_run
        assert trace[-1].changed_pixels == 0
        assert roi_error_rate(scene, mask) < 0.005

    def test_background_candidates_empty_out(self, bar_run):
        # early iterations treat weakly connected regions as background
        # candidates; once the models settle, only object candidates remain
        scene, session, _, trace = bar_run
        assert len(trace) <= 5
        assert trace[0].n_bkg_candidates > 0
        assert trace[-1].n_bkg_candidates == 0
        assert trace[-1].n_obj_candidates > 0

    def test_final_object_candidates_lie_on_object(self, bar_run):
        scene, session, _, _ = bar_run
        fractions = truth_fraction_per_region(session, scene.truth)
        members = sorted(session.candidates.p_obj)
        assert members
        assert (fractions[members] > 0.5).all()

    def test_square_never_has_background_candidates(self, square_run):
        scene, session, _, trace = square_run
        assert all(t.n_bkg_candidates == 0 for t in trace)
        assert all(t.n_obj_candidates > 0 for t in trace)
        fractions = truth_fraction_per_region(session, scene.truth)
        members = sorted(session.candidates.p_obj)
        assert (fractions[members] > 0.5).all()


class TestRingPocket:
    def test_full_method_excludes_enclosed_pocket(self):
        scene = ring_with_pocket()
        session = init_session(scene.image, scene.roi)
        mask, trace = segment(session)
        assert trace[-1].changed_pixels == 0
        assert roi_error_rate(scene, mask) < 0.02
        assert mask[100, 100] == 0       # pocket center
        assert mask[100, 136] == 1       # on the ring

    def test_zero_indeterminacy_keeps_pocket(self, ring_no_indeterminacy_run):
        scene, _, mask, _ = ring_no_indeterminacy_run
        assert mask[100, 100] == 1
        assert roi_error_rate(scene, mask) > 0.02


class TestApplyEdit:
    def test_empty_stroke_set_is_identity(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        before, _ = segment(session)
        after, _ = apply_edit(session, [])
        np.testing.assert_array_equal(before, after)

    def test_background_stroke_fixes_mislabeled_pocket(self):
        scene = ring_with_pocket()
        config = Config().with_updates(indeterminacy_enabled=False)
        session = init_session(scene.image, scene.roi, config)
        mask, _ = segment(session)
        assert mask[100, 100] == 1
        err_before = roi_error_rate(scene, mask)
        stroke = [([(x, 100) for x in range(93, 108)], 0)]
        edited, _ = apply_edit(session, stroke)
        assert edited[100, 100] == 0
        assert roi_error_rate(scene, edited) < err_before
        stroked = {int(session.regions.labels[100, x])
                   for x in range(93, 108)}
        assert stroked <= set(session.seeds)

    def test_object_stroke_pins_region_and_unseeds_it(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        mask, _ = segment(session)
        assert mask[60, 20] == 0         # inside ROI, true background
        region = int(session.regions.labels[60, 20])
        edited, _ = apply_edit(session, [([(20, 60)], 1)])
        member_pixels = session.regions.labels == region
        assert (edited[member_pixels] == 1).all()
        assert region not in set(session.seeds)

    def test_background_stroke_restores_and_reseeds(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        segment(session)
        region = int(session.regions.labels[60, 20])
        apply_edit(session, [([(20, 60)], 1)])
        edited, _ = apply_edit(session, [([(20, 60)], 0)])
        member_pixels = session.regions.labels == region
        assert (edited[member_pixels] == 0).all()
        assert region in set(session.seeds)
        np.testing.assert_array_equal(edited, scene.truth)

    def test_last_stroke_wins_within_one_edit(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        segment(session)
        region = int(session.regions.labels[60, 20])
        edited, _ = apply_edit(session, [([(20, 60)], 1), ([(20, 60)], 0)])
        assert (edited[session.regions.labels == region] == 0).all()
        assert session.hard_constraints[region] == 0

    def test_outside_roi_seeds_survive_object_stroke(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        segment(session)
        outside_seed = sorted(session.roi_seeds)[0]
        ys, xs = np.nonzero(session.regions.labels == outside_seed)
        apply_edit(session, [([(int(xs[0]), int(ys[0]))], 1)])
        assert set(session.roi_seeds) <= set(session.seeds)

    def test_stroke_outside_image_rejected_without_side_effect(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        segment(session)
        with pytest.raises(InvalidInputError):
            apply_edit(session, [([(20, 60), (500, 60)], 0)])
        assert session.hard_constraints == {}

    def test_bad_stroke_label_rejected(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        segment(session)
        with pytest.raises(InvalidInputError):
            apply_edit(session, [([(20, 60)], 2)])
        assert session.hard_constraints == {}


class TestSeedAndConstraintUnits:
    def test_pixel_constraints_pin_outside_seeds_only(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        grid = pixel_constraints(session)
        seed_pixels = np.isin(session.regions.labels,
                              sorted(session.roi_seeds))
        assert (grid[seed_pixels] == 0).all()
        assert (grid[~seed_pixels] == -1).all()

    def test_pixel_constraints_stroke_overrides_seed(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        seed = sorted(session.roi_seeds)[0]
        session.hard_constraints[seed] = 1
        grid = pixel_constraints(session)
        assert (grid[session.regions.labels == seed] == 1).all()

    def test_updated_seeds_unions_background_majority(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        seeds = updated_seeds(session)
        bkg = np.bincount(session.regions.labels.ravel(),
                          weights=(session.labeling.ravel() == 0).astype(float),
                          minlength=session.regions.n_regions)
        expected = set(np.flatnonzero(
            bkg > 0.8 * session.regions.pixel_counts).tolist())
        expected |= set(session.roi_seeds)
        assert set(seeds) == expected

    def test_updated_seeds_respects_constraints(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        interior = int(session.regions.labels[60, 60])  # inside the object
        session.hard_constraints[interior] = 0
        assert interior in set(updated_seeds(session))
        session.hard_constraints[interior] = 1
        assert interior not in set(updated_seeds(session))

    def test_updated_seeds_never_drops_outside_seed(self):
        scene = two_tone_square()
        session = init_session(scene.image, scene.roi)
        for seed in sorted(session.roi_seeds)[:3]:
            session.hard_constraints[seed] = 1
        assert set(session.roi_seeds) <= set(updated_seeds(session))


class TestSessionInvariants:
    def test_identical_inputs_identical_masks(self):
        scene = two_tone_square()
        first, trace_a = segment(init_session(scene.image, scene.roi))
        second, trace_b = segment(init_session(scene.image, scene.roi))
        np.testing.assert_array_equal(first, second)
        assert trace_json(trace_a) == trace_json(trace_b)

    def test_zero_indeterminacy_mode_forces_gamma_one(
            self, ring_no_indeterminacy_run):
        _, session, _, trace = ring_no_indeterminacy_run
        assert all(t.gamma == 1.0 for t in trace)
        assert (session.nc.I == 0.0).all()

    def test_final_mask_background_outside_roi(self, square_run, bar_run):
        for scene, session, mask, _ in (square_run, bar_run):
            seed_pixels = np.isin(session.regions.labels,
                                  sorted(session.roi_seeds))
            assert (mask[seed_pixels] == 0).all()

    def test_roi_looseness_barely_changes_mask(self):
        scene = two_tone_square()
        tight, _ = segment(init_session(
            scene.image, [(25, 25), (95, 25), (95, 95), (25, 95)]))
        loose, _ = segment(init_session(
            scene.image, [(5, 5), (115, 5), (115, 115), (5, 115)]))
        assert (tight != loose).mean() < 0.01
        np.testing.assert_array_equal(tight, scene.truth)
        np.testing.assert_array_equal(loose, scene.truth)


class TestRoiFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "roi.json"
        save_roi_polygon([(1, 2), (30, 2), (15, 28)], path)
        assert load_roi_polygon(path) == ((1.0, 2.0), (30.0, 2.0),
                                          (15.0, 28.0))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(InvalidRoiError):
            load_roi_polygon(tmp_path / "absent.json")

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "roi.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(InvalidRoiError):
            load_roi_polygon(path)

    def test_missing_polygon_key_rejected(self, tmp_path):
        path = tmp_path / "roi.json"
        path.write_text('{"points": [[0, 0], [5, 0], [3, 4]]}',
                        encoding="utf-8")
        with pytest.raises(InvalidRoiError):
            load_roi_polygon(path)

    def test_degenerate_polygon_rejected(self, tmp_path):
        path = tmp_path / "roi.json"
        path.write_text('{"polygon": [[0, 0], [5, 5]]}', encoding="utf-8")
        with pytest.raises(InvalidRoiError):
            load_roi_polygon(path)
