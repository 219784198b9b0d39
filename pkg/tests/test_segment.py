import math

import numpy as np
import pytest

from chromaplane.cluster import ClusterResult
from chromaplane.colorlab import LabColor, srgb_to_lab_array
from chromaplane.model import (UNKNOWN_LABEL, WindowProvenance, add_training_window,
                               new_model)
from chromaplane.raster import Image, load_gray_png
from chromaplane.segment import (EmptyModelError, LabelMap, SegmentOptions,
                                 UNKNOWN_INDEX, classify_pixel, extract_plane,
                                 novelty_report, segment_image, smooth_labels,
                                 write_label_map_png)

WIN = WindowProvenance("d", (0, 0, 1, 1), 1, 0)


def model_of(entries):
    """entries: list of (label, lab, radius)."""
    m = new_model()
    for label, lab, radius in entries:
        cr = ClusterResult(centroids=np.array([lab], dtype=np.float64),
                           counts=np.array([10]), radii=np.array([float(radius)]),
                           inertia=0.0, iterations=1, seed=0)
        m = add_training_window(m, WIN, cr, {0: label})
    return m


def two_class_model():
    return model_of([("A", (0, 0, 0), 10.0), ("B", (100, 0, 0), 10.0)])


def brute_force_classify(m, lab, radius_override=None):
    """Independent linear scan in (class, centroid) order; first minimum wins."""
    best = None
    for ci, cls in enumerate(m.classes):
        for e in cls.centroids:
            dl = lab[0] - e.lab[0]
            da = lab[1] - e.lab[1]
            db = lab[2] - e.lab[2]
            d2 = dl * dl + da * da + db * db
            if best is None or d2 < best[0]:
                best = (d2, ci, e.radius)
    d2, ci, radius = best
    dist = math.sqrt(d2)
    limit = radius if radius_override is None else radius_override
    if dist <= limit:
        return m.classes[ci].label, dist
    return UNKNOWN_LABEL, dist


class TestClassifyPixel:
    def test_inside_radius(self):
        assert classify_pixel(two_class_model(), LabColor(1, 0, 0)) == ("A", 1.0)

    def test_outside_all_radii(self):
        assert classify_pixel(two_class_model(), LabColor(50, 0, 0)) == (UNKNOWN_LABEL, 50.0)

    def test_nearest_wins(self):
        assert classify_pixel(two_class_model(), LabColor(95, 0, 0)) == ("B", 5.0)

    def test_empty_model_rejected(self):
        with pytest.raises(EmptyModelError):
            classify_pixel(new_model(), LabColor(0, 0, 0))

    def test_tie_breaks_to_lower_class_then_centroid(self):
        # pixel exactly between two centroids; integer coords keep distances exact
        m = model_of([("first", (47, -4, 0), 50.0), ("second", (53, 4, 0), 50.0)])
        label, dist = classify_pixel(m, LabColor(50, 0, 0))
        assert label == "first" and dist == 5.0
        # within one class, the lower centroid index wins the tie
        m2 = new_model()
        cr = ClusterResult(centroids=np.array([[53.0, 4, 0], [47.0, -4, 0]]),
                           counts=np.array([5, 5]), radii=np.array([50.0, 50.0]),
                           inertia=0.0, iterations=1, seed=0)
        m2 = add_training_window(m2, WIN, cr, {0: "x", 1: "x"})
        label2, dist2 = classify_pixel(m2, LabColor(50, 0, 0))
        assert label2 == "x" and dist2 == 5.0

    def test_matches_brute_force_scan(self):
        from chromaplane.model import CentroidEntry, ColorClass, ColorModel
        from chromaplane.cluster import ClusterConfig

        rng = np.random.default_rng(42)
        for _ in range(60):
            classes = []
            for ci in range(int(rng.integers(1, 5))):
                cents = tuple(
                    CentroidEntry(LabColor(*rng.uniform([-10, -60, -60], [110, 60, 60])),
                                  float(rng.uniform(0.5, 30)), 1)
                    for _ in range(int(rng.integers(1, 4))))
                classes.append(ColorClass(f"c{ci}", cents))
            m = ColorModel(1, "lab-d65", ClusterConfig(), tuple(classes), ())
            for _ in range(30):
                p = LabColor(*rng.uniform([-10, -60, -60], [110, 60, 60]))
                assert classify_pixel(m, p) == brute_force_classify(m, p)

    def test_radius_override(self):
        m = two_class_model()
        assert classify_pixel(m, LabColor(50, 0, 0), radius_override=60.0)[0] == "A"


class TestSegmentImage:
    def test_uniform_image_single_class(self):
        color = (186, 34, 42)
        lab = srgb_to_lab_array(np.array([[color]], dtype=np.uint8))[0, 0]
        m = model_of([("stamp", tuple(lab), 5.0)])
        img = Image(np.tile(np.array(color, np.uint8), (2, 2, 1)))
        res = segment_image(m, img)
        assert res.histogram == {"stamp": 4, UNKNOWN_LABEL: 0}
        assert res.unknown_fraction == 0.0
        assert res.flagged is False

    def test_two_percent_novel_flags(self):
        known = (200, 200, 200)
        novel = (20, 150, 70)
        lab = srgb_to_lab_array(np.array([[known]], dtype=np.uint8))[0, 0]
        m = model_of([("bg", tuple(lab), 5.0)])
        px = np.tile(np.array(known, np.uint8), (100, 100, 1))
        px[:2, :100] = novel  # 200 of 10000 pixels = 2%
        res = segment_image(m, Image(px), SegmentOptions(flag_threshold=0.01))
        assert res.unknown_fraction == pytest.approx(0.02)
        assert res.flagged is True

    def test_flag_threshold_is_strict(self):
        known = (200, 200, 200)
        lab = srgb_to_lab_array(np.array([[known]], dtype=np.uint8))[0, 0]
        m = model_of([("bg", tuple(lab), 5.0)])
        px = np.tile(np.array(known, np.uint8), (10, 10, 1))
        px[0, 0] = (20, 150, 70)  # exactly 1% unknown
        res = segment_image(m, Image(px), SegmentOptions(flag_threshold=0.01))
        assert res.unknown_fraction == pytest.approx(0.01)
        assert res.flagged is False  # flagged iff strictly greater

    def test_histogram_partition_invariant(self):
        rng = np.random.default_rng(3)
        m = model_of([("a", (30, 10, 10), 15.0), ("b", (70, -20, 5), 12.0)])
        img = Image(rng.integers(0, 256, (157, 211, 3), dtype=np.uint8))
        res = segment_image(m, img)
        assert sum(res.histogram.values()) == 157 * 211

    def test_parallel_matches_sequential(self):
        rng = np.random.default_rng(4)
        m = model_of([("a", (30, 10, 10), 25.0), ("b", (70, -20, 5), 25.0),
                      ("c", (50, 40, -30), 20.0)])
        img = Image(rng.integers(0, 256, (500, 300, 3), dtype=np.uint8))
        seq = segment_image(m, img, SegmentOptions(workers=1))
        par = segment_image(m, img, SegmentOptions(workers=4))
        assert np.array_equal(seq.labels.labels, par.labels.labels)
        assert seq.histogram == par.histogram

    def test_enlarging_radii_never_increases_unknown(self):
        rng = np.random.default_rng(5)
        img = Image(rng.integers(0, 256, (80, 80, 3), dtype=np.uint8))
        fractions = []
        for scale in (1.0, 2.0, 4.0, 8.0):
            m = model_of([("a", (30, 10, 10), 10.0 * scale),
                          ("b", (70, -20, 5), 8.0 * scale)])
            fractions.append(segment_image(m, img).unknown_fraction)
        assert all(x >= y for x, y in zip(fractions, fractions[1:]))

    def test_global_radius_override(self):
        rng = np.random.default_rng(6)
        img = Image(rng.integers(0, 256, (50, 50, 3), dtype=np.uint8))
        m = model_of([("a", (50, 0, 0), 1.0)])
        tight = segment_image(m, img)
        loose = segment_image(m, img, SegmentOptions(radius_override=200.0))
        assert loose.unknown_fraction == 0.0
        assert tight.unknown_fraction >= loose.unknown_fraction

    def test_lut_mode_agrees_on_solid_colors(self):
        colors = [(186, 34, 42), (244, 242, 236), (38, 38, 46)]
        labs = srgb_to_lab_array(np.array([colors], dtype=np.uint8))[0]
        m = model_of([(f"c{i}", tuple(labs[i]), 6.0) for i in range(3)])
        px = np.zeros((30, 30, 3), np.uint8)
        px[:10] = colors[0]
        px[10:20] = colors[1]
        px[20:] = colors[2]
        exact = segment_image(m, Image(px))
        lut = segment_image(m, Image(px), SegmentOptions(use_lut=True))
        assert np.array_equal(exact.labels.labels, lut.labels.labels)

    def test_empty_model_and_empty_image(self):
        with pytest.raises(EmptyModelError):
            segment_image(new_model(), Image(np.zeros((2, 2, 3), np.uint8)))
        with pytest.raises(ValueError, match="empty image"):
            segment_image(two_class_model(), Image(np.zeros((0, 4, 3), np.uint8)))

    def test_timing_recorded(self):
        m = two_class_model()
        img = Image(np.zeros((4, 4, 3), np.uint8))
        assert segment_image(m, img).timing_ms > 0.0


class TestSmoothLabels:
    def test_isolated_pixel_absorbed(self):
        grid = np.zeros((3, 3), dtype=np.uint8)
        grid[1, 1] = UNKNOWN_INDEX
        lm = LabelMap(grid, ("A",))
        out = smooth_labels(lm, 1)
        assert out.labels[1, 1] == 0
        assert (out.labels == 0).all()

    def test_uniform_unchanged(self):
        lm = LabelMap(np.full((5, 5), 2, dtype=np.uint8), ("a", "b", "c"))
        assert np.array_equal(smooth_labels(lm, 1).labels, lm.labels)

    def test_tied_majority_keeps_original(self):
        # neighborhood of center: 4 of A(0), 4 of B(1), center C(2)
        grid = np.array([[0, 0, 0],
                         [1, 2, 1],
                         [1, 1, 0]], dtype=np.uint8)
        lm = LabelMap(grid, ("A", "B", "C"))
        out = smooth_labels(lm, 1)
        assert out.labels[1, 1] == 2

    def test_own_label_in_majority_tie_stays(self):
        # center A ties with B at 4 votes within its window
        grid = np.array([[0, 0, 0],
                         [1, 0, 1],
                         [1, 1, 2]], dtype=np.uint8)
        lm = LabelMap(grid, ("A", "B", "C"))
        assert smooth_labels(lm, 1).labels[1, 1] == 0

    def test_unknown_votes_like_any_label(self):
        grid = np.full((3, 3), UNKNOWN_INDEX, dtype=np.uint8)
        grid[1, 1] = 0
        lm = LabelMap(grid, ("A",))
        assert smooth_labels(lm, 1).labels[1, 1] == UNKNOWN_INDEX

    def test_radius_validated(self):
        lm = LabelMap(np.zeros((2, 2), np.uint8), ("A",))
        with pytest.raises(ValueError, match="radius"):
            smooth_labels(lm, 0)

    def test_single_pass_no_iteration(self):
        # a 2-wide stripe survives radius-1 smoothing (iterating would erode it)
        grid = np.zeros((7, 7), dtype=np.uint8)
        grid[:, 3:5] = 1
        lm = LabelMap(grid, ("A", "B"))
        out = smooth_labels(lm, 1)
        assert (out.labels[:, 3:5] == 1).any()


class TestExtractPlane:
    def checker(self):
        colors = np.array([[255, 0, 0], [0, 0, 255]], dtype=np.uint8)
        px = np.zeros((4, 4, 3), np.uint8)
        grid = np.indices((4, 4)).sum(axis=0) % 2
        px[:] = colors[grid]
        lm = LabelMap(grid.astype(np.uint8), ("red", "blue"))
        return Image(px), lm

    def test_empty_class_all_white(self):
        img, _ = self.checker()
        all_red = LabelMap(np.zeros((4, 4), np.uint8), ("red", "blue"))
        plane = extract_plane(img, all_red, "blue")
        assert (plane.pixels == 255).all()

    def test_union_reconstructs_source(self):
        img, lm = self.checker()
        out = np.full_like(img.pixels, 255)
        for label in (*lm.legend, UNKNOWN_LABEL):
            plane = extract_plane(img, lm, label)
            mask = (plane.pixels != 255).any(axis=2)
            out[mask] = plane.pixels[mask]
        assert np.array_equal(out, img.pixels)

    def test_mask_pixel_count_matches_histogram(self):
        img, lm = self.checker()
        plane = extract_plane(img, lm, "red", style="mask")
        assert (plane.pixels == 0).all(axis=2).sum() == (lm.labels == 0).sum()

    def test_unknown_label_name_rejected(self):
        img, lm = self.checker()
        with pytest.raises(ValueError, match="unknown label"):
            extract_plane(img, lm, "nope")
        with pytest.raises(ValueError, match="style"):
            extract_plane(img, lm, "red", style="glitter")


class TestNoveltyReport:
    def test_no_unknowns_no_suggestions(self):
        color = (200, 200, 200)
        lab = srgb_to_lab_array(np.array([[color]], dtype=np.uint8))[0, 0]
        m = model_of([("bg", tuple(lab), 5.0)])
        res = segment_image(m, Image(np.tile(np.array(color, np.uint8), (10, 10, 1))))
        verdict = novelty_report(res, m)
        assert verdict.flagged is False and verdict.suggestions == ()

    def test_flagged_above_threshold(self):
        known, novel = (200, 200, 200), (20, 150, 70)
        lab = srgb_to_lab_array(np.array([[known]], dtype=np.uint8))[0, 0]
        m = model_of([("bg", tuple(lab), 5.0)])
        px = np.tile(np.array(known, np.uint8), (100, 100, 1))
        px[:2] = novel
        res = segment_image(m, Image(px), SegmentOptions(flag_threshold=0.01))
        verdict = novelty_report(res, m)
        assert verdict.flagged is True

    def test_single_novel_color_suggested_accurately(self):
        known, novel = (200, 200, 200), (20, 150, 70)
        labs = srgb_to_lab_array(np.array([[known, novel]], dtype=np.uint8))[0]
        m = model_of([("bg", tuple(labs[0]), 5.0)])
        px = np.tile(np.array(known, np.uint8), (50, 50, 1))
        px[:10] = novel
        res = segment_image(m, Image(px))
        verdict = novelty_report(res, m)
        assert len(verdict.suggestions) == 1
        s = verdict.suggestions[0]
        d = math.dist(tuple(s.lab), tuple(labs[1]))
        assert d <= 0.5


def test_label_map_png_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    grid = rng.integers(0, 3, (20, 30)).astype(np.uint8)
    grid[0, :5] = UNKNOWN_INDEX
    lm = LabelMap(grid, ("a", "b", "c"))
    path = tmp_path / "labels.png"
    sidecar = write_label_map_png(lm, path)
    assert np.array_equal(load_gray_png(path), grid)
    import json
    legend = json.loads(sidecar.read_text())
    assert legend == {"legend": ["a", "b", "c"], "unknown_index": 255}
