import numpy as np
import pytest

from confdet.geometry import Box3, iou, nms_filter, volume

from conftest import box, cand, random_box


class TestVolume:
    def test_unit_cube(self):
        assert volume(box(0, 1)) == 1.0

    def test_degenerate_axis(self):
        b = Box3((0.0, 0.0, 0.0), (1.0, 1.0, 0.0))
        assert volume(b) == 0.0

    def test_mixed_extents(self):
        assert volume(box((0, 0, 0), (2, 3, 0.5))) == pytest.approx(3.0)


class TestIou:
    def test_identity(self):
        b = box(0, 1)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(box(0, 1), box((2, 0, 0), (3, 1, 1))) == 0.0

    def test_half_overlap(self):
        a = box(0, 1)
        b = box((0, 0, 0), (0.5, 1, 1))
        assert iou(a, b) == 0.5

    def test_hand_computed_third(self):
        # intersection [1,2]x[0,2]x[0,2] = 4, union 8+8-4 = 12
        a = box(0, 2)
        b = box((1, 0, 0), (3, 2, 2))
        assert iou(a, b) == 4.0 / 12.0

    def test_monte_carlo_oracle_matches_hand_value(self):
        # Point-sampling estimate of intersection/union over the joint
        # bounding box; verifies the analytic 1/3 independently.
        a = box(0, 2)
        b = box((1, 0, 0), (3, 2, 2))
        rng = np.random.default_rng(42)
        pts = rng.uniform([0, 0, 0], [3, 2, 2], size=(200_000, 3))

        def inside(bx, p):
            lo = np.array(bx.min_corner)
            hi = np.array(bx.max_corner)
            return np.all((p >= lo) & (p <= hi), axis=1)

        in_a, in_b = inside(a, pts), inside(b, pts)
        estimate = np.sum(in_a & in_b) / np.sum(in_a | in_b)
        # ~3 sigma for the ratio estimator at this sample size
        assert estimate == pytest.approx(iou(a, b), abs=4e-3)

    def test_degenerate_operand_gives_zero(self):
        flat = Box3((0.0, 0.0, 0.0), (1.0, 1.0, 0.0))
        assert iou(flat, box(0, 1)) == 0.0
        assert iou(flat, flat) == 0.0

    def test_symmetry_and_range_random(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            a, b = random_box(rng), random_box(rng)
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0
        a = random_box(rng)
        assert iou(a, a) == 1.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            shift = rng.uniform(-50, 50, size=3)
            v1 = iou(a, b)
            v2 = iou(a.translate(shift), b.translate(shift))
            assert v2 == pytest.approx(v1, rel=1e-12, abs=1e-15)


class TestBoxValidation:
    def test_inverted_corner_rejected(self):
        with pytest.raises(ValueError):
            Box3((1.0, 0.0, 0.0), (0.0, 1.0, 1.0))

    def test_from_corners_normalizes(self):
        b = Box3.from_corners([3, 1, 0, 1, 0, 2])
        assert b.min_corner == (1.0, 0.0, 0.0)
        assert b.max_corner == (3.0, 1.0, 2.0)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            Box3((0.0, 0.0, float("nan")), (1.0, 1.0, 1.0))


class TestNms:
    def test_empty_input(self):
        assert nms_filter([], 0.22) == []

    def test_identical_boxes_keep_highest(self):
        b = box(0, 10)
        out = nms_filter([cand(b, 0.9), cand(b, 0.8)], 0.22)
        assert len(out) == 1
        assert out[0].confidence == 0.9

    def test_disjoint_boxes_all_survive(self):
        boxes = [cand(box(20 * i, 20 * i + 5), 0.5 + 0.1 * i) for i in range(3)]
        out = nms_filter(boxes, 0.22)
        assert len(out) == 3

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            nms_filter([], 1.5)

    def _random_candidates(self, rng, n=30):
        return [cand(random_box(rng, span=40.0), float(rng.uniform(0, 1))) for _ in range(n)]

    def test_no_surviving_pair_overlaps(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            out = nms_filter(self._random_candidates(rng), 0.3)
            for i in range(len(out)):
                for j in range(i + 1, len(out)):
                    assert iou(out[i].box, out[j].box) <= 0.3

    def test_idempotent_and_subset(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            boxes = self._random_candidates(rng)
            once = nms_filter(boxes, 0.22)
            assert nms_filter(once, 0.22) == once
            assert all(c in boxes for c in once)

    def test_output_sorted_by_confidence(self):
        rng = np.random.default_rng(7)
        out = nms_filter(self._random_candidates(rng), 0.22)
        confs = [c.confidence for c in out]
        assert confs == sorted(confs, reverse=True)

    def test_tie_break_is_deterministic(self):
        a = cand(box(0, 10), 0.5)
        b = cand(box(1, 11), 0.5)  # IoU with a is high, same confidence
        out1 = nms_filter([a, b], 0.1)
        out2 = nms_filter([b, a], 0.1)
        assert out1 == out2 == [a]
