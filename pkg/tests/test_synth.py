import numpy as np
import pytest

from confdet.geometry import iou
from confdet.synth import (
    GenerationError,
    GeneratorConfig,
    consensus_shift_suite,
    generate,
    sample_nodule_attributes,
    _marking_probability,
)


def true_candidate_confidences(dataset):
    """(consensus, confidence) for each nodule's unique overlapping candidate."""
    pairs = []
    for scan in dataset.scans:
        for g in scan.ground_truth:
            overlapping = [c for c in scan.candidates if iou(g.box, c.box) > 0.0]
            assert len(overlapping) == 1
            pairs.append((g.consensus, overlapping[0].confidence))
    return pairs


class TestGenerate:
    def test_empty(self):
        assert generate(GeneratorConfig(n_scans=0)).scans == ()

    def test_deterministic(self):
        cfg = GeneratorConfig(n_scans=15, seed=77)
        assert generate(cfg) == generate(cfg)

    def test_different_seeds_differ(self):
        assert generate(GeneratorConfig(n_scans=5, seed=1)) != generate(GeneratorConfig(n_scans=5, seed=2))

    def test_every_nodule_has_overlapping_candidate(self):
        d = generate(GeneratorConfig(n_scans=40, seed=3))
        for scan in d.scans:
            for g in scan.ground_truth:
                assert any(iou(g.box, c.box) > 0.0 for c in scan.candidates)

    def test_distractors_never_touch_truth(self):
        d = generate(GeneratorConfig(n_scans=40, seed=4))
        for scan in d.scans:
            for g in scan.ground_truth:
                overlapping = sum(iou(g.box, c.box) > 0.0 for c in scan.candidates)
                assert overlapping == 1  # exactly the nodule's own candidate

    def test_no_candidate_overlaps_two_nodules(self):
        d = generate(GeneratorConfig(n_scans=40, seed=5))
        for scan in d.scans:
            for c in scan.candidates:
                assert sum(iou(g.box, c.box) > 0.0 for g in scan.ground_truth) <= 1

    def test_consensus_at_least_one(self):
        d = generate(GeneratorConfig(n_scans=30, seed=6))
        assert all(g.consensus >= 1 for s in d.scans for g in s.ground_truth)

    def test_nodule_counts_respect_range(self):
        cfg = GeneratorConfig(n_scans=50, nodules_per_scan=(2, 5), seed=7)
        counts = [len(s.ground_truth) for s in generate(cfg).scans]
        assert min(counts) >= 2 and max(counts) <= 5

    def test_sharp_detector_limit(self):
        from confdet.synth import _true_confidence
        cfg = GeneratorConfig(detector_sharpness=1e9, confidence_noise_sd=0.0)
        rng = np.random.default_rng(8)
        for s in (0.5001, 0.6, 0.9, 1.0):
            assert _true_confidence(cfg, rng, s) == 1.0
        for s in (0.0, 0.2, 0.4999):
            assert _true_confidence(cfg, rng, s) == 0.0
        # and a full generation stays well-defined at this slope
        d = generate(GeneratorConfig(n_scans=10, detector_sharpness=1e9,
                                     confidence_noise_sd=0.0, distractor_rate=0.0, seed=8))
        assert all(c.confidence in (0.0, 1.0) for s in d.scans for c in s.candidates)

    def test_diameter_floor_enforced(self):
        with pytest.raises(ValueError):
            GeneratorConfig(diameter_range=(1.0, 10.0))

    def test_infeasible_volume(self):
        with pytest.raises(GenerationError):
            GeneratorConfig(volume_bounds=(10.0, 10.0, 10.0), diameter_range=(3.0, 28.0))

    def test_boxes_are_valid_and_inside_volume(self):
        cfg = GeneratorConfig(n_scans=20, seed=9)
        d = generate(cfg)
        for scan in d.scans:
            for g in scan.ground_truth:
                assert all(0.0 <= lo for lo in g.box.min_corner)
                assert all(hi <= b for hi, b in zip(g.box.max_corner, cfg.volume_bounds))


class TestConsensusCoupling:
    def test_mean_consensus_tracks_salience(self):
        cfg = GeneratorConfig(seed=10)
        rng = np.random.default_rng(10)
        samples = [sample_nodule_attributes(cfg, rng) for _ in range(10_000)]
        saliences = np.array([s for s, _ in samples])
        consensus = np.array([k for _, k in samples])
        low, high = saliences < 0.35, saliences > 0.65
        assert consensus[high].mean() > consensus[low].mean() + 0.5

        # closed-form check: E[k | s, k >= 1] for a binomial over the annotators
        n = cfg.n_annotators
        for mask in (low, high):
            p = np.array([_marking_probability(cfg, s) for s in saliences[mask]])
            expected = (n * p / (1.0 - (1.0 - p) ** n)).mean()
            se = consensus[mask].std() / np.sqrt(mask.sum())
            assert consensus[mask].mean() == pytest.approx(expected, abs=4 * se)

    def test_confidence_distribution_dominance_by_consensus(self):
        # lots of nodules, no distractors, so every candidate is a true one
        cfg = GeneratorConfig(
            n_scans=2000, nodules_per_scan=(4, 8), nodule_count_tail=0.5,
            distractor_rate=0.0, seed=11,
        )
        pairs = true_candidate_confidences(generate(cfg))
        conf1 = np.array([c for k, c in pairs if k == 1])
        conf4 = np.array([c for k, c in pairs if k == 4])
        assert len(conf1) > 300 and len(conf4) > 300
        assert conf4.mean() > conf1.mean() + 0.05
        # empirical CDF of consensus-4 confidences sits below consensus-1 everywhere
        xs = np.linspace(0.0, 1.0, 101)
        ecdf1 = np.searchsorted(np.sort(conf1), xs, side="right") / len(conf1)
        ecdf4 = np.searchsorted(np.sort(conf4), xs, side="right") / len(conf4)
        assert np.all(ecdf4 <= ecdf1 + 0.03)


class TestConsensusShiftSuite:
    def test_sizes_non_increasing(self):
        suite = consensus_shift_suite(GeneratorConfig(n_scans=80, seed=12))
        sizes = [len(d.scans) for d in suite]
        assert sizes == sorted(sizes, reverse=True)

    def test_r1_equals_superset(self):
        cfg = GeneratorConfig(n_scans=40, seed=13)
        suite = consensus_shift_suite(cfg)
        assert suite[0] == generate(cfg)

    def test_mean_true_confidence_non_decreasing_in_r(self):
        suite = consensus_shift_suite(GeneratorConfig(n_scans=250, seed=14))
        means = []
        for d in suite:
            confs = [c for _, c in true_candidate_confidences(d)]
            means.append(np.mean(confs))
        assert all(b >= a for a, b in zip(means, means[1:]))
