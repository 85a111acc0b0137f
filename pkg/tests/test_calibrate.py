import numpy as np
import pytest

from confdet.calibrate import (
    Strategy,
    calibrate_crc,
    calibrate_froc,
    calibrate_naive,
    evaluate,
)
from confdet.detections import Dataset, ScanRecord
from confdet.risk import LAMBDA_ABOVE_ALL, fnr_loss, prediction_set
from confdet.pairing import count_outcomes

from conftest import box, cand, nodule, random_dataset


def crc_grid_oracle(dataset: Dataset, alpha: float):
    """Exhaustive scan of the corrected inequality over the full grid,
    recomputing every per-scan loss from scratch."""
    confs = sorted({c.confidence for s in dataset.scans for c in s.candidates})
    grid = [0.0] + [c for c in confs if c > 0.0] + [LAMBDA_ABOVE_ALL]
    n = len(dataset.scans)
    best = None
    for lam in grid:
        risk = np.mean([fnr_loss(s, lam) for s in dataset.scans])
        if risk * (n / (n + 1)) + 1.0 / (n + 1) <= alpha:
            best = lam
    return best


def froc_grid_oracle(dataset: Dataset, target: float):
    """Enumerate the grid, recompute pooled sensitivity per point."""
    confs = sorted({c.confidence for s in dataset.scans for c in s.candidates})
    grid = [0.0] + [c for c in confs if c > 0.0] + [LAMBDA_ABOVE_ALL]
    best = None
    for lam in grid:
        tp_total, truth_total = 0, 0
        for s in dataset.scans:
            tp, _, fn = count_outcomes(s.ground_truth, prediction_set(s, lam).members)
            tp_total += tp
            truth_total += tp + fn
        sens = tp_total / truth_total if truth_total else 1.0
        if sens >= target:
            best = lam
    return best


def one_nodule_scan(conf, scan_id="s"):
    return ScanRecord(scan_id, (cand(box(1, 11), conf),), (nodule(box(0, 10)),))


class TestNaive:
    def test_default_half(self):
        assert calibrate_naive().lambda_hat == 0.5

    def test_alternative_point_nine(self):
        assert calibrate_naive(0.9).lambda_hat == 0.9

    def test_zero_keeps_everything_downstream(self):
        result = calibrate_naive(0.0)
        scan = one_nodule_scan(0.01)
        assert len(prediction_set(scan, result.lambda_hat).members) == 1

    def test_ignores_data_entirely(self):
        assert calibrate_naive(0.5) == calibrate_naive(0.5)
        assert calibrate_naive(0.5).n == 0

    def test_range_check(self):
        with pytest.raises(ValueError):
            calibrate_naive(1.2)


class TestFroc:
    def test_perfectly_confident_detector(self):
        d = Dataset(tuple(one_nodule_scan(1.0, f"s{i}") for i in range(5)))
        result = calibrate_froc(d, 0.9)
        assert result.lambda_hat == 1.0  # largest grid value with full sensitivity
        assert not result.infeasible

    def test_ten_nodules_detectable_at_point_four(self):
        # 9 nodules pairable only at thresholds <= 0.4, the 10th only at <= 0.2,
        # so 0.4 is exactly the largest grid point with >= 90% pooled sensitivity
        scans = [one_nodule_scan(0.4, f"a{i}") for i in range(9)]
        scans.append(one_nodule_scan(0.2, "b"))
        d = Dataset(tuple(scans))
        result = calibrate_froc(d, 0.9)
        assert result.lambda_hat == 0.4
        assert result.lambda_hat == froc_grid_oracle(d, 0.9)

    def test_unpairable_truth_forces_fallback(self):
        scan = ScanRecord("s", (cand(box(100, 110), 0.9),), (nodule(box(0, 10)),))
        result = calibrate_froc(Dataset((scan,)), 1.0)
        assert result.lambda_hat == 0.0
        assert result.infeasible

    def test_matches_grid_oracle_randomly(self):
        rng = np.random.default_rng(41)
        for _ in range(25):
            d = random_dataset(rng, int(rng.integers(2, 8)), max_candidates=12)
            target = float(rng.uniform(0.3, 1.0))
            oracle = froc_grid_oracle(d, target)
            result = calibrate_froc(d, target)
            if oracle is None:
                assert result.infeasible and result.lambda_hat == 0.0
            else:
                assert result.lambda_hat == oracle


class TestCrc:
    def test_boundary_of_correction_nine_scans(self):
        # all losses 0 up to 0.7; at n=9 the corrected bound is exactly 0.1
        d = Dataset(tuple(one_nodule_scan(0.7, f"s{i}") for i in range(9)))
        result = calibrate_crc(d, 0.1)
        assert result.lambda_hat == 0.7
        assert result.achieved_calibration_risk == 0.0
        assert not result.infeasible

    def test_single_scan_infeasible(self):
        d = Dataset((one_nodule_scan(0.7),))
        result = calibrate_crc(d, 0.1)
        assert result.infeasible
        assert result.lambda_hat == 0.0

    def test_alpha_validation(self):
        d = Dataset((one_nodule_scan(0.7),))
        with pytest.raises(ValueError):
            calibrate_crc(d, 0.0)
        with pytest.raises(ValueError):
            calibrate_crc(d, 1.0)

    def test_matches_grid_oracle_randomly(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            d = random_dataset(rng, int(rng.integers(2, 21)), max_candidates=12)
            alpha = float(rng.uniform(0.05, 0.5))
            oracle = crc_grid_oracle(d, alpha)
            result = calibrate_crc(d, alpha)
            if oracle is None:
                assert result.infeasible and result.lambda_hat == 0.0
            else:
                assert result.lambda_hat == oracle

    def test_correction_only_shrinks_feasible_set(self):
        rng = np.random.default_rng(43)
        for _ in range(20):
            d = random_dataset(rng, int(rng.integers(3, 15)), max_candidates=10)
            alpha = float(rng.uniform(0.1, 0.6))
            result = calibrate_crc(d, alpha)
            if result.infeasible:
                continue
            # largest lambda with *uncorrected* risk <= alpha
            confs = sorted({c.confidence for s in d.scans for c in s.candidates})
            grid = [0.0] + [c for c in confs if c > 0.0] + [LAMBDA_ABOVE_ALL]
            uncorrected = max(
                lam for lam in grid
                if np.mean([fnr_loss(s, lam) for s in d.scans]) <= alpha
            )
            assert result.lambda_hat <= uncorrected

    def test_deterministic(self):
        d = random_dataset(np.random.default_rng(44), 10)
        assert calibrate_crc(d, 0.2) == calibrate_crc(d, 0.2)


class TestEvaluate:
    def test_zero_threshold_full_sensitivity_on_clean_data(self):
        from confdet.synth import GeneratorConfig, generate
        d = generate(GeneratorConfig(n_scans=10, seed=51))
        report = evaluate(calibrate_naive(0.0), d)
        assert report.sensitivity == 1.0
        assert report.efficiency == np.mean([len(s.candidates) for s in d.scans])

    def test_threshold_above_everything(self):
        d = Dataset((one_nodule_scan(0.8),))
        report = evaluate(calibrate_naive(0.9), d)
        assert report.sensitivity == 0.0
        assert report.fp_per_scan == 0.0

    def test_sensitivity_matches_independent_recomputation(self):
        rng = np.random.default_rng(52)
        d = random_dataset(rng, 9)
        report = evaluate(calibrate_naive(0.35), d)
        per_scan = []
        for s in d.scans:
            tp, _, fn = count_outcomes(s.ground_truth, prediction_set(s, 0.35).members)
            per_scan.append(tp / (tp + fn) if tp + fn else 1.0)
        assert report.sensitivity == pytest.approx(np.mean(per_scan), abs=1e-15)

    def test_carries_infeasibility_flag(self):
        d = Dataset((one_nodule_scan(0.8, "a"), one_nodule_scan(0.9, "b")))
        result = calibrate_crc(d, 0.05)  # floor is 1/3
        assert result.infeasible
        assert evaluate(result, d).infeasibility_flag
