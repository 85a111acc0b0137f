"""Threshold selection strategies: naive fixed threshold, FROC-style target
sensitivity, and conformal risk control (CRC).

CRC picks the largest grid threshold whose finite-sample-corrected empirical
risk stays at or below the target level alpha:

    n/(n+1) * risk(t) + 1/(n+1) <= alpha

where n is the number of calibration scans. Because the FNR loss is
non-decreasing in the threshold, the feasible region is an interval starting
at 0 and the largest feasible grid point attains its supremum. Under
exchangeability of calibration and future scans this choice controls the
expected per-scan FNR of a new scan at level alpha.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np

from .detections import Dataset
from .risk import aggregate_metrics, risk_curve, scan_steps, threshold_grid

__all__ = [
    "Strategy",
    "CalibrationResult",
    "TrialReport",
    "calibrate_naive",
    "calibrate_froc",
    "calibrate_crc",
    "evaluate",
]

logger = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    NAIVE = "naive"
    FROC = "froc"
    CRC = "crc"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class CalibrationResult:
    """A selected threshold plus how it was chosen.

    ``infeasible`` is set when the strategy could not meet its target on the
    calibration data (CRC: no grid point satisfies the corrected bound, which
    is certain when alpha < 1/(n+1); FROC: even the full candidate list misses
    the target sensitivity). In both cases ``lambda_hat`` falls back to 0.
    """

    strategy: Strategy
    lambda_hat: float
    n: int
    alpha: float | None = None
    target_sensitivity: float | None = None
    achieved_calibration_risk: float | None = None
    infeasible: bool = False


@dataclass(frozen=True)
class TrialReport:
    """Test-set metrics of one calibrated threshold, one row of the trial CSV."""

    dataset_name: str
    strategy: str
    repetition_index: int
    lambda_hat: float
    sensitivity: float
    precision: float
    efficiency: float
    fn_per_scan: float
    fp_per_scan: float
    infeasibility_flag: bool

    def with_coordinates(self, dataset_name: str, repetition_index: int) -> "TrialReport":
        return replace(self, dataset_name=dataset_name, repetition_index=repetition_index)


def calibrate_naive(fixed_lambda: float = 0.5) -> CalibrationResult:
    """Return a fixed threshold, consulting no data (factory-settings baseline)."""
    if not 0.0 <= fixed_lambda <= 1.0:
        raise ValueError(f"fixed_lambda must be in [0, 1], got {fixed_lambda}")
    return CalibrationResult(Strategy.NAIVE, float(fixed_lambda), n=0)


def calibrate_froc(calibration: Dataset, target_sensitivity: float = 0.9) -> CalibrationResult:
    """Largest grid threshold whose pooled-nodule sensitivity on the
    calibration set still meets ``target_sensitivity``.

    Pooled sensitivity weights every nodule equally (scans with many nodules
    dominate), which is the conventional operating-point rule. If even the
    full candidate list misses the target, the result is threshold 0 with the
    infeasible flag set.
    """
    if not 0.0 < target_sensitivity <= 1.0:
        raise ValueError(f"target_sensitivity must be in (0, 1], got {target_sensitivity}")
    if not calibration.scans:
        raise ValueError("calibration dataset is empty")
    grid = threshold_grid(calibration)
    steps = [scan_steps(s) for s in calibration.scans]
    cols = [st.at(grid) for st in steps]
    tp = np.stack([st.tp[c] for st, c in zip(steps, cols)]).sum(axis=0)
    fn = np.stack([st.fn[c] for st, c in zip(steps, cols)]).sum(axis=0)
    pooled = tp + fn
    sens = np.ones(len(grid))
    np.divide(tp, pooled, out=sens, where=pooled > 0)
    feasible = np.nonzero(sens >= target_sensitivity)[0]
    risk = np.stack([st.loss[c] for st, c in zip(steps, cols)]).mean(axis=0)
    n = len(calibration.scans)
    if feasible.size == 0:
        logger.warning(
            "FROC target %.3f unreachable even at threshold 0 "
            "(unpairable ground truth present); falling back to 0",
            target_sensitivity,
        )
        return CalibrationResult(
            Strategy.FROC, 0.0, n,
            target_sensitivity=target_sensitivity,
            achieved_calibration_risk=float(risk[0]),
            infeasible=True,
        )
    idx = int(feasible[-1])
    return CalibrationResult(
        Strategy.FROC, float(grid[idx]), n,
        target_sensitivity=target_sensitivity,
        achieved_calibration_risk=float(risk[idx]),
    )


def calibrate_crc(calibration: Dataset, alpha: float) -> CalibrationResult:
    """Conformal risk control at level ``alpha`` over the calibration grid.

    Feasibility requires alpha >= 1/(n+1) even at zero empirical risk; with a
    single calibration scan and alpha 0.1 the correction term alone is 1/2, so
    the guarantee is vacuous and the result is flagged infeasible.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    curve = risk_curve(calibration)
    n = curve.n
    corrected = curve.empirical_risk * (n / (n + 1)) + 1.0 / (n + 1)
    feasible = np.nonzero(corrected <= alpha)[0]
    if feasible.size == 0:
        if alpha < 1.0 / (n + 1):
            logger.warning(
                "CRC infeasible: alpha=%.4g is below the finite-sample floor 1/(n+1)=%.4g (n=%d)",
                alpha, 1.0 / (n + 1), n,
            )
        else:
            logger.warning("CRC infeasible at alpha=%.4g: empirical risk too high at every threshold", alpha)
        return CalibrationResult(
            Strategy.CRC, 0.0, n, alpha=alpha,
            achieved_calibration_risk=float(curve.empirical_risk[0]),
            infeasible=True,
        )
    idx = int(feasible[-1])
    return CalibrationResult(
        Strategy.CRC, float(curve.grid[idx]), n, alpha=alpha,
        achieved_calibration_risk=float(curve.empirical_risk[idx]),
    )


def evaluate(strategy_result: CalibrationResult, test: Dataset) -> TrialReport:
    """Score a calibrated threshold on held-out scans.

    Sensitivity and precision are per-scan averages (every scan weighted
    equally); efficiency is the mean prediction-set size.
    """
    if not test.scans:
        raise ValueError("test dataset is empty")
    m = aggregate_metrics(test, strategy_result.lambda_hat)
    return TrialReport(
        dataset_name="",
        strategy=strategy_result.strategy.value,
        repetition_index=0,
        lambda_hat=strategy_result.lambda_hat,
        sensitivity=m.sensitivity_prc,
        precision=m.precision_prc,
        efficiency=m.efficiency,
        fn_per_scan=m.fn_per_scan,
        fp_per_scan=m.false_positives_froc,
        infeasibility_flag=strategy_result.infeasible,
    )
