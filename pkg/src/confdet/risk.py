"""Prediction sets, the per-scan false-negative-rate loss, aggregate
FROC/PRC metrics, and the empirical risk curve over the threshold grid.

A prediction set at threshold t keeps every candidate with confidence >= t,
so per-scan outcomes are step functions of t that change just above each
candidate confidence. The grid of distinct confidences, augmented with 0 and
a sentinel one ulp above 1, therefore indexes every achievable operating
point; ``LAMBDA_ABOVE_ALL`` is the "select nothing" end of the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .detections import CandidateBox, Dataset, ScanRecord
from .pairing import _match_count, _preference_lists, count_outcomes

__all__ = [
    "LAMBDA_ABOVE_ALL",
    "PredictionSet",
    "ScanMetrics",
    "RiskCurve",
    "AggregateMetrics",
    "prediction_set",
    "fnr_loss",
    "scan_metrics",
    "risk_curve",
    "aggregate_metrics",
    "threshold_grid",
    "ScanSteps",
    "scan_steps",
]

# One ulp above 1.0: a threshold no confidence can reach, so the empty
# prediction set is representable on the grid for every dataset.
LAMBDA_ABOVE_ALL = float(np.nextafter(1.0, 2.0))


def _check_threshold(threshold: float) -> float:
    t = float(threshold)
    if not 0.0 <= t <= LAMBDA_ABOVE_ALL:
        raise ValueError(f"threshold must be in [0, 1] (sentinel allowed), got {threshold}")
    return t


@dataclass(frozen=True)
class PredictionSet:
    """The candidates of one scan with confidence >= threshold, order-preserving."""

    scan_id: str
    threshold: float
    members: tuple[CandidateBox, ...]


@dataclass(frozen=True)
class ScanMetrics:
    """Per-scan outcome counts at a fixed threshold."""

    tp: int
    fp: int
    fn: int
    fnr_loss: float
    set_size: int


@dataclass(frozen=True)
class RiskCurve:
    """Empirical risk (mean per-scan FNR loss) at each grid threshold.

    ``grid`` is ascending and ``empirical_risk`` is non-decreasing along it,
    because raising the threshold can only shrink prediction sets.
    """

    grid: np.ndarray
    empirical_risk: np.ndarray
    n: int


@dataclass(frozen=True)
class AggregateMetrics:
    """Test-set metrics at a fixed threshold.

    ``sensitivity_froc`` pools nodules across scans; ``sensitivity_prc``
    averages per-scan sensitivities, weighting every scan equally. The two
    differ whenever nodule counts differ across scans.
    """

    sensitivity_froc: float
    sensitivity_prc: float
    precision_prc: float
    false_positives_froc: float
    efficiency: float
    fn_per_scan: float


def prediction_set(scan: ScanRecord, threshold: float) -> PredictionSet:
    """Candidates with confidence >= threshold (inclusive), original order kept."""
    t = _check_threshold(threshold)
    members = tuple(c for c in scan.candidates if c.confidence >= t)
    return PredictionSet(scan.scan_id, t, members)


def scan_metrics(scan: ScanRecord, threshold: float) -> ScanMetrics:
    members = prediction_set(scan, threshold).members
    tp, fp, fn = count_outcomes(scan.ground_truth, members)
    loss = 0.0 if tp + fn == 0 else 1.0 - tp / (tp + fn)
    return ScanMetrics(tp, fp, fn, loss, len(members))


def fnr_loss(scan: ScanRecord, threshold: float) -> float:
    """Fraction of the scan's nodules missing from the prediction set.

    A scan with no ground truth contributes 0 (nothing can be missed), the
    unique choice that keeps the loss monotone in the threshold.
    """
    return scan_metrics(scan, threshold).fnr_loss


@dataclass(frozen=True)
class ScanSteps:
    """One scan's outcome step functions, tabulated at its own breakpoints.

    ``breaks`` is ascending, starting at 0.0 and ending at the sentinel; the
    value at an arbitrary threshold t is the value at the smallest breakpoint
    >= t (outcomes are constant on each left-open interval between
    consecutive candidate confidences).
    """

    breaks: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    set_size: np.ndarray
    loss: np.ndarray

    def at(self, grid: np.ndarray) -> np.ndarray:
        """Column indices into the step arrays for each threshold in ``grid``."""
        return np.searchsorted(self.breaks, grid, side="left")


def scan_steps(scan: ScanRecord) -> ScanSteps:
    """Tabulate TP/FP/FN/set-size/loss at every threshold where they can change."""
    confs = sorted({c.confidence for c in scan.candidates})
    breaks = [0.0] + [c for c in confs if c > 0.0] + [LAMBDA_ABOVE_ALL]
    conf_arr = np.array([c.confidence for c in scan.candidates], dtype=float)
    prefs = _preference_lists(scan.ground_truth, scan.candidates)
    n_truth = len(scan.ground_truth)

    tp_col, size_col = [], []
    for b in breaks:
        kept = [[e for e in lst if e[1] >= b] for lst in prefs]
        tp_col.append(_match_count(kept))
        size_col.append(int(np.count_nonzero(conf_arr >= b)))
    tp = np.array(tp_col, dtype=np.int32)
    size = np.array(size_col, dtype=np.int32)
    fn = np.int32(n_truth) - tp
    fp = size - tp
    if n_truth == 0:
        loss = np.zeros(len(breaks))
    else:
        # tp + fn == n_truth exactly, so this is the same float as fnr_loss computes
        loss = np.array([1.0 - t / n_truth for t in tp_col])
    return ScanSteps(np.array(breaks), tp, fp, fn, size, loss)


def threshold_grid(dataset: Dataset | Iterable[ScanRecord]) -> np.ndarray:
    """Ascending distinct candidate confidences plus 0 and the sentinel."""
    scans = dataset.scans if isinstance(dataset, Dataset) else tuple(dataset)
    confs = [c.confidence for s in scans for c in s.candidates]
    return np.unique(np.array([0.0, LAMBDA_ABOVE_ALL] + confs))


def risk_curve(calibration: Dataset) -> RiskCurve:
    """Empirical FNR risk at every grid threshold of the calibration set."""
    if not calibration.scans:
        raise ValueError("calibration dataset is empty")
    grid = threshold_grid(calibration)
    losses = np.stack([s_steps.loss[s_steps.at(grid)] for s_steps in map(scan_steps, calibration.scans)])
    return RiskCurve(grid, losses.mean(axis=0), len(calibration.scans))


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # 0/0 cases (no truth, or empty prediction set for precision) count as 1.0:
    # nothing was missed / no false claim was made.
    out = np.ones_like(num, dtype=float)
    np.divide(num, den, out=out, where=den > 0)
    return out


def aggregate_metrics(test: Dataset | Sequence[ScanRecord], threshold: float) -> AggregateMetrics:
    """The four FROC/PRC metrics plus efficiency and mean FN at one threshold."""
    scans = test.scans if isinstance(test, Dataset) else tuple(test)
    if not scans:
        raise ValueError("test dataset is empty")
    per = [scan_metrics(s, threshold) for s in scans]
    tp = np.array([m.tp for m in per], dtype=float)
    fp = np.array([m.fp for m in per], dtype=float)
    fn = np.array([m.fn for m in per], dtype=float)
    size = np.array([m.set_size for m in per], dtype=float)

    pooled_truth = tp.sum() + fn.sum()
    sens_froc = float(tp.sum() / pooled_truth) if pooled_truth > 0 else 1.0
    sens_prc = float(_safe_ratio(tp, tp + fn).mean())
    prec_prc = float(_safe_ratio(tp, tp + fp).mean())
    return AggregateMetrics(
        sensitivity_froc=sens_froc,
        sensitivity_prc=sens_prc,
        precision_prc=prec_prc,
        false_positives_froc=float(fp.mean()),
        efficiency=float(size.mean()),
        fn_per_scan=float(fn.mean()),
    )
