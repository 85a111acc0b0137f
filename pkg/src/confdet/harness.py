"""Experiment driver: repeated random splits, strategy comparison, and CSV
emission (per-trial rows, summary means, normalized histograms, FROC curves).

Per-scan outcomes are step functions of the threshold, so each dataset is
tabulated once into a scans-by-grid matrix (:class:`ScanTable`) and every
split/calibration/evaluation afterwards is pure array indexing. The tabulated
trial path produces exactly the same thresholds and metrics as calling
``calibrate_*``/``evaluate`` per trial (the per-trial grid is a subset of the
global grid and both share the per-scan step values), which is what makes
R=10,000-split runs affordable.

Per-trial seeds are derived as SeedSequence([base_seed, dataset_index,
repetition]), so any single trial can be reproduced in isolation and results
do not depend on worker count or completion order.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .calibrate import CalibrationResult, Strategy, TrialReport, calibrate_crc, calibrate_froc, calibrate_naive
from .detections import Dataset, apply_nms, filter_consensus, load_dataset, split_dataset, split_indices
from .risk import LAMBDA_ABOVE_ALL, scan_steps, threshold_grid
from .synth import GeneratorConfig, generate

__all__ = [
    "StrategySpec",
    "DatasetSpec",
    "ExperimentPlan",
    "ScanTable",
    "SummaryRow",
    "HistogramRow",
    "SummaryTable",
    "TrialFailure",
    "trial_seed",
    "run_trial",
    "run_experiment",
    "emit_curve",
]

logger = logging.getLogger(__name__)

TRIAL_CSV_HEADER = "dataset,strategy,rep,lambda_hat,sensitivity,precision,efficiency,fn,fp,infeasible"
SUMMARY_CSV_HEADER = "dataset,strategy,sensitivity,precision,efficiency,fn,fp"
HISTOGRAM_CSV_HEADER = "dataset,strategy,metric,bin_left,bin_right,height"
CURVE_CSV_HEADER = "lambda,sensitivity_prc,fp_froc"
MARKER_CSV_HEADER = "strategy,lambda_hat,sensitivity_prc,fp_froc"

_HISTOGRAM_METRICS = ("sensitivity", "precision", "efficiency", "fn", "fp")


@dataclass(frozen=True)
class StrategySpec:
    """A strategy plus its parameters; ``label`` names it in output rows."""

    kind: Strategy
    fixed_lambda: float = 0.5
    target_sensitivity: float = 0.9
    alpha: float = 0.1
    label: str = ""

    def name(self) -> str:
        return self.label or self.kind.value

    def calibrate(self, calibration: Dataset) -> CalibrationResult:
        if self.kind is Strategy.NAIVE:
            return calibrate_naive(self.fixed_lambda)
        if self.kind is Strategy.FROC:
            return calibrate_froc(calibration, self.target_sensitivity)
        return calibrate_crc(calibration, self.alpha)

    @classmethod
    def from_dict(cls, raw: dict) -> "StrategySpec":
        raw = dict(raw)
        name = raw.pop("name", None)
        if name not in (s.value for s in Strategy):
            raise ValueError(f"unknown strategy {name!r} (expected one of naive/froc/crc)")
        kind = Strategy(name)
        allowed = {"fixed_lambda", "target_sensitivity", "alpha", "label"}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown strategy key(s) for {name}: {sorted(unknown)}")
        return cls(kind, **raw)


@dataclass(frozen=True)
class DatasetSpec:
    """A named dataset source: a record file path or a generator config.
    Optional ingest transforms: consensus filtering and NMS."""

    name: str
    path: str | None = None
    generator: GeneratorConfig | None = None
    consensus_r: int | None = None
    nms_threshold: float | None = None

    def __post_init__(self) -> None:
        if (self.path is None) == (self.generator is None):
            raise ValueError(f"dataset {self.name!r} needs exactly one of path/generator")

    def realize(self) -> Dataset:
        if self.path is not None:
            ds = load_dataset(self.path, nms_threshold=self.nms_threshold)
        else:
            ds = generate(self.generator)  # type: ignore[arg-type]
            if self.nms_threshold is not None:
                ds = apply_nms(ds, self.nms_threshold)
        if self.consensus_r is not None:
            ds = filter_consensus(ds, self.consensus_r)
        return ds

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetSpec":
        raw = dict(raw)
        gen = raw.pop("generator", None)
        if gen is not None:
            gen = GeneratorConfig.from_dict(gen)
        allowed = {"name", "path", "consensus_r", "nms_threshold"}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown dataset key(s): {sorted(unknown)}")
        return cls(generator=gen, **raw)


@dataclass(frozen=True)
class ExperimentPlan:
    datasets: tuple[DatasetSpec, ...]
    strategies: tuple[StrategySpec, ...]
    repetitions: int = 1000
    base_seed: int = 0
    output_dir: str = "out"
    histogram_bins: int = 40
    workers: int = 1

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        if not self.datasets:
            raise ValueError("at least one dataset is required")
        if self.histogram_bins < 1:
            raise ValueError("histogram_bins must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError("dataset names must be unique")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentPlan":
        raw = dict(raw)
        datasets = tuple(DatasetSpec.from_dict(d) for d in raw.pop("datasets", []))
        strategies = tuple(StrategySpec.from_dict(s) for s in raw.pop("strategies", []))
        allowed = {"repetitions", "base_seed", "output_dir", "histogram_bins", "workers"}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown plan key(s): {sorted(unknown)}")
        return cls(datasets=datasets, strategies=strategies, **raw)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentPlan":
        with Path(path).open("r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class ScanTable:
    """A dataset tabulated on its global threshold grid.

    Row i holds scan i's step values (tp/fp/fn/set size/loss) at every grid
    threshold; any split of the dataset is then a row selection and any
    calibration rule a column search.
    """

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.grid = threshold_grid(dataset)
        steps = [scan_steps(s) for s in dataset.scans]
        cols = [st.at(self.grid) for st in steps]
        self.tp = np.stack([st.tp[c] for st, c in zip(steps, cols)])
        self.fp = np.stack([st.fp[c] for st, c in zip(steps, cols)])
        self.fn = np.stack([st.fn[c] for st, c in zip(steps, cols)])
        self.set_size = np.stack([st.set_size[c] for st, c in zip(steps, cols)])
        self.loss = np.stack([st.loss[c] for st, c in zip(steps, cols)])

    def __len__(self) -> int:
        return len(self.dataset.scans)

    def column(self, threshold: float) -> int:
        """Grid column whose step values apply at ``threshold``."""
        if threshold > LAMBDA_ABOVE_ALL:
            return len(self.grid) - 1
        return int(np.searchsorted(self.grid, threshold, side="left"))

    def calibrate(self, spec: StrategySpec, rows: np.ndarray) -> CalibrationResult:
        """Same selections as the calibrate module, restricted to ``rows``."""
        n = len(rows)
        if spec.kind is Strategy.NAIVE:
            return calibrate_naive(spec.fixed_lambda)
        if spec.kind is Strategy.FROC:
            tp = self.tp[rows].sum(axis=0)
            pooled = tp + self.fn[rows].sum(axis=0)
            sens = np.ones(len(self.grid))
            np.divide(tp, pooled, out=sens, where=pooled > 0)
            feasible = np.nonzero(sens >= spec.target_sensitivity)[0]
            risk = self.loss[rows].mean(axis=0)
            if feasible.size == 0:
                return CalibrationResult(
                    Strategy.FROC, 0.0, n, target_sensitivity=spec.target_sensitivity,
                    achieved_calibration_risk=float(risk[0]), infeasible=True,
                )
            idx = int(feasible[-1])
            return CalibrationResult(
                Strategy.FROC, float(self.grid[idx]), n,
                target_sensitivity=spec.target_sensitivity,
                achieved_calibration_risk=float(risk[idx]),
            )
        risk = self.loss[rows].mean(axis=0)
        corrected = risk * (n / (n + 1)) + 1.0 / (n + 1)
        feasible = np.nonzero(corrected <= spec.alpha)[0]
        if feasible.size == 0:
            return CalibrationResult(
                Strategy.CRC, 0.0, n, alpha=spec.alpha,
                achieved_calibration_risk=float(risk[0]), infeasible=True,
            )
        idx = int(feasible[-1])
        return CalibrationResult(
            Strategy.CRC, float(self.grid[idx]), n, alpha=spec.alpha,
            achieved_calibration_risk=float(risk[idx]),
        )

    def evaluate(self, result: CalibrationResult, rows: np.ndarray) -> TrialReport:
        """Same metrics as ``calibrate.evaluate``, restricted to ``rows``."""
        col = self.column(result.lambda_hat)
        tp = self.tp[rows, col].astype(float)
        fp = self.fp[rows, col].astype(float)
        fn = self.fn[rows, col].astype(float)
        size = self.set_size[rows, col].astype(float)
        truth = tp + fn
        sens = np.ones_like(tp)
        np.divide(tp, truth, out=sens, where=truth > 0)
        claimed = tp + fp
        prec = np.ones_like(tp)
        np.divide(tp, claimed, out=prec, where=claimed > 0)
        return TrialReport(
            dataset_name="",
            strategy=result.strategy.value,
            repetition_index=0,
            lambda_hat=result.lambda_hat,
            sensitivity=float(sens.mean()),
            precision=float(prec.mean()),
            efficiency=float(size.mean()),
            fn_per_scan=float(fn.mean()),
            fp_per_scan=float(fp.mean()),
            infeasibility_flag=result.infeasible,
        )


@dataclass(frozen=True)
class TrialFailure:
    dataset_name: str
    strategy: str
    repetition_index: int
    error: str


@dataclass(frozen=True)
class SummaryRow:
    dataset: str
    strategy: str
    trials: int
    sensitivity: float
    precision: float
    efficiency: float
    fn: float
    fp: float


@dataclass(frozen=True)
class HistogramRow:
    dataset: str
    strategy: str
    metric: str
    bin_left: float
    bin_right: float
    height: float


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple[SummaryRow, ...]
    histograms: tuple[HistogramRow, ...]
    trial_reports: tuple[TrialReport, ...]
    failures: tuple[TrialFailure, ...] = field(default=())


def trial_seed(base_seed: int, dataset_index: int, repetition: int) -> int:
    """Deterministic per-trial split seed; independent of execution order."""
    seq = np.random.SeedSequence([int(base_seed), int(dataset_index), int(repetition)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def run_trial(
    table: ScanTable,
    strategies: Sequence[StrategySpec],
    dataset_name: str,
    dataset_index: int,
    repetition: int,
    base_seed: int,
) -> tuple[list[TrialReport], list[TrialFailure]]:
    """Calibrate and evaluate every strategy on one random split."""
    seed = trial_seed(base_seed, dataset_index, repetition)
    cal_rows, test_rows = split_indices(len(table), seed)
    reports, failures = [], []
    for spec in strategies:
        try:
            result = table.calibrate(spec, cal_rows)
            report = table.evaluate(result, test_rows)
            reports.append(
                TrialReport(
                    dataset_name=dataset_name,
                    strategy=spec.name(),
                    repetition_index=repetition,
                    lambda_hat=report.lambda_hat,
                    sensitivity=report.sensitivity,
                    precision=report.precision,
                    efficiency=report.efficiency,
                    fn_per_scan=report.fn_per_scan,
                    fp_per_scan=report.fp_per_scan,
                    infeasibility_flag=report.infeasibility_flag,
                )
            )
        except Exception as exc:  # record-and-continue: one bad split must not kill the run
            logger.exception("trial failed: dataset=%s strategy=%s rep=%d", dataset_name, spec.name(), repetition)
            failures.append(TrialFailure(dataset_name, spec.name(), repetition, repr(exc)))
    return reports, failures


def _format_trial(r: TrialReport) -> str:
    return (
        f"{r.dataset_name},{r.strategy},{r.repetition_index},{r.lambda_hat:.6f},"
        f"{r.sensitivity:.6f},{r.precision:.6f},{r.efficiency:.6f},"
        f"{r.fn_per_scan:.6f},{r.fp_per_scan:.6f},{int(r.infeasibility_flag)}"
    )


def _histogram(values: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return counts / len(values), edges


def _summarize(
    plan: ExperimentPlan,
    reports: Sequence[TrialReport],
    failures: Sequence[TrialFailure],
) -> SummaryTable:
    rows, hist_rows = [], []
    for ds in plan.datasets:
        for spec in plan.strategies:
            group = [r for r in reports if r.dataset_name == ds.name and r.strategy == spec.name()]
            if not group:
                continue
            metrics = {
                "sensitivity": np.array([r.sensitivity for r in group]),
                "precision": np.array([r.precision for r in group]),
                "efficiency": np.array([r.efficiency for r in group]),
                "fn": np.array([r.fn_per_scan for r in group]),
                "fp": np.array([r.fp_per_scan for r in group]),
            }
            rows.append(
                SummaryRow(
                    ds.name, spec.name(), len(group),
                    *(float(metrics[m].mean()) for m in _HISTOGRAM_METRICS),
                )
            )
            for metric in _HISTOGRAM_METRICS:
                heights, edges = _histogram(metrics[metric], plan.histogram_bins)
                hist_rows.extend(
                    HistogramRow(ds.name, spec.name(), metric, float(edges[k]), float(edges[k + 1]), float(h))
                    for k, h in enumerate(heights)
                )
    return SummaryTable(tuple(rows), tuple(hist_rows), tuple(reports), tuple(failures))


def run_experiment(plan: ExperimentPlan) -> SummaryTable:
    """Execute the full plan and write trials/summary/histogram CSVs.

    Output bytes are a pure function of the plan: trials are seeded by
    coordinate and emitted sorted, so worker count cannot affect any file.
    """
    out_dir = Path(plan.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    all_reports: list[TrialReport] = []
    all_failures: list[TrialFailure] = []
    for ds_index, ds_spec in enumerate(plan.datasets):
        dataset = ds_spec.realize()
        if len(dataset.scans) < 2:
            raise ValueError(f"dataset {ds_spec.name!r} has fewer than 2 scans; cannot split")
        table = ScanTable(dataset)
        logger.info("dataset %s: %d scans, grid size %d", ds_spec.name, len(table), len(table.grid))

        def job(rep: int):
            return run_trial(table, plan.strategies, ds_spec.name, ds_index, rep, plan.base_seed)

        if plan.workers == 1:
            outcomes = [job(rep) for rep in range(plan.repetitions)]
        else:
            with ThreadPoolExecutor(max_workers=plan.workers) as pool:
                outcomes = list(pool.map(job, range(plan.repetitions)))
        for reports, failures in outcomes:
            all_reports.extend(reports)
            all_failures.extend(failures)

    strategy_order = {spec.name(): i for i, spec in enumerate(plan.strategies)}
    dataset_order = {ds.name: i for i, ds in enumerate(plan.datasets)}
    all_reports.sort(
        key=lambda r: (dataset_order[r.dataset_name], strategy_order[r.strategy], r.repetition_index)
    )

    summary = _summarize(plan, all_reports, all_failures)

    with (out_dir / "trials.csv").open("w", encoding="utf-8") as fh:
        fh.write(TRIAL_CSV_HEADER + "\n")
        for r in all_reports:
            fh.write(_format_trial(r) + "\n")
    with (out_dir / "summary.csv").open("w", encoding="utf-8") as fh:
        fh.write(SUMMARY_CSV_HEADER + "\n")
        for row in summary.rows:
            fh.write(
                f"{row.dataset},{row.strategy},{row.sensitivity:.6f},{row.precision:.6f},"
                f"{row.efficiency:.6f},{row.fn:.6f},{row.fp:.6f}\n"
            )
    with (out_dir / "histograms.csv").open("w", encoding="utf-8") as fh:
        fh.write(HISTOGRAM_CSV_HEADER + "\n")
        for h in summary.histograms:
            fh.write(
                f"{h.dataset},{h.strategy},{h.metric},{h.bin_left:.6f},{h.bin_right:.6f},{h.height:.6f}\n"
            )
    if all_failures:
        with (out_dir / "failures.csv").open("w", encoding="utf-8") as fh:
            fh.write("dataset,strategy,rep,error\n")
            for f in all_failures:
                fh.write(f"{f.dataset_name},{f.strategy},{f.repetition_index},{f.error}\n")
    return summary


def emit_curve(
    dataset: Dataset,
    seed: int,
    out_path: str | Path,
    strategies: Sequence[StrategySpec] = (
        StrategySpec(Strategy.NAIVE),
        StrategySpec(Strategy.FROC),
        StrategySpec(Strategy.CRC),
    ),
    markers_path: str | Path | None = None,
) -> Path:
    """One split; write (threshold, test sensitivity, test FP/scan) rows over
    the calibration grid, plus a companion marker file with each strategy's
    calibrated threshold. Returns the marker file path."""
    calibration, test = split_dataset(dataset, seed)
    grid = threshold_grid(calibration)
    test_table = ScanTable(test)
    out_path = Path(out_path)
    markers_path = Path(markers_path) if markers_path else out_path.with_name(out_path.stem + "_markers.csv")

    with out_path.open("w", encoding="utf-8") as fh:
        fh.write(CURVE_CSV_HEADER + "\n")
        for lam in grid:
            m = test_table.evaluate(CalibrationResult(Strategy.NAIVE, float(lam), 0), np.arange(len(test_table)))
            fh.write(f"{lam:.6f},{m.sensitivity:.6f},{m.fp_per_scan:.6f}\n")

    with markers_path.open("w", encoding="utf-8") as fh:
        fh.write(MARKER_CSV_HEADER + "\n")
        for spec in strategies:
            result = spec.calibrate(calibration)
            m = test_table.evaluate(result, np.arange(len(test_table)))
            fh.write(f"{spec.name()},{result.lambda_hat:.6f},{m.sensitivity:.6f},{m.fp_per_scan:.6f}\n")
    return markers_path
