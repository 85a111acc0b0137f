"""Risk-calibrated prediction sets for scored 3D detection candidates.

Turn any black-box detector's scored boxes into per-scan prediction sets
whose expected false-negative rate is controlled at a user-chosen level,
compare the conformal rule against fixed-threshold and FROC-style baselines,
and reproduce the comparison on seeded synthetic multi-annotator data.
"""

from .geometry import Box3, DEFAULT_NMS_IOU, iou, nms_filter, volume
from .detections import (
    CandidateBox,
    Dataset,
    DatasetError,
    GroundTruthNodule,
    ParseError,
    ScanRecord,
    ValidationError,
    apply_nms,
    filter_consensus,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .pairing import PairingResult, count_outcomes, pair
from .risk import (
    LAMBDA_ABOVE_ALL,
    AggregateMetrics,
    PredictionSet,
    RiskCurve,
    ScanMetrics,
    aggregate_metrics,
    fnr_loss,
    prediction_set,
    risk_curve,
)
from .calibrate import (
    CalibrationResult,
    Strategy,
    TrialReport,
    calibrate_crc,
    calibrate_froc,
    calibrate_naive,
    evaluate,
)
from .synth import GenerationError, GeneratorConfig, consensus_shift_suite, generate
from .harness import (
    DatasetSpec,
    ExperimentPlan,
    ScanTable,
    StrategySpec,
    SummaryTable,
    emit_curve,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "Box3", "DEFAULT_NMS_IOU", "iou", "nms_filter", "volume",
    "CandidateBox", "Dataset", "DatasetError", "GroundTruthNodule", "ParseError",
    "ScanRecord", "ValidationError", "apply_nms", "filter_consensus",
    "load_dataset", "save_dataset", "split_dataset",
    "PairingResult", "count_outcomes", "pair",
    "LAMBDA_ABOVE_ALL", "AggregateMetrics", "PredictionSet", "RiskCurve",
    "ScanMetrics", "aggregate_metrics", "fnr_loss", "prediction_set", "risk_curve",
    "CalibrationResult", "Strategy", "TrialReport",
    "calibrate_crc", "calibrate_froc", "calibrate_naive", "evaluate",
    "GenerationError", "GeneratorConfig", "consensus_shift_suite", "generate",
    "DatasetSpec", "ExperimentPlan", "ScanTable", "StrategySpec", "SummaryTable",
    "emit_curve", "run_experiment",
    "__version__",
]
