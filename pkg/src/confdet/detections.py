"""Scan-level data model and line-delimited record ingestion.

A dataset is a sequence of scans; each scan carries the detector's scored
candidate boxes and the annotated ground-truth nodules, where ``consensus``
counts how many annotators marked the nodule. Record files hold one JSON
object per line (UTF-8):

    {"scan_id": "...",
     "candidates": [{"box": [x1,y1,z1,x2,y2,z2], "confidence": 0.87}, ...],
     "ground_truth": [{"box": [...], "consensus": 3}, ...]}

Box corner order is normalized per axis on read, so exporters may emit
corners in any order. All container types are immutable after construction.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .geometry import Box3, iou, nms_filter

__all__ = [
    "CandidateBox",
    "GroundTruthNodule",
    "ScanRecord",
    "Dataset",
    "DatasetError",
    "ParseError",
    "ValidationError",
    "load_dataset",
    "save_dataset",
    "apply_nms",
    "filter_consensus",
    "split_dataset",
    "split_indices",
    "unpairable_truth",
]

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Base class for record-file problems."""


class ParseError(DatasetError):
    """A line could not be parsed as a record; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(DatasetError):
    """A parsed record violates the data model; names the scan and field."""

    def __init__(self, scan_id: str, field_name: str, message: str):
        super().__init__(f"scan {scan_id!r}, field {field_name!r}: {message}")
        self.scan_id = scan_id
        self.field_name = field_name


@dataclass(frozen=True)
class CandidateBox:
    """A scored spatial hypothesis emitted by a detector."""

    box: Box3
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class GroundTruthNodule:
    """An annotated nodule with the number of annotators who marked it."""

    box: Box3
    consensus: int

    def __post_init__(self) -> None:
        if not isinstance(self.consensus, int) or self.consensus < 1:
            raise ValueError(f"consensus must be an integer >= 1, got {self.consensus!r}")


@dataclass(frozen=True)
class ScanRecord:
    scan_id: str
    candidates: tuple[CandidateBox, ...]
    ground_truth: tuple[GroundTruthNodule, ...]

    def __post_init__(self) -> None:
        if not self.scan_id:
            raise ValueError("scan_id must be nonempty")


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of scans. ``provenance`` is free-text metadata
    and does not participate in equality (record files carry scans only)."""

    scans: tuple[ScanRecord, ...]
    provenance: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        ids = [s.scan_id for s in self.scans]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValueError(f"duplicate scan_id {dup!r}")

    def __len__(self) -> int:
        return len(self.scans)

    def __iter__(self) -> Iterator[ScanRecord]:
        return iter(self.scans)


def _require(condition: bool, scan_id: str, field_name: str, message: str) -> None:
    if not condition:
        raise ValidationError(scan_id, field_name, message)


def _parse_box(raw: object, scan_id: str, field_name: str) -> Box3:
    _require(isinstance(raw, list) and len(raw) == 6, scan_id, field_name, "box must be a list of 6 numbers")
    for v in raw:  # type: ignore[union-attr]
        _require(isinstance(v, (int, float)) and not isinstance(v, bool), scan_id, field_name, "box entries must be numbers")
        _require(math.isfinite(float(v)), scan_id, field_name, "box entries must be finite")
    return Box3.from_corners(raw)  # type: ignore[arg-type]


def _parse_scan(obj: object, line: int) -> ScanRecord:
    if not isinstance(obj, dict):
        raise ParseError(line, "record must be a JSON object")
    raw_id = obj.get("scan_id")
    if not isinstance(raw_id, str) or not raw_id:
        raise ParseError(line, "missing or empty scan_id")

    candidates = []
    raw_candidates = obj.get("candidates", [])
    _require(isinstance(raw_candidates, list), raw_id, "candidates", "must be a list")
    for j, entry in enumerate(raw_candidates):
        fname = f"candidates[{j}]"
        _require(isinstance(entry, dict), raw_id, fname, "must be an object")
        box = _parse_box(entry.get("box"), raw_id, f"{fname}.box")
        conf = entry.get("confidence")
        _require(
            isinstance(conf, (int, float)) and not isinstance(conf, bool),
            raw_id, f"{fname}.confidence", "must be a number",
        )
        conf = float(conf)
        _require(0.0 <= conf <= 1.0, raw_id, f"{fname}.confidence", f"must be in [0, 1], got {conf}")
        candidates.append(CandidateBox(box, conf))

    truth = []
    raw_truth = obj.get("ground_truth", [])
    _require(isinstance(raw_truth, list), raw_id, "ground_truth", "must be a list")
    for j, entry in enumerate(raw_truth):
        fname = f"ground_truth[{j}]"
        _require(isinstance(entry, dict), raw_id, fname, "must be an object")
        box = _parse_box(entry.get("box"), raw_id, f"{fname}.box")
        consensus = entry.get("consensus")
        _require(
            isinstance(consensus, int) and not isinstance(consensus, bool) and consensus >= 1,
            raw_id, f"{fname}.consensus", f"must be an integer >= 1, got {consensus!r}",
        )
        truth.append(GroundTruthNodule(box, consensus))

    return ScanRecord(raw_id, tuple(candidates), tuple(truth))


def unpairable_truth(scan: ScanRecord) -> list[int]:
    """Indices of ground-truth nodules with zero IoU against every candidate.

    These usually indicate documentation errors in the exported coordinates;
    they are reported, never repaired.
    """
    bad = []
    for i, nodule in enumerate(scan.ground_truth):
        if not any(iou(nodule.box, c.box) > 0.0 for c in scan.candidates):
            bad.append(i)
    return bad


def load_dataset(path: str | Path, *, nms_threshold: float | None = None) -> Dataset:
    """Load and validate a line-delimited record file.

    Raises :class:`ParseError` (with line number) for malformed lines and
    :class:`ValidationError` (naming scan and field) for model violations.
    When ``nms_threshold`` is given, greedy NMS is applied to each scan's
    candidates as an ingest filter. Ground-truth nodules that no candidate
    overlaps are surfaced as per-scan warnings.
    """
    path = Path(path)
    scans: list[ScanRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON ({exc.msg})") from exc
            scan = _parse_scan(obj, line_no)
            if scan.scan_id in seen:
                raise ValidationError(scan.scan_id, "scan_id", "duplicate scan_id")
            seen.add(scan.scan_id)
            if nms_threshold is not None:
                scan = ScanRecord(
                    scan.scan_id,
                    tuple(nms_filter(scan.candidates, nms_threshold)),
                    scan.ground_truth,
                )
            orphans = unpairable_truth(scan)
            if orphans:
                logger.warning(
                    "scan %s: %d ground-truth nodule(s) overlap no candidate (indices %s)",
                    scan.scan_id, len(orphans), orphans,
                )
            scans.append(scan)
    return Dataset(tuple(scans), provenance=str(path))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in the line-delimited record format (one scan per line)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for scan in dataset.scans:
            obj = {
                "scan_id": scan.scan_id,
                "candidates": [
                    {"box": c.box.flat(), "confidence": c.confidence} for c in scan.candidates
                ],
                "ground_truth": [
                    {"box": g.box.flat(), "consensus": g.consensus} for g in scan.ground_truth
                ],
            }
            fh.write(json.dumps(obj) + "\n")


def apply_nms(dataset: Dataset, iou_threshold: float) -> Dataset:
    """Run greedy NMS over every scan's candidates; ground truth is untouched."""
    scans = tuple(
        ScanRecord(s.scan_id, tuple(nms_filter(s.candidates, iou_threshold)), s.ground_truth)
        for s in dataset.scans
    )
    return Dataset(scans, provenance=f"{dataset.provenance}; nms(iou>{iou_threshold})")


def filter_consensus(dataset: Dataset, r: int) -> Dataset:
    """Restrict ground truth to nodules marked by at least ``r`` annotators.

    Scans left with no qualifying nodule are dropped (with a warning count);
    candidates are untouched. ``r=1`` is the identity on any dataset whose
    nodules all have consensus >= 1.
    """
    if not isinstance(r, int) or r < 1:
        raise ValueError(f"consensus level r must be an integer >= 1, got {r!r}")
    kept: list[ScanRecord] = []
    dropped = 0
    for scan in dataset.scans:
        truth = tuple(g for g in scan.ground_truth if g.consensus >= r)
        if truth:
            kept.append(ScanRecord(scan.scan_id, scan.candidates, truth))
        else:
            dropped += 1
    if dropped:
        logger.warning("consensus>=%d filter dropped %d scan(s) with no qualifying nodule", r, dropped)
    if not kept:
        logger.warning("consensus>=%d filter produced an empty dataset", r)
    provenance = f"{dataset.provenance}; consensus>={r} (dropped {dropped} scans)"
    return Dataset(tuple(kept), provenance=provenance)


def split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random equal split of ``range(n)``: first ceil(n/2) indices go to
    calibration, remainder to test. Deterministic for a fixed seed."""
    perm = np.random.default_rng(seed).permutation(n)
    k = (n + 1) // 2
    return perm[:k], perm[k:]


def split_dataset(dataset: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Randomly split a dataset into (calibration, test) halves.

    Calibration receives the extra scan when the count is odd.
    """
    n = len(dataset.scans)
    if n < 2:
        raise DatasetError(f"dataset too small to split (need >= 2 scans, have {n})")
    cal_idx, test_idx = split_indices(n, seed)
    cal = Dataset(
        tuple(dataset.scans[i] for i in cal_idx),
        provenance=f"{dataset.provenance}; calibration half (seed={seed})",
    )
    test = Dataset(
        tuple(dataset.scans[i] for i in test_idx),
        provenance=f"{dataset.provenance}; test half (seed={seed})",
    )
    return cal, test
