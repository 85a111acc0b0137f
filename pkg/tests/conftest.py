"""Shared builders and brute-force oracles for the test suite."""

from __future__ import annotations

import numpy as np

from confdet.detections import CandidateBox, Dataset, GroundTruthNodule, ScanRecord
from confdet.geometry import Box3, iou


def box(lo, hi) -> Box3:
    """Cube-ish box from scalar or per-axis corners."""
    if np.isscalar(lo):
        lo = (lo, lo, lo)
    if np.isscalar(hi):
        hi = (hi, hi, hi)
    return Box3(tuple(float(v) for v in lo), tuple(float(v) for v in hi))


def cand(b: Box3, confidence: float) -> CandidateBox:
    return CandidateBox(b, confidence)


def nodule(b: Box3, consensus: int = 3) -> GroundTruthNodule:
    return GroundTruthNodule(b, consensus)


def random_box(rng: np.random.Generator, span: float = 100.0, max_extent: float = 20.0) -> Box3:
    lo = rng.uniform(0.0, span, size=3)
    hi = lo + rng.uniform(0.5, max_extent, size=3)
    return Box3(tuple(lo), tuple(hi))


def random_scan(
    rng: np.random.Generator,
    scan_id: str = "s",
    max_truth: int = 4,
    max_candidates: int = 30,
) -> ScanRecord:
    """A scan with arbitrary (possibly messy) geometry and random confidences.

    Roughly half the candidates are jittered copies of truth boxes so that
    pairing has something to find; the rest land anywhere.
    """
    n_truth = int(rng.integers(1, max_truth + 1))
    truth = [nodule(random_box(rng), int(rng.integers(1, 5))) for _ in range(n_truth)]
    n_cand = int(rng.integers(0, max_candidates + 1))
    candidates = []
    for _ in range(n_cand):
        if truth and rng.random() < 0.5:
            base = truth[int(rng.integers(0, len(truth)))].box
            offset = rng.uniform(-3.0, 3.0, size=3)
            b = base.translate(offset)
        else:
            b = random_box(rng)
        candidates.append(cand(b, float(rng.uniform(0.0, 1.0))))
    return ScanRecord(scan_id, tuple(candidates), tuple(truth))


def random_dataset(rng: np.random.Generator, n_scans: int, **scan_kwargs) -> Dataset:
    scans = tuple(
        random_scan(rng, scan_id=f"scan-{i:03d}", **scan_kwargs) for i in range(n_scans)
    )
    return Dataset(scans, provenance="test fixture")


def separated_instance(
    rng: np.random.Generator,
    max_truth: int = 5,
    max_candidates: int = 20,
) -> tuple[list[GroundTruthNodule], list[CandidateBox]]:
    """A pairing instance with detector-like geometry: truth boxes far apart,
    candidates either jittered around one truth box or placed disjoint from
    all of them, so no candidate overlaps two nodules."""
    n_truth = int(rng.integers(0, max_truth + 1))
    truth = []
    for i in range(n_truth):
        center = np.array([120.0 * i, 0.0, 0.0]) + rng.uniform(-5, 5, size=3)
        half = rng.uniform(3.0, 10.0)
        truth.append(nodule(box(center - half, center + half), int(rng.integers(1, 5))))

    n_cand = int(rng.integers(0, max_candidates + 1))
    candidates = []
    for _ in range(n_cand):
        if truth and rng.random() < 0.6:
            t = truth[int(rng.integers(0, len(truth)))].box
            extent = t.max_corner[0] - t.min_corner[0]
            offset = rng.uniform(-0.4, 0.4, size=3) * extent
            b = t.translate(offset)
        else:
            center = np.array([rng.uniform(0, 120.0 * max(n_truth, 1)), 300.0, 300.0])
            half = rng.uniform(2.0, 8.0)
            b = box(center - half, center + half)
        candidates.append(cand(b, float(rng.uniform(0.0, 1.0))))
    return truth, candidates


def exhaustive_max_tp(truth, candidates) -> int:
    """Brute-force maximum one-to-one assignment on the positive-IoU graph."""
    acceptable = [
        [j for j, c in enumerate(candidates) if iou(t.box, c.box) > 0.0] for t in truth
    ]

    def best(i: int, used: frozenset) -> int:
        if i == len(acceptable):
            return 0
        result = best(i + 1, used)  # leave nodule i unmatched
        for j in acceptable[i]:
            if j not in used:
                result = max(result, 1 + best(i + 1, used | {j}))
        return result

    return best(0, frozenset())
