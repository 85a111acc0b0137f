"""Seeded synthetic scan generator with a multi-annotator consensus model.

Each nodule carries a latent salience in (0, 1]. Salience drives two coupled
processes: each of the annotators independently marks the nodule with a
logistic probability in salience (so low-salience nodules end up with low
consensus counts), and the emulated detector scores the nodule's candidate
box with a logistic-in-salience confidence plus noise (so the same nodules
are also the ones the detector is unsure about). Filtering the output at
increasing consensus levels therefore yields progressively easier datasets,
without that ordering being hard-coded anywhere.

Construction guarantees that matter downstream:
  * every ground-truth nodule has exactly one overlapping (positive-IoU)
    candidate, so the threshold-0 prediction set always reaches FNR 0;
  * distractor candidates never overlap any ground-truth box;
  * ground-truth boxes are spaced so that no candidate can overlap two of
    them, keeping the pairing rule conflict-free by construction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .detections import Dataset, CandidateBox, GroundTruthNodule, ScanRecord, filter_consensus
from .geometry import Box3, intersection_volume

__all__ = ["GeneratorConfig", "GenerationError", "generate", "consensus_shift_suite", "sample_nodule_attributes"]

# Truth boxes are kept apart by this factor of their own extent; candidate
# jitter below stays inside it, so a candidate can only touch its own nodule.
_SEPARATION_SCALE = 3.0
_MAX_PLACEMENT_ATTEMPTS = 500


class GenerationError(RuntimeError):
    """The configuration cannot be realized (e.g. boxes do not fit the volume)."""


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic population.

    ``nodules_per_scan`` bounds the per-scan nodule count; within the range
    the count follows a truncated geometric with continue-probability
    ``nodule_count_tail`` (the default mean is about 2.2 nodules per scan).
    Salience is a two-component Beta mixture: an ambiguous bulk
    (``salience_alpha``/``salience_beta``) plus, with probability
    ``salience_easy_fraction``, an obvious-finding component
    (``salience_easy_alpha``/``salience_easy_beta``) that nearly every
    annotator marks. ``annotator_slope``/``annotator_midpoint`` shape the
    per-annotator marking probability as logistic(slope*(salience-midpoint)).
    ``detector_sharpness`` is the slope of the salience-to-confidence map,
    centered at salience 0.5, with Gaussian noise ``confidence_noise_sd``.
    Distractor candidates arrive Poisson(``distractor_rate``) per scan with
    Beta(``distractor_conf_alpha``, ``distractor_conf_beta``) confidences.
    """

    n_scans: int = 280
    nodules_per_scan: tuple[int, int] = (1, 12)
    nodule_count_tail: float = 0.55
    n_annotators: int = 4
    salience_alpha: float = 2.0
    salience_beta: float = 5.5
    salience_easy_fraction: float = 0.05
    salience_easy_alpha: float = 40.0
    salience_easy_beta: float = 1.0
    annotator_slope: float = 8.0
    annotator_midpoint: float = 0.58
    detector_sharpness: float = 5.5
    confidence_noise_sd: float = 0.04
    distractor_rate: float = 14.0
    distractor_conf_alpha: float = 1.1
    distractor_conf_beta: float = 5.0
    volume_bounds: tuple[float, float, float] = (320.0, 320.0, 320.0)
    diameter_range: tuple[float, float] = (3.0, 28.0)
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.nodules_per_scan
        if self.n_scans < 0:
            raise ValueError("n_scans must be >= 0")
        if not (isinstance(lo, int) and isinstance(hi, int) and 1 <= lo <= hi):
            raise ValueError(f"nodules_per_scan must be an integer range with min >= 1, got {self.nodules_per_scan}")
        if not 0.0 <= self.nodule_count_tail < 1.0:
            raise ValueError("nodule_count_tail must be in [0, 1)")
        if self.n_annotators < 1:
            raise ValueError("n_annotators must be >= 1")
        if min(self.salience_alpha, self.salience_beta,
               self.salience_easy_alpha, self.salience_easy_beta) <= 0:
            raise ValueError("salience Beta parameters must be positive")
        if not 0.0 <= self.salience_easy_fraction <= 1.0:
            raise ValueError("salience_easy_fraction must be in [0, 1]")
        if self.confidence_noise_sd < 0:
            raise ValueError("confidence_noise_sd must be >= 0")
        if self.distractor_rate < 0:
            raise ValueError("distractor_rate must be >= 0")
        if min(self.distractor_conf_alpha, self.distractor_conf_beta) <= 0:
            raise ValueError("distractor confidence Beta parameters must be positive")
        d_lo, d_hi = self.diameter_range
        if not 3.0 <= d_lo <= d_hi:
            raise ValueError(f"diameter_range must satisfy 3.0 <= min <= max, got {self.diameter_range}")
        if any(v <= 0 for v in self.volume_bounds):
            raise ValueError("volume_bounds must be positive")
        if d_hi >= min(self.volume_bounds):
            raise GenerationError("largest nodule diameter does not fit the volume")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["nodules_per_scan"] = list(self.nodules_per_scan)
        d["volume_bounds"] = list(self.volume_bounds)
        d["diameter_range"] = list(self.diameter_range)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown generator config key(s): {sorted(unknown)}")
        kwargs = dict(raw)
        for key in ("nodules_per_scan", "volume_bounds", "diameter_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _logistic(x: float) -> float:
    # overflow-safe for arbitrarily steep slopes
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _marking_probability(cfg: GeneratorConfig, salience: float) -> float:
    return _logistic(cfg.annotator_slope * (salience - cfg.annotator_midpoint))


def _sample_salience(cfg: GeneratorConfig, rng: np.random.Generator) -> float:
    if rng.random() < cfg.salience_easy_fraction:
        return float(rng.beta(cfg.salience_easy_alpha, cfg.salience_easy_beta))
    return float(rng.beta(cfg.salience_alpha, cfg.salience_beta))


def sample_nodule_attributes(cfg: GeneratorConfig, rng: np.random.Generator) -> tuple[float, int]:
    """Draw one nodule's (salience, consensus), rejecting consensus 0.

    Consensus is Binomial(n_annotators, p(salience)); a draw nobody marked is
    discarded and the whole nodule resampled, so the returned consensus is
    always >= 1 and the salience distribution is tilted toward visibility.
    """
    while True:
        s = _sample_salience(cfg, rng)
        if s <= 0.0:
            continue
        k = int(rng.binomial(cfg.n_annotators, _marking_probability(cfg, s)))
        if k >= 1:
            return s, k


def _nodule_count(cfg: GeneratorConfig, rng: np.random.Generator) -> int:
    lo, hi = cfg.nodules_per_scan
    count = lo
    while count < hi and rng.random() < cfg.nodule_count_tail:
        count += 1
    return count


def _place_truth_box(
    cfg: GeneratorConfig, rng: np.random.Generator, placed: list[Box3]
) -> Box3:
    """Place a cube that keeps a wide margin from every existing truth box."""
    d_lo, d_hi = cfg.diameter_range
    for _ in range(_MAX_PLACEMENT_ATTEMPTS):
        d = float(rng.uniform(d_lo, d_hi))
        half = d / 2.0
        center = [float(rng.uniform(half, b - half)) for b in cfg.volume_bounds]
        pad = _SEPARATION_SCALE * half
        guard = Box3(
            tuple(c - pad for c in center),  # type: ignore[arg-type]
            tuple(c + pad for c in center),  # type: ignore[arg-type]
        )
        if all(intersection_volume(guard, _inflate(b, _SEPARATION_SCALE)) == 0.0 for b in placed):
            return Box3(
                tuple(c - half for c in center),  # type: ignore[arg-type]
                tuple(c + half for c in center),  # type: ignore[arg-type]
            )
    raise GenerationError(
        f"could not place {len(placed) + 1} non-overlapping nodules in volume {cfg.volume_bounds}"
    )


def _inflate(box: Box3, scale: float) -> Box3:
    center = [(lo + hi) / 2.0 for lo, hi in zip(box.min_corner, box.max_corner)]
    half = [(hi - lo) / 2.0 * scale for lo, hi in zip(box.min_corner, box.max_corner)]
    return Box3(
        tuple(c - h for c, h in zip(center, half)),  # type: ignore[arg-type]
        tuple(c + h for c, h in zip(center, half)),  # type: ignore[arg-type]
    )


def _jittered_candidate(rng: np.random.Generator, truth: Box3) -> Box3:
    """A box guaranteed to overlap ``truth``: per-axis shift < 0.35 extent and
    scale in [0.75, 1.25], which leaves positive overlap on every axis."""
    lo, hi = [], []
    for a, b in zip(truth.min_corner, truth.max_corner):
        extent = b - a
        center = (a + b) / 2.0 + rng.uniform(-0.35, 0.35) * extent
        half = 0.5 * extent * rng.uniform(0.75, 1.25)
        lo.append(center - half)
        hi.append(center + half)
    return Box3(tuple(lo), tuple(hi))  # type: ignore[arg-type]


def _true_confidence(cfg: GeneratorConfig, rng: np.random.Generator, salience: float) -> float:
    base = _logistic(cfg.detector_sharpness * (salience - 0.5))
    return float(np.clip(base + rng.normal(0.0, cfg.confidence_noise_sd), 0.0, 1.0))


def _distractor_box(cfg: GeneratorConfig, rng: np.random.Generator, truths: list[Box3]) -> Box3:
    d_lo, d_hi = cfg.diameter_range
    for _ in range(_MAX_PLACEMENT_ATTEMPTS):
        d = float(rng.uniform(d_lo, d_hi))
        half = d / 2.0
        center = [float(rng.uniform(half, b - half)) for b in cfg.volume_bounds]
        box = Box3(
            tuple(c - half for c in center),  # type: ignore[arg-type]
            tuple(c + half for c in center),  # type: ignore[arg-type]
        )
        if all(intersection_volume(box, t) == 0.0 for t in truths):
            return box
    raise GenerationError("could not place a distractor disjoint from all nodules")


def _distractor_confidence(cfg: GeneratorConfig, rng: np.random.Generator) -> float:
    v = float(rng.beta(cfg.distractor_conf_alpha, cfg.distractor_conf_beta))
    return min(v, float(np.nextafter(1.0, 0.0)))  # distractors live in [0, 1)


def generate(cfg: GeneratorConfig) -> Dataset:
    """Generate a dataset; bit-identical for identical configurations."""
    rng = np.random.default_rng(cfg.seed)
    scans = []
    for i in range(cfg.n_scans):
        count = _nodule_count(cfg, rng)
        attributes = [sample_nodule_attributes(cfg, rng) for _ in range(count)]
        truth_boxes: list[Box3] = []
        for _ in range(count):
            truth_boxes.append(_place_truth_box(cfg, rng, truth_boxes))
        truth = tuple(
            GroundTruthNodule(box, consensus)
            for box, (_s, consensus) in zip(truth_boxes, attributes)
        )
        candidates = [
            CandidateBox(_jittered_candidate(rng, box), _true_confidence(cfg, rng, s))
            for box, (s, _k) in zip(truth_boxes, attributes)
        ]
        for _ in range(int(rng.poisson(cfg.distractor_rate))):
            candidates.append(
                CandidateBox(_distractor_box(cfg, rng, truth_boxes), _distractor_confidence(cfg, rng))
            )
        order = rng.permutation(len(candidates))
        scans.append(
            ScanRecord(f"scan-{i:05d}", tuple(candidates[j] for j in order), truth)
        )
    return Dataset(tuple(scans), provenance=f"synthetic(seed={cfg.seed}, n_scans={cfg.n_scans})")


def consensus_shift_suite(cfg: GeneratorConfig) -> list[Dataset]:
    """One generated superset filtered at consensus levels 1 through 4.

    The level-1 dataset equals the superset (every nodule has consensus >= 1);
    higher levels shed low-consensus nodules and, eventually, whole scans.
    """
    superset = generate(cfg)
    return [filter_consensus(superset, r) for r in (1, 2, 3, 4)]
