"""Match ground-truth nodules to candidate boxes by the greedy confidence rule.

Each nodule prefers, among the candidates with strictly positive IoU against
it, the one with the highest confidence (an arbitrarily small overlap is
enough). When two nodules want the same candidate the higher-IoU nodule keeps
it and the loser falls back to its next choice, repeating until stable, so no
candidate is ever matched twice. On realistic detector geometry, where a
candidate overlaps at most one nodule, the fallback branch never fires.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .detections import CandidateBox, GroundTruthNodule
from .geometry import iou

__all__ = ["PairingResult", "pair", "count_outcomes"]

# One preference entry: (candidate_index, confidence, overlap). Lists are kept
# sorted best-first: higher confidence, then higher IoU, then box order.
_Edge = tuple[int, float, float]


@dataclass(frozen=True)
class PairingResult:
    """Outcome of pairing: matched (truth, candidate) index pairs, truth indices
    left unmatched, and how many candidates were claimed by more than one
    nodule before resolution."""

    matches: tuple[tuple[int, int], ...]
    unmatched_truth: tuple[int, ...]
    contested_candidates: int

    def __post_init__(self) -> None:
        truth_seen = [t for t, _ in self.matches] + list(self.unmatched_truth)
        if len(set(truth_seen)) != len(truth_seen):
            raise ValueError("a ground-truth index appears more than once")
        cands = [c for _, c in self.matches]
        if len(set(cands)) != len(cands):
            raise ValueError("a candidate index is matched more than once")


def _preference_lists(
    truth: Sequence[GroundTruthNodule],
    candidates: Sequence[CandidateBox],
) -> list[list[_Edge]]:
    prefs: list[list[_Edge]] = []
    for nodule in truth:
        edges: list[_Edge] = []
        for j, cand in enumerate(candidates):
            overlap = iou(nodule.box, cand.box)
            if overlap > 0.0:
                edges.append((j, cand.confidence, overlap))
        edges.sort(key=lambda e: (-e[1], -e[2], candidates[e[0]].box))
        prefs.append(edges)
    return prefs


def _resolve(prefs: list[list[_Edge]]) -> tuple[dict[int, int], int]:
    """Deferred acceptance over preference lists.

    Nodules propose down their lists; a candidate holds the claimant with the
    larger IoU (ties to the lower truth index). Returns the truth->candidate
    assignment and the number of distinct candidates contested by more than
    one nodule.
    """
    holder: dict[int, tuple[float, int]] = {}  # candidate -> (iou, truth index)
    cursor = [0] * len(prefs)
    pending = list(range(len(prefs) - 1, -1, -1))
    contested: set[int] = set()
    while pending:
        t = pending.pop()
        while cursor[t] < len(prefs[t]):
            cand, _conf, overlap = prefs[t][cursor[t]]
            cursor[t] += 1
            held = holder.get(cand)
            if held is None:
                holder[cand] = (overlap, t)
                break
            contested.add(cand)
            held_overlap, held_t = held
            if overlap > held_overlap or (overlap == held_overlap and t < held_t):
                holder[cand] = (overlap, t)
                pending.append(held_t)
                break
            # lost the contest; keep walking down the list
    assignment = {t: cand for cand, (_ov, t) in holder.items()}
    return assignment, len(contested)


def _match_count(prefs: list[list[_Edge]]) -> int:
    """Number of nodules matched under the resolution rule (no result assembly)."""
    assignment, _ = _resolve(prefs)
    return len(assignment)


def pair(
    truth: Sequence[GroundTruthNodule],
    prediction_set: Sequence[CandidateBox],
) -> PairingResult:
    """Pair each nodule with its best positive-IoU candidate in the prediction set."""
    prefs = _preference_lists(truth, prediction_set)
    assignment, contested = _resolve(prefs)
    matches = tuple(sorted(assignment.items()))
    unmatched = tuple(t for t in range(len(truth)) if t not in assignment)
    return PairingResult(matches, unmatched, contested)


def count_outcomes(
    truth: Sequence[GroundTruthNodule],
    prediction_set: Sequence[CandidateBox],
) -> tuple[int, int, int]:
    """(TP, FP, FN) for a prediction set against ground truth.

    TP is the number of matched nodules; every unmatched candidate is a false
    positive and every unmatched nodule a false negative, so TP + FP equals
    the set size and TP + FN the truth count.
    """
    tp = len(pair(truth, prediction_set).matches)
    return tp, len(prediction_set) - tp, len(truth) - tp
