"""Axis-aligned 3D boxes in millimeter coordinates: volume, IoU, greedy NMS.

Boxes are stored as (min_corner, max_corner) triples so every overlap test is
branch-free; any corner ordering coming from a file is normalized at ingest
via :meth:`Box3.from_corners`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, TYPE_CHECKING

if TYPE_CHECKING:
    from .detections import CandidateBox

__all__ = ["Box3", "volume", "intersection_volume", "iou", "nms_filter", "DEFAULT_NMS_IOU"]

# Conventional NMS overlap threshold for detector export pipelines.
DEFAULT_NMS_IOU = 0.22


@dataclass(frozen=True, order=True)
class Box3:
    """Axis-aligned box given by its minimum and maximum corners (mm).

    Degenerate boxes (zero extent on some axis) are allowed; they have zero
    volume and, by definition here, zero IoU against everything.
    """

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.min_corner) != 3 or len(self.max_corner) != 3:
            raise ValueError("box corners must be 3-vectors")
        for lo, hi in zip(self.min_corner, self.max_corner):
            if not lo <= hi:  # also rejects NaN
                raise ValueError(
                    f"min_corner must be <= max_corner per axis, got {self.min_corner} / {self.max_corner}"
                )

    @classmethod
    def from_corners(cls, values: Iterable[float]) -> "Box3":
        """Build a box from six coordinates (x1,y1,z1,x2,y2,z2), normalizing corner order per axis."""
        vals = [float(v) for v in values]
        if len(vals) != 6:
            raise ValueError(f"expected 6 coordinates, got {len(vals)}")
        a, b = vals[:3], vals[3:]
        lo = tuple(min(p, q) for p, q in zip(a, b))
        hi = tuple(max(p, q) for p, q in zip(a, b))
        return cls(lo, hi)  # type: ignore[arg-type]

    def flat(self) -> list[float]:
        """Six coordinates, min corner first."""
        return [*self.min_corner, *self.max_corner]

    def translate(self, offset: Sequence[float]) -> "Box3":
        lo = tuple(c + o for c, o in zip(self.min_corner, offset))
        hi = tuple(c + o for c, o in zip(self.max_corner, offset))
        return Box3(lo, hi)  # type: ignore[arg-type]


def volume(b: Box3) -> float:
    """Box volume in mm^3 (zero for degenerate boxes)."""
    v = 1.0
    for lo, hi in zip(b.min_corner, b.max_corner):
        v *= hi - lo
    return v


def intersection_volume(a: Box3, b: Box3) -> float:
    """Volume of the overlap region; 0.0 when the boxes do not properly intersect."""
    v = 1.0
    for k in range(3):
        lo = max(a.min_corner[k], b.min_corner[k])
        hi = min(a.max_corner[k], b.max_corner[k])
        if hi <= lo:
            return 0.0
        v *= hi - lo
    return v


def iou(a: Box3, b: Box3) -> float:
    """Intersection-over-union of two boxes, in [0, 1].

    Any pairing involving a zero-volume operand yields 0, so degenerate boxes
    can never count as overlapping anything (including themselves).
    """
    inter = intersection_volume(a, b)
    if inter <= 0.0:
        return 0.0
    union = volume(a) + volume(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def nms_filter(boxes: Sequence["CandidateBox"], iou_threshold: float = DEFAULT_NMS_IOU) -> list["CandidateBox"]:
    """Greedy hard non-maximum suppression over scored boxes.

    Repeatedly keeps the highest-confidence remaining box and discards every
    remaining box whose IoU with it strictly exceeds ``iou_threshold``.
    Confidence ties break by box corner order so repeated runs agree exactly.
    Survivors are returned in descending-confidence order and are always a
    subset of the input.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    pending = sorted(boxes, key=lambda c: (-c.confidence, c.box))
    kept: list["CandidateBox"] = []
    while pending:
        best = pending[0]
        kept.append(best)
        pending = [c for c in pending[1:] if iou(best.box, c.box) <= iou_threshold]
    return kept
