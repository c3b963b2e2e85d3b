"""Grid decoding of detection tensors, NMS, IoU matching and accuracy metrics.

All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .models import DetectionTensorSet

# Channel layout of one grid cell: box offsets, size, objectness, class scores.
CH_TX, CH_TY, CH_TW, CH_TH, CH_OBJ = 0, 1, 2, 3, 4
BOX_CHANNELS = 5

# Box channels carry scaled logits: value = COORD_LOGIT_SCALE * logit(fraction).
# The scaling halves the decode sensitivity to regression error. Width and
# height are coded relative to a fixed prior size, so a zero channel decodes
# to the prior rather than to half the frame.
COORD_LOGIT_SCALE = 2.0
SIZE_PRIOR = 0.2


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in normalized [0,1] frame coordinates, center-based."""

    x: float
    y: float
    w: float
    h: float
    class_id: int
    score: float = 1.0

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner coordinates."""
        return (self.x - self.w / 2.0, self.y - self.h / 2.0,
                self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass
class MetricsReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float
    overall_score: float | None = None  # filled by the harness (f1 per joule)

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "MetricsReport":
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1 = (2.0 * precision * recall / (precision + recall)
              if (precision + recall) > 0 else 0.0)
        return cls(tp, fp, fn, precision, recall, f1)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def decode_boxes(out: "DetectionTensorSet", obj_threshold: float = 0.5) -> list[Box]:
    """Decode grid cells whose objectness clears the threshold into boxes.

    One candidate per passing cell: center from the cell's sigmoid offsets,
    size from sigmoid of the width/height channels, class by argmax, score
    is the objectness probability. Candidates are emitted scale by scale,
    row-major within a scale, which fixes the tie-break order downstream.
    """
    if not 0.0 <= obj_threshold <= 1.0:
        raise ValueError("obj_threshold must be in [0, 1]")
    boxes: list[Box] = []
    for scale in out.scales:
        arr = scale.array
        g = arr.shape[0]
        obj = sigmoid(arr[:, :, CH_OBJ])
        for r in range(g):
            for c in range(g):
                score = float(obj[r, c])
                if score < obj_threshold:
                    continue
                cell = arr[r, c]
                prior = logit(SIZE_PRIOR)
                x = (c + float(sigmoid(cell[CH_TX] / COORD_LOGIT_SCALE))) / g
                y = (r + float(sigmoid(cell[CH_TY] / COORD_LOGIT_SCALE))) / g
                w = float(sigmoid(cell[CH_TW] / COORD_LOGIT_SCALE + prior))
                h = float(sigmoid(cell[CH_TH] / COORD_LOGIT_SCALE + prior))
                class_id = int(np.argmax(cell[BOX_CHANNELS:]))
                boxes.append(Box(x, y, w, h, class_id, score))
    return boxes


def nms(boxes: Sequence[Box], iou_threshold: float = 0.45) -> list[Box]:
    """Greedy per-class non-maximum suppression.

    Keeps the highest-score box of each class, drops same-class boxes
    whose IoU with a kept box exceeds the threshold, repeats. Ties on
    score break toward earlier input position. Output is sorted by
    descending score.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in [0, 1]")
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].score, i))
    kept: list[Box] = []
    for i in order:
        cand = boxes[i]
        suppressed = any(
            k.class_id == cand.class_id and iou(k, cand) > iou_threshold
            for k in kept
        )
        if not suppressed:
            kept.append(cand)
    return kept


def compute_metrics(predicted: Sequence[Box], truth: Sequence[Box],
                    iou_threshold: float = 0.5) -> MetricsReport:
    """Greedy score-ordered matching at the given IoU threshold.

    A prediction is a true positive iff it shares the class of, and has
    IoU >= threshold with, a not-yet-matched truth box (best IoU wins,
    earlier truth index on ties). Each truth box matches at most once.
    """
    order = sorted(range(len(predicted)), key=lambda i: (-predicted[i].score, i))
    matched = [False] * len(truth)
    tp = 0
    for i in order:
        p = predicted[i]
        best_j = -1
        best_iou = 0.0
        for j, t in enumerate(truth):
            if matched[j] or t.class_id != p.class_id:
                continue
            v = iou(p, t)
            if v >= iou_threshold and v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0:
            matched[best_j] = True
            tp += 1
    fp = len(predicted) - tp
    fn = len(truth) - tp
    return MetricsReport.from_counts(tp, fp, fn)
