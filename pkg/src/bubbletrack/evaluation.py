"""Detection/segmentation quality metrics against ground truth.

Average precision is the uninterpolated sum of precision times recall
increments over the score-ranked detections; the headline AP averages
the per-class values over IoU thresholds 0.50:0.05:0.95, with AP50 and
AP75 reported at their single thresholds. A 101-point interpolated
variant is emitted alongside for comparison with other tools.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, Detection
from .errors import UsageError
from .masks import BitMask

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))


@dataclass(frozen=True)
class MatchRecord:
    score: float
    iou: float
    is_tp: bool
    detection_index: int
    gt_index: int | None


@dataclass(frozen=True)
class ClassReport:
    ap: float           # mean over IOU_THRESHOLDS
    ap50: float
    ap75: float
    ap_by_threshold: dict[float, float]
    n_ground_truth: int


@dataclass(frozen=True)
class EvalReport:
    ap: float
    ap50: float
    ap75: float
    per_class: dict[str, ClassReport]
    counts: dict[float, dict[str, int]]  # threshold -> {tp, fp, fn}
    mode: str
    ap_interp101: float

    def to_doc(self) -> dict:
        return {
            "AP": self.ap,
            "AP50": self.ap50,
            "AP75": self.ap75,
            "per_class": {
                name: {
                    "AP": c.ap,
                    "AP50": c.ap50,
                    "AP75": c.ap75,
                    "n_ground_truth": c.n_ground_truth,
                }
                for name, c in self.per_class.items()
            },
            "counts": {
                f"{thr:.2f}": dict(c) for thr, c in sorted(self.counts.items())
            },
            "mode": self.mode,
            "AP_interp101": self.ap_interp101,
        }


def iou(a, b) -> float:
    """Intersection over union of two masks or two (x, y, w, h) boxes."""
    if isinstance(a, BitMask) and isinstance(b, BitMask):
        if a.data.shape != b.data.shape:
            raise ValueError(f"mask shapes differ: {a.data.shape} vs {b.data.shape}")
        inter = int(np.count_nonzero(a.data & b.data))
        union = int(np.count_nonzero(a.data | b.data))
        if union == 0:
            raise ValueError("IoU undefined: both masks are empty")
        return inter / union
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    if union <= 0:
        raise ValueError("IoU undefined: both boxes are empty")
    return inter / union


def _det_key(det: Detection, mode: str):
    return det.mask if mode == "mask" else det.bbox


def _iou_matrix(
    detections: list[Detection], ground_truths: list[Detection], mode: str
) -> np.ndarray:
    mat = np.zeros((len(detections), len(ground_truths)))
    for di, det in enumerate(detections):
        for gi, gt in enumerate(ground_truths):
            mat[di, gi] = iou(_det_key(det, mode), _det_key(gt, mode))
    return mat


def _match_by_matrix(
    scores: list[float], mat: np.ndarray, iou_threshold: float
) -> list[MatchRecord]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    claimed: set[int] = set()
    records = []
    for di in order:
        best_iou = 0.0
        best_gt = None
        for gi in range(mat.shape[1]):
            if gi in claimed:
                continue
            if mat[di, gi] > best_iou:
                best_iou, best_gt = float(mat[di, gi]), gi
        if best_gt is not None and best_iou >= iou_threshold:
            claimed.add(best_gt)
            records.append(MatchRecord(scores[di], best_iou, True, di, best_gt))
        else:
            records.append(MatchRecord(scores[di], best_iou, False, di, None))
    return records


def match_detections(
    detections: list[Detection],
    ground_truths: list[Detection],
    iou_threshold: float,
    mode: str = "mask",
) -> list[MatchRecord]:
    """Greedy matching in descending score order (ties keep input order).

    Each detection claims the unmatched ground truth of highest IoU at
    or above the threshold; every ground truth is claimed at most once.
    """
    return _match_by_matrix(
        [d.score for d in detections],
        _iou_matrix(detections, ground_truths, mode),
        iou_threshold,
    )


def average_precision(records: list[MatchRecord], n_ground_truth: int) -> float:
    """Sum of precision times recall increments over the ranked records."""
    if n_ground_truth < 1:
        raise ValueError(f"need n_ground_truth >= 1, got {n_ground_truth}")
    ranked = sorted(range(len(records)), key=lambda i: (-records[i].score, i))
    tp = 0
    fp = 0
    ap = 0.0
    prev_recall = 0.0
    for i in ranked:
        if records[i].is_tp:
            tp += 1
        else:
            fp += 1
        precision = tp / (tp + fp)
        recall = tp / n_ground_truth
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def interpolated_ap101(records: list[MatchRecord], n_ground_truth: int) -> float:
    """COCO-style 101-point interpolated AP, for cross-tool comparison."""
    if n_ground_truth < 1:
        raise ValueError(f"need n_ground_truth >= 1, got {n_ground_truth}")
    ranked = sorted(range(len(records)), key=lambda i: (-records[i].score, i))
    tps = np.cumsum([records[i].is_tp for i in ranked])
    ranks = np.arange(1, len(ranked) + 1)
    precisions = tps / ranks if len(ranked) else np.array([])
    recalls = tps / n_ground_truth if len(ranked) else np.array([])
    # precision envelope, sampled at 101 recall points
    env = np.maximum.accumulate(precisions[::-1])[::-1] if len(ranked) else precisions
    samples = np.zeros(101)
    for k, r in enumerate(np.linspace(0, 1, 101)):
        at = np.searchsorted(recalls, r, side="left")
        samples[k] = env[at] if at < len(env) else 0.0
    return float(samples.mean())


def _paired_frames(pred: Dataset, gt: Dataset) -> list[tuple]:
    pred_idx = {f.index for f in pred.frames}
    gt_idx = {f.index for f in gt.frames}
    if pred_idx != gt_idx:
        missing_in_pred = sorted(gt_idx - pred_idx)
        missing_in_gt = sorted(pred_idx - gt_idx)
        raise UsageError(
            "prediction and ground-truth frame sets differ: "
            f"missing in predictions {missing_in_pred}, missing in ground truth {missing_in_gt}"
        )
    return [(f, gt.frame_by_index(f.index)) for f in pred.frames]


def evaluate(pred: Dataset, gt: Dataset, mode: str = "mask") -> EvalReport:
    """Full AP report of predictions against ground truth.

    Per class and IoU threshold, detections are matched frame by frame,
    pooled over the dataset, and ranked by score. Classes absent from
    the ground truth are not reported.
    """
    if mode not in ("mask", "box"):
        raise UsageError(f"mode must be 'mask' or 'box', got {mode!r}")
    pairs = _paired_frames(pred, gt)

    classes = sorted(
        {d.category for _, gf in pairs for d in gf.detections}, key=lambda c: c.value
    )
    if not classes:
        raise UsageError("ground truth contains no detections to evaluate against")

    per_class: dict[str, ClassReport] = {}
    counts: dict[float, dict[str, int]] = {
        thr: {"tp": 0, "fp": 0, "fn": 0} for thr in IOU_THRESHOLDS
    }
    interp_values = []
    for cat in classes:
        n_gt = sum(
            1 for _, gf in pairs for d in gf.detections if d.category == cat
        )
        per_frame = []
        for pf, gf in pairs:
            dets = [d for d in pf.detections if d.category == cat]
            gts = [d for d in gf.detections if d.category == cat]
            per_frame.append(([d.score for d in dets], _iou_matrix(dets, gts, mode)))
        ap_by_thr: dict[float, float] = {}
        for thr in IOU_THRESHOLDS:
            records: list[MatchRecord] = []
            for scores, mat in per_frame:
                records.extend(_match_by_matrix(scores, mat, thr))
            ap_by_thr[thr] = average_precision(records, n_gt)
            tp = sum(1 for r in records if r.is_tp)
            counts[thr]["tp"] += tp
            counts[thr]["fp"] += len(records) - tp
            counts[thr]["fn"] += n_gt - tp
            if thr == 0.5:
                interp_values.append(interpolated_ap101(records, n_gt))
        per_class[cat.value] = ClassReport(
            ap=float(np.mean(list(ap_by_thr.values()))),
            ap50=ap_by_thr[0.5],
            ap75=ap_by_thr[0.75],
            ap_by_threshold=ap_by_thr,
            n_ground_truth=n_gt,
        )

    return EvalReport(
        ap=float(np.mean([c.ap for c in per_class.values()])),
        ap50=float(np.mean([c.ap50 for c in per_class.values()])),
        ap75=float(np.mean([c.ap75 for c in per_class.values()])),
        per_class=per_class,
        counts=counts,
        mode=mode,
        ap_interp101=float(np.mean(interp_values)),
    )
