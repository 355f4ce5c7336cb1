"""Per-class average precision and mAP for COCO-style detection results.

Boxes are ``(x, y, width, height)``. AP is the area under the all-points
interpolated precision envelope at a single IoU threshold (0.5 by default).
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import read_coco
from .errors import SchemaError, UnknownCategory

DEFAULT_IOU = 0.5


def iou(a, b):
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def match_detections(dets, gts, iou_threshold=DEFAULT_IOU):
    """Greedy matching in descending score order.

    ``dets`` is a sequence of ``(image_id, bbox, score)`` and ``gts`` of
    ``(image_id, bbox)``. Each detection takes the still-unmatched ground
    truth of the same image with the highest IoU, if that IoU reaches the
    threshold. Equal scores keep input order. Returns a boolean TP flag per
    detection, in sorted order.
    """
    by_image = {}
    for k, (image_id, box) in enumerate(gts):
        by_image.setdefault(image_id, []).append((k, box))
    taken = np.zeros(len(gts), dtype=bool)
    order = sorted(range(len(dets)), key=lambda k: -dets[k][2])
    tp = np.zeros(len(dets), dtype=bool)
    for rank, k in enumerate(order):
        image_id, box, _ = dets[k]
        best, best_iou = -1, -1.0
        for g, gbox in by_image.get(image_id, ()):
            if taken[g]:
                continue
            o = iou(box, gbox)
            if o > best_iou:
                best, best_iou = g, o
        if best >= 0 and best_iou >= iou_threshold:
            taken[best] = True
            tp[rank] = True
    return tp


def ap_from_flags(tp, n_gt):
    """All-points interpolated AP from TP flags ordered by descending score."""
    tp = np.asarray(tp, dtype=bool)
    if n_gt == 0:
        return 0.0
    if tp.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp)
    recall = tp_cum / n_gt
    precision = tp_cum / np.arange(1, tp.size + 1)
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    step = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[step + 1] - mrec[step]) * mpre[step + 1]))


def average_precision(dets, gts, iou_threshold=DEFAULT_IOU):
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    if not gts and not dets:
        raise ValueError("AP is undefined with neither detections nor ground truth")
    return ap_from_flags(match_detections(dets, gts, iou_threshold), len(gts))


def mean_average_precision(per_class_ap):
    values = list(per_class_ap.values()) if isinstance(per_class_ap, dict) else list(per_class_ap)
    return float(sum(values) / len(values)) if values else 0.0


@dataclass
class EvalReport:
    per_class_ap: dict
    map: float
    counts: dict = field(default_factory=dict)  # class -> {"gt", "tp", "fp"}
    iou_threshold: float = DEFAULT_IOU

    def to_dict(self):
        return {
            "per_class_ap": self.per_class_ap,
            "map": self.map,
            "counts": self.counts,
            "iou_threshold": self.iou_threshold,
        }

    def table(self, digits=2):
        names = list(self.per_class_ap)
        width = max([len(n) for n in names] + [5])
        lines = [f"{'class':<{width}}  {'AP':>6}  {'gt':>6}  {'tp':>6}  {'fp':>6}"]
        for n in names:
            c = self.counts.get(n, {})
            lines.append(
                f"{n:<{width}}  {self.per_class_ap[n]:>6.{digits}f}  "
                f"{c.get('gt', 0):>6}  {c.get('tp', 0):>6}  {c.get('fp', 0):>6}"
            )
        lines.append(f"{'mAP':<{width}}  {self.map:>6.{digits}f}   (IoU >= {self.iou_threshold:g})")
        return "\n".join(lines)


def parse_detections(doc, category_names):
    """COCO result array -> list of ``(image_id, category, bbox, score)``."""
    if not isinstance(doc, list):
        raise SchemaError("detection results must be a JSON array")
    out = []
    for k, d in enumerate(doc):
        try:
            cid = int(d["category_id"])
            bbox = tuple(float(v) for v in d["bbox"])
            score = float(d["score"])
            image_id = int(d["image_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"detection {k}: {exc!r}") from exc
        if len(bbox) != 4:
            raise SchemaError(f"detection {k}: bbox must have 4 numbers")
        if cid not in category_names:
            raise UnknownCategory(f"detection {k}: category_id {cid} is not in the ground truth")
        out.append((image_id, category_names[cid], bbox, score))
    return out


def evaluate_records(annotations, detections, iou_threshold=DEFAULT_IOU):
    """Score ``(image_id, category, bbox, score)`` detections against :class:`Annotation` ground truth.

    mAP averages over the classes that have at least one ground-truth box.
    """
    classes = sorted({a.category for a in annotations})
    per_class_ap, counts = {}, {}
    for c in classes:
        gts = [(a.image_id, a.bbox) for a in annotations if a.category == c]
        dets = [(i, b, s) for i, cat, b, s in detections if cat == c]
        tp = match_detections(dets, gts, iou_threshold)
        per_class_ap[c] = ap_from_flags(tp, len(gts))
        counts[c] = {"gt": len(gts), "tp": int(tp.sum()), "fp": int((~tp).sum())}
    return EvalReport(per_class_ap, mean_average_precision(per_class_ap), counts, iou_threshold)


def evaluate(gt_path, det_path, iou_threshold=DEFAULT_IOU):
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    _, annotations = read_coco(gt_path)
    gt_doc = json.loads(Path(gt_path).read_text())
    names = {int(c["id"]): str(c["name"]) for c in gt_doc["categories"]}
    try:
        det_doc = json.loads(Path(det_path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{det_path}: {exc}") from exc
    return evaluate_records(annotations, parse_detections(det_doc, names), iou_threshold)
