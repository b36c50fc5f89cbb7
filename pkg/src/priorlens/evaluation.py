"""COCO-style mean average precision with all-point interpolation.

Matching happens per image, i.e. per (video_id, frame). Area buckets
follow the usual 32**2 / 96**2 split on ground-truth box area; in a
bucket, out-of-range ground truths are ignored rather than removed, so a
detection matched to one is neither a true nor a false positive.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import iou
from .refiner import Detection

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
AREA_RANGES = {
    "all": (0.0, float("inf")),
    "small": (0.0, 32.0**2),
    "medium": (32.0**2, 96.0**2),
    "large": (96.0**2, float("inf")),
}


@dataclass
class MapReport:
    map: float | None
    map50: float | None
    map75: float | None
    map_s: float | None
    map_m: float | None
    map_l: float | None
    per_class: dict[int, dict[str, float | None]] = field(default_factory=dict)

    def metrics(self) -> dict[str, float | None]:
        return {k: getattr(self, k) for k in ("map", "map50", "map75", "map_s", "map_m", "map_l")}

    def to_dict(self) -> dict:
        return {**self.metrics(), "per_class": {str(c): v for c, v in sorted(self.per_class.items())}}


def _in_range(area: float, rng: tuple[float, float]) -> bool:
    lo, hi = rng
    return lo <= area < hi if hi != float("inf") else area >= lo


def interpolated_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the precision envelope of a PR curve (all-point)."""
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def _match(dets: Sequence[Detection], truths: Sequence[Detection], iou_thr: float,
           area_rng: tuple[float, float]) -> tuple[np.ndarray, np.ndarray, int]:
    """Greedy per-image matching for one class.

    Returns (scores, tp flags, number of non-ignored truths) with ignored
    detections already removed.
    """
    gt_by_img: dict[tuple[str, int], list[int]] = defaultdict(list)
    for i, g in enumerate(truths):
        gt_by_img[(g.video_id, g.frame)].append(i)
    gt_ignore = [not _in_range(g.bbox.area, area_rng) for g in truths]
    n_pos = sum(1 for ig in gt_ignore if not ig)

    # non-ignored truths first so they win over ignored ones
    for img in gt_by_img.values():
        img.sort(key=lambda gi: gt_ignore[gi])

    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    taken = [False] * len(truths)
    scores, tps = [], []
    for di in order:
        d = dets[di]
        best, best_iou = None, iou_thr
        for gi in gt_by_img.get((d.video_id, d.frame), []):
            if taken[gi]:
                continue
            if best is not None and not gt_ignore[best] and gt_ignore[gi]:
                break
            ov = iou(d.bbox, truths[gi].bbox)
            if ov < iou_thr:
                continue
            # strict > keeps the first truth on ties
            if best is None or ov > best_iou:
                best, best_iou = gi, ov
        if best is not None:
            taken[best] = True
            if gt_ignore[best]:
                continue
            scores.append(d.score)
            tps.append(True)
        else:
            if not _in_range(d.bbox.area, area_rng):
                continue
            scores.append(d.score)
            tps.append(False)
    return np.array(scores), np.array(tps, dtype=bool), n_pos


def average_precision(dets: Sequence[Detection], truths: Sequence[Detection], iou_thr: float = 0.5,
                      area_rng: tuple[float, float] = AREA_RANGES["all"]) -> float | None:
    """AP of one class at one IoU threshold; None when there is no ground truth."""
    _, tp, n_pos = _match(dets, truths, iou_thr, area_rng)
    if n_pos == 0:
        return None
    if len(tp) == 0:
        return 0.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(~tp)
    recall = ctp / n_pos
    precision = ctp / (ctp + cfp)
    return interpolated_ap(recall, precision)


def _mean(vals: list[float | None]) -> float | None:
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def evaluate(dets: Sequence[Detection], truths: Sequence[Detection]) -> MapReport:
    classes = sorted({g.class_id for g in truths})
    dets_by_cls: dict[int, list[Detection]] = defaultdict(list)
    gts_by_cls: dict[int, list[Detection]] = defaultdict(list)
    for d in dets:
        dets_by_cls[d.class_id].append(d)
    for g in truths:
        gts_by_cls[g.class_id].append(g)

    per_class: dict[int, dict[str, float | None]] = {}
    for c in classes:
        cd, cg = dets_by_cls[c], gts_by_cls[c]
        by_thr = {thr: average_precision(cd, cg, thr) for thr in IOU_THRESHOLDS}
        row = {
            "map": _mean(list(by_thr.values())),
            "map50": by_thr[0.5],
            "map75": by_thr[0.75],
        }
        for key, name in (("map_s", "small"), ("map_m", "medium"), ("map_l", "large")):
            row[key] = _mean([average_precision(cd, cg, thr, AREA_RANGES[name]) for thr in IOU_THRESHOLDS])
        per_class[c] = row

    def over_classes(key: str) -> float | None:
        return _mean([per_class[c][key] for c in classes])

    return MapReport(
        map=over_classes("map"),
        map50=over_classes("map50"),
        map75=over_classes("map75"),
        map_s=over_classes("map_s"),
        map_m=over_classes("map_m"),
        map_l=over_classes("map_l"),
        per_class=per_class,
    )
