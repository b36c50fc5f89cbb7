"""Pseudo-label refinement driven by the vanishing-point motion prior.

Pipeline: drop low-confidence labels, chain the survivors into short
IoU tracklets, locate the vanishing region from the tracklet lines, and
give every detection on a tracklet through that region the tracklet's
majority class.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

from .geometry import PARALLEL_TOL, BBox, Line2, Point2, bbox_center, iou
from .losses import NUM_CLASSES
from .vanishing import (
    IntersectionSet,
    VanishingRegion,
    eps_pixels,
    fit_line,
    identify_region,
    pairwise_intersections,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Detection:
    frame: int
    bbox: BBox
    class_id: int
    score: float
    video_id: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if not 1 <= self.class_id <= NUM_CLASSES:
            raise ValueError(f"class_id {self.class_id} outside 1..{NUM_CLASSES}")
        if self.frame < 0:
            raise ValueError(f"negative frame index {self.frame}")

    @property
    def center(self) -> Point2:
        return bbox_center(self.bbox)


@dataclass
class Tracklet:
    """Detections chained over consecutive frames.

    ``indices`` point into the detection list the tracklet was built from.
    """

    indices: list[int]
    detections: list[Detection]
    fitted_line: Line2 | None = None

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def frames(self) -> list[int]:
        return [d.frame for d in self.detections]

    def centers(self) -> list[Point2]:
        return [d.center for d in self.detections]

    def fit(self) -> Line2 | None:
        """Fit and cache the trajectory line; None if too short or stationary."""
        if len(self) < 2:
            self.fitted_line = None
            return None
        try:
            self.fitted_line = fit_line(self.centers())
        except ValueError:
            self.fitted_line = None
        return self.fitted_line


@dataclass(frozen=True)
class RefinerConfig:
    sigma: float = 0.9
    d: int = 5
    min_iou: float = 0.1
    eps: float = 1.0  # percent of the image diagonal
    min_pts: int = 2
    parallel_tol: float = PARALLEL_TOL

    def __post_init__(self) -> None:
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


def threshold_filter(dets: Sequence[Detection], sigma: float) -> list[Detection]:
    return [d for d in dets if d.score >= sigma]


def _group_by_frame(dets: Sequence[Detection]) -> dict[int, list[int]]:
    by_frame: dict[int, list[int]] = defaultdict(list)
    for i, d in enumerate(dets):
        by_frame[d.frame].append(i)
    return by_frame


def _chain_clip(dets: Sequence[Detection], by_frame: dict[int, list[int]], start: int, stop: int,
                min_iou: float) -> list[Tracklet]:
    """Chain detections of frame ``start`` forward through frames < ``stop``."""
    seeds = sorted(by_frame.get(start, []), key=lambda i: -dets[i].score)
    claimed: dict[int, set[int]] = defaultdict(set)
    tracklets = []
    for seed in seeds:
        chain = [seed]
        cur = seed
        for frame in range(start + 1, stop):
            best, best_iou = None, -1.0
            for cand in by_frame.get(frame, []):
                if cand in claimed[frame]:
                    continue
                ov = iou(dets[cur].bbox, dets[cand].bbox)
                # strict > keeps the lowest index on ties
                if ov > best_iou:
                    best, best_iou = cand, ov
            if best is None or best_iou < min_iou:
                break
            claimed[frame].add(best)
            chain.append(best)
            cur = best
        tracklets.append(Tracklet(chain, [dets[i] for i in chain]))
    return tracklets


def build_tracklets(dets: Sequence[Detection], start: int, cfg: RefinerConfig = RefinerConfig(),
                    stop: int | None = None) -> list[Tracklet]:
    """Tracklets seeded at frame ``start`` spanning up to frames start..start+d.

    ``stop`` (exclusive) caps the clip earlier; :func:`build_all_tracklets`
    uses it so neighbouring clips never share a detection.
    """
    end = start + cfg.d + 1 if stop is None else min(stop, start + cfg.d + 1)
    return _chain_clip(dets, _group_by_frame(dets), start, end, cfg.min_iou)


def build_all_tracklets(dets: Sequence[Detection], cfg: RefinerConfig = RefinerConfig()) -> list[Tracklet]:
    """Tracklets over non-overlapping clips starting at frames 0, d, 2d, ..."""
    if not dets:
        return []
    by_frame = _group_by_frame(dets)
    last = max(by_frame)
    out: list[Tracklet] = []
    for start in range(0, last + 1, cfg.d):
        out.extend(_chain_clip(dets, by_frame, start, start + cfg.d, cfg.min_iou))
    return out


def clip_starts(t: int, d: int) -> list[int]:
    return list(range(0, t, d))


def majority_class(dets: Iterable[Detection]) -> int:
    """Most frequent class; ties go to the larger summed score, then the lower id."""
    count: dict[int, int] = defaultdict(int)
    conf: dict[int, float] = defaultdict(float)
    for d in dets:
        count[d.class_id] += 1
        conf[d.class_id] += d.score
    return min(count, key=lambda c: (-count[c], -conf[c], c))


def relabel(dets: Sequence[Detection], tracklets: Sequence[Tracklet],
            region: VanishingRegion) -> tuple[list[Detection], int, list[bool]]:
    """Unify classes along tracklets whose line passes through ``region``.

    Returns the updated detections, the number of detections whose class
    changed, and per-tracklet flags telling which tracklets were relabeled.
    """
    out = list(dets)
    changed = 0
    hits = []
    for tr in tracklets:
        line = tr.fitted_line if tr.fitted_line is not None else tr.fit()
        hit = line is not None and region.contains_line(line)
        hits.append(hit)
        if not hit:
            continue
        cls = majority_class(out[i] for i in tr.indices)
        for i in tr.indices:
            if out[i].class_id != cls:
                out[i] = replace(out[i], class_id=cls)
                changed += 1
    return out, changed, hits


@dataclass
class RefineReport:
    video_id: str = ""
    n_input: int = 0
    n_kept: int = 0
    n_tracklets: int = 0
    n_intersections: int = 0
    region_centroid: tuple[float, float] | None = None
    region_radius: float | None = None
    region_members: int = 0
    relabels: int = 0
    no_region: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RefineResult:
    detections: list[Detection]
    report: RefineReport
    kept: list[int]  # indices of the surviving input detections
    tracklets: list[Tracklet] = field(default_factory=list)
    intersections: IntersectionSet = field(default_factory=IntersectionSet)
    region: VanishingRegion | None = None
    relabeled: list[bool] = field(default_factory=list)


def find_region(tracklets: Sequence[Tracklet], image_size: tuple[float, float],
                cfg: RefinerConfig) -> tuple[IntersectionSet, VanishingRegion | None]:
    lines = [tr.fit() for tr in tracklets]
    inter = pairwise_intersections(lines, cfg.parallel_tol)
    eps_px = eps_pixels(cfg.eps, *image_size)
    return inter, identify_region(inter, eps_px, cfg.min_pts)


def refine(dets: Sequence[Detection], image_size: tuple[float, float],
           cfg: RefinerConfig = RefinerConfig()) -> RefineResult:
    """Refine the pseudo labels of a single video."""
    kept = [i for i, d in enumerate(dets) if d.score >= cfg.sigma]
    filtered = [dets[i] for i in kept]
    tracklets = build_all_tracklets(filtered, cfg)
    inter, region = find_region(tracklets, image_size, cfg)
    report = RefineReport(
        video_id=dets[0].video_id if dets else "",
        n_input=len(dets),
        n_kept=len(filtered),
        n_tracklets=len(tracklets),
        n_intersections=len(inter),
    )
    if region is None:
        logger.info("no vanishing region found; labels left unchanged")
        report.no_region = True
        return RefineResult(filtered, report, kept, tracklets, inter, None, [False] * len(tracklets))
    refined, changed, hits = relabel(filtered, tracklets, region)
    report.region_centroid = region.centroid.as_tuple()
    report.region_radius = region.radius
    report.region_members = len(region.members)
    report.relabels = changed
    return RefineResult(refined, report, kept, tracklets, inter, region, hits)


def refine_videos(dets: Sequence[Detection], image_size: tuple[float, float], cfg: RefinerConfig = RefinerConfig(),
                  workers: int = 1) -> tuple[list[Detection], list[RefineReport]]:
    """Refine a multi-video detection stream, one independent pass per video_id.

    Output is ordered by (video_id, frame), stable within a frame.
    """
    videos: dict[str, list[Detection]] = defaultdict(list)
    for d in dets:
        videos[d.video_id].append(d)
    names = sorted(videos)
    if workers > 1 and len(names) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda v: refine(videos[v], image_size, cfg), names))
    else:
        results = [refine(videos[v], image_size, cfg) for v in names]
    out: list[Detection] = []
    for res in results:
        out.extend(sorted(res.detections, key=lambda d: d.frame))
    return out, [r.report for r in results]
