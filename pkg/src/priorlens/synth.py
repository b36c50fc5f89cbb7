"""Seeded synthetic traffic scenes with a known vanishing point.

Every object drives along a straight ray leaving the vanishing point at
constant speed. All randomness comes from ``numpy.random.default_rng``
(PCG64), so a scene is a pure function of its :class:`SceneSpec`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from .attention import FeatureStack
from .geometry import BBox, Point2
from .losses import NUM_CLASSES
from .refiner import Detection


@dataclass(frozen=True)
class SceneSpec:
    image_w: int = 1920
    image_h: int = 1080
    vp: tuple[float, float] = (960.0, 540.0)
    n_objects: int = 12
    t: int = 30
    speed_range: tuple[float, float] = (6.0, 12.0)
    box_size_range: tuple[float, float] = (40.0, 80.0)
    center_noise_sigma: float = 2.0
    class_corruption_rate: float = 0.0
    score_range: tuple[float, float] = (0.9, 1.0)
    seed: int = 0
    # distance from the vanishing point at which objects appear
    start_dist_range: tuple[float, float] = (80.0, 260.0)
    # corruption is stratified over blocks of this many frames per object
    corruption_block: int = 5
    video_id: str = "synth"

    def __post_init__(self) -> None:
        for name in ("vp", "speed_range", "box_size_range", "score_range", "start_dist_range"):
            val = getattr(self, name)
            if len(val) != 2:
                raise ValueError(f"{name} must have two entries")
            object.__setattr__(self, name, (float(val[0]), float(val[1])))
        for name in ("speed_range", "box_size_range", "start_dist_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        lo, hi = self.score_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"score_range must lie within [0, 1], got {(lo, hi)}")
        if not 0.0 <= self.class_corruption_rate < 0.5:
            raise ValueError("class_corruption_rate must lie in [0, 0.5)")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image size must be positive")
        if self.n_objects < 1 or self.t < 2:
            raise ValueError("need at least one object and two frames")
        if self.center_noise_sigma < 0:
            raise ValueError("center_noise_sigma must be non-negative")
        if self.corruption_block < 1:
            raise ValueError("corruption_block must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SceneSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SceneSpec keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass
class SynthScene:
    spec: SceneSpec
    detections: list[Detection]  # possibly corrupted classes
    truth: list[Detection]  # clean classes, same boxes and order
    true_vp: Point2
    object_ids: list[int] = field(default_factory=list)

    @property
    def corrupted(self) -> list[bool]:
        return [d.class_id != g.class_id for d, g in zip(self.detections, self.truth)]


def _inside(box: BBox, w: float, h: float) -> bool:
    return box.x >= 0 and box.y >= 0 and box.x + box.w <= w and box.y + box.h <= h


def _corrupt_counts(rng: np.random.Generator, length: int, rate: float) -> int:
    # stochastic rounding keeps the expected count at rate * length
    raw = rate * length
    k = int(math.floor(raw))
    if rng.random() < raw - k:
        k += 1
    # a strict minority per block keeps the block majority correct
    return min(k, (length - 1) // 2)


def generate(spec: SceneSpec) -> SynthScene:
    rng = np.random.default_rng(spec.seed)
    vx, vy = spec.vp
    n = spec.n_objects
    offset = rng.uniform(0.0, 2 * math.pi)
    # one angular sector per object keeps paths apart
    angles = offset + (np.arange(n) + rng.uniform(0.2, 0.8, size=n)) * (2 * math.pi / n)
    starts = rng.uniform(*spec.start_dist_range, size=n)
    speeds = rng.uniform(*spec.speed_range, size=n)
    widths = rng.uniform(*spec.box_size_range, size=n)
    heights = rng.uniform(*spec.box_size_range, size=n)
    classes = rng.integers(1, NUM_CLASSES + 1, size=n)
    noise = rng.normal(0.0, 1.0, size=(n, spec.t, 2)) * spec.center_noise_sigma
    scores = rng.uniform(*spec.score_range, size=(n, spec.t))

    truth: list[Detection] = []
    obj_ids: list[int] = []
    for o in range(n):
        ux, uy = math.cos(angles[o]), math.sin(angles[o])
        for f in range(spec.t):
            r = starts[o] + speeds[o] * f
            cx = vx + r * ux + noise[o, f, 0]
            cy = vy + r * uy + noise[o, f, 1]
            box = BBox(cx - widths[o] / 2, cy - heights[o] / 2, float(widths[o]), float(heights[o]))
            if not _inside(box, spec.image_w, spec.image_h):
                break
            truth.append(Detection(f, box, int(classes[o]), float(scores[o, f]), spec.video_id))
            obj_ids.append(o)

    labels = [d.class_id for d in truth]
    if spec.class_corruption_rate > 0:
        blocks: dict[tuple[int, int], list[int]] = {}
        for i, d in enumerate(truth):
            blocks.setdefault((obj_ids[i], d.frame // spec.corruption_block), []).append(i)
        for key in sorted(blocks):
            members = blocks[key]
            k = _corrupt_counts(rng, len(members), spec.class_corruption_rate)
            if k == 0:
                continue
            for i in rng.choice(members, size=k, replace=False):
                wrong = int(rng.integers(1, NUM_CLASSES))
                labels[i] = wrong if wrong < truth[i].class_id else wrong + 1

    dets = [Detection(d.frame, d.bbox, labels[i], d.score, d.video_id) for i, d in enumerate(truth)]
    order = sorted(range(len(dets)), key=lambda i: (dets[i].frame, obj_ids[i]))
    return SynthScene(
        spec=spec,
        detections=[dets[i] for i in order],
        truth=[truth[i] for i in order],
        true_vp=Point2(vx, vy),
        object_ids=[obj_ids[i] for i in order],
    )


def feature_stack_from_scene(scene: SynthScene, c: int = 16, seed: int = 0, noise: float = 0.05,
                             frames: int | None = None) -> FeatureStack:
    """RoI features for the objects visible in every one of the first ``frames`` frames.

    Each object gets one random unit vector, repeated per frame with
    Gaussian jitter of scale ``noise``. RoI order is shuffled per frame;
    ``roi_ids`` records the generating object of every RoI.
    """
    t = scene.spec.t if frames is None else frames
    if t < 2:
        raise ValueError("need at least two frames")
    present: dict[int, dict[int, Detection]] = {}
    for oid, d in zip(scene.object_ids, scene.truth):
        if d.frame < t:
            present.setdefault(oid, {})[d.frame] = d
    objects = sorted(o for o, fr in present.items() if len(fr) == t)
    if not objects:
        raise ValueError(f"no object is visible in all of the first {t} frames")
    n = len(objects)
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n, c))
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    values = np.empty((t, n, c))
    centers = np.empty((t, n, 2))
    ids = np.empty((t, n), dtype=np.int64)
    for k in range(t):
        perm = rng.permutation(n)
        jitter = rng.normal(scale=noise, size=(n, c))
        for j, src in enumerate(perm):
            values[k, j] = base[src] + jitter[j]
            p = present[objects[src]][k].center
            centers[k, j] = (p.x, p.y)
            ids[k, j] = objects[src]
    return FeatureStack(values, centers, roi_ids=ids)
