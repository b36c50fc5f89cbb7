import numpy as np
import pytest

from priorlens.geometry import BBox, Line2, Point2
from priorlens.refiner import (
    Detection,
    RefinerConfig,
    Tracklet,
    build_all_tracklets,
    build_tracklets,
    clip_starts,
    majority_class,
    refine,
    refine_videos,
    relabel,
    threshold_filter,
)
from priorlens.synth import SceneSpec, generate
from priorlens.vanishing import VanishingRegion

CAR, TRUCK, BUS = 1, 2, 3


def det(frame, x, y, size=20.0, cls=CAR, score=0.95, vid=""):
    return Detection(frame, BBox(x, y, size, size), cls, score, vid)


def corner_iou(a, b):
    """Independent IoU on corner coordinates."""
    ax2, ay2, bx2, by2 = a.x + a.w, a.y + a.h, b.x + b.w, b.y + b.h
    w = max(0.0, min(ax2, bx2) - max(a.x, b.x))
    h = max(0.0, min(ay2, by2) - max(a.y, b.y))
    union = a.w * a.h + b.w * b.h - w * h
    return w * h / union if union > 0 else 0.0


def oracle_chains(dets, start, stop, min_iou):
    """Exhaustive per-step IoU scan with one-to-one claiming, seeds by descending score."""
    seeds = [i for i, d in enumerate(dets) if d.frame == start]
    seeds.sort(key=lambda i: (-dets[i].score, i))
    claimed = set()
    chains = []
    for s in seeds:
        chain = [s]
        for f in range(start + 1, stop):
            scores = [(corner_iou(dets[chain[-1]].bbox, d.bbox), -i, i)
                      for i, d in enumerate(dets) if d.frame == f and i not in claimed]
            if not scores:
                break
            ov, _, i = max(scores)
            if ov < min_iou:
                break
            claimed.add(i)
            chain.append(i)
        chains.append(chain)
    return chains


# --- threshold ------------------------------------------------------------------


def test_threshold_filter():
    a, b = det(0, 0, 0, score=0.95), det(0, 50, 0, score=0.5)
    assert threshold_filter([a, b], 0.9) == [a]
    assert threshold_filter([a, b], 0.0) == [a, b]
    assert threshold_filter([a, b], 1.0) == []


def test_threshold_filter_subsequence():
    rng = np.random.default_rng(0)
    dets = [det(0, i * 30, 0, score=float(s)) for i, s in enumerate(rng.uniform(size=50))]
    kept = threshold_filter(dets, 0.6)
    assert all(d.score >= 0.6 for d in kept)
    it = iter(dets)
    assert all(any(k is d for d in it) for k in kept)


def test_detection_validation():
    with pytest.raises(ValueError):
        det(0, 0, 0, score=1.5)
    with pytest.raises(ValueError):
        det(0, 0, 0, cls=11)


# --- tracklets ------------------------------------------------------------------


def test_single_mover_single_tracklet():
    dets = [det(f, 100 + 2 * f, 50) for f in range(6)]
    tracks = build_tracklets(dets, 0, RefinerConfig(d=5))
    assert len(tracks) == 1
    assert tracks[0].indices == oracle_chains(dets, 0, 6, 0.1)[0] == list(range(6))


def test_disjoint_boxes_give_singletons():
    dets = [det(f, 100 * f, 0) for f in range(6)]
    tracks = build_tracklets(dets, 0, RefinerConfig(d=5))
    assert [t.indices for t in tracks] == [[0]]


def test_two_parallel_movers_no_swap():
    dets = []
    for f in range(6):
        dets.append(det(f, 10 + 3 * f, 10, score=0.91))
        dets.append(det(f, 10 + 3 * f, 40, score=0.97))
    tracks = build_tracklets(dets, 0, RefinerConfig(d=5))
    assert [t.indices for t in tracks] == oracle_chains(dets, 0, 6, 0.1)
    for t in tracks:
        ys = {d.bbox.y for d in t.detections}
        assert len(ys) == 1 and len(t) == 6


def test_one_to_one_claim_goes_to_higher_score():
    dets = [
        det(0, 0, 0, score=0.91),
        det(0, 4, 0, score=0.99),
        det(1, 2, 0),
    ]
    tracks = build_tracklets(dets, 0, RefinerConfig(d=2))
    by_seed = {t.indices[0]: t.indices for t in tracks}
    assert by_seed[1] == [1, 2]
    assert by_seed[0] == [0]


def test_iou_tie_goes_to_lowest_index():
    dets = [det(0, 10, 0), det(1, 0, 0), det(1, 20, 0)]
    tracks = build_tracklets(dets, 0, RefinerConfig(d=2))
    assert tracks[0].indices == [0, 1]


def test_random_clips_match_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        dets = []
        for f in range(6):
            for _ in range(rng.integers(0, 6)):
                x, y = rng.uniform(0, 60, size=2)
                dets.append(det(f, float(x), float(y), score=float(rng.uniform(0.9, 1.0))))
        got = [t.indices for t in build_tracklets(dets, 0, RefinerConfig(d=5))]
        assert got == oracle_chains(dets, 0, 6, 0.1)


def test_clip_starts_and_all_tracklets():
    assert clip_starts(15, 5) == [0, 5, 10]
    assert build_all_tracklets([]) == []
    dets = [det(f, 100 + 2 * f, 50) for f in range(15)]
    tracks = build_all_tracklets(dets, RefinerConfig(d=5))
    assert [t.frames for t in tracks] == [list(range(0, 5)), list(range(5, 10)), list(range(10, 15))]


def test_tracklets_disjoint_and_consecutive():
    scene = generate(SceneSpec(seed=3, class_corruption_rate=0.2))
    tracks = build_all_tracklets(scene.detections, RefinerConfig())
    seen = set()
    for t in tracks:
        assert not seen & set(t.indices)
        seen |= set(t.indices)
        frames = t.frames
        assert frames == list(range(frames[0], frames[0] + len(frames)))
        assert 1 <= len(t) <= RefinerConfig().d + 1


# --- relabel ---------------------------------------------------------------------


def region_at(x, y, radius=5.0):
    return VanishingRegion(Point2(x, y), [Point2(x, y)] * 2, radius)


def straight(classes, scores=None, y=50.0):
    scores = scores or [0.95] * len(classes)
    dets = [det(f, 10.0 * f, y, cls=c, score=s) for f, (c, s) in enumerate(zip(classes, scores))]
    return dets, Tracklet(list(range(len(dets))), list(dets))


def test_relabel_majority():
    dets, tr = straight([CAR, CAR, TRUCK])
    out, changed, hits = relabel(dets, [tr], region_at(500, 60))
    assert [d.class_id for d in out] == [CAR] * 3
    assert changed == 1 and hits == [True]


def test_relabel_skips_tracklets_missing_region():
    dets, tr = straight([CAR, CAR, TRUCK])
    out, changed, hits = relabel(dets, [tr], region_at(500, 500))
    assert out == dets and changed == 0 and hits == [False]


def test_relabel_tie_uses_confidence():
    dets, tr = straight([CAR, TRUCK], [0.9, 0.8])
    out, _, _ = relabel(dets, [tr], region_at(0, 60, radius=20))
    assert [d.class_id for d in out] == [CAR, CAR]
    assert majority_class([det(0, 0, 0, cls=BUS, score=0.9), det(1, 0, 0, cls=TRUCK, score=0.9)]) == TRUCK


def test_relabel_skips_short_tracklets():
    d = det(0, 0, 0, cls=TRUCK)
    out, changed, hits = relabel([d], [Tracklet([0], [d])], region_at(10, 10, radius=1e6))
    assert out == [d] and changed == 0 and hits == [False]


def test_region_line_membership():
    region = region_at(0, 10, radius=3)
    assert region.contains_line(Line2.from_slope(0, 7))
    assert not region.contains_line(Line2.from_slope(0, 6.5))


# --- refine --------------------------------------------------------------------


def test_refine_clean_scene_is_fixed_point():
    scene = generate(SceneSpec(seed=11))
    res = refine(scene.detections, (1920, 1080))
    assert res.report.relabels == 0
    assert res.detections == [scene.detections[i] for i in res.kept]


def test_refine_restores_corruption():
    scene = generate(SceneSpec(seed=12, class_corruption_rate=0.2))
    assert any(scene.corrupted)
    res = refine(scene.detections, (1920, 1080))
    truth = [scene.truth[i] for i in res.kept]
    assert [d.class_id for d in res.detections] == [g.class_id for g in truth]


def test_refine_parallel_only_has_no_region():
    dets = []
    for lane in range(4):
        dets += [det(f, 100 + 5 * f, 100 + 80 * lane) for f in range(10)]
    dets.sort(key=lambda d: d.frame)
    res = refine(dets, (1920, 1080))
    assert res.report.no_region
    assert res.detections == dets
    assert res.report.relabels == 0


def test_refine_only_changes_classes_and_is_idempotent():
    scene = generate(SceneSpec(seed=13, class_corruption_rate=0.3, score_range=(0.7, 1.0)))
    res = refine(scene.detections, (1920, 1080))
    for i, d in zip(res.kept, res.detections):
        src = scene.detections[i]
        assert (d.frame, d.bbox, d.score) == (src.frame, src.bbox, src.score)
    again = refine(res.detections, (1920, 1080))
    assert again.detections == res.detections
    assert again.report.relabels == 0


def test_refine_accuracy_does_not_drop():
    for seed in range(5):
        scene = generate(SceneSpec(seed=100 + seed, class_corruption_rate=0.2, score_range=(0.8, 1.0)))
        res = refine(scene.detections, (1920, 1080))
        truth = [scene.truth[i] for i in res.kept]
        before = sum(scene.detections[i].class_id == g.class_id for i, g in zip(res.kept, truth))
        after = sum(d.class_id == g.class_id for d, g in zip(res.detections, truth))
        assert after >= before


def test_refine_videos_orders_and_isolates():
    a = generate(SceneSpec(seed=1, class_corruption_rate=0.2, video_id="b"))
    b = generate(SceneSpec(seed=2, class_corruption_rate=0.2, video_id="a"))
    mixed = a.detections + b.detections
    out, reports = refine_videos(mixed, (1920, 1080))
    assert [r.video_id for r in reports] == ["a", "b"]
    keys = [(d.video_id, d.frame) for d in out]
    assert keys == sorted(keys)
    solo = refine(b.detections, (1920, 1080)).detections
    assert [d for d in out if d.video_id == "a"] == sorted(solo, key=lambda d: d.frame)
    threaded, _ = refine_videos(mixed, (1920, 1080), workers=4)
    assert threaded == out
