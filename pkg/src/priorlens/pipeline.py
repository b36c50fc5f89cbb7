"""End-to-end synthetic run: generate, refine, evaluate, attend."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Any

import numpy as np

from .attention import motion_prior_attention
from .config import RunConfig
from .evaluation import evaluate
from .refiner import RefineResult, refine, threshold_filter
from .synth import SynthScene, feature_stack_from_scene, generate

VP_TOLERANCE_PX = 15.0
IDENTITY_RECOVERY_MIN = 0.95


def accuracy(dets, truth) -> float:
    if not truth:
        return 1.0
    return sum(d.class_id == g.class_id for d, g in zip(dets, truth)) / len(truth)


def _round(x: float | None, nd: int = 6) -> float | None:
    return None if x is None else round(float(x), nd)


def run_demo(cfg: RunConfig) -> tuple[dict[str, Any], SynthScene, RefineResult]:
    """Return the JSON-ready report plus the scene and refinement it came from."""
    spec = replace(cfg.scene, seed=cfg.seed)
    scene = generate(spec)
    image_size = (spec.image_w, spec.image_h)
    res = refine(scene.detections, image_size, cfg.refiner)

    kept_truth = [scene.truth[i] for i in res.kept]
    kept_input = [scene.detections[i] for i in res.kept]
    input_acc = accuracy(kept_input, kept_truth)
    refined_acc = accuracy(res.detections, kept_truth)

    map_before = evaluate(threshold_filter(scene.detections, cfg.refiner.sigma), scene.truth)
    map_after = evaluate(res.detections, scene.truth)

    vp_err = None
    if res.region is not None:
        vp_err = math.dist(res.region.centroid.as_tuple(), scene.true_vp.as_tuple())

    frames = min(cfg.attention_frames, spec.t)
    attn: dict[str, Any]
    try:
        stack = feature_stack_from_scene(scene, c=cfg.channels, seed=cfg.seed, noise=cfg.feature_noise, frames=frames)
    except ValueError as exc:
        attn = {"skipped": str(exc)}
    else:
        out = motion_prior_attention(stack, cfg.attention)
        ref = cfg.attention.reference_frame
        picked = stack.roi_ids[np.arange(stack.t)[None, :], out.selection.indices]
        recovered = float(np.mean(picked == stack.roi_ids[ref][:, None]))
        attn = {
            "n": stack.n,
            "t": stack.t,
            "c": stack.c,
            "mask_mode": cfg.attention.mask_mode,
            "identity_recovery": _round(recovered),
            "alignment_scores": [_round(m) for m in out.scores],
            "output_norm": _round(np.linalg.norm(out.output)),
        }

    failures = []
    if res.region is None:
        failures.append("no vanishing region found")
    elif vp_err > VP_TOLERANCE_PX:
        failures.append(f"vanishing point error {vp_err:.2f} px exceeds {VP_TOLERANCE_PX} px")
    if refined_acc < input_acc:
        failures.append(f"refined accuracy {refined_acc:.4f} below input accuracy {input_acc:.4f}")
    if spec.class_corruption_rate < 0.5 and refined_acc < 1.0:
        failures.append(f"refined accuracy {refined_acc:.4f} < 1.0")
    if (map_after.map or 0.0) < (map_before.map or 0.0):
        failures.append("refined mAP below corrupted mAP")
    if "identity_recovery" in attn and attn["identity_recovery"] < IDENTITY_RECOVERY_MIN:
        failures.append(f"attention identity recovery {attn['identity_recovery']} < {IDENTITY_RECOVERY_MIN}")

    report = {
        "seed": cfg.seed,
        "scene": spec.to_dict(),
        "detections": len(scene.detections),
        "corrupted": int(sum(scene.corrupted)),
        "refine": res.report.to_dict(),
        "relabels": res.report.relabels,
        "input_accuracy": _round(input_acc),
        "refined_accuracy": _round(refined_acc),
        "vp_error_px": _round(vp_err),
        "map_corrupted": {k: _round(v) for k, v in map_before.metrics().items()},
        "map_refined": {k: _round(v) for k, v in map_after.metrics().items()},
        "attention": attn,
        "failures": failures,
        "passed": not failures,
    }
    rep = report["refine"]
    if rep["region_centroid"] is not None:
        rep["region_centroid"] = [_round(v) for v in rep["region_centroid"]]
    rep["region_radius"] = _round(rep["region_radius"])
    return report, scene, res
