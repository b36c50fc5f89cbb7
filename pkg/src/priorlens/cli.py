"""Command-line entry point: ``priorlens <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or configuration, 2 acceptance
failure (``demo`` only).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .attention import MASK_MODES, AttentionConfig, motion_prior_attention
from .config import ConfigError, RunConfig
from .evaluation import evaluate
from .io import read_detections, read_feature_stack, write_detections, write_feature_stack, write_json
from .losses import random_gradient_check
from .overlay import write_svg
from .refiner import RefinerConfig, build_all_tracklets, find_region, refine_videos, threshold_filter
from .synth import SceneSpec, feature_stack_from_scene, generate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2

log = logging.getLogger("priorlens")


class _Parser(argparse.ArgumentParser):
    """Usage errors count as invalid input (exit 1), not acceptance failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _threads() -> int:
    raw = os.environ.get("PRIORLENS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"PRIORLENS_THREADS must be an integer, got {raw!r}")


def _image_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        size = int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    if size[0] <= 0 or size[1] <= 0:
        raise argparse.ArgumentTypeError("image size must be positive")
    return size


def _emit(obj, path: str | None) -> None:
    if path:
        write_json(obj, path)
    else:
        json.dump(obj, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


def _refiner_cfg(args) -> RefinerConfig:
    return RefinerConfig(sigma=args.sigma, d=args.d, eps=args.eps, min_iou=args.min_iou, min_pts=args.min_pts)


def cmd_attend(args) -> int:
    stack = read_feature_stack(args.features)
    cfg = AttentionConfig(reference_frame=args.ref_frame, mask_mode=args.mode, binary_threshold=args.binary_threshold)
    cfg.check(stack)
    res = motion_prior_attention(stack, cfg)
    _emit(
        {
            "n": stack.n,
            "t": stack.t,
            "c": stack.c,
            "mask_mode": cfg.mask_mode,
            "reference_frame": cfg.reference_frame,
            "alignment_scores": res.scores.tolist(),
            "selection": res.selection.indices.tolist(),
            "output": res.output.tolist(),
        },
        args.out,
    )
    return EXIT_OK


def cmd_refine(args) -> int:
    dets = read_detections(args.inp)
    cfg = _refiner_cfg(args)
    refined, reports = refine_videos(dets, args.image_size, cfg, workers=_threads())
    write_detections(refined, args.out)
    if args.report:
        write_json({"videos": [r.to_dict() for r in reports]}, args.report)
    return EXIT_OK


def cmd_vp(args) -> int:
    dets = read_detections(args.inp)
    cfg = _refiner_cfg(args)
    videos = sorted({d.video_id for d in dets})
    if len(videos) > 1:
        raise ConfigError(f"vp expects a single video, found {len(videos)}: {videos}")
    kept = threshold_filter(dets, cfg.sigma)
    tracklets = build_all_tracklets(kept, cfg)
    inter, region = find_region(tracklets, args.image_size, cfg)
    out = {
        "video_id": videos[0] if videos else "",
        "n_tracklets": len(tracklets),
        "n_intersections": len(inter),
        "region": None
        if region is None
        else {"centroid": list(region.centroid.as_tuple()), "radius": region.radius, "members": len(region.members)},
    }
    _emit(out, args.out)
    if args.svg:
        hits = [] if region is None else [tr.fitted_line is not None and region.contains_line(tr.fitted_line) for tr in tracklets]
        write_svg(args.svg, args.image_size, tracklets, inter, region, hits, title=out["video_id"])
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        data = json.loads(Path(args.spec).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.spec}: invalid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{args.spec}: expected a JSON object")
    if args.seed is not None:
        data["seed"] = args.seed
    spec = SceneSpec.from_dict(data)
    scene = generate(spec)
    write_detections(scene.detections, args.out_dets)
    if args.out_truth:
        write_detections(scene.truth, args.out_truth)
    if args.out_features:
        stack = feature_stack_from_scene(scene, c=args.channels, seed=spec.seed, frames=args.frames)
        write_feature_stack(stack, args.out_features)
    return EXIT_OK


def cmd_eval(args) -> int:
    report = evaluate(read_detections(args.dets), read_detections(args.truth))
    _emit(report.to_dict(), args.report)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    errs = random_gradient_check(args.seed, n_points=args.points)
    for name, err in errs.items():
        print(f"{name}: max relative error {err:.3e}")
    return EXIT_OK if max(errs.values()) < 1e-5 else EXIT_FAILED


def cmd_demo(args) -> int:
    from .pipeline import run_demo

    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    report, scene, res = run_demo(cfg)
    _emit(report, args.report or cfg.report)
    svg = args.svg or cfg.svg
    if svg:
        spec = scene.spec
        write_svg(svg, (spec.image_w, spec.image_h), res.tracklets, res.intersections, res.region, res.relabeled,
                  title=f"seed {cfg.seed}")
    if report["failures"]:
        for f in report["failures"]:
            print(f"FAIL: {f}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="priorlens", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("attend", help="motion-prior attention over a binary feature stack")
    a.add_argument("--features", required=True)
    a.add_argument("--mode", choices=MASK_MODES, default="motion_prior")
    a.add_argument("--ref-frame", type=int, default=0)
    a.add_argument("--binary-threshold", type=float, default=0.5)
    a.add_argument("--out")
    a.set_defaults(func=cmd_attend)

    def refiner_flags(sp):
        sp.add_argument("--in", dest="inp", required=True)
        sp.add_argument("--image-size", type=_image_size, required=True)
        sp.add_argument("--sigma", type=float, default=0.9)
        sp.add_argument("--d", type=int, default=5)
        sp.add_argument("--eps", type=float, default=1.0, help="DBSCAN radius, percent of the image diagonal")
        sp.add_argument("--min-iou", type=float, default=0.1)
        sp.add_argument("--min-pts", type=int, default=2)

    r = sub.add_parser("refine", help="refine pseudo labels with the vanishing-point prior")
    refiner_flags(r)
    r.add_argument("--out", required=True)
    r.add_argument("--report")
    r.set_defaults(func=cmd_refine)

    v = sub.add_parser("vp", help="estimate the vanishing region of one video")
    refiner_flags(v)
    v.add_argument("--out")
    v.add_argument("--svg")
    v.set_defaults(func=cmd_vp)

    s = sub.add_parser("synth", help="generate a synthetic scene")
    s.add_argument("--spec", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dets", required=True)
    s.add_argument("--out-truth")
    s.add_argument("--out-features")
    s.add_argument("--channels", type=int, default=16)
    s.add_argument("--frames", type=int)
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="six-metric mAP report")
    e.add_argument("--dets", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--report")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gradcheck", help="finite-difference check of the loss gradients")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--points", type=int, default=100)
    g.set_defaults(func=cmd_gradcheck)

    d = sub.add_parser("demo", help="end-to-end synthetic pipeline with acceptance checks")
    d.add_argument("--seed", type=int)
    d.add_argument("--config")
    d.add_argument("--report")
    d.add_argument("--svg")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"priorlens {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
