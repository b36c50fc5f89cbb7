"""Motion-prior tools for fixed-camera traffic video: prior-masked RoI
attention, vanishing-point pseudo-label refinement, synthetic scenes and
mAP evaluation."""

from .attention import (
    AttentionConfig,
    FeatureStack,
    alignment_score,
    apply_masked_attention,
    attention_map,
    build_mask,
    motion_prior_attention,
    select_trajectory,
)
from .evaluation import MapReport, average_precision, evaluate
from .geometry import BBox, Line2, Point2, bbox_center, iou, line_intersection
from .losses import BoxPair, ClassDistribution, bbox_loss, cls_loss, smooth_l1, total_loss
from .refiner import Detection, RefinerConfig, Tracklet, build_all_tracklets, build_tracklets, refine, relabel, threshold_filter
from .synth import SceneSpec, SynthScene, feature_stack_from_scene, generate
from .vanishing import VanishingRegion, dbscan, fit_line, identify_region, pairwise_intersections

__all__ = [
    "alignment_score",
    "apply_masked_attention",
    "attention_map",
    "AttentionConfig",
    "average_precision",
    "BBox",
    "bbox_center",
    "bbox_loss",
    "BoxPair",
    "build_all_tracklets",
    "build_mask",
    "build_tracklets",
    "ClassDistribution",
    "cls_loss",
    "dbscan",
    "Detection",
    "evaluate",
    "feature_stack_from_scene",
    "FeatureStack",
    "fit_line",
    "generate",
    "identify_region",
    "iou",
    "Line2",
    "line_intersection",
    "MapReport",
    "motion_prior_attention",
    "pairwise_intersections",
    "Point2",
    "refine",
    "RefinerConfig",
    "relabel",
    "SceneSpec",
    "select_trajectory",
    "smooth_l1",
    "SynthScene",
    "threshold_filter",
    "total_loss",
    "Tracklet",
    "VanishingRegion",
]

__version__ = "0.1.0"
