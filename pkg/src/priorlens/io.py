"""File formats: binary feature stacks and detection JSONL."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from .attention import FeatureStack
from .geometry import BBox
from .refiner import Detection

FSTK_MAGIC = b"FSTK"
_HEADER = struct.Struct("<4sIII")


def write_feature_stack(stack: FeatureStack, path: str | Path) -> None:
    """Layout: magic, u32 n, t, c, then f32 centers (frame-major), then f32 features."""
    header = _HEADER.pack(FSTK_MAGIC, stack.n, stack.t, stack.c)
    centers = np.ascontiguousarray(stack.centers, dtype="<f4").tobytes()
    values = np.ascontiguousarray(stack.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + centers + values)


def read_feature_stack(path: str | Path) -> FeatureStack:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: too short for a feature stack header")
    magic, n, t, c = _HEADER.unpack_from(data)
    if magic != FSTK_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {FSTK_MAGIC!r}")
    n_centers = n * t * 2
    n_values = n * t * c
    expected = _HEADER.size + 4 * (n_centers + n_values)
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for n={n}, t={t}, c={c}, got {len(data)}")
    floats = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    return FeatureStack.from_flat(n, t, c, floats[n_centers:], floats[:n_centers])


def detection_to_json(d: Detection) -> dict:
    return {
        "video_id": d.video_id,
        "frame": d.frame,
        "bbox": d.bbox.as_list(),
        "class_id": d.class_id,
        "score": d.score,
    }


def detection_from_json(obj: dict) -> Detection:
    missing = {"frame", "bbox", "class_id", "score"} - set(obj)
    if missing:
        raise ValueError(f"detection record missing fields {sorted(missing)}")
    bbox = obj["bbox"]
    if len(bbox) != 4:
        raise ValueError(f"bbox must have 4 entries, got {bbox!r}")
    return Detection(
        frame=int(obj["frame"]),
        bbox=BBox(*(float(v) for v in bbox)),
        class_id=int(obj["class_id"]),
        score=float(obj["score"]),
        video_id=str(obj.get("video_id", "")),
    )


def read_detections(path: str | Path) -> list[Detection]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(detection_from_json(json.loads(line)))
            except (ValueError, TypeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_detections(dets: Iterable[Detection], path: str | Path) -> None:
    with open(path, "w") as fh:
        for d in dets:
            fh.write(json.dumps(detection_to_json(d)) + "\n")


def write_json(obj, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
