"""Self-attention over clip RoI features with a straight-trajectory prior mask.

Layout conventions: a clip holds ``t`` frames of ``n`` RoIs with ``c``
channels. Key/value rows and attention columns are flattened frame-major,
so column ``k * n + j`` is RoI ``j`` of frame ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Point2

MASK_MODES = ("motion_prior", "none", "softmax", "binary")

# displacements shorter than this count as a stationary object
_STATIONARY_PX = 1e-9


@dataclass(frozen=True)
class FeatureStack:
    """RoI features of one clip.

    ``values`` has shape (t, n, c); ``centers`` has shape (t, n, 2) holding
    the box center of RoI ``j`` in frame ``k`` at ``centers[k, j]``.
    ``roi_ids`` optionally records which generating object each RoI came
    from (synthetic data only).
    """

    values: np.ndarray
    centers: np.ndarray
    roi_ids: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        centers = np.ascontiguousarray(self.centers, dtype=np.float64)
        if values.ndim != 3:
            raise ValueError(f"values must be (t, n, c), got shape {values.shape}")
        t, n, c = values.shape
        if t < 2 or n < 1 or c < 1:
            raise ValueError(f"need t >= 2, n >= 1, c >= 1; got t={t}, n={n}, c={c}")
        if centers.shape != (t, n, 2):
            raise ValueError(f"centers shape {centers.shape} does not match (t, n, 2) = {(t, n, 2)}")
        if not (np.isfinite(values).all() and np.isfinite(centers).all()):
            raise ValueError("feature stack contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "centers", centers)

    @classmethod
    def from_flat(cls, n: int, t: int, c: int, values: Sequence[float], centers: Sequence[float]) -> "FeatureStack":
        """Build from flat frame-major buffers (the on-disk order)."""
        values = np.asarray(values, dtype=np.float64)
        centers = np.asarray(centers, dtype=np.float64)
        if values.size != n * t * c:
            raise ValueError(f"expected {n * t * c} feature values, got {values.size}")
        if centers.size != n * t * 2:
            raise ValueError(f"expected {n * t * 2} center coordinates, got {centers.size}")
        return cls(values.reshape(t, n, c), centers.reshape(t, n, 2))

    @property
    def t(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def c(self) -> int:
        return self.values.shape[2]

    def keys(self) -> np.ndarray:
        """The full (n*t, c) key/value matrix."""
        return self.values.reshape(self.t * self.n, self.c)

    def center(self, j: int, k: int) -> Point2:
        x, y = self.centers[k, j]
        return Point2(float(x), float(y))


@dataclass(frozen=True)
class AttentionConfig:
    reference_frame: int = 0
    mask_mode: str = "motion_prior"
    binary_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}, got {self.mask_mode!r}")
        if self.reference_frame < 0:
            raise ValueError("reference_frame must be non-negative")

    def check(self, stack: FeatureStack) -> None:
        if not 0 <= self.reference_frame < stack.t:
            raise ValueError(f"reference_frame {self.reference_frame} outside 0..{stack.t - 1}")


@dataclass(frozen=True)
class TrajectorySelection:
    """``indices[i, k]`` is the RoI in frame k most similar to query i."""

    indices: np.ndarray
    centers: np.ndarray  # (n_queries, t, 2)

    def points(self, i: int) -> list[Point2]:
        return [Point2(float(x), float(y)) for x, y in self.centers[i]]


@dataclass(frozen=True)
class PriorMask:
    values: np.ndarray  # (n, n*t)
    softmax: bool = False


def attention_map(stack: FeatureStack, cfg: AttentionConfig = AttentionConfig()) -> np.ndarray:
    """Raw query-key products, shape (n, n*t). No scaling, no softmax."""
    cfg.check(stack)
    q = stack.values[cfg.reference_frame]
    k = stack.keys()
    if q.shape[1] != k.shape[1]:
        raise ValueError("query and key channel counts differ")
    return q @ k.T


def select_trajectory(a: np.ndarray, stack: FeatureStack) -> TrajectorySelection:
    """Per query and frame, pick the RoI with the highest attention score."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != stack.n * stack.t:
        raise ValueError(f"attention map shape {a.shape} inconsistent with n={stack.n}, t={stack.t}")
    per_frame = a.reshape(a.shape[0], stack.t, stack.n)
    # np.argmax returns the first maximum, i.e. the lowest index on ties
    idx = per_frame.argmax(axis=2)
    frames = np.arange(stack.t)
    centers = stack.centers[frames[None, :], idx]
    return TrajectorySelection(indices=idx, centers=centers)


def alignment_score(centers: Sequence[Point2] | np.ndarray) -> float:
    """Collinearity score in [0, 1]; 1 for a straight path, 0 for a full reversal.

    Averages the cosine of the turning angle at every interior point.
    A zero-length step (stationary object) counts as perfectly aligned.
    """
    pts = np.array([(p.x, p.y) if isinstance(p, Point2) else tuple(p) for p in centers], dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("alignment_score needs at least two centers")
    if len(pts) == 2:
        return 1.0
    back = pts[:-2] - pts[1:-1]
    fwd = pts[2:] - pts[1:-1]
    nb2 = np.einsum("ij,ij->i", back, back)
    nf2 = np.einsum("ij,ij->i", fwd, fwd)
    cos = np.full(len(back), -1.0)
    ok = (nb2 >= _STATIONARY_PX**2) & (nf2 >= _STATIONARY_PX**2)
    # sqrt of the product rounds once; straight paths stay at exactly -1
    cos[ok] = np.einsum("ij,ij->i", back[ok], fwd[ok]) / np.sqrt(nb2[ok] * nf2[ok])
    cos = np.clip(cos, -1.0, 1.0)
    m = -cos.sum() / (2.0 * len(cos)) + 0.5
    return float(min(max(m, 0.0), 1.0))


def build_mask(
    sel: TrajectorySelection,
    scores: Sequence[float],
    mode: str = "motion_prior",
    n: int | None = None,
    binary_threshold: float = 0.5,
) -> PriorMask:
    if mode not in MASK_MODES:
        raise ValueError(f"unknown mask mode {mode!r}")
    scores = np.asarray(scores, dtype=np.float64)
    n_q, t = sel.indices.shape
    if scores.shape != (n_q,):
        raise ValueError("need one score per query")
    if n is None:
        n = int(sel.indices.max()) + 1
    if mode in ("none", "softmax"):
        return PriorMask(np.ones((n_q, t * n)), softmax=mode == "softmax")

    mask = np.repeat((1.0 - scores)[:, None], t * n, axis=1)
    rows = np.repeat(np.arange(n_q), t)
    cols = (np.arange(t)[None, :] * n + sel.indices).ravel()
    mask[rows, cols] = np.repeat(scores, t)
    if mode == "binary":
        mask = (mask >= binary_threshold).astype(np.float64)
    return PriorMask(mask)


def _row_softmax(a: np.ndarray) -> np.ndarray:
    z = a - a.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def apply_masked_attention(a: np.ndarray, mask: PriorMask | np.ndarray, stack: FeatureStack) -> np.ndarray:
    """Element-wise mask the attention map and project it onto the values."""
    if isinstance(mask, PriorMask):
        m, softmax = mask.values, mask.softmax
    else:
        m, softmax = np.asarray(mask, dtype=np.float64), False
    a = np.asarray(a, dtype=np.float64)
    v = stack.keys()
    if a.shape != m.shape:
        raise ValueError(f"mask shape {m.shape} != attention shape {a.shape}")
    if a.shape[1] != v.shape[0]:
        raise ValueError(f"attention has {a.shape[1]} columns but there are {v.shape[0]} value rows")
    if softmax:
        a = _row_softmax(a)
    return (m * a) @ v


@dataclass(frozen=True)
class AttentionResult:
    output: np.ndarray  # (n, c)
    scores: np.ndarray  # per-query alignment score
    selection: TrajectorySelection
    mask: PriorMask


def motion_prior_attention(stack: FeatureStack, cfg: AttentionConfig = AttentionConfig()) -> AttentionResult:
    a = attention_map(stack, cfg)
    sel = select_trajectory(a, stack)
    scores = np.array([alignment_score(sel.centers[i]) for i in range(a.shape[0])])
    mask = build_mask(sel, scores, cfg.mask_mode, n=stack.n, binary_threshold=cfg.binary_threshold)
    return AttentionResult(apply_masked_attention(a, mask, stack), scores, sel, mask)
