"""Boxes, points and homogeneous lines shared by every stage of the pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass

PARALLEL_TOL = 1e-9


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def as_tuple(self) -> tuple[float, float]:
        return self.x, self.y


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box as (left, top, width, height) in continuous pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box {vals}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box extent {vals}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class Line2:
    """Line a*x + b*y + c = 0 with (a, b) scaled to unit length.

    Construct through :meth:`from_coeffs` or :meth:`through` so the
    normalisation invariant holds.
    """

    a: float
    b: float
    c: float

    @classmethod
    def from_coeffs(cls, a: float, b: float, c: float) -> "Line2":
        norm = math.hypot(a, b)
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError("line normal must be finite and nonzero")
        return cls(a / norm, b / norm, c / norm)

    @classmethod
    def through(cls, p: Point2, direction: tuple[float, float]) -> "Line2":
        dx, dy = direction
        # normal is the direction rotated by 90 degrees
        line = cls.from_coeffs(-dy, dx, 0.0)
        return cls(line.a, line.b, -(line.a * p.x + line.b * p.y))

    @classmethod
    def from_slope(cls, slope: float, intercept: float) -> "Line2":
        """y = slope*x + intercept."""
        return cls.from_coeffs(slope, -1.0, intercept)

    def distance(self, p: Point2) -> float:
        return abs(self.a * p.x + self.b * p.y + self.c)

    def slope_intercept(self) -> tuple[float, float] | None:
        """Return (slope, intercept), or None for a vertical line."""
        if abs(self.b) < 1e-15:
            return None
        return -self.a / self.b, -self.c / self.b


def bbox_center(b: BBox) -> Point2:
    return Point2(b.x + b.w / 2.0, b.y + b.h / 2.0)


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def line_intersection(l1: Line2, l2: Line2, parallel_tol: float = PARALLEL_TOL) -> Point2 | None:
    """Intersect two normalised lines; None when they are (nearly) parallel."""
    det = l1.a * l2.b - l2.a * l1.b
    if abs(det) < parallel_tol:
        return None
    x = (l1.b * l2.c - l2.b * l1.c) / det
    y = (l2.a * l1.c - l1.a * l2.c) / det
    if not (math.isfinite(x) and math.isfinite(y)):
        return None
    return Point2(x, y)
