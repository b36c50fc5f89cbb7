"""Trajectory line fitting, pairwise intersections and density clustering
of the intersections into a vanishing-point region."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PARALLEL_TOL, Line2, Point2, line_intersection

NOISE = -1


@dataclass(frozen=True)
class IntersectionSet:
    points: list[Point2] = field(default_factory=list)
    provenance: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 2))
        return np.array([p.as_tuple() for p in self.points], dtype=np.float64)


@dataclass(frozen=True)
class VanishingRegion:
    centroid: Point2
    members: list[Point2]
    radius: float

    def contains_line(self, line: Line2) -> bool:
        return line.distance(self.centroid) <= self.radius


def _as_points(points: Sequence[Point2] | np.ndarray) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return np.array([p.as_tuple() for p in points], dtype=np.float64).reshape(-1, 2)


def fit_line(centers: Sequence[Point2] | np.ndarray) -> Line2:
    """Orthogonal (total least squares) line fit.

    The line passes through the centroid along the principal direction, so
    vertical point sets are represented without a slope singularity.
    """
    pts = _as_points(centers)
    if len(pts) < 2:
        raise ValueError("fit_line needs at least two points")
    mean = pts.mean(axis=0)
    centred = pts - mean
    if not np.any(np.abs(centred) > 0.0):
        raise ValueError("cannot fit a line to coincident points")
    # smallest right singular vector = line normal
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    a, b = vt[-1]
    line = Line2.from_coeffs(float(a), float(b), 0.0)
    return Line2(line.a, line.b, -(line.a * mean[0] + line.b * mean[1]))


def orthogonal_residual(centers: Sequence[Point2] | np.ndarray, line: Line2) -> float:
    """Sum of squared perpendicular distances from the points to ``line``."""
    pts = _as_points(centers)
    d = line.a * pts[:, 0] + line.b * pts[:, 1] + line.c
    return float(np.sum(d * d))


def pairwise_intersections(lines: Sequence[Line2 | None], parallel_tol: float = PARALLEL_TOL) -> IntersectionSet:
    """Intersect every unordered pair; ``None`` entries and parallel pairs are skipped.

    Provenance indices refer to positions in ``lines``.
    """
    points: list[Point2] = []
    prov: list[tuple[int, int]] = []
    for i in range(len(lines)):
        li = lines[i]
        if li is None:
            continue
        for j in range(i + 1, len(lines)):
            lj = lines[j]
            if lj is None:
                continue
            p = line_intersection(li, lj, parallel_tol)
            if p is not None:
                points.append(p)
                prov.append((i, j))
    return IntersectionSet(points, prov)


def dbscan(points: Sequence[Point2] | np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering with closed eps-balls and Euclidean distance.

    Returns one label per point: a cluster id (0, 1, ... in order of
    discovery when scanning the input) or ``NOISE``. A point counts itself
    towards ``min_pts``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = _as_points(points)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    tree = cKDTree(pts)
    # query_ball_point uses distance <= r
    neighbours = tree.query_ball_point(pts, r=eps)
    neighbours = [sorted(nb) for nb in neighbours]
    core = np.array([len(nb) >= min_pts for nb in neighbours])
    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        visited[i] = True
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in neighbours[p]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                if not visited[q] and core[q]:
                    visited[q] = True
                    queue.append(q)
        cluster += 1
    return labels


def identify_region(points: IntersectionSet | Sequence[Point2] | np.ndarray, eps: float,
                    min_pts: int = 2) -> VanishingRegion | None:
    """Return the largest dense cluster of intersection points, or None."""
    if isinstance(points, IntersectionSet):
        pts = points.as_array()
    else:
        pts = _as_points(points)
    labels = dbscan(pts, eps, min_pts)
    best = None
    best_key = None
    for cid in range(int(labels.max()) + 1 if len(labels) else 0):
        members = pts[labels == cid]
        centroid = members.mean(axis=0)
        spread = float(np.hypot(*(members - centroid).T).mean())
        key = (-len(members), spread, cid)
        if best_key is None or key < best_key:
            best, best_key = (members, centroid), key
    if best is None:
        return None
    members, centroid = best
    radius = float(np.hypot(*(members - centroid).T).max())
    return VanishingRegion(
        centroid=Point2(float(centroid[0]), float(centroid[1])),
        members=[Point2(float(x), float(y)) for x, y in members],
        radius=radius,
    )


def eps_pixels(eps_percent: float, image_w: float, image_h: float) -> float:
    """Convert an eps given in percent of the image diagonal to pixels."""
    return eps_percent / 100.0 * float(np.hypot(image_w, image_h))
