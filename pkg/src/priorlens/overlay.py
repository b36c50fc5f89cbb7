"""SVG rendering of trajectories, their intersections and the vanishing region."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

from .geometry import Line2
from .refiner import Tracklet
from .vanishing import IntersectionSet, VanishingRegion


def _clip_line(line: Line2, w: float, h: float) -> tuple[float, float, float, float] | None:
    pts = []
    if abs(line.b) > 1e-12:
        for x in (0.0, w):
            y = -(line.a * x + line.c) / line.b
            if 0.0 <= y <= h:
                pts.append((x, y))
    if abs(line.a) > 1e-12:
        for y in (0.0, h):
            x = -(line.b * y + line.c) / line.a
            if 0.0 <= x <= w:
                pts.append((x, y))
    if len(pts) < 2:
        return None
    (x1, y1), (x2, y2) = pts[0], pts[-1]
    return x1, y1, x2, y2


def render_svg(
    image_size: tuple[float, float],
    tracklets: Sequence[Tracklet],
    intersections: IntersectionSet,
    region: VanishingRegion | None,
    relabeled: Sequence[bool] = (),
    title: str = "",
) -> str:
    w, h = image_size
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{h:g}" viewBox="0 0 {w:g} {h:g}">',
        f'<rect width="{w:g}" height="{h:g}" fill="#111"/>',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    for k, tr in enumerate(tracklets):
        line = tr.fitted_line
        hit = k < len(relabeled) and relabeled[k]
        colour = "#4caf50" if hit else "#888"
        if line is not None:
            seg = _clip_line(line, w, h)
            if seg is not None:
                out.append(
                    f'<line x1="{seg[0]:.2f}" y1="{seg[1]:.2f}" x2="{seg[2]:.2f}" y2="{seg[3]:.2f}" '
                    f'stroke={quoteattr(colour)} stroke-opacity="0.35" stroke-width="1"/>'
                )
        pts = " ".join(f"{p.x:.2f},{p.y:.2f}" for p in tr.centers())
        out.append(f'<polyline points="{pts}" fill="none" stroke="#fdd835" stroke-width="2"/>')
    for p in intersections.points:
        if 0 <= p.x <= w and 0 <= p.y <= h:
            out.append(f'<circle cx="{p.x:.2f}" cy="{p.y:.2f}" r="2" fill="#2196f3"/>')
    if region is not None:
        c = region.centroid
        out.append(
            f'<circle cx="{c.x:.2f}" cy="{c.y:.2f}" r="{max(region.radius, 3.0):.2f}" '
            f'fill="#e91e63" fill-opacity="0.25" stroke="#e91e63"/>'
        )
        out.append(f'<circle cx="{c.x:.2f}" cy="{c.y:.2f}" r="4" fill="#e91e63"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: str | Path, *args, **kwargs) -> None:
    Path(path).write_text(render_svg(*args, **kwargs))
