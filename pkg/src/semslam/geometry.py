"""Small planar geometry helpers shared by scenario rasterization and segmentation.

All routines work on plain ``(x, y)`` tuples or ``(n, 2)`` arrays in km.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

Point = tuple[float, float]

EPS = 1e-12


def cross(o: Sequence[float], a: Sequence[float], b: Sequence[float]) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list[Point]:
    """Counter-clockwise hull vertices (monotone chain), collinear points dropped.

    Degenerate inputs give 0, 1 or 2 vertices.
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return pts
    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:
        return pts[:1]
    return hull


def hull_edges(hull: Sequence[Point]) -> list[tuple[Point, Point]]:
    if len(hull) < 2:
        return []
    if len(hull) == 2:
        return [(hull[0], hull[1])]
    return [(hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull))]


def polygon_area(poly: Sequence[Point]) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    s = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return abs(s) / 2.0


def point_in_polygon(pt: Sequence[float], poly: Sequence[Point]) -> bool:
    """Even-odd ray casting; points on the boundary count as inside."""
    x, y = pt
    n = len(poly)
    if n < 3:
        return False
    inside = False
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if _on_segment((x, y), (x1, y1), (x2, y2)):
            return True
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def point_in_convex(pt: Sequence[float], hull: Sequence[Point]) -> bool:
    """Inclusive containment test for a CCW convex polygon with >= 3 vertices."""
    if len(hull) < 3:
        return False
    for i in range(len(hull)):
        if cross(hull[i], hull[(i + 1) % len(hull)], pt) < -EPS:
            return False
    return True


def _on_segment(p, a, b) -> bool:
    if abs(cross(a, b, p)) > EPS * max(1.0, math.dist(a, b)):
        return False
    return (min(a[0], b[0]) - EPS <= p[0] <= max(a[0], b[0]) + EPS
            and min(a[1], b[1]) - EPS <= p[1] <= max(a[1], b[1]) + EPS)


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test (touching and collinear overlap count)."""
    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    if ((d1 > EPS and d2 < -EPS) or (d1 < -EPS and d2 > EPS)) and \
       ((d3 > EPS and d4 < -EPS) or (d3 < -EPS and d4 > EPS)):
        return True
    return (_on_segment(p1, q1, q2) or _on_segment(p2, q1, q2)
            or _on_segment(q1, p1, p2) or _on_segment(q2, p1, p2))


def segment_intersection_point(p1, p2, q1, q2) -> Point:
    """Intersection of the supporting lines; midpoint of overlap when parallel."""
    r = (p2[0] - p1[0], p2[1] - p1[1])
    s = (q2[0] - q1[0], q2[1] - q1[1])
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < EPS:
        pts = [p for p in (p1, p2, q1, q2)]
        return (sum(p[0] for p in pts) / 4.0, sum(p[1] for p in pts) / 4.0)
    t = ((q1[0] - p1[0]) * s[1] - (q1[1] - p1[1]) * s[0]) / denom
    return (p1[0] + t * r[0], p1[1] + t * r[1])


def closest_point_on_segment(p, a, b) -> Point:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return (ax, ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2
    t = min(1.0, max(0.0, t))
    return (ax + t * dx, ay + t * dy)


def _as_edges(hull: Sequence[Point]) -> list[tuple[Point, Point]]:
    if len(hull) == 1:
        return [(hull[0], hull[0])]
    return hull_edges(hull)


def hulls_overlap(h1: Sequence[Point], h2: Sequence[Point]) -> bool:
    """True when two convex hulls (possibly degenerate) share at least one point."""
    for a, b in _as_edges(h1):
        for c, d in _as_edges(h2):
            if segments_intersect(a, b, c, d):
                return True
    if len(h1) >= 3 and point_in_convex(h2[0], h1):
        return True
    if len(h2) >= 3 and point_in_convex(h1[0], h2):
        return True
    return False


def hull_closest_points(h1: Sequence[Point], h2: Sequence[Point]) -> tuple[Point, Point, float]:
    """Closest pair between two disjoint convex hulls.

    The minimum is attained at a vertex of one hull against an edge of the other.
    """
    best = (h1[0], h2[0], math.inf)
    for v in h1:
        for a, b in _as_edges(h2):
            q = closest_point_on_segment(v, a, b)
            d = math.dist(v, q)
            if d < best[2]:
                best = (v, q, d)
    for v in h2:
        for a, b in _as_edges(h1):
            q = closest_point_on_segment(v, a, b)
            d = math.dist(v, q)
            if d < best[2]:
                best = (q, v, d)
    return best


def hull_distance(h1: Sequence[Point], h2: Sequence[Point]) -> float:
    if not h1 or not h2:
        return math.inf
    if hulls_overlap(h1, h2):
        return 0.0
    return hull_closest_points(h1, h2)[2]


def diameter(points: np.ndarray) -> float:
    """Largest pairwise distance of a point set (0 for fewer than two points)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return 0.0
    hull = np.asarray(convex_hull(pts))
    diff = hull[:, None, :] - hull[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def frame_to_world(pt, pose) -> Point:
    """Map a point from a frame whose origin sits at ``pose = (x, y, heading)``."""
    c, s = math.cos(pose[2]), math.sin(pose[2])
    return (pose[0] + c * pt[0] - s * pt[1], pose[1] + s * pt[0] + c * pt[1])


def world_to_frame(pt, pose) -> Point:
    c, s = math.cos(pose[2]), math.sin(pose[2])
    dx, dy = pt[0] - pose[0], pt[1] - pose[1]
    return (c * dx + s * dy, -s * dx + c * dy)


def wrap_angle(a):
    return (a + np.pi) % (2 * np.pi) - np.pi
