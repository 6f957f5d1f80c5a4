"""Planar geometry helpers: angles, polylines, oriented boxes, polygons.

Everything works on plain floats and small numpy arrays in a scenario-local
metric frame. No geodetic handling anywhere.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = (theta + math.pi) % TWO_PI - math.pi
    if r == -math.pi:
        return math.pi
    return r


def rot2d(theta: float) -> np.ndarray:
    """Counter-clockwise rotation matrix."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def polyline_arclengths(pts: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex of an (N, 2) polyline."""
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def project_to_polyline(p: np.ndarray, pts: np.ndarray) -> tuple[float, float]:
    """Project point ``p`` onto an (N, 2) polyline.

    Returns ``(distance, arc_length)`` of the nearest point. Ties between
    segments resolve to the earliest arc length (first strict improvement
    wins while scanning segments in order).
    """
    p = np.asarray(p, dtype=float)
    cum = polyline_arclengths(pts)
    best_d = math.inf
    best_s = 0.0
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        q = a + t * ab
        d = float(np.linalg.norm(p - q))
        if d < best_d:
            best_d = d
            best_s = float(cum[i] + t * math.sqrt(denom))
    return best_d, best_s


def point_on_polyline(pts: np.ndarray, s: float) -> tuple[np.ndarray, float]:
    """Point and tangent heading at arc length ``s`` along a polyline.

    ``s`` is clamped to [0, total length]. A sample landing exactly on an
    interior vertex takes the heading of the outgoing segment, so headings
    turn at the vertex rather than before it.
    """
    cum = polyline_arclengths(pts)
    total = float(cum[-1])
    s = min(max(s, 0.0), total)
    # Outgoing segment: last i with cum[i] <= s, capped at the final segment.
    i = int(np.searchsorted(cum, s, side="right") - 1)
    i = min(i, len(pts) - 2)
    a, b = pts[i], pts[i + 1]
    seg_len = float(cum[i + 1] - cum[i])
    t = 0.0 if seg_len == 0.0 else (s - float(cum[i])) / seg_len
    q = a + t * (b - a)
    heading = math.atan2(b[1] - a[1], b[0] - a[0])
    return q, heading


def obb_corners(center: np.ndarray, heading: float, length: float, width: float) -> np.ndarray:
    """Corners of an oriented box, (4, 2), counter-clockwise."""
    hx, hy = length / 2.0, width / 2.0
    local = np.array([[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]])
    return local @ rot2d(heading).T + np.asarray(center, dtype=float)


def obb_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    """Separating-axis intersection test for two convex quads.

    Touching boxes count as overlapping (closed-set semantics).
    """
    for corners in (corners_a, corners_b):
        for i in range(2):  # two edge directions per rectangle
            edge = corners[i + 1] - corners[i]
            axis = np.array([-edge[1], edge[0]])
            pa = corners_a @ axis
            pb = corners_b @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def point_in_polygon(p: np.ndarray, ring: np.ndarray) -> bool:
    """Even-odd ray-casting test. Boundary points may land either way."""
    x, y = float(p[0]), float(p[1])
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xin = (x2 - x1) * (y - y1) / (y2 - y1) + x1
            if x < xin:
                inside = not inside
    return inside


def _orient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def segments_intersect(p1: np.ndarray, p2: np.ndarray, q1: np.ndarray, q2: np.ndarray) -> bool:
    """True if closed segments [p1,p2] and [q1,q2] share any point."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    if d1 == 0 and on_seg(q1, q2, p1):
        return True
    if d2 == 0 and on_seg(q1, q2, p2):
        return True
    if d3 == 0 and on_seg(p1, p2, q1):
        return True
    if d4 == 0 and on_seg(p1, p2, q2):
        return True
    return False


def polygon_is_simple(ring: np.ndarray) -> bool:
    """True if no two non-adjacent edges of the ring intersect."""
    n = len(ring)
    if n < 3:
        return False
    edges = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges legitimately share a vertex
            if segments_intersect(edges[i][0], edges[i][1], edges[j][0], edges[j][1]):
                return False
    return True


class DrivableRegion:
    """Point-membership test for the drivable area of a scenario.

    Built either from explicit simple polygons or, when none are given,
    from the union of lane corridors (each centerline buffered by half the
    lane width), so feasibility checks always have a region to test.
    """

    def __init__(self, polygons: list[np.ndarray], corridors: list[tuple[np.ndarray, float]]):
        self._polygons = [np.asarray(p, dtype=float) for p in polygons]
        self._corridors = [(np.asarray(c, dtype=float), float(w)) for c, w in corridors]

    @property
    def empty(self) -> bool:
        return not self._polygons and not self._corridors

    def contains(self, p: np.ndarray) -> bool:
        if self._polygons:
            return any(point_in_polygon(p, ring) for ring in self._polygons)
        for centerline, width in self._corridors:
            d, _ = project_to_polyline(p, centerline)
            if d <= width / 2.0 + 1e-9:
                return True
        return False

    def contains_all(self, points: np.ndarray) -> bool:
        return all(self.contains(p) for p in np.asarray(points, dtype=float))
