"""Small 2D geometry helpers on top of shapely.

Coordinates are metric (x, y) tuples. Polygons are vertex lists without a
repeated closing vertex.
"""

from __future__ import annotations

import math

from shapely.geometry import LineString, Point, Polygon

XY = tuple[float, float]


def dist(a: XY, b: XY) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def path_length(points: list[XY]) -> float:
    return sum(dist(points[i], points[i + 1]) for i in range(len(points) - 1))


def heading_of(a: XY, b: XY) -> float:
    """Heading in radians of the segment a -> b."""
    return math.atan2(b[1] - a[1], b[0] - a[0])


def point_along(a: XY, b: XY, distance: float) -> XY:
    """Point at `distance` from a toward b (not clamped to the segment)."""
    d = dist(a, b)
    if d == 0.0:
        return a
    f = distance / d
    return (a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f)


def is_simple_polygon(vertices: list[XY]) -> bool:
    """True for a non-self-intersecting polygon with at least 3 vertices."""
    if len(vertices) < 3:
        return False
    poly = Polygon(vertices)
    return poly.is_valid and poly.area > 0.0


def point_in_polygon(p: XY, vertices: list[XY]) -> bool:
    """True if p is inside or on the boundary of the polygon."""
    return Polygon(vertices).covers(Point(p))


def polygon_centroid(vertices: list[XY]) -> XY:
    c = Polygon(vertices).centroid
    return (c.x, c.y)


def segment_interior_intervals(
    p: XY, q: XY, vertices: list[XY]
) -> list[tuple[float, float]]:
    """Parameter intervals [t0, t1] of segment p->q that lie inside the polygon.

    Only pieces whose midpoint is strictly interior count; runs along the
    polygon boundary or single touch points are excluded.
    """
    seg = LineString([p, q])
    if seg.length == 0.0:
        poly0 = Polygon(vertices)
        return [(0.0, 1.0)] if poly0.contains(Point(p)) else []
    poly = Polygon(vertices)
    inter = seg.intersection(poly)
    if inter.is_empty:
        return []
    pieces = []
    if inter.geom_type == "LineString":
        pieces = [inter]
    elif inter.geom_type in ("MultiLineString", "GeometryCollection"):
        pieces = [g for g in inter.geoms if g.geom_type == "LineString"]
    out: list[tuple[float, float]] = []
    dx, dy = q[0] - p[0], q[1] - p[1]
    norm2 = dx * dx + dy * dy
    for piece in pieces:
        if piece.length <= 1e-12:
            continue
        mid = piece.interpolate(0.5, normalized=True)
        if not poly.contains(mid):
            continue
        (x0, y0), (x1, y1) = piece.coords[0], piece.coords[-1]
        t0 = ((x0 - p[0]) * dx + (y0 - p[1]) * dy) / norm2
        t1 = ((x1 - p[0]) * dx + (y1 - p[1]) * dy) / norm2
        out.append((min(t0, t1), max(t0, t1)))
    out.sort()
    return out


def clip_line_to_polygon(p: XY, q: XY, vertices: list[XY]) -> list[tuple[XY, XY]]:
    """Pieces of segment p->q covered by the polygon, ordered from p to q."""
    seg = LineString([p, q])
    inter = seg.intersection(Polygon(vertices))
    if inter.is_empty:
        return []
    if inter.geom_type == "LineString":
        geoms = [inter]
    elif inter.geom_type in ("MultiLineString", "GeometryCollection"):
        geoms = [g for g in inter.geoms if g.geom_type == "LineString"]
    else:
        return []
    pieces = []
    for g in geoms:
        if g.length <= 1e-12:
            continue
        a = (g.coords[0][0], g.coords[0][1])
        b = (g.coords[-1][0], g.coords[-1][1])
        if dist(p, a) > dist(p, b):
            a, b = b, a
        pieces.append((a, b))
    pieces.sort(key=lambda ab: dist(p, ab[0]))
    return pieces


def polygon_bounds(vertices: list[XY]) -> tuple[float, float, float, float]:
    xs = [v[0] for v in vertices]
    ys = [v[1] for v in vertices]
    return (min(xs), min(ys), max(xs), max(ys))
