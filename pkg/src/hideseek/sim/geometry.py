"""Plane geometry for axis-aligned rectangles and discs."""

from __future__ import annotations

import math
from typing import Optional, Tuple

INF = float("inf")


def wrap_angle(a: float) -> float:
    """Map an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def ray_aabb(ox, oy, dx, dy, cx, cy, hx, hy) -> Optional[float]:
    """Entry distance of the ray o + s*d (s >= 0, |d| = 1) into a rectangle.

    Returns 0.0 when the origin lies inside the rectangle, None on a miss.
    """
    if abs(ox - cx) <= hx and abs(oy - cy) <= hy:
        return 0.0
    tmin, tmax = -INF, INF
    for o, d, c, h in ((ox, dx, cx, hx), (oy, dy, cy, hy)):
        lo, hi = c - h, c + h
        if abs(d) < 1e-15:
            if o < lo or o > hi:
                return None
            continue
        t1 = (lo - o) / d
        t2 = (hi - o) / d
        if t1 > t2:
            t1, t2 = t2, t1
        tmin = max(tmin, t1)
        tmax = min(tmax, t2)
        if tmin > tmax:
            return None
    if tmax < 0.0:
        return None
    return max(tmin, 0.0)


def ray_circle(ox, oy, dx, dy, cx, cy, r) -> Optional[float]:
    fx, fy = ox - cx, oy - cy
    c = fx * fx + fy * fy - r * r
    if c <= 0.0:
        return 0.0
    b = fx * dx + fy * dy
    disc = b * b - c
    if disc < 0.0 or b > 0.0:
        return None
    return -b - math.sqrt(disc)


def segment_hits_aabb(ax, ay, bx, by, cx, cy, hx, hy) -> bool:
    """True if the closed segment a-b touches the rectangle interior."""
    length = math.hypot(bx - ax, by - ay)
    if length == 0.0:
        return abs(ax - cx) < hx and abs(ay - cy) < hy
    s = ray_aabb(ax, ay, (bx - ax) / length, (by - ay) / length, cx, cy, hx, hy)
    return s is not None and s <= length


def circle_rect_overlap(px, py, r, cx, cy, hx, hy) -> float:
    """Penetration depth of a disc into a rectangle (<= 0 means apart)."""
    qx = min(max(px, cx - hx), cx + hx)
    qy = min(max(py, cy - hy), cy + hy)
    dx, dy = px - qx, py - qy
    d2 = dx * dx + dy * dy
    if d2 == 0.0:
        return r + min(hx - abs(px - cx), hy - abs(py - cy))
    return r - math.sqrt(d2)


def mtv_circle_rect(px, py, r, cx, cy, hx, hy) -> Optional[Tuple[float, float]]:
    """Translation that pushes the disc out of the rectangle, or None."""
    qx = min(max(px, cx - hx), cx + hx)
    qy = min(max(py, cy - hy), cy + hy)
    dx, dy = px - qx, py - qy
    d2 = dx * dx + dy * dy
    if d2 >= r * r:
        return None
    if d2 > 0.0:
        d = math.sqrt(d2)
        k = (r - d) / d
        return dx * k, dy * k
    # Centre inside the rectangle: leave along the shallowest face.
    ox = hx - abs(px - cx) + r
    oy = hy - abs(py - cy) + r
    if ox <= oy:
        return (ox if px >= cx else -ox), 0.0
    return 0.0, (oy if py >= cy else -oy)


def mtv_rect_rect(ax, ay, ahx, ahy, bx, by, bhx, bhy) -> Optional[Tuple[float, float]]:
    """Translation applied to rectangle a that separates it from b."""
    ox = ahx + bhx - abs(ax - bx)
    if ox <= 0.0:
        return None
    oy = ahy + bhy - abs(ay - by)
    if oy <= 0.0:
        return None
    if ox <= oy:
        return (ox if ax >= bx else -ox), 0.0
    return 0.0, (oy if ay >= by else -oy)


def mtv_circle_circle(ax, ay, ar, bx, by, br) -> Optional[Tuple[float, float]]:
    dx, dy = ax - bx, ay - by
    d2 = dx * dx + dy * dy
    rr = ar + br
    if d2 >= rr * rr:
        return None
    if d2 == 0.0:
        return rr, 0.0
    d = math.sqrt(d2)
    k = (rr - d) / d
    return dx * k, dy * k


def point_in_polygon(px: float, py: float, poly) -> bool:
    """Even-odd rule test."""
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xc:
                inside = not inside
    return inside


def in_cone(ox, oy, heading, tx, ty, half_angle) -> bool:
    dx, dy = tx - ox, ty - oy
    if dx * dx + dy * dy < 1e-12:
        return True
    return abs(wrap_angle(math.atan2(dy, dx) - heading)) <= half_angle + 1e-12
