"""Small planar-geometry helpers used by the network and test-map modules."""

from __future__ import annotations

import numpy as np


def polyline_length(points: np.ndarray) -> float:
    """Arclength of a polyline given as an (n, 2) array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        return 0.0
    return float(np.sum(np.hypot(*(pts[1:] - pts[:-1]).T)))


def cumulative_arclength(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    seg = np.hypot(*(pts[1:] - pts[:-1]).T)
    return np.concatenate([[0.0], np.cumsum(seg)])


def point_at_param(points: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate the constant-speed parameterization of a polyline at t in [0, 1].

    Returns an (len(t), 2) array.  A zero-length polyline maps every t to its
    single point.
    """
    pts = np.asarray(points, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = cumulative_arclength(pts)
    total = s[-1]
    if total <= 0.0:
        return np.repeat(pts[:1], len(t), axis=0)
    x = np.interp(t * total, s, pts[:, 0])
    y = np.interp(t * total, s, pts[:, 1])
    return np.column_stack([x, y])


def param_breakpoints(points: np.ndarray) -> np.ndarray:
    """Parameter values of the polyline vertices under constant-speed param."""
    s = cumulative_arclength(points)
    total = s[-1]
    if total <= 0.0:
        return np.array([0.0, 1.0])
    return s / total


def sup_distance(points_a: np.ndarray, points_b: np.ndarray) -> float:
    """sup_t |a(t) - b(t)| for constant-speed parameterizations.

    Exact for polylines: |a(t) - b(t)| is a convex function of t on every
    interval between breakpoints of either curve, so the sup is attained at
    one of the merged breakpoints.
    """
    ts = np.union1d(param_breakpoints(points_a), param_breakpoints(points_b))
    pa = point_at_param(points_a, ts)
    pb = point_at_param(points_b, ts)
    return float(np.max(np.hypot(*(pa - pb).T)))


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points p (n, 2) to segment [a, b]."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(*(p - a).T)
    t = np.clip(((p - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(p - proj).T)


def point_polyline_distance(p: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Distances from points p (n, 2) to a polyline."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] == 1:
        return np.hypot(*(np.atleast_2d(p) - pts[0]).T)
    d = None
    for i in range(pts.shape[0] - 1):
        di = point_segment_distance(p, pts[i], pts[i + 1])
        d = di if d is None else np.minimum(d, di)
    return d


def segments_properly_intersect(p1, p2, q1, q2, tol: float = 1e-12) -> bool:
    """True if open segments (p1,p2) and (q1,q2) cross transversally.

    Shared endpoints and collinear overlap/tangency do not count as proper
    crossings (those are reported separately by the network validator).
    """
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    scale = max(np.linalg.norm(p2 - p1), np.linalg.norm(q2 - q1), 1e-300) ** 2
    return (d1 * d2 < -tol * scale) and (d3 * d4 < -tol * scale)


def winding_number(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Winding numbers of a closed polygon around each query point.

    Vectorized over points; the polygon need not repeat its first vertex.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polygon, dtype=float)
    if not np.allclose(poly[0], poly[-1]):
        poly = np.vstack([poly, poly[0]])
    wn = np.zeros(len(pts), dtype=int)
    x, y = pts[:, 0], pts[:, 1]
    for i in range(len(poly) - 1):
        x0, y0 = poly[i]
        x1, y1 = poly[i + 1]
        up = (y0 <= y) & (y1 > y)
        dn = (y0 > y) & (y1 <= y)
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        wn += np.where(up & (cross > 0), 1, 0)
        wn -= np.where(dn & (cross < 0), 1, 0)
    return wn


def polygon_signed_area(polygon: np.ndarray) -> float:
    poly = np.asarray(polygon, dtype=float)
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def circle_arc(center, radius: float, theta0: float, theta1: float,
               max_step: float = 0.05) -> np.ndarray:
    """Sample the ccw circle arc from theta0 to theta1 as a polyline."""
    c = np.asarray(center, dtype=float)
    t0, t1 = float(theta0), float(theta1)
    while t1 <= t0:
        t1 += 2.0 * np.pi
    n = max(2, int(np.ceil((t1 - t0) * radius / max_step)) + 1)
    th = np.linspace(t0, t1, n)
    return np.column_stack([c[0] + radius * np.cos(th), c[1] + radius * np.sin(th)])


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])
