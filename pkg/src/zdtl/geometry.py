"""Small planar geometry kit: halfspace clipping, convex hulls, point-to-boundary distances."""
from __future__ import annotations

import numpy as np

_CHUNK = 200_000


def clip_polygon(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Intersect a convex polygon (ccw vertex array) with ``normal . p <= offset``."""
    if len(poly) == 0:
        return poly
    normal = np.asarray(normal, dtype=float)
    val = poly @ normal - offset
    if np.all(val <= 0):
        return poly
    if np.all(val > 0):
        return poly[:0]
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = val[i], val[(i + 1) % n]
        if vp <= 0:
            out.append(p)
        if (vp <= 0) != (vq <= 0):
            out.append(p + (q - p) * (vp / (vp - vq)))
    return np.array(out)


def halfspace_polygon(normals, offsets, center, half: float) -> np.ndarray:
    """Polygon {p : normals p <= offsets} clipped to the square ``center +- half``."""
    cx, cy = center
    poly = np.array([[cx - half, cy - half], [cx + half, cy - half],
                     [cx + half, cy + half], [cx - half, cy + half]], dtype=float)
    for nrm, off in zip(np.asarray(normals, dtype=float), np.asarray(offsets, dtype=float)):
        poly = clip_polygon(poly, nrm, off)
        if len(poly) == 0:
            break
    return poly


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain; collinear input returns the two extreme points."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    return hull


def _edges(poly: np.ndarray):
    if len(poly) == 2:
        return poly[:1], poly[1:]
    return poly, np.roll(poly, -1, axis=0)


def boundary_distance(points, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to the boundary of a polygon (a segment or point when degenerate)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(poly) == 1:
        return np.linalg.norm(pts - poly[0], axis=1)
    a, b = _edges(poly)
    ab = b - a
    ab2 = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    out = np.empty(len(pts))
    for s in range(0, len(pts), _CHUNK):
        p = pts[s:s + _CHUNK, None, :]
        t = np.clip(np.sum((p - a) * ab, axis=2) / ab2, 0.0, 1.0)
        proj = a + t[..., None] * ab
        out[s:s + _CHUNK] = np.sqrt(np.min(np.sum((p - proj) ** 2, axis=2), axis=1))
    return out


def nearest_boundary_point(point, poly: np.ndarray) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    a, b = _edges(poly)
    ab = b - a
    t = np.clip(np.sum((p - a) * ab, axis=1) / np.maximum(np.sum(ab * ab, axis=1), 1e-300), 0, 1)
    proj = a + t[:, None] * ab
    return proj[int(np.argmin(np.linalg.norm(proj - p, axis=1)))]


def inside_convex(points, poly: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Membership in a ccw convex polygon (closed, widened by ``tol``)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(poly) < 3:
        return np.zeros(len(pts), dtype=bool)
    a, b = poly, np.roll(poly, -1, axis=0)
    e = b - a
    norm = np.linalg.norm(e, axis=1)
    cross = (e[:, 0] * (pts[:, None, 1] - a[:, 1]) - e[:, 1] * (pts[:, None, 0] - a[:, 0])) / norm
    return np.all(cross >= -tol, axis=1)


def perimeter_point(poly: np.ndarray, u: float) -> np.ndarray:
    """The point at fraction ``u`` of the perimeter, walking ccw from the first vertex."""
    a, b = _edges(poly)
    lens = np.linalg.norm(b - a, axis=1)
    target = u * lens.sum()
    cum = np.cumsum(lens)
    i = min(int(np.searchsorted(cum, target)), len(lens) - 1)
    before = cum[i] - lens[i]
    frac = 0.0 if lens[i] == 0 else (target - before) / lens[i]
    return a[i] + frac * (b[i] - a[i])
