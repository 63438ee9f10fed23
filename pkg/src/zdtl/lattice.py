"""Lattice points near the boundary of a convex body inside the box [0, N]^d.

The box neighbourhood volumes come from the Steiner formula; the threshold
``N0`` is the first box size at which twice the relative volume of the
(r + sqrt d)-neighbourhood of the box boundary drops below epsilon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from . import geometry


def unit_ball_volume(k: int) -> float:
    if k == 0:
        return 1.0
    if k == 1:
        return 2.0
    if k == 2:
        return math.pi
    return math.pi ** (k / 2.0) / float(gamma(k / 2.0 + 1.0))


@dataclass(frozen=True)
class ConvexBody:
    """An interval (d=1, ``vertices`` = [[lo], [hi]]) or a ccw polygon (d=2).

    A polygon may degenerate to a segment (2 vertices) or a point.
    """

    d: int
    vertices: np.ndarray

    @classmethod
    def interval(cls, lo: float, hi: float) -> "ConvexBody":
        if hi < lo:
            raise ValueError("empty interval")
        return cls(1, np.array([[float(lo)], [float(hi)]]))

    @classmethod
    def hull(cls, points) -> "ConvexBody":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ValueError("hull needs a nonempty (k, 2) point array")
        return cls(2, geometry.convex_hull(pts))

    @classmethod
    def box(cls, lo, hi) -> "ConvexBody":
        (x0, y0), (x1, y1) = lo, hi
        return cls(2, np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """(normals, offsets) with normal . p <= offset; only for full-dimensional bodies."""
        if self.d == 1:
            lo, hi = self.vertices[:, 0]
            return np.array([[-1.0], [1.0]]), np.array([-lo, hi])
        v = self.vertices
        if len(v) < 3:
            raise ValueError("degenerate body has no halfspace description")
        e = np.roll(v, -1, axis=0) - v
        normals = np.stack([e[:, 1], -e[:, 0]], axis=1)
        return normals, np.sum(normals * v, axis=1)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.d == 1:
            lo, hi = self.vertices[:, 0]
            return (pts[:, 0] >= lo) & (pts[:, 0] <= hi)
        return geometry.inside_convex(pts, self.vertices)


@dataclass(frozen=True)
class BoundaryCountReport:
    N: int
    r: float
    count: int
    fraction: float
    steiner_bound: float
    epsilon: float

    @property
    def passed(self) -> bool:
        return self.fraction < self.epsilon


def dist_to_polygon_boundary(body: ConvexBody, points) -> np.ndarray:
    """Distance to the body's boundary, measured from inside or outside."""
    if body.d == 1:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = body.vertices[:, 0]
        return np.minimum(np.abs(pts[:, 0] - lo), np.abs(pts[:, 0] - hi))
    if body.d == 2:
        return geometry.boundary_distance(points, body.vertices)
    raise ValueError("exact boundary distance supports d <= 2")


def box_points(N: int, d: int) -> np.ndarray:
    """Lattice points of [0, N]^d, both faces included."""
    axis = np.arange(N + 1, dtype=float)
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)


def steiner_outer_volume_box(N: float, e: float, d: int) -> float:
    """Volume of the outer e-neighbourhood of [0, N]^d."""
    if N < 0 or e < 0 or d < 1:
        raise ValueError("need N, e >= 0 and d >= 1")
    return float(sum(math.comb(d, k) * N ** (d - k) * unit_ball_volume(k) * e ** k
                     for k in range(d + 1)))


def box_shell_volume(N: float, e: float, d: int) -> float:
    """Volume of the two-sided e-neighbourhood of the boundary of [0, N]^d."""
    return steiner_outer_volume_box(N, e, d) - max(N - 2.0 * e, 0.0) ** d


def count_near_boundary(body: ConvexBody, r: float, N: int, epsilon: float = 1.0) -> BoundaryCountReport:
    if N <= 0:
        raise ValueError("N must be positive")
    if body.d not in (1, 2):
        raise ValueError("exact boundary distance supports d <= 2")
    d = body.d
    count = 0
    # chunk by rows so the scan stays bounded in memory for large N
    axis = np.arange(N + 1, dtype=float)
    rows = [axis[i:i + 256] for i in range(0, N + 1, 256)] if d == 2 else [axis]
    for chunk in rows:
        if d == 1:
            pts = chunk[:, None]
        else:
            pts = np.stack(np.meshgrid(chunk, axis, indexing="ij"), -1).reshape(-1, 2)
        count += int(np.count_nonzero(dist_to_polygon_boundary(body, pts) <= r))
    E = r + math.sqrt(d)
    return BoundaryCountReport(N, float(r), count, count / N ** d,
                               2.0 * box_shell_volume(N, E, d) / N ** d, float(epsilon))


def boundary_ratio(N: int, r: float, d: int) -> float:
    E = r + math.sqrt(d)
    return 2.0 * box_shell_volume(N, E, d) / N ** d


def find_N0(epsilon: float, r: float, d: int) -> int:
    """Smallest N with 2 vol(shell_{r + sqrt d}) / N^d < epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if boundary_ratio(1, r, d) < epsilon:
        return 1
    lo, hi = 1, 2
    while boundary_ratio(hi, r, d) >= epsilon:
        lo, hi = hi, hi * 2
    # the ratio is nonincreasing in N, so bisect on (lo, hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if boundary_ratio(mid, r, d) < epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def random_body(rng: np.random.Generator, N: int, d: int) -> ConvexBody:
    """A random interval or polygon hull that overlaps [0, N]^d."""
    size = N * rng.uniform(0.05, 1.5)
    centre = rng.uniform(-0.25 * N, 1.25 * N, size=d)
    if d == 1:
        return ConvexBody.interval(centre[0] - size / 2, centre[0] + size / 2)
    k = int(rng.integers(3, 13))
    pts = centre + size * (rng.random((k, 2)) - 0.5)
    return ConvexBody.hull(pts)


@dataclass
class LemmaReport:
    epsilon: float
    r: float
    d: int
    N0: int
    trials: int
    worst_fraction: float
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_lemma(seed: int, trials: int, epsilon: float, r: float, d: int) -> LemmaReport:
    if d not in (1, 2):
        raise ValueError("exact boundary distance supports d <= 2")
    N = find_N0(epsilon, r, d)
    rng = np.random.default_rng(seed)
    worst, failures = 0.0, []
    for i in range(trials):
        body = random_body(rng, N, d)
        rep = count_near_boundary(body, r, N, epsilon)
        worst = max(worst, rep.fraction)
        if not rep.passed:
            failures.append({"trial": i, "vertices": body.vertices.tolist(), "fraction": rep.fraction})
    return LemmaReport(float(epsilon), float(r), d, N, trials, worst, failures)


# ---------------------------------------------------------------------------
# Monte Carlo volumes for the bound chain


def mc_outer_box_volume(N: float, e: float, d: int, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo volume of {p : dist(p, [0,N]^d) <= e}, with its standard error."""
    rng = np.random.default_rng(seed)
    lo, hi = -e, N + e
    pts = rng.uniform(lo, hi, size=(samples, d))
    gap = np.maximum(np.maximum(-pts, pts - N), 0.0)
    hit = np.sum(gap * gap, axis=1) <= e * e
    vol = (hi - lo) ** d
    p = float(np.mean(hit))
    return vol * p, vol * math.sqrt(p * (1 - p) / samples)


def _clip_to_box(body: ConvexBody, N: float) -> ConvexBody | None:
    if body.d == 1:
        lo, hi = body.vertices[:, 0]
        lo, hi = max(lo, 0.0), min(hi, float(N))
        return ConvexBody.interval(lo, hi) if lo <= hi else None
    if len(body.vertices) < 3:
        return None
    poly = body.vertices
    for nrm, off in (((-1, 0), 0.0), ((1, 0), N), ((0, -1), 0.0), ((0, 1), N)):
        poly = geometry.clip_polygon(poly, nrm, off)
        if len(poly) == 0:
            return None
    return ConvexBody(2, poly)


def bound_chain(body: ConvexBody, r: float, N: int, samples: int, seed: int) -> dict:
    """Monte Carlo check of count <= vol(shell(V∩I)) <= 2 vol(outer(V∩I)) <= 2 vol(outer(I)).

    ``E = r + sqrt d``.  Each link is reported with its two sides; a link is
    flagged only when it fails by more than three standard errors.
    """
    d = body.d
    E = r + math.sqrt(d)
    count = count_near_boundary(body, r, N).count
    clipped = _clip_to_box(body, N)
    rng = np.random.default_rng(seed)
    lo, hi = -E, N + E
    pts = rng.uniform(lo, hi, size=(samples, d))
    vol = (hi - lo) ** d
    if clipped is None or (d == 2 and geometry.polygon_area(clipped.vertices) <= 0):
        shell = outer = 0.0
        se_shell = se_outer = 0.0
        degenerate = True
    else:
        dist = dist_to_polygon_boundary(clipped, pts)
        inside = clipped.contains(pts)
        near = dist <= E
        p_shell = float(np.mean(near))
        p_outer = float(np.mean(near | inside))
        shell, outer = vol * p_shell, vol * p_outer
        se_shell = vol * math.sqrt(p_shell * (1 - p_shell) / samples)
        se_outer = vol * math.sqrt(p_outer * (1 - p_outer) / samples)
        degenerate = False
    box_outer = steiner_outer_volume_box(N, E, d)
    links = {
        "count_le_shell": (count, shell, count <= shell + 3 * se_shell),
        "shell_le_twice_outer": (shell, 2 * outer, shell <= 2 * outer + 3 * (se_shell + 2 * se_outer)),
        "outer_le_box_outer": (2 * outer, 2 * box_outer, outer <= box_outer + 3 * se_outer),
    }
    return {"E": E, "degenerate_intersection": degenerate,
            "links": {k: {"lhs": a, "rhs": b, "holds": bool(ok)} for k, (a, b, ok) in links.items()}}
