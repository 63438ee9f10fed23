"""Horizontal cross-sections of the lifted Voronoi diagram.

For a point x the active centers are ``(n, t_n)`` with ``t_n = 1/phi(T^n x)``; the
slice at depth H is the power diagram of the labels ``n`` with weights
``-(H + t_n)^2``.  Cells are stored as halfspace lists ``normal . a <= offset``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from . import geometry
from .dynsys import TAU_GEO, RotationAction, act
from .marker import MarkerFunction, phi_eval, support_lattice

ON_BOUNDARY = "on-boundary"


def reach(L: int, d: int) -> float:
    """Strict bound on |a - n| for a point a of the cell with label n."""
    return L + math.sqrt(d)


@dataclass(frozen=True)
class TilingConfig:
    H: float
    s: float = 1.5
    truncation_radius: float = 0.0

    @classmethod
    def for_marker(cls, marker: MarkerFunction, d: int, H: float | None = None, s: float = 1.5):
        rc = reach(marker.L, d)
        cfg = cls(H=rc * rc + 1.0 if H is None else float(H), s=float(s),
                  truncation_radius=2.0 * rc + 1.0)
        cfg.validate(marker, d)
        return cfg

    def validate(self, marker: MarkerFunction, d: int):
        rc = reach(marker.L, d)
        if not self.H > rc * rc:
            raise ValueError(f"H={self.H} must exceed (L + sqrt d)^2 = {rc * rc}")
        if not 1.0 < self.s < 2.0:
            raise ValueError("s must lie in (1, 2)")
        if self.truncation_radius < 2.0 * rc + 1.0 - 1e-9:
            raise ValueError("truncation radius must be at least 2(L + sqrt d) + 1")


class WeightedCenter(NamedTuple):
    n: tuple
    t: float


@dataclass
class CellCrossSection:
    label: tuple
    level: float
    normals: np.ndarray
    offsets: np.ndarray
    witness: np.ndarray | None = None
    # offsets relative to the label, kept for accurate slack evaluation far from the origin
    rel_offsets: np.ndarray | None = field(default=None, repr=False)
    bound: float = 0.0
    _poly: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, len(self.label))
        self.offsets = np.asarray(self.offsets, dtype=float)
        if self.rel_offsets is None:
            self.rel_offsets = self.offsets - self.normals @ np.asarray(self.label, dtype=float)
        if self.witness is None:
            self.witness = self._find_witness()

    @property
    def d(self) -> int:
        return len(self.label)

    @property
    def empty(self) -> bool:
        return self.witness is None

    def slack(self, points) -> np.ndarray:
        """Signed distance to the nearest wall hyperplane (positive strictly inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.label, dtype=float)
        if len(self.offsets) == 0:
            return np.full(len(pts), np.inf)
        norm = np.linalg.norm(self.normals, axis=1)
        return np.min((self.rel_offsets - pts @ self.normals.T) / norm, axis=1)

    def contains(self, points, tol: float = TAU_GEO) -> np.ndarray:
        return self.slack(points) >= -tol

    def interval(self) -> tuple[float, float]:
        """d=1: the cell as [lo, hi] (possibly infinite, possibly lo > hi when empty)."""
        nrm = self.normals[:, 0]
        c = float(self.label[0])
        pos, neg = nrm > 0, nrm < 0
        hi = c + np.min(self.rel_offsets[pos] / nrm[pos]) if pos.any() else np.inf
        lo = c + np.max(self.rel_offsets[neg] / nrm[neg]) if neg.any() else -np.inf
        return float(lo), float(hi)

    def polygon(self) -> np.ndarray:
        """d=2: ccw vertices, clipped to the square of half-size ``bound`` around the label."""
        if self._poly is None:
            c = np.asarray(self.label, dtype=float)
            poly = geometry.halfspace_polygon(self.normals, self.rel_offsets, (0.0, 0.0), self.bound)
            self._poly = poly + c if len(poly) else poly
        return self._poly

    def is_bounded(self) -> bool:
        if self.d == 1:
            lo, hi = self.interval()
            return math.isfinite(lo) and math.isfinite(hi)
        if self.d == 2:
            poly = self.polygon() - np.asarray(self.label, dtype=float)
            return len(poly) > 0 and np.max(np.abs(poly)) < self.bound * (1 - 1e-9)
        return all(math.isfinite(self.support(u)) for u in np.vstack([np.eye(self.d), -np.eye(self.d)]))

    def _find_witness(self):
        d = self.d
        c = np.asarray(self.label, dtype=float)
        if len(self.offsets) == 0:
            return c
        if d == 1:
            lo, hi = self.interval()
            if not lo + TAU_GEO < hi:
                return None
            if math.isinf(lo) and math.isinf(hi):
                return c
            if math.isinf(lo):
                return np.array([hi - 1.0])
            if math.isinf(hi):
                return np.array([lo + 1.0])
            return np.array([(lo + hi) / 2.0])
        if d == 2 and self.bound > 0:
            poly = self.polygon()
            if len(poly) < 3 or geometry.polygon_area(poly) <= TAU_GEO:
                return None
            w = poly.mean(axis=0)
            return w if self.slack(w)[0] > 0 else None
        # Chebyshev center by linear programming
        norm = np.linalg.norm(self.normals, axis=1)
        A = np.hstack([self.normals, norm[:, None]])
        big = self.bound if self.bound > 0 else 1e6
        res = linprog(np.r_[np.zeros(d), -1.0], A_ub=A, b_ub=self.rel_offsets,
                      bounds=[(-big, big)] * d + [(0, big)], method="highs")
        if res.status != 0 or res.x[-1] <= TAU_GEO:
            return None
        return res.x[:d] + c

    def support(self, u) -> float:
        """max over the cell of u . a."""
        u = np.asarray(u, dtype=float)
        if self.d == 1:
            lo, hi = self.interval()
            return u[0] * hi if u[0] > 0 else u[0] * lo
        if self.d == 2:
            poly = self.polygon()
            if not self.is_bounded():
                return math.inf
            return float(np.max(poly @ u))
        res = linprog(-u, A_ub=self.normals, b_ub=self.offsets, bounds=[(None, None)] * self.d,
                      method="highs")
        return math.inf if res.status == 3 else float(-res.fun)

    def boundary_distance(self, points) -> np.ndarray:
        """Distance from each point to the cell boundary, from inside or outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.d == 1:
            lo, hi = self.interval()
            return np.minimum(np.abs(pts[:, 0] - lo), np.abs(pts[:, 0] - hi))
        if self.d == 2:
            return geometry.boundary_distance(pts, self.polygon())
        sl = self.slack(pts)
        if np.any(sl < 0):
            raise NotImplementedError("outside distance supports d <= 2")
        return sl

    def nearest_boundary_point(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        if self.d == 1:
            lo, hi = self.interval()
            return np.array([lo if abs(p[0] - lo) <= abs(p[0] - hi) else hi])
        if self.d == 2:
            return geometry.nearest_boundary_point(p, self.polygon())
        raise NotImplementedError("nearest boundary point supports d <= 2")

    def translate(self, v) -> "CellCrossSection":
        """The cell shifted by the integer vector ``v``; the label moves with it."""
        v = np.asarray(v, dtype=np.int64)
        label = tuple(int(a) for a in np.asarray(self.label) + v)
        return CellCrossSection(label, self.level, self.normals.copy(),
                                self.offsets + self.normals @ v, rel_offsets=self.rel_offsets.copy(),
                                bound=self.bound)

    def facets(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit normals and offsets (relative to the label) of the walls that touch the cell.

        Only for bounded cells with interior in d <= 2.
        """
        c = np.asarray(self.label, dtype=float)
        if self.d == 1:
            lo, hi = self.interval()
            return np.array([[-1.0], [1.0]]), np.array([-(lo - c[0]), hi - c[0]])
        poly = self.polygon() - c
        # exact wall normals; edge directions of the clipped polygon lose accuracy far from 0
        norm = np.linalg.norm(self.normals, axis=1)
        normals, offsets = self.normals / norm[:, None], self.rel_offsets / norm
        gap = np.min(offsets[:, None] - normals @ poly.T, axis=1)
        keep = gap <= 1e-7 * (1.0 + float(np.abs(poly).max()))
        return normals[keep], offsets[keep]

    def canonical_halfspaces(self) -> np.ndarray:
        """Unit-normal halfspaces sorted lexicographically, as rows (normal..., offset)."""
        norm = np.linalg.norm(self.normals, axis=1)
        rows = np.hstack([self.normals / norm[:, None], (self.offsets / norm)[:, None]])
        return rows[np.lexsort(rows.T[::-1])]


# ---------------------------------------------------------------------------


def active_centers(action: RotationAction, marker: MarkerFunction, x, window_radius: float,
                   origin=None) -> list[WeightedCenter]:
    """All n with |n - origin| <= window_radius and phi(T^n x) > tau, sorted lexicographically."""
    labels, t = _center_arrays(action, marker, x, window_radius, origin)
    return [WeightedCenter(tuple(int(v) for v in n), float(w)) for n, w in zip(labels, t)]


def _center_arrays(action, marker, x, window_radius, origin=None):
    labels = support_lattice(action, x, marker.center, marker.r_outer, origin, window_radius)
    if labels.size == 0:
        return labels, np.zeros(0)
    phi = np.atleast_1d(phi_eval(marker, act(action, x, labels)))
    keep = phi > TAU_GEO
    return labels[keep], 1.0 / phi[keep]


def weight_shift(t, H: float):
    """(H + t)^2 - (H + 1)^2, computed without cancellation."""
    t = np.asarray(t, dtype=float)
    return (t - 1.0) * (2.0 * H + t + 1.0)


def _cell_from_arrays(labels, t, n0, t0, H, bound, competitor_radius=None):
    n0 = np.asarray(n0, dtype=np.int64)
    diff = labels - n0
    sq = np.sum(diff * diff, axis=1)
    keep = sq > 0
    if competitor_radius is not None:
        keep &= sq <= competitor_radius * competitor_radius
    diff, sq, tm = diff[keep], sq[keep], t[keep]
    delta = (tm - t0) * (2.0 * H + tm + t0)
    normals = 2.0 * diff
    rel = sq + delta
    nrm0 = float(np.dot(n0, n0))
    offsets = np.sum(labels[keep] * labels[keep], axis=1) - nrm0 + delta
    return CellCrossSection(tuple(int(v) for v in n0), -float(H), normals, offsets,
                            rel_offsets=rel.astype(float), bound=bound)


def cross_section_halfspaces(centers, n0, H: float, competitor_radius: float | None = None,
                             bound: float | None = None) -> CellCrossSection:
    """The slice at depth H of the lifted Voronoi cell of label ``n0``.

    Competitor ``m`` contributes ``2(m - n0) . a <= |m|^2 - |n0|^2 + (H + t_m)^2 - (H + t_n0)^2``.
    A label that is not an active center gives the empty cell.
    """
    labels = np.array([c.n for c in centers], dtype=np.int64).reshape(len(centers), -1)
    t = np.array([c.t for c in centers], dtype=float)
    n0 = tuple(int(v) for v in np.atleast_1d(n0))
    d = len(n0)
    if bound is None:
        bound = float(np.max(np.linalg.norm(labels - n0, axis=1))) + 1.0 if len(labels) else 1.0
    hit = np.flatnonzero(np.all(labels == np.asarray(n0), axis=1)) if len(labels) else []
    if len(hit) == 0:
        empty = CellCrossSection(n0, -float(H), np.zeros((0, d)), np.zeros(0), bound=bound)
        empty.witness = None
        return empty
    return _cell_from_arrays(labels, t, n0, t[hit[0]], H, bound, competitor_radius)


class Tiling:
    """The slice at depth ``level`` of the tiling of ``x``, materialized on a window of centers."""

    def __init__(self, action: RotationAction, marker: MarkerFunction, config: TilingConfig, x,
                 level: float | None = None, window_radius: float | None = None, origin=None):
        self.action, self.marker, self.config = action, marker, config
        self.x = np.asarray(x, dtype=float)
        self.level = config.H if level is None else float(level)
        d = action.d
        self.reach = reach(marker.L, d)
        self.trunc = config.truncation_radius
        self.origin = np.zeros(d, dtype=np.int64) if origin is None else np.asarray(origin, np.int64)
        self.window_radius = (self.reach + self.trunc + 1.0 if window_radius is None
                              else float(window_radius))
        self.labels, self.t = _center_arrays(action, marker, self.x, self.window_radius, self.origin)
        self._index = {tuple(int(v) for v in n): i for i, n in enumerate(self.labels)}
        self._cells: dict = {}

    @property
    def d(self) -> int:
        return self.action.d

    def weight(self, label) -> float | None:
        i = self._index.get(tuple(int(v) for v in label))
        return None if i is None else float(self.t[i])

    def power(self, points) -> np.ndarray:
        """Power distances (shifted by a constant) of points to every center, shape (P, k)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        diff = pts[:, None, :] - self.labels[None, :, :]
        return np.sum(diff * diff, axis=2) + weight_shift(self.t, self.level)[None, :]

    def locate(self, points) -> np.ndarray:
        """Label of the cell containing each point (argmin of the power distance)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if len(self.labels) == 0:
            raise RuntimeError("marker/tiling inconsistency: no active center in the window")
        out = np.empty((len(pts), self.d), dtype=np.int64)
        for s in range(0, len(pts), 20000):
            out[s:s + 20000] = self.labels[np.argmin(self.power(pts[s:s + 20000]), axis=1)]
        return out

    def covers(self, label, extra: float = 0.0) -> bool:
        lab = np.asarray(label) - self.origin
        return float(np.linalg.norm(lab)) + self.trunc + extra <= self.window_radius + 1e-9

    def cell(self, label) -> CellCrossSection:
        key = tuple(int(v) for v in label)
        if key not in self._cells:
            if not self.covers(key):
                raise ValueError(f"label {key} too close to the edge of the center window")
            i = self._index.get(key)
            if i is None:
                cell = CellCrossSection(key, -self.level, np.zeros((0, self.d)), np.zeros(0),
                                        bound=self.trunc)
                cell.witness = None
            else:
                cell = _cell_from_arrays(self.labels, self.t, key, self.t[i], self.level,
                                         self.trunc, self.trunc)
            self._cells[key] = cell
        return self._cells[key]

    def labels_near(self, point, radius: float) -> np.ndarray:
        """Active labels within ``radius`` of ``point``."""
        diff = self.labels - np.asarray(point, dtype=float)
        return self.labels[np.sum(diff * diff, axis=1) <= radius * radius]

    def origin_cell(self, point=None):
        """Cell containing ``point`` (default 0) with the distance to its walls, or ON_BOUNDARY."""
        p = np.zeros(self.d) if point is None else np.asarray(point, dtype=float)
        label = self.locate(p)[0]
        cell = self.cell(label)
        dist0 = float(cell.slack(p)[0])
        if dist0 < TAU_GEO:
            return ON_BOUNDARY
        return OriginCell(tuple(int(v) for v in label), dist0, cell)


class OriginCell(NamedTuple):
    label: tuple
    dist0: float
    cell: CellCrossSection


def origin_cell(action: RotationAction, marker: MarkerFunction, config: TilingConfig, x,
                level: float | None = None):
    """The tile containing the origin and the distance from 0 to its boundary, or ON_BOUNDARY."""
    return Tiling(action, marker, config, x, level).origin_cell()


def tile(action, marker, config, x, n, level: float | None = None) -> CellCrossSection:
    """W(x, n) at the given level (default H)."""
    n = np.atleast_1d(np.asarray(n, dtype=np.int64))
    tl = Tiling(action, marker, config, x, level,
                window_radius=float(np.linalg.norm(n)) + config.truncation_radius + 1.0)
    return tl.cell(n)


def h_projective_image(a, n, t: float, s: float, H: float) -> np.ndarray:
    """Image of (a, -sH) on the slice at depth H under projection toward the center (n, t)."""
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    return a + ((s - 1.0) * H / (s * H + t)) * (n - a)


def homothety_point(a, n, s: float) -> np.ndarray:
    """a/s + (1 - 1/s) n."""
    return np.asarray(a, dtype=float) / s + (1.0 - 1.0 / s) * np.asarray(n, dtype=float)


def _directions(d: int, count: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    u = np.random.default_rng(0).normal(size=(count, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def hausdorff_estimate(cell_a: CellCrossSection, cell_b: CellCrossSection,
                       direction_count: int = 64) -> float:
    """Max over sampled unit directions of the support-function difference."""
    for c in (cell_a, cell_b):
        if c.empty:
            raise ValueError("empty cell")
        if not c.is_bounded():
            raise ValueError("unbounded cell")
    best = 0.0
    for u in _directions(cell_a.d, direction_count):
        best = max(best, abs(cell_a.support(u) - cell_b.support(u)))
    return best


def cut_down_radius(M: int, s: float, H: float, t: float, displacement: float) -> float:
    """Radius of the ball around a/s + (1-1/s)n guaranteed inside W_H(x, n).

    The cone from (a, -sH) over the ball of radius M/2 about (n, t) meets the slice
    at depth H in a disc of radius (s-1)H/(sH+t) * M/2 about the projective image.
    """
    return (s - 1.0) * H / (s * H + t) * M / 2.0 - displacement


# ---------------------------------------------------------------------------
# property checks


def sample_in_cell(cell: CellCrossSection, rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform points of a bounded cell (rejection from the bounding box for d=2)."""
    if cell.d == 1:
        lo, hi = cell.interval()
        return rng.uniform(lo, hi, size=(count, 1))
    poly = cell.polygon()
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    out = []
    while sum(len(o) for o in out) < count:
        cand = rng.uniform(lo, hi, size=(4 * count, 2))
        out.append(cand[geometry.inside_convex(cand, poly)])
    return np.vstack(out)[:count]


def boundary_samples(cell: CellCrossSection, rng: np.random.Generator, count: int) -> np.ndarray:
    if cell.d == 1:
        lo, hi = cell.interval()
        return np.array([[lo], [hi]])
    poly = cell.polygon()
    return np.array([geometry.perimeter_point(poly, u) for u in rng.random(count)])


def voronoi_slack(tiling: Tiling, label, xi) -> np.ndarray:
    """min over competitors of |xi - c_m|^2 - |xi - c_n|^2 for points xi of R^{d+1}."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    centers = np.hstack([tiling.labels, tiling.t[:, None]])
    own = np.r_[np.asarray(label, dtype=float), tiling.weight(label)]
    d_all = np.sum((xi[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    d_own = np.sum((xi - own) ** 2, axis=1)
    return np.min(d_all - d_own[:, None], axis=1)


def _violation(prop, **kw) -> dict:
    kw["property"] = prop
    return kw


def check_weight_bound(tiling: Tiling, radius: float) -> list[dict]:
    """Every label with a nonempty tile near the origin has weight in [1, 2]."""
    out = []
    for n in tiling.labels_near(np.zeros(tiling.d), radius):
        if not tiling.covers(n):
            continue
        t = tiling.weight(n)
        if not tiling.cell(n).empty and not (1.0 <= t <= 2.0 + TAU_GEO):
            out.append(_violation("weight_bound", label=n.tolist(), t=t))
    return out


def check_truncation(tiling: Tiling, label, rng, count: int = 64) -> list[dict]:
    """Points of the tile stay strictly within L + sqrt(d) of the label."""
    cell = tiling.cell(label)
    if cell.empty:
        return []
    pts = np.vstack([sample_in_cell(cell, rng, count), boundary_samples(cell, rng, count)])
    dist = np.linalg.norm(pts - np.asarray(label, dtype=float), axis=1)
    bad = np.flatnonzero(dist >= tiling.reach)
    return [_violation("truncation", label=list(label), point=pts[i].tolist(), distance=float(dist[i]))
            for i in bad[:5]]


def check_ball_containment(tiling: Tiling, label, rng, count: int = 64) -> list[dict]:
    """Points of the (d+1)-ball of radius M/2 about (n, t_n) satisfy the Voronoi inequalities."""
    t = tiling.weight(label)
    if t is None:
        return []
    d = tiling.d
    u = rng.normal(size=(count, d + 1))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    radius = tiling.marker.M / 2.0 * rng.random(count) ** (1.0 / (d + 1))
    xi = np.r_[np.asarray(label, dtype=float), t] + u * radius[:, None]
    sl = voronoi_slack(tiling, label, xi)
    bad = np.flatnonzero(sl < -1e-7)
    return [_violation("ball_containment", label=list(label), point=xi[i].tolist(), slack=float(sl[i]))
            for i in bad[:5]]


def check_cut_down(upper: Tiling, deep: Tiling, label, rng, count: int = 32) -> list[dict]:
    """Balls about a/s + (1-1/s)n, a on the boundary of the deep tile, fit in the upper tile.

    Also checks that the displacement to the projective image is at most 4/(L + sqrt d).
    """
    deep_cell = deep.cell(label)
    if deep_cell.empty or not deep_cell.is_bounded():
        return []
    s, H = upper.config.s, upper.level
    t = upper.weight(label)
    upper_cell = upper.cell(label)
    bound = 4.0 / upper.reach
    lam = (s - 1.0) * H / (s * H + t)
    out = []
    for a in boundary_samples(deep_cell, rng, count):
        centre = homothety_point(a, label, s)
        disp = float(np.linalg.norm(centre - h_projective_image(a, label, t, s, H)))
        if disp > bound:
            out.append(_violation("projective_displacement", label=list(label), point=a.tolist(),
                                  displacement=disp, bound=bound))
        r = lam * upper.marker.M / 2.0 - disp
        sl = float(upper_cell.slack(centre)[0])
        if sl < r - 1e-7:
            out.append(_violation("cut_down", label=list(label), point=a.tolist(), radius=r, slack=sl))
    return out


def check_continuity(action, marker, config, x, label, rng, step: float = 1e-6,
                     tolerance: float = 1e-3) -> list[dict]:
    """Moving x by ``step`` moves a tile with interior by less than ``tolerance`` in Hausdorff distance."""
    u = rng.normal(size=action.m)
    y = np.mod(np.asarray(x, dtype=float) + step * u / np.linalg.norm(u), 1.0)
    a, b = tile(action, marker, config, x, label), tile(action, marker, config, y, label)
    if a.empty or b.empty:
        return []
    h = hausdorff_estimate(a, b)
    if h >= tolerance:
        return [_violation("continuity", label=list(label), x=list(map(float, x)), y=y.tolist(),
                           hausdorff=h)]
    return []


def check_equivariance(action, marker, config, x, shift, label) -> list[dict]:
    """W(T^m x, n - m) = W(x, n) - m."""
    shift = np.asarray(shift, dtype=np.int64)
    a = tile(action, marker, config, x, label).translate(-shift)
    b = tile(action, marker, config, act(action, x, shift), np.asarray(label) - shift)
    if a.empty != b.empty:
        return [_violation("equivariance", label=list(label), shift=shift.tolist(), emptiness=True)]
    if a.empty:
        return []
    h = hausdorff_estimate(a, b)
    if h >= 1e-6:
        return [_violation("equivariance", label=list(label), shift=shift.tolist(), hausdorff=h)]
    return []


def check_double_truncation(action, marker, config, x, label) -> list[dict]:
    """Debug mode: doubling the competitor radius leaves the tile unchanged."""
    label = np.atleast_1d(np.asarray(label, dtype=np.int64))
    wide = TilingConfig(config.H, config.s, 2.0 * config.truncation_radius)
    a = tile(action, marker, config, x, label)
    b = tile(action, marker, wide, x, label)
    if a.empty and b.empty:
        return []
    if a.empty != b.empty or hausdorff_estimate(a, b) >= 1e-9:
        return [_violation("double_truncation", label=label.tolist())]
    return []


PROPERTIES = ("equivariance", "weight_bound", "truncation", "ball_containment", "cut_down",
              "projective_displacement", "continuity")


def run_tiling_suite(action: RotationAction, marker: MarkerFunction, config: TilingConfig,
                     seed: int, trials: int, shift_range: int = 5,
                     continuity: bool = True) -> dict:
    """Random (x, m, n) trials of the tile properties; returns violations keyed by property."""
    rng = np.random.default_rng(seed)
    d = action.d
    found = {p: [] for p in PROPERTIES}
    if not continuity:
        del found["continuity"]
    for _ in range(trials):
        x = rng.random(action.m)
        shift = rng.integers(-shift_range, shift_range + 1, size=d)
        upper = Tiling(action, marker, config, x)
        deep = Tiling(action, marker, config, x, level=config.s * config.H)
        # a label whose tile lies near the origin, found by locating a random point
        label = tuple(int(v) for v in upper.locate(rng.uniform(-1.0, 1.0, size=(1, d)))[0])
        found["equivariance"] += check_equivariance(action, marker, config, x, shift, label)
        found["weight_bound"] += check_weight_bound(upper, upper.reach + 1.0)
        found["truncation"] += check_truncation(upper, label, rng)
        found["truncation"] += check_truncation(deep, label, rng)
        found["ball_containment"] += check_ball_containment(upper, label, rng)
        for v in check_cut_down(upper, deep, label, rng):
            found[v["property"]].append(v)
        if continuity:
            found["continuity"] += check_continuity(action, marker, config, x, label, rng)
    return found


def tiling_polygons(tiling: Tiling, viewport) -> tuple[list, list]:
    """Polygons of all tiles meeting the viewport (xmin, xmax, ymin, ymax)."""
    x0, x1, y0, y1 = viewport
    grid = np.stack(np.meshgrid(np.linspace(x0, x1, 41), np.linspace(y0, y1, 41)), -1).reshape(-1, 2)
    labels = np.unique(tiling.locate(grid), axis=0)
    # tiles can meet the viewport without containing a grid point; add every label in reach
    extra = [n for n in tiling.labels
             if x0 - tiling.reach <= n[0] <= x1 + tiling.reach
             and y0 - tiling.reach <= n[1] <= y1 + tiling.reach]
    if extra:
        labels = np.unique(np.vstack([labels, np.array(extra)]), axis=0)
    polys, labs = [], []
    for n in labels:
        cell = tiling.cell(n)
        if not cell.empty:
            polys.append(cell.polygon())
            labs.append(tuple(int(v) for v in n))
    return polys, labs


def render_svg(action: RotationAction, marker: MarkerFunction, config: TilingConfig, x,
               viewport=(-15.0, 15.0, -15.0, 15.0), balls=(), stroke: float = 0.8) -> bytes:
    """SVG drawing of the depth-H tiling of ``x`` inside ``viewport``."""
    from . import plotting

    if action.d != 2:
        raise ValueError("render supports d=2 only")
    corner = max(math.hypot(a, b) for a in viewport[:2] for b in viewport[2:])
    rc = reach(marker.L, 2)
    tl = Tiling(action, marker, config, x, window_radius=corner + 2 * rc + config.truncation_radius + 2)
    polys, labs = tiling_polygons(tl, viewport)
    return plotting.draw_cells(polys, labs, viewport, balls=balls, stroke=stroke)
