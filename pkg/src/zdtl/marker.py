"""Marker functions: a radial bump on the torus with separation constant M and covering constant L."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .dynsys import (TAU_GEO, RotationAction, act, canonical, lattice_ball, sample_points,
                     torus_distance, wrapped_delta)

# brute-force lattice enumeration is refused beyond this many points
BRUTE_FORCE_LIMIT = 4_000_000
# windows larger than this use line-by-line enumeration when the action allows it
FIBER_THRESHOLD = 40_000


@dataclass(frozen=True)
class MarkerFunction:
    center: tuple
    r_inner: float
    r_outer: float
    M: int
    L: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in canonical(self.center)))
        if not 0 < self.r_inner < self.r_outer:
            raise ValueError("marker radii must satisfy 0 < r_inner < r_outer")
        if self.M < 1 or self.L < 0:
            raise ValueError(f"invalid marker constants M={self.M}, L={self.L}")


def phi_eval(marker: MarkerFunction, x) -> np.ndarray | float:
    """Linear ramp: 1 on the closed inner ball, 0 outside the open outer ball."""
    dist = torus_distance(x, np.asarray(marker.center))
    val = np.clip((marker.r_outer - np.asarray(dist)) / (marker.r_outer - marker.r_inner), 0.0, 1.0)
    return float(val) if np.ndim(val) == 0 else val


# ---------------------------------------------------------------------------
# support enumeration


class _SortedOrbit:
    """Sorted fractional parts of k*alpha for |k| <= K, grown on demand."""

    def __init__(self, alpha: float):
        self.alpha = alpha
        self.K = -1
        self.frac = None
        self.ks = None

    def ensure(self, K: int):
        if K <= self.K:
            return
        K = max(K, 2 * self.K, 1024)
        ks = np.arange(-K, K + 1, dtype=np.int64)
        fr = canonical(ks * self.alpha)
        order = np.argsort(fr, kind="stable")
        self.frac, self.ks, self.K = fr[order], ks[order], K

    def hits(self, offset: float, rho: float, lo: int, hi: int) -> np.ndarray:
        """k in [lo, hi] with |offset + k*alpha - nearest integer| < rho."""
        self.ensure(max(abs(lo), abs(hi)))
        pad = rho + 1e-9
        # want frac(k alpha) in (-offset - pad, -offset + pad) mod 1
        a = (-offset - pad) % 1.0
        b = (-offset + pad) % 1.0
        if 2 * pad >= 1.0:
            ks = self.ks
        elif a <= b:
            ks = self.ks[np.searchsorted(self.frac, a):np.searchsorted(self.frac, b, side="right")]
        else:
            ks = np.concatenate([self.ks[np.searchsorted(self.frac, a):],
                                 self.ks[:np.searchsorted(self.frac, b, side="right")]])
        ks = ks[(ks >= lo) & (ks <= hi)]
        return np.sort(ks)

    def hits_many(self, offsets, rho: float, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized ``hits``: pairs (row, k) with k in [lo[row], hi[row]]."""
        offsets = np.asarray(offsets, dtype=float)
        lo, hi = np.asarray(lo), np.asarray(hi)
        self.ensure(int(max(np.abs(lo).max(initial=0), np.abs(hi).max(initial=0))))
        pad = rho + 1e-9
        size = len(self.frac)
        if 2 * pad >= 1.0:
            starts = [np.zeros(len(offsets), np.int64)]
            stops = [np.full(len(offsets), size, np.int64)]
            owners = [np.arange(len(offsets))]
        else:
            a = np.mod(-offsets - pad, 1.0)
            b = np.mod(-offsets + pad, 1.0)
            ia = np.searchsorted(self.frac, a)
            ib = np.searchsorted(self.frac, b, side="right")
            wrap = a > b
            idx = np.arange(len(offsets))
            starts = [ia, np.zeros(int(wrap.sum()), np.int64)]
            stops = [np.where(wrap, size, ib), ib[wrap]]
            owners = [idx, idx[wrap]]
        start, stop, owner = (np.concatenate(v) for v in (starts, stops, owners))
        count = np.maximum(stop - start, 0)
        total = int(count.sum())
        if total == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        row = np.repeat(owner, count)
        # position within each run, then index into the sorted orbit
        first = np.repeat(np.cumsum(count) - count, count)
        pos = np.arange(total) - first + np.repeat(start, count)
        k = self.ks[pos]
        keep = (k >= lo[row]) & (k <= hi[row])
        return row[keep], k[keep]


_ORBITS: dict[float, _SortedOrbit] = {}


def _orbit(alpha: float) -> _SortedOrbit:
    if alpha not in _ORBITS:
        _ORBITS[alpha] = _SortedOrbit(alpha)
    return _ORBITS[alpha]


@functools.lru_cache(maxsize=64)
def _cached_ball(radius: float, d: int) -> np.ndarray:
    out = lattice_ball(radius, d)
    out.setflags(write=False)
    return out


def _fiber_candidates(action: RotationAction, x, center, rho: float, origin, radius: float) -> np.ndarray:
    """Candidates from lines along the last lattice axis, matched on the first torus coordinate."""
    d = action.d
    A = action.matrix
    head = lattice_ball(radius, d - 1) + origin[:-1]
    span = np.floor(np.sqrt(np.maximum(radius * radius - np.sum((head - origin[:-1]) ** 2, axis=1), 0.0))
                    + 1e-9).astype(np.int64)
    o = int(origin[-1])
    rows, ks = _orbit(float(A[d - 1, 0])).hits_many(x[0] - center[0] + head @ A[:-1, 0], rho,
                                                    o - span, o + span)
    return np.column_stack([head[rows], ks]).astype(np.int64)


def support_lattice(action: RotationAction, x, center, rho: float, origin=None, radius: float = 0.0,
                    ) -> np.ndarray:
    """Lattice vectors n with ``|n - origin| <= radius`` and ``dist(T^n x, center) < rho``.

    Returns an (k, d) integer array sorted lexicographically.
    """
    d = action.d
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    origin = np.zeros(d, dtype=np.int64) if origin is None else np.asarray(origin, dtype=np.int64)
    if action.is_diagonal:
        R = int(math.floor(radius))
        axes = []
        for i in range(d):
            ks = _orbit(action.matrix[i, i]).hits(x[i] - center[i], rho,
                                                  int(origin[i]) - R, int(origin[i]) + R)
            if ks.size == 0:
                return np.zeros((0, d), dtype=np.int64)
            axes.append(ks)
        cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    elif d >= 2 and (2 * math.floor(radius) + 1) ** d > FIBER_THRESHOLD and action.matrix[d - 1, 0] != 0:
        cand = _fiber_candidates(action, x, center, rho, origin, radius)
    else:
        npts = (2 * math.floor(radius) + 1) ** d
        if npts > BRUTE_FORCE_LIMIT:
            raise ValueError("window too large for a non-diagonal action; use a diagonal system")
        cand = _cached_ball(float(radius), d) + origin
    diff = cand - origin
    keep = np.sum(diff * diff, axis=1) <= radius * radius + 1e-9
    cand = cand[keep]
    if cand.size == 0:
        return cand
    dist = torus_distance(act(action, x, cand), center)
    out = cand[dist < rho]
    if out.size:
        out = out[np.lexsort(out.T[::-1])]
    return out


# ---------------------------------------------------------------------------
# separation constant


def _first_failure_1d(alpha: float, threshold: float, cap: int) -> int:
    """Smallest k >= 1 with ||k alpha|| <= threshold."""
    start, chunk = 1, 4096
    while start <= cap:
        ks = np.arange(start, min(start + chunk, cap + 1), dtype=np.int64)
        bad = np.flatnonzero(wrapped_delta(ks * alpha) <= threshold)
        if bad.size:
            return int(ks[bad[0]])
        start += chunk
        chunk *= 2
    raise ValueError("separation scan cap exceeded")


def _min_orbit_distance_norm(action: RotationAction, threshold: float, cap: float) -> float:
    """Smallest l2 norm of a nonzero n with dist(nA, 0) <= threshold."""
    if action.is_diagonal:
        return float(min(_first_failure_1d(action.matrix[i, i], threshold, int(cap))
                         for i in range(action.d)))
    R = 8.0
    while R <= cap:
        ns = _cached_ball(R, action.d)
        ns = ns[np.any(ns != 0, axis=1)]
        norms = np.linalg.norm(ns, axis=1)
        bad = torus_distance(canonical(ns @ action.matrix), np.zeros(action.m)) <= threshold
        if np.any(bad):
            return float(norms[bad].min())
        R *= 2
    raise ValueError("separation scan cap exceeded")


def compute_M(action: RotationAction, r_outer: float, cap: float = 1e8) -> int:
    """Largest M with ``dist(nA, 0) > 2 r_outer`` for every nonzero ``|n| <= M``."""
    rho = _min_orbit_distance_norm(action, 2.0 * r_outer, cap)
    M = int(math.ceil(rho)) - 1
    if M < 1:
        raise ValueError("marker radius too large")
    return M


# ---------------------------------------------------------------------------
# covering constant


def _max_gap_1d(points: np.ndarray) -> float:
    p = np.sort(np.mod(points, 1.0))
    gaps = np.diff(np.concatenate([p, [p[0] + 1.0]]))
    return float(gaps.max())


def _axis_points(alpha: float, c: float, K: int) -> np.ndarray:
    return canonical(c - np.arange(-K, K + 1) * alpha)


def _grid_uncovered(points: np.ndarray, r_inner: float):
    """Worst grid-cell center of T^2 further than r_inner*3/4 from every point, or None."""
    h = r_inner / 4.0
    k = int(math.ceil(1.0 / h))
    axis = (np.arange(k) + 0.5) / k
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    tree = cKDTree(canonical(points), boxsize=1.0)
    dist, _ = tree.query(grid)
    worst = int(np.argmax(dist))
    return grid[worst] if dist[worst] > r_inner - h else None


def _covered(action: RotationAction, center, r_inner: float, L: int) -> bool:
    return _uncovered_point(action, center, r_inner, L) is None


def _uncovered_point(action: RotationAction, center, r_inner: float, L: int):
    center = np.asarray(center, dtype=float)
    d, m = action.d, action.m
    if d == 1 and m == 1:
        p = np.sort(_axis_points(action.matrix[0, 0], center[0], L))
        gaps = np.diff(np.concatenate([p, [p[0] + 1.0]]))
        i = int(np.argmax(gaps))
        if gaps[i] <= 2.0 * r_inner:
            return None
        return canonical(np.array([p[i] + gaps[i] / 2.0]))
    if action.is_diagonal:
        # product certificate: the box |n_i| <= K sits inside the l2 ball of radius L
        K = int(math.floor(L / math.sqrt(d) + 1e-12))
        gaps = []
        mids = []
        for i in range(d):
            p = np.sort(_axis_points(action.matrix[i, i], center[i], K))
            g = np.diff(np.concatenate([p, [p[0] + 1.0]]))
            j = int(np.argmax(g))
            gaps.append(g[j])
            mids.append(p[j] + g[j] / 2.0)
        if math.sqrt(sum((g / 2.0) ** 2 for g in gaps)) <= r_inner:
            return None
        return canonical(np.array(mids))
    if m == 2:
        ns = _cached_ball(float(L), d)
        pts = canonical(center - ns @ action.matrix)
        return _grid_uncovered(pts, r_inner)
    raise ValueError("covering check supports m=1, m=2 or diagonal actions")


def compute_L(action: RotationAction, center, r_inner: float, cap: int = 10_000_000) -> int:
    """Smallest L whose inner balls around ``center - nA`` (|n| <= L) cover the torus."""
    if _covered(action, center, r_inner, 0):
        return 0
    hi = 1
    while not _covered(action, center, r_inner, hi):
        hi *= 2
        if hi > cap:
            raise ValueError("covering cap exceeded")
    lo = hi // 2  # uncovered
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _covered(action, center, r_inner, mid):
            hi = mid
        else:
            lo = mid
    return hi


def uncovered_witness(action: RotationAction, marker: MarkerFunction, L: int):
    """A point missed by the inner balls at radius ``L``, or None if the cover is complete."""
    if L < 0:
        return np.asarray(marker.center)
    return _uncovered_point(action, marker.center, marker.r_inner, L)


def separation_witness(action: RotationAction, marker: MarkerFunction, M: int):
    """A point x with phi(x) > 0 and phi(T^n x) > 0 for some nonzero |n| <= M, or None."""
    c = np.asarray(marker.center)
    ns = _cached_ball(float(M), action.d) if not action.is_diagonal else np.vstack(
        [np.eye(action.d, dtype=np.int64) * k for k in range(1, M + 1)])
    ns = ns[np.any(ns != 0, axis=1)]
    shift = torus_distance(canonical(ns @ action.matrix), np.zeros(action.m))
    i = int(np.argmin(shift))
    if shift[i] >= 2 * marker.r_outer:
        return None
    # midpoint between the marker center and its preimage under T^n
    delta = canonical(ns[i] @ action.matrix)
    delta = np.where(delta > 0.5, delta - 1.0, delta)
    return canonical(c - delta / 2.0)


# ---------------------------------------------------------------------------
# construction


def make_marker(action: RotationAction, r_inner: float, r_outer: float | None = None,
                center=None) -> MarkerFunction:
    r_outer = 2.0 * r_inner if r_outer is None else r_outer
    center = np.zeros(action.m) if center is None else np.asarray(center, dtype=float)
    M = compute_M(action, r_outer)
    L = compute_L(action, center, r_inner)
    return MarkerFunction(tuple(center), r_inner, r_outer, M, L)


@functools.lru_cache(maxsize=16)
def default_marker(action: RotationAction, max_L: int = 8) -> MarkerFunction:
    """Center 0, smallest (5%-step) inner radius with L <= max_L, outer radius twice that."""
    center = np.zeros(action.m)
    ns = _cached_ball(float(max_L), action.d)
    pts = canonical(center - ns @ action.matrix)
    if action.m == 1:
        r = _max_gap_1d(pts[:, 0]) / 2.0
    else:
        tree = cKDTree(pts, boxsize=1.0)
        grid = sample_points(0, 20000, action.m)
        r = float(tree.query(grid)[0].max())
    r *= 1.0 + 1e-9
    while compute_L(action, center, r) > max_L:
        r *= 1.05
    return make_marker(action, r, 2.0 * r, center)


def min_orbit_distance(action: RotationAction, M: int) -> float:
    """min over nonzero |n| <= M of dist(nA, 0), for 1-D or diagonal actions."""
    if not action.is_diagonal:
        ns = _cached_ball(float(M), action.d)
        ns = ns[np.any(ns != 0, axis=1)]
        return float(torus_distance(canonical(ns @ action.matrix), np.zeros(action.m)).min())
    ks = np.arange(1, M + 1, dtype=np.int64)
    return float(min(wrapped_delta(ks * action.matrix[i, i]).min() for i in range(action.d)))


def marker_for_separation(action: RotationAction, M_required: int, center=None) -> MarkerFunction:
    """A marker whose separation constant is at least ``M_required``."""
    delta = min_orbit_distance(action, M_required)
    r_outer = 0.45 * delta
    marker = make_marker(action, r_outer / 2.0, r_outer, center)
    assert marker.M >= M_required
    return marker


# ---------------------------------------------------------------------------
# verification


@dataclass
class MarkerReport:
    M: int
    L: int
    samples: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def _in_support_samples(marker: MarkerFunction, rng, count: int, m: int) -> np.ndarray:
    u = rng.normal(size=(count, m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = marker.r_outer * rng.random(count) ** (1.0 / m)
    return canonical(np.asarray(marker.center) + u * rad[:, None])


def verify_marker(action: RotationAction, marker: MarkerFunction, sample_seed: int, samples: int,
                  witnesses=()) -> MarkerReport:
    """Check separation (1) and covering (2) on seeded samples plus explicit witness points."""
    rng = np.random.default_rng(sample_seed)
    half = samples // 2
    pts = np.vstack([rng.random((samples - half, action.m)),
                     _in_support_samples(marker, rng, half, action.m)]
                    + [np.atleast_2d(w) for w in witnesses if w is not None])
    report = MarkerReport(marker.M, marker.L, len(pts))
    full = marker.r_inner + TAU_GEO * (marker.r_outer - marker.r_inner)
    for x in pts:
        if phi_eval(marker, x) > 0:
            hits = support_lattice(action, x, marker.center, marker.r_outer, radius=marker.M)
            hits = hits[np.any(hits != 0, axis=1)]
            if hits.size:
                report.violations.append({"condition": 1, "x": x.tolist(),
                                          "witness": hits[0].tolist()})
        ones = support_lattice(action, x, marker.center, full, radius=marker.L)
        if ones.size == 0:
            report.violations.append({"condition": 2, "x": x.tolist(), "witness": None})
    return report
