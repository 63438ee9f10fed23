"""Rokhlin towers read off a tiling, the shifted boundary cover, and the paired towers.

A tower base is ``Omega = {x : dist(0, dW(x)) > N sqrt(d), origin label = 0 mod N}``
and its floors are ``T^{-m} Omega`` for ``m`` in ``{0..N-1}^d``.  All orbit
questions are answered inside one tiling of a base point: by equivariance the
tiling of ``T^q x`` is the tiling of ``x`` translated by ``-q``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .dynsys import TAU_GEO, RotationAction, act, lattice_box, sample_points
from .lattice import find_N0
from .marker import MarkerFunction, marker_for_separation
from .parallel import ordered_map
from .tiling import ON_BOUNDARY, Tiling, TilingConfig, h_projective_image, origin_cell, reach


@dataclass(frozen=True)
class TowerSpec:
    """Tower base parameters.  ``threshold_factor`` and ``check_residue`` exist for debug controls."""

    N: int
    level: float
    threshold_factor: float = 1.0
    check_residue: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")

    def threshold(self, d: int) -> float:
        return self.threshold_factor * self.N * math.sqrt(d)

    def weakened(self) -> "TowerSpec":
        """Debug: no distance threshold, no residue condition."""
        return TowerSpec(self.N, self.level, 0.0, False)

    def strengthened(self, factor: float = 3.0) -> "TowerSpec":
        return TowerSpec(self.N, self.level, factor, self.check_residue)


def base_predicate(spec: TowerSpec, origin, d: int) -> bool:
    """Omega membership from the origin-cell data ``(label, dist0)`` or ON_BOUNDARY."""
    if origin is ON_BOUNDARY or (isinstance(origin, str) and origin == ON_BOUNDARY):
        return False
    label, dist0 = origin[0], origin[1]
    if not dist0 > spec.threshold(d):
        return False
    if spec.check_residue and any(int(v) % spec.N for v in label):
        return False
    return True


def omega_membership(action: RotationAction, marker: MarkerFunction, config: TilingConfig,
                     spec: TowerSpec, x) -> bool:
    tl = Tiling(action, marker, config, x, level=spec.level)
    return base_predicate(spec, tl.origin_cell(), action.d)


def omega_prime(origin, m, N: int) -> bool:
    """Debug predicate: 0 off the walls and origin label = m mod N."""
    if isinstance(origin, str):
        return False
    return all((int(a) - int(b)) % N == 0 for a, b in zip(origin[0], m))


def omega_double_prime(origin, m, N: int, d: int) -> bool:
    """Debug predicate: dist0 > 2 N sqrt(d) and origin label = m mod N."""
    if isinstance(origin, str):
        return False
    return origin[1] > 2.0 * N * math.sqrt(d) and omega_prime(origin, m, N)


def point_data(tiling: Tiling, points):
    """For points p (lattice or real): the label of the tile containing p and dist(p, wall), vectorized."""
    pts = np.atleast_2d(np.asarray(points))
    if pts.dtype.kind != "f":
        pts = pts.astype(np.int64)
    labels = tiling.locate(pts)
    dist = np.empty(len(pts))
    for lab in np.unique(labels, axis=0):
        rows = np.all(labels == lab, axis=1)
        dist[rows] = tiling.cell(lab).slack(pts[rows])
    return labels, dist


def floors_at(tiling: Tiling, spec: TowerSpec, offset=None) -> np.ndarray:
    """All m in {0..N-1}^d with T^m(T^offset x) in Omega, computed in the tiling of x."""
    d = tiling.d
    offset = np.zeros(d, dtype=np.int64) if offset is None else np.asarray(offset, dtype=np.int64)
    box = lattice_box(spec.N, d)
    pts = box + offset
    labels, dist = point_data(tiling, pts)
    # origin data of T^(offset + m) x: label - (offset + m), distance unchanged
    ok = dist > max(spec.threshold(d), TAU_GEO)
    if not spec.check_residue:
        ok &= dist >= TAU_GEO
    else:
        ok &= np.all(np.mod(labels - pts, spec.N) == 0, axis=1)
    return box[ok]


def candidate_floor(tiling: Tiling, spec: TowerSpec, offset) -> tuple[bool, np.ndarray]:
    """Whether T^offset x lies in the floor indexed by its own origin-label residue."""
    offset = np.asarray(offset, dtype=np.int64).reshape(1, -1)
    label, _ = point_data(tiling, offset)
    m = np.mod(label[0] - offset[0], spec.N)
    p = offset + m
    lab2, dist2 = point_data(tiling, p)
    ok = dist2[0] > spec.threshold(tiling.d) and np.all(np.mod(lab2[0] - p[0], spec.N) == 0)
    return bool(ok), m


def tower_window(marker: MarkerFunction, config: TilingConfig, spec: TowerSpec, d: int) -> float:
    return spec.N * math.sqrt(d) + reach(marker.L, d) + config.truncation_radius + 2.0


@dataclass
class TowerReport:
    property_id: str
    parameters: dict
    samples: int
    violations: list
    stats: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict, repr=False)  # per-sample values for figures

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"property_id": self.property_id, "parameters": self.parameters,
                "samples": self.samples, "violations": self.violations, "pass": self.passed,
                **({"stats": self.stats} if self.stats else {})}


def _spec_params(spec: TowerSpec) -> dict:
    return {"N": spec.N, "level": spec.level, "threshold_factor": spec.threshold_factor,
            "check_residue": spec.check_residue}


def _tower_sample(action, marker, config, spec, x, direct: bool) -> dict:
    d = action.d
    tl = Tiling(action, marker, config, x, level=spec.level,
                window_radius=tower_window(marker, config, spec, d))
    origin = tl.origin_cell()
    floors = floors_at(tl, spec)
    out = {"x": [float(v) for v in x], "floors": floors.tolist(),
           "origin": None if origin is ON_BOUNDARY else [list(origin.label), origin.dist0]}
    if direct:
        # independent path: a fresh tiling for every T^m x
        ref = [m.tolist() for m in lattice_box(spec.N, d)
               if omega_membership(action, marker, config, spec, act(action, x, m))]
        out["direct_floors"] = ref
    return out


def _sample_tower(action, marker, config, spec, samples, seed, direct_checks):
    xs = sample_points(seed, samples, action.m)
    items = [(x, i < direct_checks) for i, x in enumerate(xs)]
    return ordered_map(lambda it: _tower_sample(action, marker, config, spec, it[0], it[1]), items)


def verify_tower_disjoint(action: RotationAction, marker: MarkerFunction, config: TilingConfig,
                          spec: TowerSpec, samples: int, seed: int,
                          direct_checks: int = 20) -> TowerReport:
    """Each sampled x lies in at most one floor, and that floor matches its origin-label residue."""
    return verify_tower(action, marker, config, spec, samples, seed, direct_checks)[0]


def verify_tower_coverage(action: RotationAction, marker: MarkerFunction, config: TilingConfig,
                          spec: TowerSpec, samples: int, seed: int,
                          direct_checks: int = 0) -> TowerReport:
    """Samples deep inside their tile (dist0 > 2N sqrt d) must lie in the floor of their residue."""
    return verify_tower(action, marker, config, spec, samples, seed, direct_checks)[1]


def coverage_trend(action, marker, N: int, H_values, samples: int, seed: int) -> list[float]:
    """Uncovered fraction for each H (N fixed)."""
    out = []
    for H in H_values:
        cfg = TilingConfig.for_marker(marker, action.d, H=H)
        rep = verify_tower_coverage(action, marker, cfg, TowerSpec(N, cfg.H), samples, seed)
        out.append(rep.stats["uncovered_fraction"])
    return out


def verify_tower(action, marker, config, spec: TowerSpec, samples: int, seed: int,
                 direct_checks: int = 20) -> tuple[TowerReport, TowerReport]:
    """Disjointness and coverage from one sampling pass."""
    d = action.d
    guard = 2.0 * spec.N * math.sqrt(d)
    params = {**_spec_params(spec), "d": d, "seed": seed}
    disjoint, cover, dist0 = [], [], []
    eligible = uncovered = 0
    for rec in _sample_tower(action, marker, config, spec, samples, seed, direct_checks):
        floors, origin = rec["floors"], rec["origin"]
        if len(floors) > 1:
            disjoint.append({"x": rec["x"], "witness": {"kind": "overlap", "floors": floors}})
        if spec.check_residue and spec.threshold_factor >= 1.0:
            for m in floors:
                if not omega_prime(ON_BOUNDARY if origin is None else origin, m, spec.N):
                    disjoint.append({"x": rec["x"], "witness": {"kind": "residue", "floor": m,
                                                                "origin": origin}})
        if "direct_floors" in rec and sorted(rec["direct_floors"]) != sorted(floors):
            disjoint.append({"x": rec["x"], "witness": {"kind": "path-mismatch", "floors": floors,
                                                        "direct": rec["direct_floors"]}})
        uncovered += not floors
        dist0.append(0.0 if origin is None else float(origin[1]))
        if origin is not None and origin[1] > guard:
            eligible += 1
            m = [int(v) % spec.N for v in origin[0]]
            if m not in floors:
                cover.append({"x": rec["x"], "witness": {"origin": origin, "expected_floor": m}})
    stats = {"eligible": eligible, "uncovered_fraction": uncovered / samples if samples else 0.0}
    return (TowerReport("tower_disjoint", params, samples, disjoint),
            TowerReport("tower_coverage", params, samples, cover, stats, {"dist0": dist0}))


TOWER_SEPARATION = {1: 24, 2: 16}


@functools.lru_cache(maxsize=8)
def tower_marker(action: RotationAction, M_required: int | None = None) -> MarkerFunction:
    """A marker whose tiles are large enough for tower thresholds up to N = 4."""
    return marker_for_separation(action, M_required or TOWER_SEPARATION.get(action.d, 16))


# ---------------------------------------------------------------------------
# boundary cover with shifts


@dataclass(frozen=True)
class BoundaryCover:
    """Pieces U_n for |n| < radius, shifts h_n and residue groups, all computed on demand.

    ``U_n = {z : dist(0, boundary of W_sH(z, n)) < 2 R0, W_sH(z, n) has interior}``.
    """

    d: int
    s: float
    R0: float
    radius: float
    merged: bool = False

    @property
    def modulus(self) -> int:
        return int(math.floor(2.0 * math.sqrt(self.d))) + 1

    @property
    def group_count(self) -> int:
        return 1 if self.merged else self.modulus ** self.d

    def shift(self, n) -> np.ndarray:
        """Nearest lattice vector to (1 - 1/s) n, ties toward -infinity."""
        n = np.asarray(n, dtype=np.int64)
        return np.ceil((1.0 - 1.0 / self.s) * n - 0.5).astype(np.int64)

    def landing(self, n) -> np.ndarray:
        """n - h_n: the label that the shifted piece lands on."""
        n = np.asarray(n, dtype=np.int64)
        return n - self.shift(n)

    def group(self, n) -> np.ndarray:
        n = np.atleast_2d(np.asarray(n, dtype=np.int64))
        if self.merged:
            return np.zeros(len(n), dtype=np.int64)
        res = np.mod(n, self.modulus)
        return res @ (self.modulus ** np.arange(self.d - 1, -1, -1))

    def contains(self, n) -> np.ndarray:
        n = np.atleast_2d(np.asarray(n, dtype=np.int64)).astype(float)
        return np.sum(n * n, axis=1) < self.radius * self.radius

    def piece_count(self) -> int:
        """Exact number of n with |n| < radius."""
        return _strict_ball_count(self.radius, self.d)

    def pieces(self, limit: int = 2_000_000) -> np.ndarray:
        if self.piece_count() > limit:
            raise ValueError("too many pieces to list; use the implicit interface")
        from .dynsys import lattice_ball
        return lattice_ball(self.radius, self.d, strict=True)

    def preimages(self, tau) -> tuple[np.ndarray, np.ndarray]:
        """Per coordinate, the (at most two) integers c with c - h(c) = tau.

        Returns candidates and a validity mask, both shaped (..., 2).
        """
        tau = np.asarray(tau, dtype=np.int64)
        base = np.floor(self.s * tau).astype(np.int64)[..., None] + np.arange(-3, 4)
        ok = (base - self.shift(base)) == tau[..., None]
        # keep the first two valid candidates
        order = np.argsort(~ok, axis=-1, kind="stable")[..., :2]
        return np.take_along_axis(base, order, -1), np.take_along_axis(ok, order, -1)

    def invariant_violations(self, ns) -> list[dict]:
        ns = np.atleast_2d(np.asarray(ns, dtype=np.int64))
        out = []
        err = np.linalg.norm((1.0 - 1.0 / self.s) * ns - self.shift(ns), axis=1)
        for i in np.flatnonzero(err > math.sqrt(self.d) / 2.0 + 1e-12):
            out.append({"kind": "shift", "n": ns[i].tolist(), "error": float(err[i])})
        if self.group_count > (int(math.floor(2 * math.sqrt(self.d))) + 1) ** self.d:
            out.append({"kind": "group-count", "count": self.group_count})
        return out

    def as_dict(self) -> dict:
        return {"d": self.d, "s": self.s, "R0": self.R0, "radius": self.radius,
                "pieces": self.piece_count(), "groups": self.group_count,
                "modulus": self.modulus, "merged": self.merged}


def _strict_ball_count(radius: float, d: int) -> int:
    r2 = radius * radius
    if d == 1:
        return 2 * int(math.ceil(radius)) - 1 if radius > 0 else 0
    R = int(math.ceil(radius))
    xs = np.arange(-R, R + 1, dtype=np.int64)
    rest = r2 - xs.astype(float) ** 2
    if d == 2:
        # largest y with y^2 < rest, corrected for rounding in sqrt
        y = np.floor(np.sqrt(np.maximum(rest, 0.0))).astype(np.int64)
        y = np.where(y.astype(float) ** 2 >= rest, y - 1, y)
        y = np.where((y + 1).astype(float) ** 2 < rest, y + 1, y)
        return int(np.sum(np.where(y >= 0, 2 * y + 1, 0)))
    return int(sum(_strict_ball_count(math.sqrt(v), d - 1) for v in rest if v > 0))


def build_boundary_cover(action: RotationAction, marker: MarkerFunction, config: TilingConfig,
                         R0: float, R1: float | None = None, merged: bool = False) -> BoundaryCover:
    d = action.d
    if R1 is not None and not R1 > R0:
        raise ValueError("R1 must exceed R0")
    return BoundaryCover(d, config.s, float(R0), reach(marker.L, d) + 2.0 * R0, merged)


def _cell_out_of_reach(j, pts, normals, offsets, s, band) -> bool:
    """True when no pre-image j - n of these points can be within ``band`` of the cell wall.

    Pre-images sit in the box j + s (p - j) padded by s + 2; slack is concave so the
    box corners bound it from below, and one facet violated by all corners by more than
    ``band`` puts the whole box too far outside.
    """
    lo = s * (pts.min(axis=0) - j) - (s + 2.0)
    hi = s * (pts.max(axis=0) - j) + (s + 2.0)
    corners = np.array([np.where(c, hi, lo) for c in np.ndindex(*([2] * len(j)))], dtype=float)
    per_facet = offsets[None, :] - corners @ normals.T          # (corners, facets)
    if per_facet.min() > band:
        return True
    return bool(np.any(per_facet.max(axis=0) < -band))


def pieces_hit(deep: Tiling, cover: BoundaryCover, points) -> tuple[np.ndarray, np.ndarray]:
    """All (point index, piece n) with T^p x in T^{h_n} U_n, for lattice points p.

    ``T^p x`` lies in ``T^{h_n} U_n`` iff ``dist(j - n, boundary of W_sH(x, j)) < 2 R0``
    where ``j = n + p - h_n``; ``deep`` is the depth-sH tiling of x.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
    d, s, R0 = cover.d, cover.s, cover.R0
    reach_ = deep.reach
    lim = (reach_ + 2.0 * R0) / s + math.sqrt(d) / 2.0 + 1.0
    lo, hi = pts.min(axis=0) - lim, pts.max(axis=0) + lim
    labels = deep.labels[np.all((deep.labels >= lo) & (deep.labels <= hi), axis=1)]
    out_idx, out_n = [], []
    for j in labels:
        diff = j - pts
        near = np.flatnonzero(np.sum(diff.astype(float) ** 2, axis=1) < lim * lim)
        if near.size == 0:
            continue
        if not deep.covers(j):
            raise ValueError("tiling window too small for the cover check")
        cell = deep.cell(j)
        if cell.empty:
            continue
        normals, offsets = cell.facets()
        if near.size > 64 and _cell_out_of_reach(j, pts[near], normals, offsets, s, 2.0 * R0):
            continue
        cand, ok = cover.preimages(diff[near])            # (P, d, 2)
        for combo in np.ndindex(*([2] * d)):
            sel = np.array(combo)
            n = np.take_along_axis(cand, sel[None, :, None], -1)[..., 0]
            valid = np.all(np.take_along_axis(ok, sel[None, :, None], -1)[..., 0], axis=1)
            valid &= cover.contains(n)
            if not valid.any():
                continue
            rows = near[valid]
            rel = -n[valid].astype(float)             # (j - n) - j
            sl = np.min(offsets - rel @ normals.T, axis=1)
            dist = np.where(sl >= 0, sl, np.inf)
            outside = np.flatnonzero((sl < 0) & (-sl < 2.0 * R0))
            if outside.size:
                if d == 1:
                    dist[outside] = -sl[outside]
                else:
                    poly = cell.polygon() - j
                    dist[outside] = geometry.boundary_distance(rel[outside], poly)
            hit = dist < 2.0 * R0
            out_idx.append(rows[hit])
            out_n.append(n[valid][hit])
    if not out_idx:
        return np.zeros(0, np.int64), np.zeros((0, d), np.int64)
    return np.concatenate(out_idx), np.vstack(out_n)


# ---------------------------------------------------------------------------
# two towers


def two_tower_parameters(d: int, N: int, epsilon: float, s: float = 1.5) -> dict:
    """R0, N1, R1, the cut-down radius the cover needs, and the separation M that delivers it."""
    if epsilon <= 0 or N < 1:
        raise ValueError("need epsilon > 0 and N >= 1")
    rd = math.sqrt(d)
    R0 = 2.0 * N * rd
    boundary_r = 2.0 * R0 + 4.0 + rd / 2.0
    N1 = max(find_N0(epsilon, boundary_r, d), N) + 1
    R1 = max(R0, 2.0 * N1 * rd) + 1.0
    needed = R1 + 2.0 * R0 + 1.0 + rd / 2.0
    # lambda -> (s-1)/s for large H; 4 absorbs the displacement to the projective image
    M_required = int(math.ceil(2.0 * (needed + 4.0) * s / (s - 1.0) * 1.01))
    return {"d": d, "N": N, "epsilon": epsilon, "s": s, "R0": R0, "N1": N1, "R1": R1,
            "boundary_radius": boundary_r, "cut_down_radius": needed, "M_required": M_required}


def cone_margin(marker: MarkerFunction, config: TilingConfig, d: int, needed: float) -> float:
    """Worst-case cut-down radius minus the radius the cover needs (negative: M/H too small)."""
    s, H = config.s, config.H
    rc = reach(marker.L, d)
    lam = (s - 1.0) * H / (s * H + 2.0)
    disp = (s - 1.0) * 2.0 * rc / (s * (s * H + 2.0))
    return lam * marker.M / 2.0 - disp - needed


@functools.lru_cache(maxsize=8)
def two_tower_setup(action: RotationAction, N: int, epsilon: float, s: float = 1.5):
    """A marker and tiling configuration large enough for the paired towers."""
    params = two_tower_parameters(action.d, N, epsilon, s)
    marker = marker_for_separation(action, params["M_required"])
    config = TilingConfig.for_marker(marker, action.d, s=s)
    return marker, config


@dataclass
class TwoTowersResult:
    parameters: dict
    tower0: TowerSpec
    tower1: TowerSpec
    cover: BoundaryCover
    reports: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports.values())

    def as_dict(self) -> dict:
        return {"parameters": self.parameters,
                "tower0": {**_spec_params(self.tower0), "N0": self.tower0.N},
                "tower1": {**_spec_params(self.tower1), "N1": self.tower1.N},
                "cover": self.cover.as_dict(),
                "reports": {k: v.as_dict() for k, v in sorted(self.reports.items())},
                "pass": self.passed}


def two_tower_window(marker: MarkerFunction, config: TilingConfig, cover: BoundaryCover,
                     N1: int, d: int) -> float:
    """Center window wide enough for every cell the two-tower checks touch."""
    rc = reach(marker.L, d)
    return max(2.0 * cover.radius + rc, rc + N1 * math.sqrt(d) + cover.radius) \
        + config.truncation_radius + 4.0


def base_offset(tiling: Tiling, spec: TowerSpec, rng) -> np.ndarray | None:
    """A lattice point k with T^k x in the tower base, drawn from the origin tile of x, or None."""
    d = tiling.d
    lab0 = tiling.locate(np.zeros((1, d)))[0]
    cell = tiling.cell(lab0)
    K = int(math.ceil(tiling.reach / spec.N)) + 1
    ks = lab0 + spec.N * (lattice_box(2 * K + 1, d) - K)
    ks = ks[cell.slack(ks) > spec.threshold(d)]
    if len(ks) == 0:
        return None
    return ks[int(rng.integers(len(ks)))]


def _ball_offset(rng, radius: float, d: int) -> np.ndarray:
    while True:
        u = rng.uniform(-radius, radius, size=d)
        if np.dot(u, u) <= radius * radius:
            return u


def _piece_sample(ctx, x, rng) -> dict | None:
    """One point of a piece U_n built from x, with properties (1) and (2) evaluated there."""
    action, marker, config, cover, spec1, p = ctx
    d, s, H = action.d, config.s, config.H
    deep = Tiling(action, marker, config, x, level=s * H, window_radius=p["window"])
    upper = Tiling(action, marker, config, x, window_radius=p["window"])
    zero = np.zeros((1, d))
    j0 = deep.locate(zero)[0]
    cell0 = deep.cell(j0)
    if cell0.empty or not cell0.is_bounded():
        return None
    if d == 1:
        lo, hi = cell0.interval()
        b = np.array([lo if rng.random() < 0.5 else hi])
    else:
        b = geometry.perimeter_point(cell0.polygon(), rng.random())
    k = np.rint(b + _ball_offset(rng, cover.R0, d)).astype(np.int64)
    if not cell0.boundary_distance(k)[0] < 2.0 * cover.R0:
        return None
    n = j0 - k
    h = cover.shift(n)
    q = k + h
    rec = {"x": [float(v) for v in x], "n": n.tolist(), "k": k.tolist(), "h": h.tolist(),
           "in_enumeration": bool(cover.contains(n)[0])}
    # property (1): the shifted point is deep inside tile j0 of the upper tiling and in tower 1
    lab, dist = point_data(upper, q)
    rec["landing_label"] = lab[0].tolist()
    rec["landing_dist"] = float(dist[0])
    rec["contains_ball"] = bool(np.array_equal(lab[0], j0) and dist[0] > p["R1"])
    rec["in_tower1"], _ = candidate_floor(upper, spec1, q)
    a = cell0.nearest_boundary_point(k.astype(float))
    img = h_projective_image(a, j0, deep.weight(j0), s, H) - k
    rec["image_gap"] = float(np.linalg.norm(h - img))
    # property (2): every other piece containing the shifted point
    _, hit_n = pieces_hit(deep, cover, q[None, :])
    same = np.all(hit_n == n, axis=1)
    rec["self_hit"] = bool(same.any())
    others = hit_n[~same]
    clash = others[cover.group(others) == cover.group(n[None, :])[0]] if len(others) else others
    rec["clashes"] = clash.tolist()
    return rec


def _interior_sample(ctx, x, rng) -> dict | None:
    """A point of Omega_1 built from x and its visit fraction to the shifted cover (property (3))."""
    action, marker, config, cover, spec1, p = ctx
    d, s, H = action.d, config.s, config.H
    N1 = spec1.N
    upper = Tiling(action, marker, config, x, window_radius=p["window"])
    k = base_offset(upper, spec1, rng)
    if k is None:
        return None
    deep = Tiling(action, marker, config, x, level=s * H, window_radius=p["window"])
    box = lattice_box(N1, d) + k
    idx, _ = pieces_hit(deep, cover, box)
    visits = int(np.unique(idx).size)
    z = act(action, x, k)
    return {"x": [float(v) for v in x], "k": k.tolist(), "visits": visits,
            "fraction": visits / N1 ** d,
            "omega1_direct": omega_membership(action, marker, config, spec1, z)}


def _collect(sampler, ctx, seed: int, wanted: int, m: int, max_tries: int) -> tuple[list, int]:
    rng = np.random.default_rng(seed)
    xs = sample_points(seed, max_tries, m)
    seeds = rng.integers(0, 2 ** 63 - 1, size=max_tries)
    out, tried = [], 0
    # batches keep the thread pool busy while preserving a deterministic order
    while len(out) < wanted and tried < max_tries:
        batch = range(tried, min(max_tries, tried + max(wanted - len(out), 8)))
        recs = ordered_map(lambda i: sampler(ctx, xs[i], np.random.default_rng(seeds[i])), batch)
        tried = batch.stop
        out.extend(r for r in recs if r is not None)
    return out[:wanted], tried


def build_two_towers(action: RotationAction, marker: MarkerFunction, config: TilingConfig, N: int,
                     epsilon: float, seed: int, samples: int, interior_samples: int | None = None,
                     merge_groups: bool = False) -> TwoTowersResult:
    """Paired towers over the depth-sH and depth-H tilings plus the shifted boundary cover.

    Properties checked on samples: (1) shifted pieces land in tower 1, (2) pieces of one
    group are disjoint after shifting, (3) orbits started in the tower-1 base spend less
    than ``epsilon`` of the tower-1 box in the shifted cover.
    """
    d = action.d
    params = two_tower_parameters(d, N, epsilon, config.s)
    margin = cone_margin(marker, config, d, params["cut_down_radius"])
    if margin < 0:
        raise ValueError(f"increase M/H: cut-down radius short by {-margin:.6g} "
                         f"(need M >= {params['M_required']}, have {marker.M})")
    cover = build_boundary_cover(action, marker, config, params["R0"], params["R1"], merge_groups)
    spec0 = TowerSpec(N, config.s * config.H)
    spec1 = TowerSpec(params["N1"], config.H)
    window = two_tower_window(marker, config, cover, params["N1"], d)
    ctx = (action, marker, config, cover, spec1, {"R1": params["R1"], "window": window})
    interior_samples = samples if interior_samples is None else interior_samples

    pieces, tried = _collect(_piece_sample, ctx, seed, samples, action.m, 4 * samples + 16)
    image_bound = 2.0 * params["R0"] + 4.0 + math.sqrt(d) / 2.0
    v1, v2, vc, vi = [], [], [], []
    for r in pieces:
        if not (r["contains_ball"] and r["in_tower1"]):
            v1.append({"x": r["x"], "witness": {k: r[k] for k in ("n", "k", "h", "landing_label",
                                                                   "landing_dist", "in_tower1")}})
        if r["clashes"] or not r["self_hit"]:
            v2.append({"x": r["x"], "witness": {"n": r["n"], "k": r["k"], "clashes": r["clashes"][:4],
                                                "self_hit": r["self_hit"]}})
        if not r["in_enumeration"]:
            vc.append({"x": r["x"], "witness": {"n": r["n"]}})
        if not r["image_gap"] < image_bound:
            vi.append({"x": r["x"], "witness": {"n": r["n"], "gap": r["image_gap"]}})
    if len(pieces) < samples:
        vc.append({"x": None, "witness": {"kind": "sampler", "found": len(pieces), "tried": tried}})

    interior, tried3 = _collect(_interior_sample, ctx, seed + 1, interior_samples, action.m,
                                8 * interior_samples + 16)
    v3 = []
    worst = 0.0
    for r in interior:
        worst = max(worst, r["fraction"])
        if not (r["fraction"] < epsilon and r["omega1_direct"]):
            v3.append({"x": r["x"], "witness": {"k": r["k"], "fraction": r["fraction"],
                                                "omega1_direct": r["omega1_direct"]}})
    if len(interior) < interior_samples:
        v3.append({"x": None, "witness": {"kind": "sampler", "found": len(interior), "tried": tried3}})

    base = {"N": N, "epsilon": epsilon, "seed": seed}
    reports = {
        "property_1": TowerReport("two_towers_1", base, len(pieces), v1,
                                  {"min_landing_dist": min((r["landing_dist"] for r in pieces), default=None)},
                                  {"landing_dist": [r["landing_dist"] for r in pieces]}),
        "property_2": TowerReport("two_towers_2", base, len(pieces), v2,
                                  {"groups": cover.group_count}),
        "property_3": TowerReport("two_towers_3", base, len(interior), v3,
                                  {"worst_fraction": worst},
                                  {"fraction": [r["fraction"] for r in interior]}),
        "cover_enumeration": TowerReport("cover_enumeration", base, len(pieces),
                                         vc + cover.invariant_violations(
                                             np.array([r["n"] for r in pieces]).reshape(-1, d))),
        "image_neighbourhood": TowerReport("image_neighbourhood", base, len(pieces), vi,
                                           {"bound": image_bound,
                                            "max_gap": max((r["image_gap"] for r in pieces), default=None)}),
    }
    params = {**params, "M": marker.M, "L": marker.L, "H": config.H, "cone_margin": margin,
              "N0": N, "r_inner": marker.r_inner, "r_outer": marker.r_outer}
    return TwoTowersResult(params, spec0, spec1, cover, reports)


# ---------------------------------------------------------------------------
# boundary frequency along orbits versus boundary density in space


def ocap_control(action: RotationAction, marker: MarkerFunction, config: TilingConfig, band: float,
                 window: int, samples: int, seed: int, spatial_points: int = 4000,
                 direct_checks: int = 32, tolerance: float = 0.02) -> TowerReport:
    """Orbit frequency of {dist0 <= band} against the sup over x of the spatial band density.

    For each sampled x the orbit frequency counts n in {0..window-1}^d whose shifted point has
    its origin within ``band`` of a wall.  The spatial density is the fraction of uniform points
    of a box of the same size lying within ``band`` of a wall of the tiling of x.  A few orbit
    points are recomputed from fresh tilings as an independent path.
    """
    d = action.d
    rng = np.random.default_rng(seed)
    xs = sample_points(seed, samples, action.m)
    lattice = lattice_box(window, d)
    half = window / 2.0
    wr = half * math.sqrt(d) + reach(marker.L, d) + config.truncation_radius + 4.0
    picks = [rng.integers(0, len(lattice), size=direct_checks) for _ in range(samples)]
    cont = [rng.uniform(0.0, window, size=(spatial_points, d)) for _ in range(samples)]

    def one(i):
        x = xs[i]
        tl = Tiling(action, marker, config, x, window_radius=wr, origin=np.full(d, int(half)))
        _, dist = point_data(tl, lattice)
        orbit = float(np.mean(dist <= band))
        _, sdist = point_data(tl, cont[i])
        spatial = float(np.mean(sdist <= band))
        mism = []
        for t in picks[i][: direct_checks if i < 4 else 0]:
            o = origin_cell(action, marker, config, act(action, x, lattice[t]))
            ref = 0.0 if o is ON_BOUNDARY else o.dist0
            if (ref <= band) != (dist[t] <= band) and abs(ref - dist[t]) > 1e-6:
                mism.append({"n": lattice[t].tolist(), "direct": ref, "tiling": float(dist[t])})
        return orbit, spatial, mism

    res = ordered_map(one, range(samples))
    orbit_max = max((r[0] for r in res), default=0.0)
    spatial_sup = max((r[1] for r in res), default=0.0)
    violations = [{"x": [float(v) for v in xs[i]], "witness": {"kind": "path-mismatch", **m}}
                  for i, r in enumerate(res) for m in r[2]]
    if orbit_max > spatial_sup + tolerance:
        violations.append({"x": None, "witness": {"kind": "orbit-exceeds-space",
                                                  "orbit": orbit_max, "spatial_sup": spatial_sup}})
    params = {"band": band, "window": window, "samples": samples, "seed": seed, "d": d,
              "tolerance": tolerance}
    return TowerReport("ocap_control", params, samples, violations,
                       {"orbit_frequency_max": orbit_max, "spatial_density_sup": spatial_sup,
                        "note": "sup over x approximated by the sampled maximum"})


# ---------------------------------------------------------------------------
# parameter search for small uncovered fraction


def urp_search(action: RotationAction, N: int, epsilon: float, samples: int, seed: int,
               schedule=None, s: float = 1.5) -> dict:
    """Grow the marker separation until the tower of height N leaves less than epsilon uncovered."""
    d = action.d
    schedule = list(schedule or [8 * N * d, 16 * N * d, 32 * N * d])
    trials = []
    for M_required in schedule:
        marker = tower_marker(action, int(M_required))
        cfg = TilingConfig.for_marker(marker, d, s=s)
        dis, cov = verify_tower(action, marker, cfg, TowerSpec(N, cfg.H), samples, seed,
                                direct_checks=0)
        frac = cov.stats["uncovered_fraction"]
        trials.append({"M_required": int(M_required), "M": marker.M, "L": marker.L, "H": cfg.H,
                       "uncovered_fraction": frac, "disjoint": dis.passed, "covered": cov.passed})
        if frac < epsilon and dis.passed and cov.passed:
            return {"N": N, "epsilon": epsilon, "found": True, "trials": trials}
    return {"N": N, "epsilon": epsilon, "found": False, "trials": trials}
