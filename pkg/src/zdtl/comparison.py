"""Counting side of comparison on open sets: cuts, measures, orbit densities and certificates.

Functions on X enter only through their open supports, so every "rank" here is a count of
orbit points in a set.  The certificate walks the comparison argument stage by stage and
stores each inequality with the numbers that decide it, so a stored certificate can be
re-checked without recomputing anything (see :func:`replay_certificate`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .dynsys import RotationAction, act, canonical, lattice_box, sample_points, torus_distance
from .lattice import unit_ball_volume
from .marker import MarkerFunction
from .parallel import ordered_map
from .tiling import Tiling, TilingConfig
from .towers import (base_offset, build_two_towers, floors_at, pieces_hit, point_data,
                     two_tower_setup, two_tower_window)


def eps_cut(value, epsilon: float):
    """(value - epsilon)_+ ."""
    out = np.maximum(np.asarray(value, dtype=float) - epsilon, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OpenSet:
    """Finite union of open balls on the torus."""

    balls: tuple = ()

    def __post_init__(self):
        norm = []
        for center, radius in self.balls:
            if not radius > 0:
                raise ValueError("ball radii must be positive")
            norm.append((tuple(float(c) for c in canonical(np.atleast_1d(center))), float(radius)))
        object.__setattr__(self, "balls", tuple(norm))

    @classmethod
    def empty(cls) -> "OpenSet":
        return cls(())

    @classmethod
    def interval(cls, lo: float, hi: float) -> "OpenSet":
        if not hi > lo:
            raise ValueError("empty interval")
        return cls(((((lo + hi) / 2.0,), (hi - lo) / 2.0),))

    @classmethod
    def ball(cls, center, radius: float) -> "OpenSet":
        return cls(((tuple(np.atleast_1d(center)), radius),))

    @property
    def is_empty(self) -> bool:
        return not self.balls

    def _depths(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if not self.balls:
            return np.zeros(pts.shape[:-1] + (0,))
        cols = [r - torus_distance(pts, np.asarray(c)) for c, r in self.balls]
        return np.stack([np.asarray(v, dtype=float) for v in cols], axis=-1)

    def phi(self, points):
        """Max over balls of (radius - distance to center)_+ ; positive exactly on the set."""
        dep = self._depths(points)
        out = np.maximum(dep.max(axis=-1), 0.0) if dep.shape[-1] else np.zeros(dep.shape[:-1])
        return float(out) if np.ndim(out) == 0 else out

    def contains(self, points):
        return np.asarray(self.phi(points)) > 0.0

    def superlevel(self, epsilon: float) -> "Superlevel":
        return Superlevel(self, epsilon)

    def pairwise_disjoint(self) -> bool:
        for i, (ci, ri) in enumerate(self.balls):
            for cj, rj in self.balls[i + 1:]:
                if torus_distance(ci, cj) < ri + rj:
                    return False
        return True

    def describe(self) -> dict:
        return {"balls": [{"center": list(c), "radius": r} for c, r in self.balls]}


@dataclass(frozen=True)
class Superlevel:
    """The closed set {phi >= epsilon} of an open set."""

    base: OpenSet
    epsilon: float

    @property
    def is_empty(self) -> bool:
        return all(r < self.epsilon for _, r in self.base.balls)

    def contains(self, points):
        return np.asarray(self.base.phi(points)) >= self.epsilon

    def describe(self) -> dict:
        return {"superlevel_of": self.base.describe(), "level": self.epsilon}


def measure_estimate(oset: OpenSet, seed: int, samples: int, m: int | None = None):
    """(Monte Carlo Lebesgue measure, exact value or None).

    The exact value is returned when the balls are pairwise disjoint and each radius is
    below 1/2, so every ball embeds in the torus without wrapping onto itself.
    """
    if oset.is_empty:
        return 0.0, 0.0
    m = m or len(oset.balls[0][0])
    pts = np.random.default_rng(seed).random((samples, m))
    est = float(np.mean(oset.contains(pts)))
    exact = None
    if oset.pairwise_disjoint() and all(r < 0.5 for _, r in oset.balls):
        exact = float(sum(unit_ball_volume(m) * r ** m for _, r in oset.balls))
    return est, exact


def orbit_count(action: RotationAction, predicate, x, M: int, forward: bool = False,
                chunk: int = 1 << 20) -> int:
    """|{m in {0..M-1}^d : T^{-m} x in the set}| (T^m x when ``forward``), in chunks."""
    if M < 1:
        raise ValueError("M must be positive")
    d = action.d
    x = np.asarray(x, dtype=float)
    step = -action.matrix if forward else action.matrix
    total = 0
    if d == 1:
        for start in range(0, M, chunk):
            ms = np.arange(start, min(M, start + chunk))[:, None]
            total += int(np.count_nonzero(predicate(canonical(x - ms @ step))))
        return total
    rows = max(1, chunk // M)
    tail = lattice_box(M, d - 1)
    for start in range(0, M, rows):
        first = np.arange(start, min(M, start + rows))
        ms = np.hstack([np.repeat(first, len(tail))[:, None], np.tile(tail, (len(first), 1))])
        total += int(np.count_nonzero(predicate(canonical(x - ms @ step))))
    return total


def orbit_density(action: RotationAction, predicate, x, M: int) -> float:
    """Fraction of the backward window {0..M-1}^d whose points lie in the set."""
    return orbit_count(action, predicate, x, M) / M ** action.d


def window_frequencies(action: RotationAction, oset: OpenSet, N: int, seed: int,
                       samples: int) -> list[float]:
    """Forward window frequency (1/N^d) |{n in {0..N-1}^d : T^n x in set}| per sampled x."""
    if N < 1:
        raise ValueError("N must be positive")
    if oset.is_empty:
        return [0.0] * samples
    xs = sample_points(seed, samples, action.m)
    counts = ordered_map(lambda x: orbit_count(action, oset.contains, x, N, forward=True), xs)
    return [c / N ** action.d for c in counts]


def ocap_estimate(action: RotationAction, oset: OpenSet, N: int, seed: int, samples: int) -> float:
    """Max over sampled x of the forward window frequency; a lower bound for the supremum."""
    return max(window_frequencies(action, oset, N, seed, samples), default=0.0)


class DensityNotCertified(ValueError):
    pass


def _density_holds(action, e_pred, f_pred, ratio, xs, N) -> tuple[bool, dict]:
    worst = {"N": N, "margin": math.inf}
    for M in sorted({N + 1, 2 * N, 4 * N}):
        for x in xs:
            ce = orbit_count(action, e_pred, x, M)
            cf = orbit_count(action, f_pred, x, M)
            margin = ratio * cf - ce
            if margin < worst["margin"]:
                worst = {"N": N, "M": M, "x": [float(v) for v in x], "count_E": ce, "count_F": cf,
                         "margin": margin}
            if not ce < ratio * cf:
                return False, worst
    return True, worst


def find_density_N(action: RotationAction, e_closed, F: OpenSet, ratio: float, seed: int,
                   samples: int, M_cap: int) -> int:
    """Smallest N (up to M_cap) with count(E') < ratio * count(F) on the tested windows.

    Windows M in {N+1, 2N, 4N} are tested for every sampled x.  The search doubles N and
    then bisects between the last failure and the first success.
    """
    return _find_density(action, e_closed, F, ratio, seed, samples, M_cap)[0]


def _find_density(action, e_closed, F, ratio, seed, samples, M_cap):
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    if getattr(e_closed, "is_empty", False):
        return 1, {"N": 1, "note": "E' is empty"}
    e_pred = e_closed.contains if hasattr(e_closed, "contains") else e_closed
    xs = sample_points(seed, samples, action.m)
    lo, N = 0, 1
    while True:
        ok, worst = _density_holds(action, e_pred, F.contains, ratio, xs, N)
        if ok:
            break
        lo = N
        if N >= M_cap:
            raise DensityNotCertified("density inequality not certified", worst)
        N = min(2 * N, M_cap)
    hi, best = N, worst
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, w = _density_holds(action, e_pred, F.contains, ratio, xs, mid)
        if ok:
            hi, best = mid, w
        else:
            lo = mid
    return hi, best


def check_rank_domination(rank_a: int, rank_b: int) -> bool:
    """4 rank_a <= rank_b and rank_b > 4."""
    if rank_a < 0 or rank_b < 0:
        raise ValueError("ranks are non-negative")
    return 4 * rank_a <= rank_b and rank_b > 4


@dataclass
class RankProfile:
    base: list
    N: int
    counts: int

    def __post_init__(self):
        if self.N < 1 or self.counts < 0:
            raise ValueError("invalid rank profile")


def rank_profile(action: RotationAction, predicate, x, N: int) -> RankProfile:
    counts = orbit_count(action, predicate, x, N)
    if not 0 <= counts <= N ** action.d:
        raise AssertionError("rank outside [0, N^d]")
    return RankProfile([float(v) for v in x], N, counts)


def lower_density(action, F: OpenSet, N: int, seed: int, samples: int) -> tuple[float, dict]:
    """Half the smallest sampled value of count_F / (4 M^d) over M in {N+1, 2N, 4N}."""
    xs = sample_points(seed, samples, action.m)
    worst = {"value": math.inf}
    for M in sorted({N + 1, 2 * N, 4 * N}):
        for x in xs:
            v = orbit_count(action, F.contains, x, M) / (4.0 * M ** action.d)
            if v < worst["value"]:
                worst = {"value": v, "M": M, "x": [float(t) for t in x]}
    return 0.5 * worst["value"], worst


# ---------------------------------------------------------------------------
# certificate


@dataclass
class Stage:
    name: str
    parameters: dict
    passed: bool
    worst_case: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"name": self.name, "parameters": self.parameters, "pass": self.passed,
                "worst_case": self.worst_case, "checks": self.checks}


@dataclass
class ComparisonCertificate:
    E: OpenSet
    F: OpenSet
    epsilon: float
    E_prime: dict
    N_density: int | None
    delta: float | None
    two_towers: object
    stages: list
    seed: int
    samples: int
    d: int = 1

    @property
    def overall(self) -> bool:
        return bool(self.stages) and all(s.passed for s in self.stages)

    @property
    def failed_stage(self) -> str | None:
        return next((s.name for s in self.stages if not s.passed), None)

    @property
    def rank_checks(self) -> dict:
        return {s.name: {"pass": s.passed, "worst_case": s.worst_case} for s in self.stages
                if s.name in ("first_tower", "second_tower")}

    def as_dict(self) -> dict:
        return {"inputs": {"E": self.E.describe(), "F": self.F.describe(), "epsilon": self.epsilon,
                           "seed": self.seed, "samples": self.samples, "d": self.d},
                "E_prime": self.E_prime, "N_density": self.N_density, "delta": self.delta,
                "two_towers": None if self.two_towers is None else self.two_towers.as_dict(),
                "stages": [s.as_dict() for s in self.stages],
                "failed_stage": self.failed_stage, "overall": self.overall}


def _first_tower_sample(ctx, x, rng):
    action, spec0, E, F, eps = ctx["action"], ctx["spec0"], ctx["E"], ctx["F"], ctx["eps"]
    deep = Tiling(action, ctx["marker"], ctx["config"], x, level=ctx["deep_level"],
                  window_radius=ctx["window"])
    k = base_offset(deep, spec0, rng)
    if k is None:
        return None
    d, N0 = action.d, spec0.N
    box = lattice_box(N0, d)
    pts = act(action, x, k - box)                      # T^{-m} of the base point T^k x
    in_a = E.phi(pts) > eps
    in_b = F.contains(pts)
    # second counting path: floor by floor, each floor identified in the tiling of x
    floor_ok = np.array([bool(np.any(np.all(floors_at(deep, spec0, k - m) == m, axis=1)))
                         for m in box])
    return {"x": [float(v) for v in x], "k": k.tolist(),
            "rank_a": int(np.count_nonzero(in_a)), "rank_b": int(np.count_nonzero(in_b)),
            "rank_a_floors": int(np.count_nonzero(in_a & floor_ok)),
            "rank_b_floors": int(np.count_nonzero(in_b & floor_ok))}


def _side_sample(ctx, x, rng):
    """A point T^k x drawn near a wall of the deep tiling, where the first tower thins out."""
    action, spec0, cover = ctx["action"], ctx["spec0"], ctx["cover"]
    d = action.d
    deep = Tiling(action, ctx["marker"], ctx["config"], x, level=ctx["deep_level"],
                  window_radius=ctx["window"])
    cell0 = deep.cell(deep.locate(np.zeros((1, d)))[0])
    if d == 1:
        lo, hi = cell0.interval()
        b = np.array([lo if rng.random() < 0.5 else hi])
    else:
        b = geometry.perimeter_point(cell0.polygon(), rng.random())
    u = rng.uniform(-1.0, 1.0, size=d) * 1.5 * cover.R0
    k = np.rint(b + u).astype(np.int64)
    rec = {"x": [float(v) for v in x], "k": k.tolist()}
    if len(floors_at(deep, spec0, k)):
        return {**rec, "in_tower": True}
    lab, dist = point_data(deep, k)
    rel = lab - k                                   # origin label of T^k x
    in_cover = bool(dist[0] < 2.0 * cover.R0 and cover.contains(rel)[0])
    return {**rec, "in_tower": False, "in_cover": in_cover, "dist0": float(dist[0]),
            "label": rel[0].tolist()}


def _second_tower_sample(ctx, x, rng):
    action, spec1, cover, F = ctx["action"], ctx["spec1"], ctx["cover"], ctx["F"]
    upper = Tiling(action, ctx["marker"], ctx["config"], x, window_radius=ctx["window"])
    k = base_offset(upper, spec1, rng)
    if k is None:
        return None
    deep = Tiling(action, ctx["marker"], ctx["config"], x, level=ctx["deep_level"],
                  window_radius=ctx["window"])
    d, N1 = action.d, spec1.N
    box = lattice_box(N1, d)
    idx, ns = pieces_hit(deep, cover, k - box)
    groups = cover.group(ns) if len(ns) else np.zeros(0, np.int64)
    per_group = [int(np.unique(idx[groups == g]).size) for g in range(cover.group_count)]
    rank_F = int(np.count_nonzero(F.contains(act(action, x, k - box))))
    return {"x": [float(v) for v in x], "k": k.tolist(), "rank_cover": int(np.unique(idx).size),
            "rank_F": rank_F, "group_ranks": per_group}


def _collect(sampler, ctx, seed, wanted, m, max_tries):
    xs = sample_points(seed, max_tries, m)
    seeds = np.random.default_rng(seed).integers(0, 2 ** 63 - 1, size=max_tries)
    out, tried = [], 0
    while len(out) < wanted and tried < max_tries:
        batch = range(tried, min(max_tries, tried + max(wanted - len(out), 8)))
        recs = ordered_map(lambda i: sampler(ctx, xs[i], np.random.default_rng(seeds[i])), batch)
        tried = batch.stop
        out.extend(r for r in recs if r is not None)
    return out[:wanted], tried


def _first_tower_checks(r, delta, N0, d):
    vol = N0 ** d
    return {"rank_domination": check_rank_domination(r["rank_a"], r["rank_b"]),
            "floor_bound": r["rank_b"] / (4.0 * vol) > delta > 1.0 / vol,
            "rank_additivity": r["rank_a"] == r["rank_a_floors"] and r["rank_b"] == r["rank_b_floors"]}


def _second_tower_checks(r, delta, N1, d, groups):
    vol = N1 ** d
    return {"cover_small": r["rank_cover"] < vol * delta,
            "F_large": vol * delta < 0.25 * r["rank_F"] and vol * delta > 1.0,
            "rank_domination": check_rank_domination(r["rank_cover"], r["rank_F"]),
            "grouping": r["rank_cover"] <= sum(r["group_ranks"])
            <= groups * max(r["group_ranks"], default=0)}


def certify_comparison(action: RotationAction, marker: MarkerFunction | None,
                       config: TilingConfig | None, E: OpenSet, F: OpenSet, epsilon: float,
                       seed: int, samples: int, M_cap: int = 1 << 14,
                       tower_samples: int | None = None) -> ComparisonCertificate:
    """Run the comparison argument on samples and record every inequality it uses.

    ``marker`` and ``config`` may be None, in which case a marker large enough for the
    towers demanded by the density stage is built.  Any failing stage stops the pipeline.
    """
    d = action.d
    tower_samples = samples if tower_samples is None else tower_samples
    e_prime = E.superlevel(epsilon)
    cert = ComparisonCertificate(E, F, epsilon, e_prime.describe(), None, None, None, [], seed,
                                 samples, d)
    cert.stages.append(Stage("E_prime", {"level": epsilon}, True,
                             {"empty": e_prime.is_empty,
                              "max_phi_E": max((r for _, r in E.balls), default=0.0)}))

    try:
        N, worst = _find_density(action, e_prime, F, 0.25, seed, samples, M_cap)
        cert.stages.append(Stage("density", {"ratio": 0.25, "M_cap": M_cap, "samples": samples},
                                 True, worst))
    except DensityNotCertified as exc:
        cert.stages.append(Stage("density", {"ratio": 0.25, "M_cap": M_cap, "samples": samples},
                                 False, {"error": exc.args[0], **exc.args[1]}))
        return cert
    cert.N_density = N

    delta, worst = lower_density(action, F, N, seed + 1, samples)
    N_delta = N
    # an empty E' certifies N = 1, which says nothing about F; grow N until F is seen
    while not delta > 0 and N_delta < M_cap:
        N_delta = min(2 * N_delta, M_cap)
        delta, worst = lower_density(action, F, N_delta, seed + 1, samples)
    cert.delta = delta
    cert.stages.append(Stage("delta", {"N": N_delta, "samples": samples}, delta > 0,
                             {**worst, "delta": delta}))
    if not delta > 0:
        return cert

    N_star = max(N_delta, int(math.floor(delta ** (-1.0 / d))) + 1)
    params = {"N": N_star, "epsilon": delta}
    try:
        if marker is None or config is None:
            marker, config = two_tower_setup(action, N_star, delta)
        tt = build_two_towers(action, marker, config, N_star, delta, seed + 2, tower_samples)
    except ValueError as exc:
        cert.stages.append(Stage("two_towers", params, False, {"error": str(exc)}))
        return cert
    cert.two_towers = tt
    cert.stages.append(Stage("two_towers", {**params, "N1": tt.tower1.N}, tt.passed,
                             {k: len(v.violations) for k, v in tt.reports.items()}))
    if not tt.passed:
        return cert

    ctx = {"action": action, "marker": marker, "config": config, "E": E, "F": F, "eps": epsilon,
           "spec0": tt.tower0, "spec1": tt.tower1, "cover": tt.cover,
           "deep_level": config.s * config.H,
           "window": two_tower_window(marker, config, tt.cover, tt.tower1.N, d)}
    N0, N1 = tt.tower0.N, tt.tower1.N

    recs, tried = _collect(_first_tower_sample, ctx, seed + 3, samples, action.m, 8 * samples + 16)
    checks = [{**r, "checks": _first_tower_checks(r, delta, N0, d)} for r in recs]
    ok = len(recs) == samples and all(all(c["checks"].values()) for c in checks)
    worst = min(checks, key=lambda c: c["rank_b"] - 4 * c["rank_a"], default={})
    cert.stages.append(Stage("first_tower", {"N0": N0, "delta": delta, "found": len(recs),
                                             "tried": tried}, ok, worst, checks))

    side, _ = _collect(_side_sample, ctx, seed + 4, samples, action.m, samples)
    bad = [r for r in side if not r["in_tower"] and not r["in_cover"]]
    cert.stages.append(Stage("side_condition", {"samples": len(side)}, not bad,
                             {"outside_tower": sum(not r["in_tower"] for r in side),
                              "uncovered": bad[:5]}))

    recs, tried = _collect(_second_tower_sample, ctx, seed + 5, samples, action.m, 8 * samples + 16)
    G = tt.cover.group_count
    checks = [{**r, "checks": _second_tower_checks(r, delta, N1, d, G)} for r in recs]
    ok = len(recs) == samples and all(all(c["checks"].values()) for c in checks)
    worst = max(checks, key=lambda c: c["rank_cover"], default={})
    cert.stages.append(Stage("second_tower", {"N1": N1, "delta": delta, "groups": G,
                                              "found": len(recs), "tried": tried}, ok, worst, checks))
    return cert


def replay_certificate(data: dict) -> bool:
    """Re-derive every stored per-sample check from its stored counts.

    True iff the recomputed checks agree with the stored ones, and ``overall`` is true
    exactly when every stage passed.
    """
    stages = {s["name"]: s for s in data["stages"]}
    d, delta, tt = data["inputs"]["d"], data["delta"], data["two_towers"]
    agree = True
    if "first_tower" in stages:
        for c in stages["first_tower"]["checks"]:
            agree &= _first_tower_checks(c, delta, tt["tower0"]["N"], d) == c["checks"]
    if "second_tower" in stages:
        for c in stages["second_tower"]["checks"]:
            agree &= _second_tower_checks(c, delta, tt["tower1"]["N"], d,
                                          tt["cover"]["groups"]) == c["checks"]
    consistent = data["overall"] == (bool(data["stages"]) and all(s["pass"] for s in data["stages"]))
    return bool(agree and consistent)
