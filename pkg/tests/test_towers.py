import math

import numpy as np
import pytest

from zdtl.lattice import find_N0
from zdtl.tiling import ON_BOUNDARY, TilingConfig
from zdtl.towers import (BoundaryCover, TowerSpec, base_predicate, build_boundary_cover,
                         build_two_towers, coverage_trend, ocap_control, omega_double_prime,
                         omega_prime, two_tower_parameters, two_tower_setup, urp_search,
                         verify_tower)


def test_base_predicate_examples():
    spec = TowerSpec(3, 10.0)
    assert base_predicate(spec, ((0, 0), 10.0), 2)
    assert not base_predicate(spec, ((1, 0), 50.0), 2)
    assert not base_predicate(spec, ((3, 0), 2.0), 2)
    assert not base_predicate(spec, ON_BOUNDARY, 2)
    assert base_predicate(spec.weakened(), ((1, 0), 0.1), 2)


def test_debug_predicates():
    assert omega_prime(((4,), 0.1), (1,), 3)
    assert not omega_prime(((4,), 0.1), (0,), 3)
    assert not omega_double_prime(((4,), 0.1), (1,), 3, 1)
    assert omega_double_prime(((4,), 7.0), (1,), 3, 1)


def test_disjoint_default_d1(action1, marker1, config1):
    dis, _ = verify_tower(action1, marker1, config1, TowerSpec(4, config1.H), 1000, 0)
    assert dis.passed


def test_single_floor_vacuous(action1, marker1, config1):
    dis, cov = verify_tower(action1, marker1, config1, TowerSpec(1, config1.H), 200, 1)
    assert dis.passed and cov.passed


def test_weakened_spec_overlaps(action1, marker1, config1):
    spec = TowerSpec(4, config1.H).weakened()
    dis, _ = verify_tower(action1, marker1, config1, spec, 200, 0, direct_checks=5)
    assert not dis.passed
    assert any(v["witness"]["kind"] == "overlap" for v in dis.violations)


def test_coverage_with_tower_marker(action1, tmarker1):
    cfg = TilingConfig.for_marker(tmarker1, 1)
    dis, cov = verify_tower(action1, tmarker1, cfg, TowerSpec(3, cfg.H), 500, 2)
    assert dis.passed and cov.passed
    assert cov.stats["eligible"] > 100


def test_uncovered_fraction_falls_with_H(action1, tmarker1):
    H0 = TilingConfig.for_marker(tmarker1, 1).H
    trend = coverage_trend(action1, tmarker1, 2, [H0, 4 * H0, 16 * H0], 400, 3)
    assert trend[0] >= trend[1] >= trend[2]
    assert trend[-1] < trend[0]


def test_cover_groups_and_shifts():
    c1 = BoundaryCover(1, 2.0, 2.0, 10.0)
    assert c1.modulus == 3 and c1.group_count == 3
    assert c1.group([0])[0] == c1.group([3])[0]
    assert c1.group([0])[0] != c1.group([1])[0]
    assert c1.shift([7])[0] == 3
    assert c1.shift([-7])[0] == -4
    assert BoundaryCover(2, 1.5, 2.0, 10.0).group_count == 9
    assert BoundaryCover(2, 1.5, 2.0, 10.0, merged=True).group_count == 1


def test_cover_shift_error_and_group_spacing():
    cov = BoundaryCover(2, 1.5, 1.0, 9.0)
    ns = cov.pieces()
    assert len(ns) == cov.piece_count()
    assert cov.invariant_violations(ns) == []
    g = cov.group(ns)
    for k in np.unique(g):
        pts = ns[g == k]
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)[~np.eye(len(pts), dtype=bool)]
        assert dist.min() > 2 * math.sqrt(2)


def test_cover_radius(action1, marker1, config1):
    cov = build_boundary_cover(action1, marker1, config1, 6.0, 20.0)
    assert cov.radius == pytest.approx(marker1.L + 1 + 12.0)
    with pytest.raises(ValueError):
        build_boundary_cover(action1, marker1, config1, 6.0, 5.0)


def test_two_tower_parameters():
    p = two_tower_parameters(1, 3, 0.2)
    assert p["R0"] == pytest.approx(6.0)
    assert p["N1"] == max(find_N0(0.2, 2 * 6.0 + 4 + 0.5, 1), 3) + 1
    assert p["R1"] == pytest.approx(max(6.0, 2 * p["N1"]) + 1)


def test_marker_too_small_rejected(action1, marker1, config1):
    with pytest.raises(ValueError, match="increase M/H"):
        build_two_towers(action1, marker1, config1, 3, 0.2, 0, 10)


def test_two_towers_d1_small(action1):
    mk, cfg = two_tower_setup(action1, 3, 0.2)
    res = build_two_towers(action1, mk, cfg, 3, 0.2, 0, 200, interior_samples=50)
    assert res.passed, {k: v.violations[:2] for k, v in res.reports.items()}
    assert res.cover.group_count <= 3


def test_merged_groups_break_disjointness(action1):
    mk, cfg = two_tower_setup(action1, 3, 0.2)
    res = build_two_towers(action1, mk, cfg, 3, 0.2, 0, 200, interior_samples=5, merge_groups=True)
    assert not res.reports["property_2"].passed


def test_ocap_control_tower_marker(action1, tmarker1):
    cfg = TilingConfig.for_marker(tmarker1, 1)
    rep = ocap_control(action1, tmarker1, cfg, 2.0, 2000, 20, 0)
    assert rep.passed
    assert rep.stats["orbit_frequency_max"] <= rep.stats["spatial_density_sup"] + 0.02


def test_urp_search_finds_parameters(action1):
    out = urp_search(action1, 2, 0.5, 200, 0)
    assert out["found"]


def test_pieces_hit_matches_fresh_tilings(action1, tmarker1):
    from zdtl.dynsys import act
    from zdtl.tiling import Tiling, reach
    from zdtl.towers import pieces_hit

    cfg = TilingConfig.for_marker(tmarker1, 1)
    cover = build_boundary_cover(action1, tmarker1, cfg, 2.0, 3.0)
    x = np.array([0.377])
    rc = reach(tmarker1.L, 1)
    deep = Tiling(action1, tmarker1, cfg, x, level=cfg.s * cfg.H,
                  window_radius=3 * cover.radius + 4 * rc + cfg.truncation_radius + 60)
    points = np.arange(-30, 31)[:, None]
    idx, ns = pieces_hit(deep, cover, points)
    fast = {(int(points[i][0]), int(n[0])) for i, n in zip(idx, ns)}
    slow = set()
    wr = cover.radius + 2 * rc + cfg.truncation_radius + 2
    for p in points[:, 0]:
        for n in cover.pieces()[:, 0]:
            h = int(cover.shift([n])[0])
            z = act(action1, x, [p - h])
            cell = Tiling(action1, tmarker1, cfg, z, level=cfg.s * cfg.H, window_radius=wr).cell([n])
            if cell.empty or not cell.is_bounded():
                continue
            lo, hi = cell.interval()
            if lo < hi and min(abs(lo), abs(hi)) < 2 * cover.R0:
                slow.add((int(p), int(n)))
    assert fast == slow
    assert slow
