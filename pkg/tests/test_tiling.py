import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zdtl import geometry
from zdtl.dynsys import act, sample_points
from zdtl.marker import phi_eval
from zdtl.tiling import (ON_BOUNDARY, CellCrossSection, Tiling, TilingConfig, WeightedCenter,
                         active_centers, cross_section_halfspaces, h_projective_image,
                         hausdorff_estimate, origin_cell, reach, render_svg, run_tiling_suite,
                         tiling_polygons)


def test_active_centers_match_scan(action1, marker1):
    x = np.array([0.123])
    got = {c.n: c.t for c in active_centers(action1, marker1, x, 12)}
    expect = {}
    for n in range(-12, 13):
        phi = phi_eval(marker1, act(action1, x, [n]))
        if phi > 0:
            expect[(n,)] = 1.0 / phi
    assert set(got) == set(expect)
    for k, t in expect.items():
        assert got[k] == pytest.approx(t, rel=1e-12)
        assert got[k] >= 1.0


def test_active_centers_at_marker_center(action2, marker2):
    centers = active_centers(action2, marker2, np.array(marker2.center), 3)
    assert WeightedCenter((0, 0), 1.0) in centers


def test_equal_weight_bisector():
    cell = cross_section_halfspaces([WeightedCenter((0,), 1.0), WeightedCenter((10,), 1.0)], (0,), 7.0)
    assert cell.interval() == (-math.inf, pytest.approx(5.0))
    # origin cell of this pair: label 0 and distance 5 to the wall
    assert cell.slack([[0.0]])[0] == pytest.approx(5.0)


def test_weighted_bisector():
    cell = cross_section_halfspaces([WeightedCenter((0,), 1.0), WeightedCenter((10,), 2.0)], (0,), 100.0)
    assert len(cell.offsets) == 1
    # 20 a <= 100 + 102^2 - 101^2
    assert cell.interval()[1] == pytest.approx((100 + 102 ** 2 - 101 ** 2) / 20)
    assert cell.interval()[1] == pytest.approx(15.15)


def test_competitor_equal_to_label_skipped():
    base = [WeightedCenter((0,), 1.0), WeightedCenter((10,), 1.0)]
    a = cross_section_halfspaces(base, (0,), 7.0)
    b = cross_section_halfspaces(base + [WeightedCenter((0,), 1.0)], (0,), 7.0)
    assert a.interval() == b.interval()


def test_inactive_label_gives_empty_cell():
    cell = cross_section_halfspaces([WeightedCenter((0,), 1.0)], (4,), 7.0)
    assert cell.empty


def test_projective_image_examples():
    assert np.allclose(h_projective_image([3.0], [3], 1.0, 1.5, 10.0), [3.0])
    assert h_projective_image([0.0], [10], 1.0, 2.0, 100.0)[0] == pytest.approx(1000 / 201)
    assert h_projective_image([4.0], [0], 2.0, 2.0, 100.0)[0] == pytest.approx(4 * 102 / 202)


def interval_cell(lo, hi):
    return CellCrossSection((0,), -1.0, [[1.0], [-1.0]], [hi, -lo], bound=20.0)


def test_hausdorff_examples():
    a, b = interval_cell(0, 5), interval_cell(0.5, 5.5)
    assert hausdorff_estimate(a, a) == 0.0
    assert hausdorff_estimate(a, b) == pytest.approx(0.5)


def test_hausdorff_translate(action2, marker2, config2):
    cell = Tiling(action2, marker2, config2, np.array([0.3, 0.6])).origin_cell().cell
    est = hausdorff_estimate(cell, cell.translate([3, -4]), 64)
    assert abs(est - 5.0) <= 5.0 * 2 * math.pi / 64


def test_hausdorff_rejects_unbounded():
    cell = CellCrossSection((0,), -1.0, [[1.0]], [1.0], bound=5.0)
    with pytest.raises(ValueError, match="unbounded"):
        hausdorff_estimate(cell, cell)


def test_origin_cell_at_marker_center(action1, marker1, config1):
    oc = origin_cell(action1, marker1, config1, np.array(marker1.center))
    assert oc is not ON_BOUNDARY and oc.label == (0,)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(0, 1, exclude_max=True), m=st.integers(-40, 40))
def test_origin_label_equivariant_d1(action1, marker1, config1, x, m):
    a = origin_cell(action1, marker1, config1, np.array([x]))
    b = origin_cell(action1, marker1, config1, act(action1, [x], [m]))
    if a is ON_BOUNDARY or b is ON_BOUNDARY:
        return
    # the origin of T^m x sits at position m of the tiling of x
    tl = Tiling(action1, marker1, config1, np.array([x]), window_radius=80)
    assert b.label[0] == tl.locate([[float(m)]])[0][0] - m


def test_origin_label_equivariant_d2(action2, marker2, config2):
    rng = np.random.default_rng(11)
    for x in sample_points(12, 15, 2):
        m = rng.integers(-6, 7, size=2)
        tl = Tiling(action2, marker2, config2, x, window_radius=40)
        b = origin_cell(action2, marker2, config2, act(action2, x, m))
        assert tuple(b.label) == tuple(int(v) for v in tl.locate(m[None, :].astype(float))[0] - m)


def test_config_validation(marker1):
    with pytest.raises(ValueError):
        TilingConfig.for_marker(marker1, 1, H=reach(marker1.L, 1) ** 2)
    with pytest.raises(ValueError):
        TilingConfig.for_marker(marker1, 1, s=2.5)


def test_suite_small_runs_clean(action1, marker1, config1, action2, marker2, config2):
    for args in ((action1, marker1, config1), (action2, marker2, config2)):
        found = run_tiling_suite(*args, seed=5, trials=10)
        assert {k: v for k, v in found.items() if v} == {}


def test_render_deterministic_and_covering(action2, marker2, config2):
    x = np.array([0.21, 0.47])
    view = (-6.0, 6.0, -6.0, 6.0)
    a = render_svg(action2, marker2, config2, x, viewport=view)
    assert a == render_svg(action2, marker2, config2, x, viewport=view)
    assert a.lstrip().startswith(b"<?xml") or b"<svg" in a[:400]
    rc = reach(marker2.L, 2)
    tl = Tiling(action2, marker2, config2, x,
                window_radius=6 * math.sqrt(2) + 2 * rc + config2.truncation_radius + 2)
    polys, _ = tiling_polygons(tl, view)
    pts = np.random.default_rng(0).uniform(-6, 6, size=(2000, 2))
    inside = np.array([geometry.inside_convex(pts, p, tol=1e-9) for p in polys])
    hits = inside.sum(axis=0)
    assert np.all(hits >= 1)
    multi = pts[hits >= 2]
    for p in multi:
        near = min(geometry.boundary_distance(p[None, :], poly)[0]
                   for poly, flag in zip(polys, inside[:, (pts == p).all(axis=1)].ravel()) if flag)
        assert near <= 1e-9


def test_render_rejects_d1(action1, marker1, config1):
    with pytest.raises(ValueError, match="d=2 only"):
        render_svg(action1, marker1, config1, np.array([0.1]))


def test_facet_slack_equals_boundary_distance(action2, marker2, config2):
    rng = np.random.default_rng(4)
    for x in sample_points(21, 5, 2):
        cell = Tiling(action2, marker2, config2, x).origin_cell().cell
        normals, offsets = cell.facets()
        pts = rng.uniform(-3, 3, size=(200, 2))
        rel = pts - np.asarray(cell.label, dtype=float)
        slack = np.min(offsets - rel @ normals.T, axis=1)
        inside = slack > 0
        assert np.allclose(slack[inside], cell.boundary_distance(pts[inside]), atol=1e-9)
        # outside, the largest wall violation never exceeds the true distance
        assert np.all(-slack[~inside] <= cell.boundary_distance(pts[~inside]) + 1e-9)
