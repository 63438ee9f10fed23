import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zdtl.dynsys import act, canonical, sample_points, torus_distance
from zdtl.marker import (MarkerFunction, compute_L, compute_M, make_marker, phi_eval,
                         separation_witness, uncovered_witness, verify_marker)


def brute_M(alpha, r_outer, limit=10_000):
    # largest M with every 1 <= n <= M at orbit distance > 2 r_outer
    for n in range(1, limit):
        v = (n * alpha) % 1.0
        if min(v, 1 - v) <= 2 * r_outer:
            return n - 1
    raise AssertionError


def brute_L(alpha, r_inner, limit=200):
    # smallest L such that intervals of radius r_inner around -n alpha, |n| <= L, cover the circle
    for L in range(limit):
        pts = np.sort(np.mod(-np.arange(-L, L + 1) * alpha, 1.0))
        gaps = np.diff(np.append(pts, pts[0] + 1.0))
        if gaps.max() <= 2 * r_inner:
            return L
    raise AssertionError


def test_phi_values():
    mk = MarkerFunction((0.5,), 0.125, 0.25, 1, 0)
    assert phi_eval(mk, [0.5]) == 1.0
    assert phi_eval(mk, [0.5 + 0.1875]) == 0.5
    assert phi_eval(mk, [0.75]) == 0.0
    assert phi_eval(mk, [0.9]) == 0.0


def test_marker_radii_validated():
    with pytest.raises(ValueError):
        MarkerFunction((0.0,), 0.2, 0.1, 1, 0)


def test_compute_M_example(action1):
    dists = [min((n * (math.sqrt(2) - 1)) % 1, 1 - (n * (math.sqrt(2) - 1)) % 1) for n in range(1, 6)]
    assert np.allclose(dists, [0.4142, 0.1716, 0.2426, 0.3431, 0.0711], atol=1e-4)
    assert compute_M(action1, 0.05) == 4


def test_compute_M_too_large(action1):
    with pytest.raises(ValueError, match="marker radius too large"):
        compute_M(action1, 0.25)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.001, 0.08))
def test_compute_M_matches_scan(action1, r):
    assert compute_M(action1, r) == brute_M(math.sqrt(2) - 1, r)


def test_compute_M_monotone(action2):
    values = [compute_M(action2, r) for r in (0.08, 0.04, 0.02, 0.01)]
    assert values == sorted(values)


def test_compute_L_examples(action1):
    assert compute_L(action1, [0.0], 0.3) == 1
    assert compute_L(action1, [0.0], 0.5) == 0


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.01, 0.45))
def test_compute_L_matches_gap_scan(action1, r):
    assert compute_L(action1, [0.0], r) == brute_L(math.sqrt(2) - 1, r)


def test_compute_L_monotone(action2):
    values = [compute_L(action2, [0.0, 0.0], r) for r in (0.05, 0.1, 0.2, 0.4)]
    assert values == sorted(values, reverse=True)


def test_default_markers_valid(action1, action2, marker1, marker2):
    assert marker1.L <= 8 and marker2.L <= 8
    assert marker1.r_outer == pytest.approx(2 * marker1.r_inner)
    assert verify_marker(action1, marker1, 0, 10_000).passed
    assert verify_marker(action2, marker2, 0, 2_000).passed


def test_inflated_M_reports_separation(action1, action2, marker1, marker2):
    for action, mk in ((action1, marker1), (action2, marker2)):
        bad = dataclasses.replace(mk, M=mk.M + 3)
        w = separation_witness(action, bad, bad.M)
        rep = verify_marker(action, bad, 0, 500, witnesses=[w])
        assert any(v["condition"] == 1 for v in rep.violations)


def test_reduced_L_reports_covering(action1, action2, marker1, marker2):
    for action, mk in ((action1, marker1), (action2, marker2)):
        bad = dataclasses.replace(mk, L=mk.L - 1)
        w = uncovered_witness(action, bad, bad.L)
        assert w is not None
        rep = verify_marker(action, bad, 0, 500, witnesses=[w])
        assert any(v["condition"] == 2 for v in rep.violations)


def test_condition_one_by_direct_scan(action1, marker1):
    # independent check: no point of the support comes back to it within |n| <= M
    xs = canonical(marker1.center[0] + np.linspace(-marker1.r_outer, marker1.r_outer, 201)[1:-1])
    ns = np.arange(-marker1.M, marker1.M + 1)
    ns = ns[ns != 0][:, None]
    for x in xs:
        assert np.all(phi_eval(marker1, act(action1, [x], ns)) == 0.0)


def test_phi_lipschitz_and_support(marker2):
    a = sample_points(5, 2000, 2)
    b = sample_points(6, 2000, 2)
    lip = 1.0 / (marker2.r_outer - marker2.r_inner)
    assert np.all(np.abs(phi_eval(marker2, a) - phi_eval(marker2, b))
                  <= lip * torus_distance(a, b) + 1e-12)
    pos = phi_eval(marker2, a) > 0
    assert np.all(torus_distance(a[pos], np.array(marker2.center)) < marker2.r_outer)


def test_make_marker_roundtrip(action2):
    mk = make_marker(action2, 0.05)
    assert mk.r_outer == pytest.approx(0.1)
    assert verify_marker(action2, mk, 3, 300).passed
