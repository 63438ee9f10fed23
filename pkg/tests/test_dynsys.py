import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zdtl.dynsys import (RotationAction, act, lattice_ball, lattice_box, orbit_window,
                         sample_points, torus_distance)

coords = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)
steps = st.integers(-10_000, 10_000)


def test_act_single_step(action1):
    assert act(action1, [0.0], [1])[0] == pytest.approx(math.sqrt(2) - 1, abs=1e-12)


def test_act_zero_and_inverse(action2):
    x = np.array([0.3, 0.7])
    assert np.allclose(act(action2, x, [0, 0]), x)
    back = act(action2, act(action2, x, [5, -3]), [-5, 3])
    assert torus_distance(back, x) < 1e-12


def test_act_rejects_wrong_shapes(action2):
    with pytest.raises(ValueError):
        act(action2, [0.1], [1, 1])
    with pytest.raises(ValueError):
        act(action2, [0.1, 0.2], [1])
    with pytest.raises(ValueError):
        act(action2, [0.1, 0.2], [0.5, 1.0])


def test_torus_distance_examples():
    assert torus_distance([0.1], [0.9]) == pytest.approx(0.2)
    assert torus_distance([0.4, 0.2], [0.4, 0.2]) == 0.0
    assert torus_distance([0.0, 0.0], [0.5, 0.5]) == pytest.approx(math.sqrt(0.5))


def test_torus_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        torus_distance([0.1], [0.1, 0.2])


def test_orbit_window_rational_rotation():
    quarter = RotationAction(((0.25,),), independence_window=0)
    out = orbit_window(quarter, [0.0], [[-1], [0], [1]])
    assert set(out) == {(-1,), (0,), (1,)}
    assert out[(-1,)][0] == pytest.approx(0.75)
    assert out[(0,)][0] == pytest.approx(0.0)
    assert out[(1,)][0] == pytest.approx(0.25)


def test_orbit_window_identity_and_size(action2):
    x = np.array([0.2, 0.9])
    assert np.allclose(orbit_window(action2, x, [[0, 0]])[(0, 0)], x)
    assert len(orbit_window(action2, x, lattice_box(4, 2))) == 16


def test_sample_points():
    assert len(sample_points(3, 0, 2)) == 0
    assert np.array_equal(sample_points(9, 50, 2), sample_points(9, 50, 2))
    mean = sample_points(1, 10_000, 2).mean(axis=0)
    assert np.all(np.abs(mean - 0.5) < 0.02)


def test_rational_rotation_rejected():
    with pytest.raises(ValueError):
        RotationAction(((0.25,),), independence_window=8)


def test_lattice_helpers():
    assert len(lattice_box(3, 2)) == 9
    ball = lattice_ball(2.0, 2)
    assert len(ball) == 13
    assert len(lattice_ball(2.0, 2, strict=True)) == 9


@settings(max_examples=200, deadline=None)
@given(x=coords, y=coords, n=steps, k=steps)
def test_cocycle_and_isometry_d1(action1, x, y, n, k):
    a = act(action1, act(action1, [x], [n]), [k])
    b = act(action1, [x], [n + k])
    assert torus_distance(a, b) < 1e-12
    d0 = torus_distance([x], [y])
    d1 = torus_distance(act(action1, [x], [n]), act(action1, [y], [n]))
    assert abs(d0 - d1) < 1e-12


@settings(max_examples=100, deadline=None)
@given(x=st.tuples(coords, coords), n=st.tuples(steps, steps), k=st.tuples(steps, steps))
def test_cocycle_d2(action2, x, n, k):
    a = act(action2, act(action2, x, n), k)
    b = act(action2, x, np.add(n, k))
    assert torus_distance(a, b) < 1e-12


def test_freeness_witness(action2):
    xs = sample_points(4, 5, 2)
    ns = np.array([n for n in np.ndindex(101, 101)]) - 50
    ns = ns[np.any(ns != 0, axis=1)]
    for x in xs:
        assert np.min(torus_distance(act(action2, x, ns), x)) > 1e-4
