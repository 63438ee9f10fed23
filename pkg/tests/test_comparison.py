import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zdtl.comparison import (DensityNotCertified, OpenSet, certify_comparison,
                             check_rank_domination, eps_cut, find_density_N, lower_density,
                             measure_estimate, ocap_estimate, orbit_density, rank_profile,
                             replay_certificate)
from zdtl.dynsys import act, sample_points


def test_eps_cut_examples():
    assert eps_cut(0.7, 0.2) == pytest.approx(0.5)
    assert eps_cut(0.1, 0.2) == 0.0
    assert eps_cut(0.3, 0.0) == 0.3


@given(v=st.floats(0, 10), e=st.floats(0, 10))
def test_eps_cut_nonnegative(v, e):
    assert eps_cut(v, e) >= 0.0
    assert eps_cut(v, e) <= v


def test_open_set_basics():
    iv = OpenSet.interval(0.2, 0.4)
    assert iv.contains([[0.3]])[0] and not iv.contains([[0.45]])[0]
    assert iv.phi([[0.3]]) == pytest.approx(0.1)
    assert OpenSet.empty().is_empty
    assert iv.superlevel(0.05).contains([[0.3]])[0]
    assert not iv.superlevel(0.05).contains([[0.36]])[0]
    assert iv.superlevel(0.2).is_empty
    with pytest.raises(ValueError):
        OpenSet.interval(0.4, 0.2)


def test_measure_examples():
    est, exact = measure_estimate(OpenSet.ball((0.5, 0.5), 0.1), 0, 10_000)
    assert exact == pytest.approx(math.pi * 0.01)
    assert measure_estimate(OpenSet.empty(), 0, 100) == (0.0, 0.0)
    two = OpenSet((((0.2, 0.2), 0.1), ((0.7, 0.7), 0.15)))
    est, exact = measure_estimate(two, 1, 100_000)
    assert exact == pytest.approx(math.pi * (0.01 + 0.0225))
    sigma = math.sqrt(exact * (1 - exact) / 100_000)
    assert abs(est - exact) < 3 * sigma


def test_overlapping_balls_have_no_exact_measure():
    est, exact = measure_estimate(OpenSet((((0.2,), 0.1), ((0.25,), 0.1))), 0, 1000)
    assert exact is None


def test_orbit_density_examples(action1):
    x = np.array([0.1])
    assert orbit_density(action1, lambda p: np.ones(len(p), bool), x, 50) == 1.0
    assert orbit_density(action1, OpenSet.empty().contains, x, 50) == 0.0
    iv = OpenSet.interval(0.3, 0.55)
    assert abs(orbit_density(action1, iv.contains, x, 10_000) - 0.25) < 0.02


def test_orbit_density_direct_count(action2):
    x = np.array([0.4, 0.8])
    ball = OpenSet.ball((0.5, 0.5), 0.2)
    ms = np.array(list(np.ndindex(30, 30)))
    direct = np.count_nonzero(ball.contains(act(action2, x, -ms))) / 900
    assert orbit_density(action2, ball.contains, x, 30) == pytest.approx(direct)


def test_ocap_examples(action1):
    assert ocap_estimate(action1, OpenSet.empty(), 100, 0, 5) == 0.0
    assert ocap_estimate(action1, OpenSet.ball((0.5,), 1.0), 100, 0, 5) == 1.0
    assert 0.18 <= ocap_estimate(action1, OpenSet.interval(0.1, 0.3), 1000, 0, 30) <= 0.22


def test_find_density_examples(action1):
    E = OpenSet.interval(0.6, 0.65)
    F = OpenSet.interval(0.0, 0.4)
    N = find_density_N(action1, E.superlevel(0.001), F, 0.25, 0, 20, 1 << 12)
    assert 1 <= N < 1 << 12
    with pytest.raises(DensityNotCertified):
        find_density_N(action1, OpenSet.interval(0.0, 0.2).superlevel(0.001), F, 0.25, 0, 10, 256)
    assert find_density_N(action1, OpenSet.empty().superlevel(0.01), F, 0.25, 0, 10, 256) == 1


def test_rank_domination_examples():
    assert check_rank_domination(1, 5)
    assert not check_rank_domination(2, 5)
    assert not check_rank_domination(0, 4)
    with pytest.raises(ValueError):
        check_rank_domination(-1, 5)


def test_rank_profile_bounds(action2):
    rp = rank_profile(action2, OpenSet.ball((0.1, 0.1), 0.3).contains, np.array([0.2, 0.3]), 12)
    assert 0 <= rp.counts <= 144


def test_lower_density_positive(action1):
    delta, worst = lower_density(action1, OpenSet.interval(0.0, 0.4), 20, 0, 10)
    assert 0 < delta <= 0.5 * 0.4 / 4 + 0.05
    assert worst["M"] in (21, 40, 80)


@pytest.fixture(scope="module")
def certificate(action1):
    return certify_comparison(action1, None, None, OpenSet.interval(0.5, 0.55),
                              OpenSet.interval(0.0, 0.4), 0.01, 0, 20)


def test_certificate_passes(certificate):
    assert certificate.overall, certificate.failed_stage
    names = [s.name for s in certificate.stages]
    assert names == ["E_prime", "density", "delta", "two_towers", "first_tower",
                     "side_condition", "second_tower"]
    assert set(certificate.rank_checks) == {"first_tower", "second_tower"}


def test_certificate_replays(certificate):
    from zdtl.report import plain
    data = plain(certificate.as_dict())
    assert replay_certificate(data)
    data["delta"] = 10.0
    assert not replay_certificate(data)


def test_certificate_fails_for_equal_sets(action1):
    E = OpenSet.interval(0.1, 0.3)
    cert = certify_comparison(action1, None, None, E, E, 0.01, 0, 10)
    assert not cert.overall
    assert cert.failed_stage == "density"
