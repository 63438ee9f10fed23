"""Acceptance run: one test per criterion, each printing a single PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest

from cli_cases import CASES
from zdtl import cli
from zdtl.comparison import OpenSet, certify_comparison, check_rank_domination, ocap_estimate
from zdtl.dynsys import default_action, diagonal_action
from zdtl.lattice import find_N0, mc_outer_box_volume, steiner_outer_volume_box, verify_lemma
from zdtl.marker import default_marker
from zdtl.tiling import TilingConfig, run_tiling_suite
from zdtl.towers import TowerSpec, build_two_towers, tower_marker, two_tower_setup, verify_tower


@pytest.fixture
def announce(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    return emit


def test_criterion_1_tiling_invariants(announce):
    start = time.perf_counter()
    bad = {}
    for d in (1, 2):
        action = default_action(d)
        marker = default_marker(action)
        config = TilingConfig.for_marker(marker, d)
        found = run_tiling_suite(action, marker, config, seed=2024 + d, trials=100)
        bad.update({f"d{d}:{k}": len(v) for k, v in found.items() if v})
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed <= 60
    announce(1, ok, f"tiling suite 2 x 100 trials, violations={bad or 0}, {elapsed:.1f}s")
    assert not bad
    assert elapsed <= 60


def test_criterion_2_lattice_lemma(announce):
    start = time.perf_counter()
    rows = []
    for d in (1, 2):
        for eps in (0.2, 0.5):
            for r in (1, 2):
                rep = verify_lemma(seed=7, trials=200, epsilon=eps, r=r, d=d)
                closed = math.floor(8 * (r + 1) / eps) + 1 if d == 1 else rep.N0
                rows.append((d, eps, r, rep.N0, rep.passed and rep.worst_fraction < eps,
                             rep.N0 == closed))
    elapsed = time.perf_counter() - start
    ok = all(p and c for *_, p, c in rows) and elapsed <= 120 and find_N0(0.5, 1, 1) == 33
    summary = ", ".join(f"(d={d},eps={e},r={r})->N0={n}" for d, e, r, n, _, _ in rows)
    announce(2, ok, f"{summary}; {elapsed:.1f}s")
    assert all(p for *_, p, _ in rows)
    assert all(c for *_, c in rows)
    assert find_N0(0.5, 1, 1) == 33
    assert elapsed <= 120


def test_criterion_3_steiner(announce):
    exact = steiner_outer_volume_box(10, 1, 2)
    est, _ = mc_outer_box_volume(10, 1, 2, 1_000_000, 3)
    closed_err = abs(exact - (140 + math.pi))
    rel = abs(est - exact) / exact
    ok = closed_err <= 1e-10 and rel < 0.01
    announce(3, ok, f"closed-form error {closed_err:.1e}, Monte Carlo relative error {rel:.4f}")
    assert closed_err <= 1e-10
    assert rel < 0.01


def test_criterion_4_towers(announce):
    results = []
    for d in (1, 2):
        action = default_action(d)
        marker = tower_marker(action)
        config = TilingConfig.for_marker(marker, d)
        for N in (2, 3, 4):
            dis, cov = verify_tower(action, marker, config, TowerSpec(N, config.H), 1000, 40 + N)
            results.append((d, N, len(dis.violations), len(cov.violations), cov.stats["eligible"]))
        weak, _ = verify_tower(action, marker, config, TowerSpec(3, config.H).weakened(), 200, 5,
                               direct_checks=0)
        _, strong = verify_tower(action, marker, config, TowerSpec(3, config.H).strengthened(), 200,
                                 5, direct_checks=0)
        results.append((d, "controls", len(weak.violations), len(strong.violations), None))
    main_ok = all(a == 0 and b == 0 and e > 0 for d, N, a, b, e in results if N != "controls")
    ctrl_ok = all(a > 0 and b > 0 for d, N, a, b, _ in results if N == "controls")
    detail = "; ".join(f"d={d} N={N}: {a}/{b}" for d, N, a, b, _ in results)
    announce(4, main_ok and ctrl_ok, f"disjoint/coverage violations {detail}")
    assert main_ok
    assert ctrl_ok


@pytest.mark.parametrize("d,N,eps,interior", [(1, 3, 0.2, 200), (2, 2, 0.3, 30)])
def test_criterion_5_two_towers(announce, d, N, eps, interior):
    action = default_action(1) if d == 1 else diagonal_action(2)
    marker, config = two_tower_setup(action, N, eps)
    res = build_two_towers(action, marker, config, N, eps, seed=11, samples=1000,
                           interior_samples=interior)
    limit = 3 if d == 1 else 9
    props = {k: res.reports[k].passed for k in ("property_1", "property_2", "property_3")}
    ok = res.passed and res.cover.group_count <= limit
    announce(5, ok, f"d={d} N={N} eps={eps}: {props}, groups={res.cover.group_count}, "
                    f"N1={res.tower1.N}")
    assert all(props.values())
    assert res.passed
    assert res.cover.group_count <= limit


def test_criterion_6_comparison(announce):
    action = default_action(1)
    E, F = OpenSet.interval(0.5, 0.55), OpenSet.interval(0.0, 0.4)
    assert 0.05 <= 0.25 * 0.4 * (1 - 0.2)
    good = certify_comparison(action, None, None, E, F, 0.01, seed=3, samples=20)
    same = certify_comparison(action, None, None, F, F, 0.01, seed=3, samples=10)
    ranks = (check_rank_domination(1, 5), check_rank_domination(2, 5), check_rank_domination(0, 4))
    ok = good.overall and not same.overall and same.failed_stage == "density" \
        and ranks == (True, False, False)
    announce(6, ok, f"certificate overall={good.overall}, E=F failed at {same.failed_stage}, "
                    f"rank checks={ranks}")
    assert good.overall, good.failed_stage
    assert not same.overall and same.failed_stage == "density"
    assert ranks == (True, False, False)


def test_criterion_7_ocap(announce):
    est = ocap_estimate(default_action(1), OpenSet.interval(0.4, 0.6), 1000, seed=0, samples=100)
    ok = 0.18 <= est <= 0.22
    announce(7, ok, f"ocap estimate {est:.4f}")
    assert ok


def test_criterion_8_determinism(announce, tmp_path):
    differing = []
    for name, argv in CASES.items():
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / name / run
            cli.main(argv + ["--out", str(out)])
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if outputs[0] != outputs[1] or not outputs[0]:
            differing.append(name)
        json.loads(outputs[0][f"{argv[0]}.json"])
    commands = sorted({argv[0] for argv in CASES.values()})
    ok = not differing and set(commands) == set(cli.COMMANDS)
    announce(8, ok, f"{len(CASES)} runs over {len(commands)} commands, differing={differing or 'none'}")
    assert set(commands) == set(cli.COMMANDS)
    assert not differing
