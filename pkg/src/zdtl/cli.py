"""``zdtl`` command line: run one experiment, write a JSON report and SVG figures.

Settings come from an optional ``key=value`` file (``--config``) overridden by flags.
Exit status: 0 when every check passes, 1 when a check fails (the report is still
written), 2 for an invalid configuration.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .comparison import OpenSet, certify_comparison, window_frequencies
from .dynsys import RotationAction, default_action, diagonal_action
from .lattice import find_N0, verify_lemma
from .marker import default_marker, make_marker, verify_marker
from .report import validate, write_artifacts
from .tiling import (PROPERTIES, TilingConfig, Tiling, render_svg, run_tiling_suite)
from .towers import (TowerSpec, build_two_towers, tower_marker, two_tower_parameters,
                     two_tower_setup, verify_tower)

COMMANDS = ("marker", "tiling", "tower", "two-towers", "lattice", "ocap", "certify")

DEFAULT_SAMPLES = {"marker": 1000, "tiling": 100, "tower": 1000, "two-towers": 1000,
                   "lattice": 200, "ocap": 100, "certify": 50}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    d: int = 1
    m: int | None = None
    alpha: tuple | None = None
    center: tuple | None = None
    r_inner: float | None = None
    r_outer: float | None = None
    H: float | None = None
    s: float = 1.5
    N: int | None = None
    epsilon: float | None = None
    r: float = 1.0
    E: str | None = None
    F: str | None = None
    seed: int = 0
    samples: int | None = None
    out: str = "zdtl-out"
    format: str = "svg"


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"expected a comma list of numbers, got {text!r}") from exc


CONVERTERS = {"d": int, "m": int, "alpha": _floats, "center": _floats, "r_inner": float,
              "r_outer": float, "H": float, "s": float, "N": int, "epsilon": float, "r": float,
              "E": str, "F": str, "seed": int, "samples": int, "out": str, "format": str}


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes and underscores are equivalent."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{num}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = parse_config_file(args.config) if args.config else {}
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            raw[f.name] = value
    values = {}
    for key, value in raw.items():
        try:
            values[key] = CONVERTERS[key](value) if isinstance(value, str) else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    cfg = ExperimentConfig(**values)
    if cfg.d < 1:
        raise ConfigError("d must be positive")
    if cfg.format not in ("json", "svg"):
        raise ConfigError("format must be json or svg")
    if cfg.samples is not None and cfg.samples < 1:
        raise ConfigError("samples must be positive")
    if cfg.N is not None and cfg.N < 1:
        raise ConfigError("N must be positive")
    if cfg.epsilon is not None and not cfg.epsilon > 0:
        raise ConfigError("epsilon must be positive")
    return cfg


def parse_set(text: str | None, m: int) -> OpenSet:
    """``lo:hi`` intervals (m = 1) or ``c1,c2,...@radius`` balls, joined by ``;``."""
    if text is None or text.strip() in ("", "empty"):
        return OpenSet.empty()
    balls = []
    for part in text.split(";"):
        part = part.strip()
        if "@" in part:
            c, r = part.split("@", 1)
            center = _floats(c)
            if len(center) != m:
                raise ConfigError(f"ball center {part!r} must have {m} coordinates")
            balls.append((center, float(r)))
        elif ":" in part:
            if m != 1:
                raise ConfigError("intervals need a one-dimensional torus")
            lo, hi = (float(v) for v in part.split(":", 1))
            if not hi > lo:
                raise ConfigError(f"empty interval {part!r}")
            balls.append((((lo + hi) / 2.0,), (hi - lo) / 2.0))
        else:
            raise ConfigError(f"cannot parse set {part!r}")
    try:
        return OpenSet(tuple(balls))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_action(cfg: ExperimentConfig, command: str) -> RotationAction:
    if cfg.alpha is None:
        if cfg.d > 2:
            raise ConfigError("default systems exist for d <= 2; pass --alpha")
        # the diagonal system keeps the large markers of the paired towers affordable
        if command in ("two-towers",) and cfg.d == 2:
            return diagonal_action(2)
        return default_action(cfg.d)
    m = cfg.m or len(cfg.alpha) // cfg.d
    if m < 1 or len(cfg.alpha) != cfg.d * m:
        raise ConfigError(f"alpha needs d*m = {cfg.d}*{m} entries, got {len(cfg.alpha)}")
    try:
        return RotationAction(np.asarray(cfg.alpha).reshape(cfg.d, m))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def explicit_marker(cfg: ExperimentConfig, action: RotationAction):
    if cfg.r_inner is None and cfg.r_outer is None and cfg.center is None:
        return None
    if cfg.r_inner is None:
        raise ConfigError("a custom marker needs r_inner")
    if cfg.center is not None and len(cfg.center) != action.m:
        raise ConfigError(f"center needs {action.m} coordinates")
    try:
        return make_marker(action, cfg.r_inner, cfg.r_outer, cfg.center)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def tiling_config(cfg: ExperimentConfig, marker, d: int) -> TilingConfig:
    try:
        return TilingConfig.for_marker(marker, d, H=cfg.H, s=cfg.s)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _marker_dict(marker) -> dict:
    return {"M": marker.M, "L": marker.L, "center": list(marker.center),
            "r_inner": marker.r_inner, "r_outer": marker.r_outer}


def _samples(cfg: ExperimentConfig, command: str) -> int:
    return cfg.samples if cfg.samples is not None else DEFAULT_SAMPLES[command]


# ---------------------------------------------------------------------------
# commands: each returns (report, pass, figures)


def run_marker(cfg, action):
    marker = explicit_marker(cfg, action) or default_marker(action)
    n = _samples(cfg, "marker")
    rep = verify_marker(action, marker, cfg.seed, n)
    violations = [{"x": v["x"], "witness": {k: val for k, val in v.items() if k != "x"}}
                  for v in rep.violations]
    verification = {"property_id": "marker", "parameters": {"seed": cfg.seed}, "samples": rep.samples,
                    "violations": violations, "pass": rep.passed}
    report = {**_marker_dict(marker), "verification": verification}
    figures = {}
    if action.m == 1:
        from .marker import phi_eval
        xs = np.linspace(0.0, 1.0, 801)
        figures["phi"] = plotting.draw_series(xs, {"phi": [phi_eval(marker, [x]) for x in xs]},
                                              xlabel="x", ylabel="marker value")
    return report, rep.passed, figures


def run_tiling(cfg, action):
    marker = explicit_marker(cfg, action) or default_marker(action)
    config = tiling_config(cfg, marker, action.d)
    trials = _samples(cfg, "tiling")
    x = np.random.default_rng(cfg.seed).random(action.m)
    origin = Tiling(action, marker, config, x).origin_cell()
    found = run_tiling_suite(action, marker, config, cfg.seed, trials)
    props = {p: {"violations": len(v), "witnesses": v[:5]} for p, v in found.items()}
    ok = all(len(v) == 0 for v in found.values())
    report = {"H": config.H, "s": config.s, "truncation_radius": config.truncation_radius,
              "trials": trials, "properties": props, "pass": ok,
              "origin": None if isinstance(origin, str) else
              {"label": [int(v) for v in origin.label], "dist0": float(origin.dist0)}}
    figures = {}
    if action.d == 2:
        figures["tiles"] = render_svg(action, marker, config, x)
    return report, ok, figures


def run_tower(cfg, action):
    marker = explicit_marker(cfg, action) or tower_marker(action)
    config = tiling_config(cfg, marker, action.d)
    N = cfg.N or 2
    spec = TowerSpec(N, config.H)
    dis, cov = verify_tower(action, marker, config, spec, _samples(cfg, "tower"), cfg.seed)
    ok = dis.passed and cov.passed
    report = {"marker": _marker_dict(marker), "disjoint": dis.as_dict(), "coverage": cov.as_dict(),
              "pass": ok}
    figures = {"dist0": plotting.draw_histogram(cov.extras["dist0"], 2.0 * N * math.sqrt(action.d),
                                                xlabel="distance from 0 to the tile boundary",
                                                title=f"N = {N}")}
    return report, ok, figures


def run_two_towers(cfg, action):
    N = cfg.N or (3 if action.d == 1 else 2)
    eps = cfg.epsilon or (0.2 if action.d == 1 else 0.3)
    marker = explicit_marker(cfg, action)
    try:
        if marker is None:
            marker, config = two_tower_setup(action, N, eps, cfg.s)
            if cfg.H is not None:
                config = tiling_config(cfg, marker, action.d)
        else:
            config = tiling_config(cfg, marker, action.d)
        result = build_two_towers(action, marker, config, N, eps, cfg.seed, _samples(cfg, "two-towers"))
    except ValueError as exc:
        if "increase M/H" in str(exc):
            raise ConfigError(str(exc)) from exc
        raise
    report = result.as_dict()
    r1 = result.parameters["R1"]
    figures = {
        "landing": plotting.draw_histogram(result.reports["property_1"].extras["landing_dist"], r1,
                                           xlabel="depth of the shifted point in its tile",
                                           title="shifted boundary pieces"),
        "visits": plotting.draw_histogram(result.reports["property_3"].extras["fraction"], eps,
                                          xlabel="visit fraction of the shifted cover",
                                          title="second tower orbits"),
    }
    return report, result.passed, figures


def run_lattice(cfg, action):
    d, r = cfg.d, cfg.r
    eps = cfg.epsilon or 0.5
    N0 = find_N0(eps, r, d)
    lemma = verify_lemma(cfg.seed, _samples(cfg, "lattice"), eps, r, d)
    closed = math.floor(8.0 * (r + 1.0) / eps) + 1 if d == 1 else None
    ok = lemma.passed and (closed is None or closed == N0)
    report = {"d": d, "r": r, "epsilon": eps, "N0": N0, "closed_form": closed, "pass": ok,
              "lemma": {"trials": lemma.trials, "worst_fraction": lemma.worst_fraction,
                        "failures": lemma.failures[:10], "pass": lemma.passed}}
    from .lattice import boundary_ratio
    Ns = sorted({max(1, int(N0 * f)) for f in (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0)})
    figures = {"ratio": plotting.draw_series(Ns, {"boundary ratio": [boundary_ratio(n, r, d) for n in Ns]},
                                             xlabel="N", ylabel="bound on the boundary fraction",
                                             hline=eps, logx=True)}
    return report, ok, figures


def run_ocap(cfg, action):
    oset = parse_set(cfg.E, action.m)
    N = cfg.N or 1000
    n = _samples(cfg, "ocap")
    freq = window_frequencies(action, oset, N, cfg.seed, n)
    report = {"estimate": max(freq, default=0.0), "N": N, "samples": n, "seed": cfg.seed,
              "kind": "lower bound: max over sampled x of the window frequency",
              "set": oset.describe()}
    figures = {"frequencies": plotting.draw_histogram(freq, report["estimate"],
                                                      xlabel="window frequency", title=f"N = {N}")}
    return report, True, figures


def run_certify(cfg, action):
    E = parse_set(cfg.E, action.m)
    F = parse_set(cfg.F, action.m)
    eps = cfg.epsilon or 0.01
    marker = explicit_marker(cfg, action)
    config = tiling_config(cfg, marker, action.d) if marker is not None else None
    cert = certify_comparison(action, marker, config, E, F, eps, cfg.seed, _samples(cfg, "certify"))
    report = cert.as_dict()
    figures = {}
    for stage in cert.stages:
        if stage.name == "first_tower" and stage.checks:
            ratios = [4 * c["rank_a"] / max(c["rank_b"], 1) for c in stage.checks]
            figures["first-tower"] = plotting.draw_histogram(ratios, 1.0, xlabel="4 rank(a) / rank(b)",
                                                             title="first tower")
        if stage.name == "second_tower" and stage.checks:
            ratios = [4 * c["rank_cover"] / max(c["rank_F"], 1) for c in stage.checks]
            figures["second-tower"] = plotting.draw_histogram(ratios, 1.0,
                                                              xlabel="4 rank(cover) / rank(F)",
                                                              title="second tower")
    return report, cert.overall, figures


RUNNERS = {"marker": run_marker, "tiling": run_tiling, "tower": run_tower,
           "two-towers": run_two_towers, "lattice": run_lattice, "ocap": run_ocap,
           "certify": run_certify}


def _config_dict(cfg: ExperimentConfig) -> dict:
    return {f.name: (list(v) if isinstance(v, tuple) else v)
            for f in fields(cfg) if (v := getattr(cfg, f.name)) is not None and f.name != "out"}


def run(command: str, cfg: ExperimentConfig) -> tuple[int, list[Path]]:
    """Run one command; returns the exit code and the written files."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    action = build_action(cfg, command)
    report, ok, figures = RUNNERS[command](cfg, action)
    document = {"command": command, "version": __version__, "config": _config_dict(cfg),
                "pass": bool(ok), "report": report}
    validate(document, command)
    paths = write_artifacts(Path(cfg.out), command, document,
                            figures if cfg.format == "svg" else None)
    return (0 if ok else 1), paths


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zdtl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--d", type=int)
        p.add_argument("--m", type=int)
        p.add_argument("--alpha", help="row-major d*m rotation entries, comma separated")
        p.add_argument("--center", help="marker center, comma separated")
        p.add_argument("--r-inner", dest="r_inner", type=float)
        p.add_argument("--r-outer", dest="r_outer", type=float)
        p.add_argument("--H", type=float)
        p.add_argument("--s", type=float)
        p.add_argument("--N", type=int)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--r", type=float, help="boundary radius (lattice)")
        p.add_argument("--E", help="set: lo:hi or c1,c2@radius, joined by ';'")
        p.add_argument("--F", help="second set for certify")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("json", "svg"))
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        code, paths = run(args.command, cfg)
    except ConfigError as exc:
        print(f"zdtl {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return 2
    status = "pass" if code == 0 else "FAIL"
    print(f"zdtl {args.command}: {status} -> {paths[0]}")
    return code


if __name__ == "__main__":
    sys.exit(main())
