"""Command-line entry points.

Commands
--------
restore run <config>      full degrade-and-restore pipeline
restore lcurve <config>   L-curve sweep only, emits lcurve.csv
stability run <config>    perturbation experiment, emits stability.csv
phantom <name> <w> <h> <out.pgm>

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import (ConfigError, DefinitenessError, NoCornerError,
                     ParameterError, PgmError, StagnationError, SweepError,
                     TikitError)
from .grid import write_pgm
from .lcurve import corner as lcurve_corner, default_alpha_grid, lcurve_csv, sweep
from .operators import make_gaussian_blur, make_gradient
from . import penalizers as pen
from .pipeline import (add_noise, build_penalizer, load_config,
                       make_phantom, run_pipeline)
from .solvers import Problem
from .stability import geometric_schedule, run_stability_experiment, stability_csv

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_CONFIG_ERRORS = (ConfigError, ParameterError, PgmError, FileNotFoundError,
                  ValueError)
_NUMERICAL_ERRORS = (DefinitenessError, StagnationError, NoCornerError,
                     SweepError)


def _run_guarded(action) -> int:
    try:
        action()
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (*_NUMERICAL_ERRORS, TikitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


# ---------------------------------------------------------------------------

def _restore_run(args):
    cfg = load_config(args.config)
    metrics = run_pipeline(cfg)
    print(f"relative_l2_error = {metrics.relative_l2_error:.6g}")
    print(f"psnr_db = {metrics.psnr_db:.6g}")
    print(f"data_residual = {metrics.data_residual:.6g}")


def _restore_lcurve(args):
    cfg = load_config(args.config)
    from .pipeline import _load_input
    f_true, _ = _load_input(cfg)
    forward = make_gaussian_blur(f_true.width, f_true.height, cfg.kappa,
                                 cfg.blur_radius, cfg.pixel_scale)
    g_noisy = add_noise(forward.apply(f_true), cfg.noise_level, cfg.seed)
    base = build_penalizer(cfg, f_true)
    grid = default_alpha_grid(cfg.alpha_grid_count, cfg.alpha_grid_decades,
                              cfg.alpha_grid_max)
    curve = sweep(forward, g_noisy, base, grid)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "lcurve.csv").write_text(lcurve_csv(curve))
    alpha, index = lcurve_corner(curve)
    print(f"corner alpha = {alpha:.6g} (index {index})")


def restore_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="restore", description="Regularized image restoration pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the full pipeline")
    run.add_argument("config")
    run.set_defaults(func=_restore_run)
    lc = sub.add_parser("lcurve", help="L-curve sweep only")
    lc.add_argument("config")
    lc.set_defaults(func=_restore_lcurve)
    args = parser.parse_args(argv)
    return _run_guarded(lambda: args.func(args))


# ---------------------------------------------------------------------------

_STABILITY_KEYS = {
    "width": int, "height": int, "kappa": float, "blur_radius": int,
    "alpha": float, "count": int, "base_radius": float, "seed": int,
    "pixel_scale": float,
    "perturb_data": lambda v: v.lower() == "true",
    "perturb_weights": lambda v: v.lower() == "true",
    "perturb_operator": lambda v: v.lower() == "true",
    "output_dir": str,
}

_STABILITY_DEFAULTS = dict(width=6, height=6, kappa=6.0, blur_radius=3,
                           pixel_scale=1.0, alpha=0.1, count=10,
                           base_radius=0.01, seed=0,
                           perturb_data=True, perturb_weights=True,
                           perturb_operator=False, output_dir=".")


def parse_stability_config(text: str) -> dict:
    values = dict(_STABILITY_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _STABILITY_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _STABILITY_KEYS[key](val)
    return values


def _stability_run(args):
    cfg = parse_stability_config(Path(args.config).read_text())
    w, h = cfg["width"], cfg["height"]
    forward = make_gaussian_blur(w, h, cfg["kappa"], cfg["blur_radius"],
                                 cfg["pixel_scale"])
    truth = make_phantom("blocks", w, h)
    data = forward.apply(truth)
    penalizer = pen.squared_norm(make_gradient(w, h), weight=cfg["alpha"])
    problem = Problem(forward, data, penalizer)
    schedule = geometric_schedule(
        problem, cfg["count"], cfg["base_radius"], seed=cfg["seed"],
        perturb_data=cfg["perturb_data"], perturb_weights=cfg["perturb_weights"],
        perturb_operator=cfg["perturb_operator"])
    report = run_stability_experiment(problem, schedule)
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "stability.csv").write_text(stability_csv(report, schedule))
    print(f"k_estimate = {report.k_estimate:.6g}")
    print(f"passed = {report.passed}")
    if not report.passed:
        raise DefinitenessError("stability experiment failed its checks")


def stability_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stability", description="Perturbation stability experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a perturbation experiment")
    run.add_argument("config")
    run.set_defaults(func=_stability_run)
    args = parser.parse_args(argv)
    return _run_guarded(lambda: args.func(args))


# ---------------------------------------------------------------------------

def phantom_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phantom", description="Write a builtin test image as PGM.")
    parser.add_argument("name")
    parser.add_argument("width", type=int)
    parser.add_argument("height", type=int)
    parser.add_argument("output")
    args = parser.parse_args(argv)

    def action():
        img = make_phantom(args.name, args.width, args.height)
        Path(args.output).write_bytes(write_pgm(img))

    return _run_guarded(action)


def main(argv=None) -> int:
    """Single dispatcher: tikit {restore,stability,phantom} ..."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        print("usage: tikit {restore,stability,phantom} ...", file=sys.stderr)
        return EXIT_CONFIG
    head, rest = argv[0], argv[1:]
    if head == "restore":
        return restore_main(rest)
    if head == "stability":
        return stability_main(rest)
    if head == "phantom":
        return phantom_main(rest)
    print(f"unknown command {head!r}", file=sys.stderr)
    return EXIT_CONFIG
