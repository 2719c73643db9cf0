"""Command-line entry point.

Subcommands: optimize | grape | benchmark | certify | bloch. A YAML config
file is the file of record for an experiment; flags override file values,
and the MAGICARP_SEED environment variable overrides the config seed
(a --seed flag beats both). Exit codes: 0 success, 1 runtime failure,
2 invalid input, 3 certification negative.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys

import numpy as np
import yaml

from .bench import (
    BenchmarkSpec,
    run_campaign,
    tau_qsl,
    write_records_csv,
    write_scatter_files,
    write_summary_json,
)
from .grape import GrapeConfig, grape_optimize
from .propagation import (
    FLOAT_FMT,
    bloch_to_csv,
    bloch_trajectory,
    propagate,
    read_schedule_csv,
    write_schedule_csv,
)
from .qudit import nearest_neighbor_control_set, target_gate
from .shooting import (
    MagicarpConfig,
    ShootingContext,
    optimality_certificate,
    optimize,
    write_adjoint_json,
    write_report_json,
)

CERT_THRESHOLD = 1e-4

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2
EXIT_NOT_OPTIMAL = 3


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending field path."""


DEFAULT_CONFIG: dict = {
    "dim": 2,
    "target": "identity",
    "custom_target": None,
    "controls": "nearest_neighbor",
    "omega_max": 1.0,
    "magicarp": {
        "mode": "energy_optimal",
        "n_steps": 128,
        "max_iters": 500,
        "grad_step": 1e-6,
        "convergence_tol": 1e-7,
        "stall_tol": 1e-12,
        "init": "random_normal",
        "init_sigma": 1.0,
        "init_coeffs": None,
        "seed": 0,
    },
    "grape": {
        "n_steps": 64,
        "max_iters": 2000,
        "convergence_tol": 1e-7,
        "penalty_weight": 0.0,
        "stall_tol": 1e-12,
        "init": "random_normal",
        "init_sigma": 1.0,
        "init_schedule": None,
        "seed": 0,
    },
    "benchmark": {
        "dims": [2, 3, 4, 5, 6],
        "runs_per_dim": 300,
        "target": "qft",
        "base_seed": 0,
        "threshold": 1e-7,
    },
}

_SCHEMA = {
    "dim": (int, lambda v: v >= 2, "an integer >= 2"),
    "target": (str, lambda v: v in ("hadamard", "qft", "identity", "custom"), "one of hadamard|qft|identity|custom"),
    "custom_target": (list, None, "a row-major matrix of [re, im] pairs"),
    "controls": (str, lambda v: v == "nearest_neighbor", "'nearest_neighbor'"),
    "omega_max": (float, lambda v: v > 0, "a positive number"),
    "magicarp.mode": (str, lambda v: v in ("energy_optimal", "time_optimal_renormalized"), "energy_optimal|time_optimal_renormalized"),
    "magicarp.n_steps": (int, lambda v: v >= 1, "an integer >= 1"),
    "magicarp.max_iters": (int, lambda v: v >= 1, "an integer >= 1"),
    "magicarp.grad_step": (float, lambda v: v > 0, "a positive number"),
    "magicarp.convergence_tol": (float, lambda v: v > 0, "a positive number"),
    "magicarp.stall_tol": (float, lambda v: v > 0, "a positive number"),
    "magicarp.init": (str, lambda v: v in ("random_normal", "explicit"), "random_normal|explicit"),
    "magicarp.init_sigma": (float, lambda v: v > 0, "a positive number"),
    "magicarp.init_coeffs": (list, None, "a list of numbers"),
    "magicarp.seed": (int, lambda v: 0 <= v < 2**64, "a 64-bit unsigned integer"),
    "grape.n_steps": (int, lambda v: v >= 1, "an integer >= 1"),
    "grape.max_iters": (int, lambda v: v >= 1, "an integer >= 1"),
    "grape.convergence_tol": (float, lambda v: v > 0, "a positive number"),
    "grape.penalty_weight": (float, lambda v: v >= 0 and np.isfinite(v), "a finite number >= 0"),
    "grape.stall_tol": (float, lambda v: v > 0, "a positive number"),
    "grape.init": (str, lambda v: v in ("zeros", "random_normal", "explicit"), "zeros|random_normal|explicit"),
    "grape.init_sigma": (float, lambda v: v > 0, "a positive number"),
    "grape.init_schedule": (list, None, "a list of amplitude rows"),
    "grape.seed": (int, lambda v: 0 <= v < 2**64, "a 64-bit unsigned integer"),
    "benchmark.dims": (list, lambda v: len(v) >= 1 and all(isinstance(d, int) and d >= 2 for d in v), "a list of integers >= 2"),
    "benchmark.runs_per_dim": (int, lambda v: v >= 1, "an integer >= 1"),
    "benchmark.target": (str, lambda v: v in ("hadamard", "qft", "identity"), "one of hadamard|qft|identity"),
    "benchmark.base_seed": (int, lambda v: 0 <= v < 2**64, "a 64-bit unsigned integer"),
    "benchmark.threshold": (float, lambda v: v > 0, "a positive number"),
}


def _check_field(path: str, value):
    expected_type, predicate, description = _SCHEMA[path]
    if value is None:
        if path in ("custom_target", "magicarp.init_coeffs", "grape.init_schedule"):
            return None
        raise ConfigError(f"{path}: must not be null")
    if expected_type is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, expected_type) or isinstance(value, bool) and expected_type is int:
        raise ConfigError(f"{path}: expected {description}, got {value!r}")
    if predicate is not None and not predicate(value):
        raise ConfigError(f"{path}: expected {description}, got {value!r}")
    return value


def normalize_config(user: dict | None) -> dict:
    """Merge a raw config dict over the defaults and validate every field."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    user = user or {}
    if not isinstance(user, dict):
        raise ConfigError(f"config root: expected a mapping, got {type(user).__name__}")
    for key, value in user.items():
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(cfg[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a mapping, got {value!r}")
            for sub, subval in value.items():
                if sub not in cfg[key]:
                    raise ConfigError(f"unknown config key {key}.{sub!r}")
                cfg[key][sub] = subval
        else:
            cfg[key] = value
    for path in _SCHEMA:
        parts = path.split(".")
        node = cfg
        for p in parts[:-1]:
            node = node[p]
        node[parts[-1]] = _check_field(path, node[parts[-1]])
    if cfg["target"] == "custom" and cfg["custom_target"] is None:
        raise ConfigError("custom_target: required when target is 'custom'")
    return cfg


def load_config(path: str | None) -> dict:
    if path is None:
        return normalize_config({})
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
    return normalize_config(raw)


def config_to_yaml(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False)


def parse_matrix_literal(rows: list) -> np.ndarray:
    """Row-major list of [re, im] pairs -> complex matrix."""
    try:
        mat = np.array([[complex(e[0], e[1]) for e in row] for row in rows])
    except (TypeError, IndexError, ValueError):
        raise ConfigError("custom_target: entries must be [re, im] pairs") from None
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"custom_target: expected a square matrix, got shape {mat.shape}")
    return mat


def _build_problem(cfg: dict):
    d = cfg["dim"]
    controls = nearest_neighbor_control_set(d, cfg["omega_max"])
    custom = parse_matrix_literal(cfg["custom_target"]) if cfg["target"] == "custom" else None
    try:
        target = target_gate(cfg["target"], d, custom)
    except ValueError as exc:
        raise ConfigError(f"target: {exc}") from None
    return controls, target


def _magicarp_config(cfg: dict) -> MagicarpConfig:
    m = cfg["magicarp"]
    init_coeffs = tuple(float(v) for v in m["init_coeffs"]) if m["init_coeffs"] else None
    try:
        return MagicarpConfig(
            mode=m["mode"],
            n_steps=m["n_steps"],
            max_iters=m["max_iters"],
            grad_step=m["grad_step"],
            convergence_tol=m["convergence_tol"],
            stall_tol=m["stall_tol"],
            init=m["init"],
            init_sigma=m["init_sigma"],
            init_coeffs=init_coeffs,
            seed=m["seed"],
        )
    except ValueError as exc:
        raise ConfigError(f"magicarp: {exc}") from None


def _grape_config(cfg: dict) -> GrapeConfig:
    g = cfg["grape"]
    init_schedule = (
        tuple(tuple(float(v) for v in row) for row in g["init_schedule"])
        if g["init_schedule"]
        else None
    )
    try:
        return GrapeConfig(
            n_steps=g["n_steps"],
            max_iters=g["max_iters"],
            convergence_tol=g["convergence_tol"],
            penalty_weight=g["penalty_weight"],
            stall_tol=g["stall_tol"],
            init=g["init"],
            init_sigma=g["init_sigma"],
            init_schedule=init_schedule,
            seed=g["seed"],
        )
    except ValueError as exc:
        raise ConfigError(f"grape: {exc}") from None


def _apply_seed_overrides(cfg: dict, seed_flag: int | None) -> dict:
    seed = seed_flag
    if seed is None:
        env = os.environ.get("MAGICARP_SEED")
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise ConfigError(f"MAGICARP_SEED: expected an integer, got {env!r}") from None
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("seed: expected a 64-bit unsigned integer")
        cfg["magicarp"]["seed"] = seed
        cfg["grape"]["seed"] = seed
        cfg["benchmark"]["base_seed"] = seed
    return cfg


def _summary_line(report, d: int, omega_max: float) -> str:
    ratio = report.duration / tau_qsl(d, omega_max)
    return (
        f"infidelity={FLOAT_FMT % report.infidelity} "
        f"duration={FLOAT_FMT % report.duration} "
        f"duration_qsl={FLOAT_FMT % ratio}"
    )


def cmd_optimize(cfg: dict, out_dir: str) -> int:
    controls, target = _build_problem(cfg)
    context = ShootingContext(controls=controls, target=target, config=_magicarp_config(cfg))
    report = optimize(context)
    os.makedirs(out_dir, exist_ok=True)
    write_report_json(os.path.join(out_dir, "report.json"), report)
    write_schedule_csv(os.path.join(out_dir, "schedule.csv"), report.final_schedule)
    print(_summary_line(report, cfg["dim"], cfg["omega_max"]))
    return EXIT_OK if report.converged else EXIT_RUNTIME


def cmd_grape(cfg: dict, out_dir: str) -> int:
    controls, target = _build_problem(cfg)
    report = grape_optimize(target, controls, _grape_config(cfg))
    os.makedirs(out_dir, exist_ok=True)
    write_report_json(os.path.join(out_dir, "report.json"), report)
    write_schedule_csv(os.path.join(out_dir, "schedule.csv"), report.final_schedule)
    print(_summary_line(report, cfg["dim"], cfg["omega_max"]))
    return EXIT_OK if report.converged else EXIT_RUNTIME


def cmd_benchmark(cfg: dict, out_dir: str, workers: int) -> int:
    b = cfg["benchmark"]
    try:
        spec = BenchmarkSpec(
            dims=tuple(b["dims"]),
            runs_per_dim=b["runs_per_dim"],
            target=b["target"],
            magicarp=_magicarp_config(cfg),
            base_seed=b["base_seed"],
            omega_max=cfg["omega_max"],
        )
    except ValueError as exc:
        raise ConfigError(f"benchmark: {exc}") from None
    records = run_campaign(spec, workers=workers)
    os.makedirs(out_dir, exist_ok=True)
    write_records_csv(os.path.join(out_dir, "records.csv"), records)
    write_summary_json(os.path.join(out_dir, "summary.json"), records, b["threshold"])
    write_scatter_files(out_dir, records)
    for d in spec.dims:
        of_dim = [r for r in records if r.dim == d]
        converged = sum(r.converged for r in of_dim)
        print(f"dim={d} runs={len(of_dim)} converged={converged}")
    return EXIT_OK


def cmd_certify(schedule_path: str, cfg: dict, out_dir: str) -> int:
    schedule = read_schedule_csv(schedule_path)
    controls = nearest_neighbor_control_set(cfg["dim"], cfg["omega_max"])
    if schedule.n_controls != controls.n_controls:
        raise ConfigError(
            f"schedule has {schedule.n_controls} controls but dim={cfg['dim']} "
            f"implies {controls.n_controls}"
        )
    cert = optimality_certificate(schedule, controls)
    os.makedirs(out_dir, exist_ok=True)
    write_adjoint_json(os.path.join(out_dir, "g_fit.json"), cert.g_fit)
    coeffs = " ".join(FLOAT_FMT % c for c in cert.g_fit.coeffs)
    print(f"g_fit=[{coeffs}]")
    print(f"residual={FLOAT_FMT % cert.residual} excluded_steps={cert.n_excluded}")
    return EXIT_OK if cert.residual <= CERT_THRESHOLD else EXIT_NOT_OPTIMAL


def cmd_bloch(schedule_path: str, cfg: dict, out_dir: str) -> int:
    if cfg["dim"] != 2:
        raise ConfigError(f"bloch: only d=2 is supported, got dim={cfg['dim']}")
    schedule = read_schedule_csv(schedule_path)
    controls = nearest_neighbor_control_set(2, cfg["omega_max"])
    if schedule.n_controls != controls.n_controls:
        raise ConfigError(f"schedule has {schedule.n_controls} controls, expected 2")
    result = propagate(controls, schedule)
    trajectory = bloch_trajectory(result, schedule.dt)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "bloch.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(bloch_to_csv(trajectory))
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magicarp", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="override all config seeds")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--workers", type=int, help="parallel workers (benchmark only)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("optimize", parents=[common], help="run the shooting optimizer")
    sub.add_parser("grape", parents=[common], help="run the GRAPE baseline")
    sub.add_parser("benchmark", parents=[common], help="run a random-restart campaign")
    p_cert = sub.add_parser("certify", parents=[common], help="test a schedule for the constant-adjoint structure")
    p_cert.add_argument("schedule", help="schedule CSV to certify")
    p_bloch = sub.add_parser("bloch", parents=[common], help="export the Bloch trajectory of a d=2 schedule")
    p_bloch.add_argument("schedule", help="schedule CSV to propagate")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = _apply_seed_overrides(cfg, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        if args.command == "optimize":
            return cmd_optimize(cfg, args.out)
        if args.command == "grape":
            return cmd_grape(cfg, args.out)
        if args.command == "benchmark":
            workers = args.workers if args.workers else (os.cpu_count() or 1)
            if workers < 1:
                raise ConfigError("--workers must be >= 1")
            return cmd_benchmark(cfg, args.out, workers)
        if args.command == "certify":
            return cmd_certify(args.schedule, cfg, args.out)
        if args.command == "bloch":
            return cmd_bloch(args.schedule, cfg, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # malformed schedule CSV and similar input problems
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
