"""Seeded random-restart campaigns over system dimension.

Each (dim, run_index) cell gets its own seed derived by a fixed 64-bit mix,
so any single record can be reproduced without replaying the campaign, and
the record list is identical whether runs execute serially or in a process
pool.
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .propagation import FLOAT_FMT
from .qudit import nearest_neighbor_control_set, target_gate
from .shooting import MagicarpConfig, ShootingContext, optimize

_MASK64 = (1 << 64) - 1


def tau_qsl(d: int, omega_max: float = 1.0) -> float:
    """Speed-limit time pi/omega_max * (1 - 1/d) for the QFT(d) target
    under an unconstrained control set."""
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if not omega_max > 0:
        raise ValueError("omega_max must be positive")
    return math.pi / omega_max * (1.0 - 1.0 / d)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, dim: int, run_index: int) -> int:
    """Stable 64-bit mix of (base_seed, dim, run_index)."""
    h = base_seed & _MASK64
    for value in (dim, run_index):
        h = _splitmix64((h ^ _splitmix64(value & _MASK64)) & _MASK64)
    return h


@dataclass(frozen=True)
class BenchmarkSpec:
    dims: tuple[int, ...] = (2, 3, 4, 5, 6)
    runs_per_dim: int = 300
    target: str = "qft"
    control_set: str = "nearest_neighbor"
    magicarp: MagicarpConfig = MagicarpConfig()
    base_seed: int = 0
    omega_max: float = 1.0

    def __post_init__(self):
        if self.runs_per_dim < 1:
            raise ValueError("runs_per_dim must be >= 1")
        if any(d < 2 for d in self.dims):
            raise ValueError("all dimensions must be >= 2")
        if self.control_set != "nearest_neighbor":
            raise ValueError(f"unknown control set rule {self.control_set!r}")


@dataclass(frozen=True)
class BenchmarkRecord:
    dim: int
    run_index: int
    seed: int
    infidelity: float
    duration_omega: float
    duration_qsl: float
    iterations: int
    converged: bool


def _run_cell(args: tuple[BenchmarkSpec, int, int]) -> BenchmarkRecord:
    spec, dim, run_index = args
    seed = derive_seed(spec.base_seed, dim, run_index)
    try:
        controls = nearest_neighbor_control_set(dim, spec.omega_max)
        context = ShootingContext(
            controls=controls,
            target=target_gate(spec.target, dim),
            config=replace(spec.magicarp, seed=seed),
        )
        report = optimize(context)
        return BenchmarkRecord(
            dim=dim,
            run_index=run_index,
            seed=seed,
            infidelity=report.infidelity,
            duration_omega=report.duration,
            duration_qsl=report.duration / tau_qsl(dim, spec.omega_max),
            iterations=report.iterations,
            converged=report.converged,
        )
    except Exception:
        return BenchmarkRecord(
            dim=dim,
            run_index=run_index,
            seed=seed,
            infidelity=float("inf"),
            duration_omega=float("inf"),
            duration_qsl=float("inf"),
            iterations=0,
            converged=False,
        )


def run_campaign(spec: BenchmarkSpec, workers: int = 1) -> list[BenchmarkRecord]:
    """Run all (dim, run_index) cells; deterministic output order by cell."""
    cells = [(spec, d, i) for d in spec.dims for i in range(spec.runs_per_dim)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        records = [_run_cell(cell) for cell in cells]
    records.sort(key=lambda r: (r.dim, r.run_index))
    return records


def minimal_duration(
    records: list[BenchmarkRecord], dim: int, threshold: float = 1e-7
) -> float | None:
    """Min duration_qsl among records of that dim with infidelity <= threshold."""
    qualifying = [r.duration_qsl for r in records if r.dim == dim and r.infidelity <= threshold]
    return min(qualifying) if qualifying else None


def campaign_summary(records: list[BenchmarkRecord], threshold: float = 1e-7) -> dict:
    """Per-dimension minimal duration, success rate, and median duration."""
    dims = sorted({r.dim for r in records})
    summary = {}
    for d in dims:
        of_dim = [r for r in records if r.dim == d]
        converged = [r for r in of_dim if r.converged]
        durations = sorted(r.duration_qsl for r in converged)
        summary[str(d)] = {
            "runs": len(of_dim),
            "converged": len(converged),
            "success_rate": len(converged) / len(of_dim),
            "minimal_duration_qsl": minimal_duration(records, d, threshold),
            "median_duration_qsl": float(np.median(durations)) if durations else None,
        }
    return summary


# -- records CSV: dim,run_index,seed,infidelity,duration_omega,... ----------

_CSV_HEADER = "dim,run_index,seed,infidelity,duration_omega,duration_qsl,iterations,converged"


def records_to_csv(records: list[BenchmarkRecord]) -> str:
    buf = io.StringIO()
    buf.write(_CSV_HEADER + "\n")
    for r in records:
        buf.write(
            f"{r.dim},{r.run_index},{r.seed},{FLOAT_FMT % r.infidelity},"
            f"{FLOAT_FMT % r.duration_omega},{FLOAT_FMT % r.duration_qsl},"
            f"{r.iterations},{int(r.converged)}\n"
        )
    return buf.getvalue()


def records_from_csv(text: str) -> list[BenchmarkRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _CSV_HEADER:
        raise ValueError("bad benchmark records header")
    records = []
    for i, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        if len(parts) != 8:
            raise ValueError(f"records row {i} has {len(parts)} fields, expected 8")
        records.append(
            BenchmarkRecord(
                dim=int(parts[0]),
                run_index=int(parts[1]),
                seed=int(parts[2]),
                infidelity=float(parts[3]),
                duration_omega=float(parts[4]),
                duration_qsl=float(parts[5]),
                iterations=int(parts[6]),
                converged=bool(int(parts[7])),
            )
        )
    return records


def write_records_csv(path, records: list[BenchmarkRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(records_to_csv(records))


def read_records_csv(path) -> list[BenchmarkRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return records_from_csv(fh.read())


def write_summary_json(path, records: list[BenchmarkRecord], threshold: float = 1e-7) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(campaign_summary(records, threshold), fh, indent=2)
        fh.write("\n")


def write_scatter_files(out_dir, records: list[BenchmarkRecord]) -> list[str]:
    """One gnuplot-ready two-column file (duration_qsl, infidelity) per dim."""
    paths = []
    for d in sorted({r.dim for r in records}):
        path = os.path.join(out_dir, f"scatter_d{d}.dat")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# duration_qsl infidelity\n")
            for r in records:
                if r.dim == d:
                    fh.write(f"{FLOAT_FMT % r.duration_qsl} {FLOAT_FMT % r.infidelity}\n")
        paths.append(path)
    return paths
