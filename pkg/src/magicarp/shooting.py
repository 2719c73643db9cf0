"""Shooting optimizer: pulses built self-iteratively from an adjoint matrix.

The only optimization variable is the traceless Hermitian matrix g
(d^2 - 1 real coefficients). A pulse is constructed from g by interleaving
amplitude evaluation and propagation: the structural prediction at step n is

    v_k(n dt) = 1/2 Re Tr(U(n dt) g U(n dt)^dag H_k),

with U built from the amplitudes already fixed at steps 0..n-1. Two modes:

* ``energy_optimal``: amplitudes equal v directly (the stationarity
  condition for the quadratic running cost sum_k u_k^2);
* ``time_optimal_renormalized``: only the direction of v is kept and the
  envelope is pinned to its initial value c0 = ||v(0)||, so the pulse is
  constant-envelope: u(n) = c0 * v(n)/||v(n)||. Run at the hardware bound
  this is a maximally-driven pulse of duration c0/omega_max; its duration
  therefore varies with g through c0 alone. This renormalization is a
  heuristic: the exact structural equation holds only approximately, and
  ``optimality_certificate`` reports by how much.

Gradients over g are central finite differences; the feedback of the
amplitudes on the propagator makes analytic chain-rule gradients a separate
derivation that is out of scope here.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .optimizer import ProbeFailure, minimize_bfgs
from .propagation import PropagationResult, PulseSchedule, expm_ihermitian, propagate
from .qudit import AdjointMatrix, ControlSet, GeneratorBasis, assert_unitary

ENVELOPE_FLOOR = 1e-14

MODES = ("energy_optimal", "time_optimal_renormalized")


class DegenerateEnvelopeError(ProbeFailure):
    """Structural prediction vanished at some step in renormalized mode."""


class GradientProbeError(RuntimeError):
    """A finite-difference probe produced a non-finite objective."""

    def __init__(self, message: str, coeffs: np.ndarray):
        super().__init__(message)
        self.coeffs = coeffs


@dataclass(frozen=True)
class MagicarpConfig:
    mode: str = "energy_optimal"
    n_steps: int = 128
    max_iters: int = 500
    grad_step: float = 1e-6
    convergence_tol: float = 1e-7
    stall_tol: float = 1e-12
    init: str = "random_normal"  # "random_normal" | "explicit"
    init_sigma: float = 1.0
    init_coeffs: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not (self.grad_step > 0 and self.convergence_tol > 0 and self.stall_tol > 0):
            raise ValueError("grad_step and tolerances must be positive")
        if self.init not in ("random_normal", "explicit"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "explicit" and self.init_coeffs is None:
            raise ValueError("explicit init requires init_coeffs")


@dataclass(frozen=True)
class ShootingContext:
    """Problem instance: controls, target gate, and the run configuration."""

    controls: ControlSet
    target: np.ndarray
    config: MagicarpConfig
    basis: GeneratorBasis = field(init=False, repr=False)

    def __post_init__(self):
        target = assert_unitary(self.target)
        if target.shape[0] != self.controls.dim:
            raise ValueError(
                f"target dimension {target.shape[0]} != control dimension {self.controls.dim}"
            )
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "basis", GeneratorBasis.create(self.controls.dim))

    @property
    def n_params(self) -> int:
        return self.controls.dim ** 2 - 1


@dataclass
class OptimizationReport:
    final_g: AdjointMatrix | None
    final_schedule: PulseSchedule
    infidelity: float
    duration: float
    cost_trace: list[float]
    iterations: int
    converged: bool
    seed: int
    wall_time: float


def _structural_amplitudes(g_t: np.ndarray, hamiltonians: np.ndarray) -> np.ndarray:
    """v_k = 1/2 Re Tr(g_t H_k) for a batch of evolved adjoints (B, d, d)."""
    return 0.5 * np.einsum("bij,kji->bk", g_t, hamiltonians).real


def _construct_batch(
    coeff_batch: np.ndarray,
    controls: ControlSet,
    n_steps: int,
    mode: str,
    basis: GeneratorBasis,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Build pulses for B coefficient vectors at once.

    Returns (amplitudes (B, N, K), final unitaries (B, d, d), valid (B,)).
    Entries with a degenerate envelope are flagged invalid rather than
    raising, so vectorized line-search ladders can mask them.
    """
    coeff_batch = np.atleast_2d(np.asarray(coeff_batch, dtype=float))
    b = coeff_batch.shape[0]
    d = controls.dim
    k = controls.n_controls
    dt = 1.0 / n_steps
    hams = controls.hamiltonians
    renorm = mode == "time_optimal_renormalized"

    g = np.einsum("bm,mij->bij", coeff_batch, basis.generators)
    u_now = np.broadcast_to(np.eye(d, dtype=complex), (b, d, d)).copy()
    amps = np.empty((b, n_steps, k))
    valid = np.ones(b, dtype=bool)

    v = _structural_amplitudes(g, hams)
    c0 = np.linalg.norm(v, axis=1)
    if renorm:
        valid &= c0 >= ENVELOPE_FLOOR
    for n in range(n_steps):
        if n > 0:
            g_t = u_now @ g @ u_now.conj().swapaxes(-1, -2)
            v = _structural_amplitudes(g_t, hams)
        if renorm and n > 0:
            norms = np.linalg.norm(v, axis=1)
            valid &= norms >= ENVELOPE_FLOOR
            u = v * (c0 / np.where(norms < ENVELOPE_FLOOR, 1.0, norms))[:, None]
        else:
            u = v
        amps[:, n] = u
        step = expm_ihermitian(np.einsum("bk,kij->bij", u, hams), dt)
        u_now = step @ u_now
    return amps, u_now, valid


def pulses_from_adjoint(
    g: AdjointMatrix,
    controls: ControlSet,
    n_steps: int,
    mode: str = "energy_optimal",
    basis: GeneratorBasis | None = None,
) -> tuple[PulseSchedule, PropagationResult]:
    """Construct the pulse induced by g and propagate it."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if g.dim != controls.dim:
        raise ValueError("adjoint dimension does not match control set")
    basis = basis or GeneratorBasis.create(controls.dim)
    amps, _, valid = _construct_batch(g.coeffs[None, :], controls, n_steps, mode, basis)
    if not valid[0]:
        raise DegenerateEnvelopeError(
            "structural prediction has norm below "
            f"{ENVELOPE_FLOOR:g} at some step; pulse direction is undefined"
        )
    schedule = PulseSchedule.from_amplitudes(amps[0])
    return schedule, propagate(controls, schedule)


def batch_objective(coeff_batch: np.ndarray, context: ShootingContext) -> np.ndarray:
    """Normalized infidelity for a (B, d^2-1) stack of coefficient vectors.

    Degenerate-envelope entries come back as +inf.
    """
    cfg = context.config
    _, u_final, valid = _construct_batch(
        coeff_batch, context.controls, cfg.n_steps, cfg.mode, context.basis
    )
    d = context.controls.dim
    overlap = np.einsum("ij,bij->b", context.target.conj(), u_final)
    values = 1.0 - np.abs(overlap) ** 2 / d**2
    values[~valid] = np.inf
    return values


def objective(g_coeffs: np.ndarray, context: ShootingContext) -> float:
    """Normalized infidelity of the pulse induced by the given coefficients."""
    g_coeffs = np.asarray(g_coeffs, dtype=float)
    value = batch_objective(g_coeffs[None, :], context)[0]
    if not np.isfinite(value):
        raise DegenerateEnvelopeError(
            "structural prediction vanished; objective undefined at this point"
        )
    return float(value)


def gradient(
    g_coeffs: np.ndarray, context: ShootingContext, step: float | None = None
) -> np.ndarray:
    """Central-difference gradient, exactly 2(d^2-1) objective evaluations."""
    g_coeffs = np.asarray(g_coeffs, dtype=float)
    h = context.config.grad_step if step is None else step
    m = g_coeffs.size
    probes = np.vstack([g_coeffs + h * np.eye(m), g_coeffs - h * np.eye(m)])
    values = batch_objective(probes, context)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise GradientProbeError(
            f"objective not finite at finite-difference probe {idx}", probes[idx]
        )
    return (values[:m] - values[m:]) / (2.0 * h)


def initial_coeffs(config: MagicarpConfig, n_params: int) -> np.ndarray:
    if config.init == "explicit":
        coeffs = np.asarray(config.init_coeffs, dtype=float)
        if coeffs.shape != (n_params,):
            raise ValueError(f"init_coeffs must have length {n_params}")
        return coeffs
    rng = np.random.default_rng(config.seed)
    return config.init_sigma * rng.standard_normal(n_params)


def optimize(context: ShootingContext) -> OptimizationReport:
    """Quasi-Newton descent on infidelity over the d^2-1 adjoint coefficients."""
    cfg = context.config
    x0 = initial_coeffs(cfg, context.n_params)
    t0 = time.perf_counter()
    result = minimize_bfgs(
        lambda x: objective(x, context),
        lambda x: gradient(x, context),
        x0,
        tol=cfg.convergence_tol,
        max_iters=cfg.max_iters,
        stall_tol=cfg.stall_tol,
        batch_fun=lambda xs: batch_objective(xs, context),
    )
    wall = time.perf_counter() - t0
    final_g = AdjointMatrix(context.controls.dim, result.x)
    schedule, prop = pulses_from_adjoint(
        final_g, context.controls, cfg.n_steps, cfg.mode, context.basis
    )
    infidelity = result.trace[-1]
    return OptimizationReport(
        final_g=final_g,
        final_schedule=schedule,
        infidelity=infidelity,
        duration=prop.duration,
        cost_trace=result.trace,
        iterations=result.iterations,
        converged=infidelity <= cfg.convergence_tol,
        seed=cfg.seed,
        wall_time=wall,
    )


def restarted_optimize(context: ShootingContext, seeds: Sequence[int]) -> list[OptimizationReport]:
    """Independent restarts of ``optimize`` over the given seeds."""
    reports = []
    for seed in seeds:
        ctx = replace(context, config=replace(context.config, seed=int(seed)))
        reports.append(optimize(ctx))
    return reports


# -- optimality certificate ------------------------------------------------


@dataclass(frozen=True)
class CertificateResult:
    g_fit: AdjointMatrix
    residual: float
    n_excluded: int


def optimality_certificate(
    schedule: PulseSchedule, controls: ControlSet, basis: GeneratorBasis | None = None
) -> CertificateResult:
    """Least-squares fit of a constant adjoint to the normalized pulses.

    Solves min_g sum_{n,k} (u_k(n dt)/c(n dt) - 1/2 Re Tr(U g U^dag H_k))^2
    over the d^2-1 coefficients of g and returns the fit plus the RMS
    residual; a residual near zero certifies the constant-adjoint structure
    of a time-optimal pulse. Steps with vanishing envelope are excluded and
    counted.
    """
    basis = basis or GeneratorBasis.create(controls.dim)
    result = propagate(controls, schedule)
    env = result.envelope
    keep = env >= ENVELOPE_FLOOR
    if not keep.any():
        raise ValueError("schedule envelope is zero everywhere; nothing to certify")
    unitaries = result.unitaries[:-1][keep]
    targets = (schedule.amplitudes[keep] / env[keep][:, None]).ravel()
    evolved = np.einsum(
        "nab,mbc,ndc->nmad", unitaries, basis.generators, unitaries.conj()
    )
    design = 0.5 * np.einsum("nmab,kba->nkm", evolved, controls.hamiltonians).real
    design = design.reshape(-1, basis.size)
    coeffs, *_ = np.linalg.lstsq(design, targets, rcond=None)
    residual = float(
        np.linalg.norm(design @ coeffs - targets) / np.sqrt(targets.size)
    )
    return CertificateResult(
        g_fit=AdjointMatrix(controls.dim, coeffs),
        residual=residual,
        n_excluded=int((~keep).sum()),
    )


# -- serialization ----------------------------------------------------------


def adjoint_to_dict(g: AdjointMatrix) -> dict:
    return {"dim": g.dim, "basis": "gell-mann", "coeffs": [float(c) for c in g.coeffs]}


def adjoint_from_dict(data: dict) -> AdjointMatrix:
    if data.get("basis") != "gell-mann":
        raise ValueError(f"unsupported adjoint basis {data.get('basis')!r}")
    return AdjointMatrix(int(data["dim"]), np.asarray(data["coeffs"], dtype=float))


def report_to_dict(report: OptimizationReport) -> dict:
    """JSON-ready view of a report.

    ``wall_time`` is serialized as null so that identical runs produce
    byte-identical files; the in-memory report keeps the measured value.
    """
    schedule = report.final_schedule
    return {
        "final_g": adjoint_to_dict(report.final_g) if report.final_g is not None else None,
        "final_schedule": {
            "n_steps": schedule.n_steps,
            "n_controls": schedule.n_controls,
            "dt": schedule.dt,
            "amplitudes": [[float(v) for v in row] for row in schedule.amplitudes],
        },
        "infidelity": float(report.infidelity),
        "duration": float(report.duration),
        "cost_trace": [float(v) for v in report.cost_trace],
        "iterations": report.iterations,
        "converged": bool(report.converged),
        "seed": int(report.seed),
        "wall_time": None,
    }


def write_report_json(path, report: OptimizationReport) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def write_adjoint_json(path, g: AdjointMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(adjoint_to_dict(g), fh, indent=2)
        fh.write("\n")
