"""Quantum optimal control via adjoint-matrix shooting, with a GRAPE baseline."""

from .bench import (
    BenchmarkRecord,
    BenchmarkSpec,
    campaign_summary,
    derive_seed,
    minimal_duration,
    run_campaign,
    tau_qsl,
)
from .grape import GrapeConfig, grape_gradient, grape_objective, grape_optimize
from .propagation import (
    PropagationResult,
    PulseSchedule,
    bloch_trajectory,
    gate_fidelity,
    normalized_infidelity,
    propagate,
    read_schedule_csv,
    step_unitary,
    target_trace_overlap,
    verify_adjoint_constancy,
    write_schedule_csv,
)
from .qudit import (
    AdjointMatrix,
    ControlSet,
    GeneratorBasis,
    generalized_pauli_pair,
    nearest_neighbor_control_set,
    target_gate,
    trace_inner,
)
from .shooting import (
    CertificateResult,
    DegenerateEnvelopeError,
    MagicarpConfig,
    OptimizationReport,
    ShootingContext,
    gradient,
    objective,
    optimality_certificate,
    optimize,
    pulses_from_adjoint,
    restarted_optimize,
)

__all__ = [
    "AdjointMatrix",
    "BenchmarkRecord",
    "BenchmarkSpec",
    "CertificateResult",
    "ControlSet",
    "DegenerateEnvelopeError",
    "GeneratorBasis",
    "GrapeConfig",
    "MagicarpConfig",
    "OptimizationReport",
    "PropagationResult",
    "PulseSchedule",
    "ShootingContext",
    "bloch_trajectory",
    "campaign_summary",
    "derive_seed",
    "gate_fidelity",
    "generalized_pauli_pair",
    "gradient",
    "grape_gradient",
    "grape_objective",
    "grape_optimize",
    "minimal_duration",
    "nearest_neighbor_control_set",
    "normalized_infidelity",
    "objective",
    "optimality_certificate",
    "optimize",
    "propagate",
    "pulses_from_adjoint",
    "read_schedule_csv",
    "restarted_optimize",
    "run_campaign",
    "step_unitary",
    "target_gate",
    "target_trace_overlap",
    "tau_qsl",
    "trace_inner",
    "verify_adjoint_constancy",
    "write_schedule_csv",
]

__version__ = "0.1.0"
