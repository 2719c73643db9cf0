"""Dimension-generic qudit linear algebra: generator bases, control sets, target gates.

Conventions used throughout the package:

* matrices are dense ``complex128`` numpy arrays, row-major;
* the matrix inner product is ``A . B = Re Tr(A^dag B)``;
* su(d) generators are the generalized Gell-Mann matrices normalized to
  ``Tr(G_i G_j) = 2 delta_ij``, so a traceless Hermitian ``g`` has
  coordinates ``c_i = Tr(G_i g) / 2`` and ``g = sum_i c_i G_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-12


def hermitize(m: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, (M + M^dag)/2."""
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + m.conj().T)


def unitarity_defect(u: np.ndarray) -> float:
    """Frobenius norm of U^dag U - 1."""
    u = np.asarray(u)
    d = u.shape[0]
    return float(np.linalg.norm(u.conj().T @ u - np.eye(d)))


def assert_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    defect = unitarity_defect(u)
    if defect > tol:
        raise ValueError(f"matrix is not unitary: defect {defect:.3e} > {tol:.1e}")
    if abs(abs(np.linalg.det(u)) - 1.0) > tol:
        raise ValueError("matrix determinant does not have unit modulus")
    return u


def trace_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Re Tr(A^dag B). Symmetric when both arguments are Hermitian."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a.conj() * b).real)


def generalized_pauli_pair(d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Pauli X/Y embedded on adjacent levels (k, k+1) of a d-level system.

    Returns (sigma_x_{k,k+1}, sigma_y_{k,k+1}); both are traceless with
    Frobenius norm sqrt(2). For d=2, k=0 these are the standard Paulis.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if not 0 <= k <= d - 2:
        raise IndexError(f"level index k={k} out of range for d={d} (need 0 <= k <= d-2)")
    sx = np.zeros((d, d), dtype=complex)
    sy = np.zeros((d, d), dtype=complex)
    sx[k, k + 1] = 1.0
    sx[k + 1, k] = 1.0
    sy[k, k + 1] = -1.0j
    sy[k + 1, k] = 1.0j
    return sx, sy


def gellmann_basis(d: int) -> np.ndarray:
    """The d^2 - 1 generalized Gell-Mann matrices, shape (d^2-1, d, d).

    Ordered as: for each pair j < k the symmetric then antisymmetric
    off-diagonal generator, followed by the d-1 diagonal generators.
    All are traceless and satisfy Tr(G_i G_j) = 2 delta_ij.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    gens = []
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = 1.0
            sym[k, j] = 1.0
            asym = np.zeros((d, d), dtype=complex)
            asym[j, k] = -1.0j
            asym[k, j] = 1.0j
            gens.append(sym)
            gens.append(asym)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        gens.append(np.diag(diag).astype(complex) * np.sqrt(2.0 / (l * (l + 1))))
    return np.stack(gens)


@dataclass(frozen=True)
class GeneratorBasis:
    """Orthonormal traceless Hermitian basis of su(d), Tr(G_i G_j) = 2 delta_ij."""

    dim: int
    generators: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, d: int) -> "GeneratorBasis":
        return cls(dim=d, generators=gellmann_basis(d))

    @property
    def size(self) -> int:
        return self.dim * self.dim - 1

    def decompose(self, m: np.ndarray) -> np.ndarray:
        """Coordinates of a traceless Hermitian matrix: c_i = Tr(G_i M)/2."""
        m = np.asarray(m, dtype=complex)
        return 0.5 * np.einsum("gij,ji->g", self.generators, m).real

    def reconstruct(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.size,):
            raise ValueError(f"expected {self.size} coefficients, got {coeffs.shape}")
        return np.einsum("g,gij->ij", coeffs, self.generators)


@dataclass(frozen=True)
class AdjointMatrix:
    """Traceless Hermitian shooting variable g, stored as d^2-1 real coordinates."""

    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.dim * self.dim - 1,):
            raise ValueError(
                f"expected {self.dim * self.dim - 1} coefficients for d={self.dim}, "
                f"got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("adjoint coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_matrix(cls, m: np.ndarray, basis: GeneratorBasis | None = None) -> "AdjointMatrix":
        m = hermitize(m)
        d = m.shape[0]
        m = m - np.trace(m) / d * np.eye(d)
        basis = basis or GeneratorBasis.create(d)
        return cls(dim=d, coeffs=basis.decompose(m))

    def to_matrix(self, basis: GeneratorBasis | None = None) -> np.ndarray:
        basis = basis or GeneratorBasis.create(self.dim)
        return basis.reconstruct(self.coeffs)


@dataclass(frozen=True)
class ControlSet:
    """Ordered traceless Hermitian control Hamiltonians plus the drive bound."""

    dim: int
    hamiltonians: np.ndarray = field(repr=False)  # (K, d, d)
    omega_max: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.hamiltonians, dtype=complex)
        if h.ndim != 3 or h.shape[0] < 1 or h.shape[1] != self.dim or h.shape[2] != self.dim:
            raise ValueError(f"expected control stack of shape (K, {self.dim}, {self.dim})")
        h = np.stack([hermitize(m) for m in h])
        for i, m in enumerate(h):
            if abs(np.trace(m)) > HERMITIAN_TOL:
                raise ValueError(f"control Hamiltonian {i} is not traceless")
        if not self.omega_max > 0:
            raise ValueError("omega_max must be positive")
        object.__setattr__(self, "hamiltonians", h)

    @property
    def n_controls(self) -> int:
        return self.hamiltonians.shape[0]


def nearest_neighbor_control_set(d: int, omega_max: float = 1.0) -> ControlSet:
    """The 2(d-1) generalized Pauli controls coupling adjacent levels.

    Order: (sx_{0,1}, sy_{0,1}, sx_{1,2}, sy_{1,2}, ...).
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    mats = []
    for k in range(d - 1):
        sx, sy = generalized_pauli_pair(d, k)
        mats.extend([sx, sy])
    return ControlSet(dim=d, hamiltonians=np.stack(mats), omega_max=omega_max)


def qft_gate(d: int) -> np.ndarray:
    """QFT(d) with entries exp(2 pi i jk / d) / sqrt(d); QFT(2) is the Hadamard."""
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def target_gate(name: str, d: int, custom_entries: np.ndarray | None = None) -> np.ndarray:
    """Construct a named target gate.

    ``hadamard`` means QFT(d) for d > 2 (they coincide at d=2); ``custom``
    requires a unitary ``custom_entries`` matrix.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    name = name.lower()
    if name == "identity":
        return np.eye(d, dtype=complex)
    if name in ("qft", "hadamard"):
        return qft_gate(d)
    if name == "custom":
        if custom_entries is None:
            raise ValueError("custom target requires an explicit matrix")
        u = np.asarray(custom_entries, dtype=complex)
        if u.shape != (d, d):
            raise ValueError(f"custom target has shape {u.shape}, expected ({d}, {d})")
        return assert_unitary(u)
    raise ValueError(f"unknown target gate {name!r}")
