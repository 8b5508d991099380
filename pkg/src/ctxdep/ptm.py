"""Operator bases, transfer matrices, generators, and spectral summaries.

Conventions used by every module in this package:

* Operator bases are Hermitian and orthogonal with ``Tr(P_n P_m) = d*delta_nm``
  where ``d`` is the Hilbert-space dimension.  Basis elements are Pauli
  strings in lexicographic order with the identity first: ``I, X, Y, Z`` for
  one qubit, ``II, IX, ..., ZZ`` for two.
* A linear map ``S`` on density operators is represented by the real
  ``d^2 x d^2`` transfer matrix ``S_nm = Tr[P_n S(P_m)] / d``.  Transfer
  matrices compose like the maps themselves, last-applied map leftmost.
* States vectorize as ``Tr(P_m rho) / sqrt(d)`` and measurement effects as
  ``Tr(P_n Pi) / sqrt(d)``, so that ``Tr(Pi S(rho)) = effect @ S @ state``.
* Generators (infinitesimal superoperators) live in the same representation;
  a duration-``t`` evolution is ``matexp(t * G)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "NonRealEntry",
    "NonHermitianInput",
    "NegativeRate",
    "OperatorBasis",
    "pauli_basis",
    "vectorize_state",
    "vectorize_effect",
    "unvectorize",
    "ptm_of_map",
    "hamiltonian_generator",
    "dissipator_generator",
    "matexp",
    "log_abs_det",
    "trace_powers",
    "choi_matrix",
    "spectrum_from_trace_powers",
]

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

_SINGLE_QUBIT_PAULIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)

# Lowering operator |0><1| (energy decay) and its adjoint (excitation).
LOWERING = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
RAISING = LOWERING.conj().T


class NonRealEntry(ValueError):
    """A transfer-matrix entry had a non-negligible imaginary part."""


class NonHermitianInput(ValueError):
    """A Hamiltonian argument was not Hermitian."""


class NegativeRate(ValueError):
    """A decoherence rate was negative."""


@dataclass(frozen=True)
class OperatorBasis:
    """Ordered Hermitian operator basis with ``Tr(P_n P_m) = d*delta_nm``.

    ``elements[0]`` is always the identity.
    """

    dim: int
    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.elements) != self.dim**2:
            raise ValueError(
                f"basis for dimension {self.dim} needs {self.dim ** 2} elements, "
                f"got {len(self.elements)}"
            )

    @property
    def size(self) -> int:
        return self.dim**2


def pauli_basis(num_qubits: int) -> OperatorBasis:
    """Tensor-product Pauli basis for ``num_qubits`` qubits.

    Elements come in lexicographic order over the strings (I, X, Y, Z) with
    the all-identity string first, normalized so ``Tr(P_n P_m) = d*delta_nm``
    with ``d = 2**num_qubits`` (bare Pauli strings already satisfy this).
    """
    if num_qubits < 1:
        raise ValueError("num_qubits must be >= 1")
    elements = []
    for combo in product(range(4), repeat=num_qubits):
        op = np.array([[1.0 + 0.0j]])
        for c in combo:
            op = np.kron(op, _SINGLE_QUBIT_PAULIS[c])
        elements.append(op)
    return OperatorBasis(dim=2**num_qubits, elements=tuple(elements))


def vectorize_state(rho: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Expansion coordinates ``Tr(P_m rho) / sqrt(d)`` of a density operator."""
    root_d = np.sqrt(basis.dim)
    return np.array([np.trace(p @ rho).real for p in basis.elements]) / root_d


def vectorize_effect(effect: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Expansion coordinates ``Tr(P_n Pi) / sqrt(d)`` of a POVM effect."""
    return vectorize_state(effect, basis)


def unvectorize(coords: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Inverse of :func:`vectorize_state`: rebuild the operator from coordinates."""
    root_d = np.sqrt(basis.dim)
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for c, p in zip(coords, basis.elements):
        out += (c / root_d) * p
    return out


def ptm_of_map(
    apply_map: Callable[[np.ndarray], np.ndarray],
    basis: OperatorBasis,
    imag_tol: float = 1e-9,
) -> np.ndarray:
    """Transfer matrix of a linear map given as a black-box action on operators.

    Entry ``(n, m)`` is ``Tr[P_n apply_map(P_m)] / d``.  For a
    Hermiticity-preserving map these are real; residual imaginary parts below
    ``imag_tol`` are discarded, anything larger raises :class:`NonRealEntry`.
    """
    size = basis.size
    out = np.empty((size, size))
    for m, p_m in enumerate(basis.elements):
        image = apply_map(p_m)
        for n, p_n in enumerate(basis.elements):
            value = np.trace(p_n @ image) / basis.dim
            if abs(value.imag) > imag_tol:
                raise NonRealEntry(
                    f"entry ({n}, {m}) has imaginary part {value.imag:.3e}; "
                    "the map does not preserve Hermiticity"
                )
            out[n, m] = value.real
    return out


def hamiltonian_generator(hamiltonian: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Transfer-matrix generator of ``rho -> -i[H, rho]``.

    The result is antisymmetric with an all-zero first row and column.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    if np.linalg.norm(h - h.conj().T) > 1e-12:
        raise NonHermitianInput("Hamiltonian must be Hermitian")
    return ptm_of_map(lambda rho: -1j * (h @ rho - rho @ h), basis)


def lindblad_dissipator_action(
    rho: np.ndarray, jumps: Sequence[tuple[float, np.ndarray]]
) -> np.ndarray:
    """Apply ``sum_j rate_j (A rho A+ - {A+A, rho}/2)`` for jump operators A."""
    out = np.zeros_like(rho)
    for rate, op in jumps:
        op_dag_op = op.conj().T @ op
        out = out + rate * (
            op @ rho @ op.conj().T - 0.5 * (op_dag_op @ rho + rho @ op_dag_op)
        )
    return out


def _embed(op: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    full = np.array([[1.0 + 0.0j]])
    for q in range(num_qubits):
        full = np.kron(full, op if q == qubit else PAULI_I)
    return full


def dissipator_generator(
    gamma1: float,
    gamma3: float,
    gamma_phi: float,
    num_qubits: int,
    basis: OperatorBasis | None = None,
) -> np.ndarray:
    """Local decay/excitation/dephasing dissipator, summed over all qubits.

    Jump operators per qubit: lowering at rate ``gamma1``, raising at rate
    ``gamma3``, and ``sigma_z`` at rate ``gamma_phi / 2``.  The dephasing
    prefactor is fixed so that x and y coherences contract at ``gamma_phi``
    each, which pins the single-qubit generator trace to
    ``-2*(gamma1 + gamma3 + gamma_phi)``.
    """
    for name, rate in (("gamma1", gamma1), ("gamma3", gamma3), ("gamma_phi", gamma_phi)):
        if rate < 0:
            raise NegativeRate(f"{name} = {rate} must be >= 0")
    if basis is None:
        basis = pauli_basis(num_qubits)
    jumps = []
    for q in range(num_qubits):
        jumps.append((gamma1, _embed(LOWERING, q, num_qubits)))
        jumps.append((gamma3, _embed(RAISING, q, num_qubits)))
        jumps.append((gamma_phi / 2.0, _embed(PAULI_Z, q, num_qubits)))
    return ptm_of_map(lambda rho: lindblad_dissipator_action(rho, jumps), basis)


def matexp(generator: np.ndarray) -> np.ndarray:
    """Matrix exponential (Pade scaling-and-squaring via scipy)."""
    return scipy.linalg.expm(np.asarray(generator, dtype=float))


def log_abs_det(matrix: np.ndarray) -> float:
    """``log|det M|`` as the sum of log-magnitudes of LU pivots.

    Never forms the determinant itself, so products of many contractive
    factors cannot underflow.  Returns ``-inf`` for an exactly singular
    matrix instead of raising; callers decide how to treat that.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, _ = scipy.linalg.lu_factor(m)
    pivots = np.abs(np.diag(lu))
    if np.any(pivots == 0.0):
        return float("-inf")
    return float(np.sum(np.log(pivots)))


def log_abs_det_many(matrices: np.ndarray) -> np.ndarray:
    """Batched ``log|det|`` over a stack of square matrices.

    Same LU-based semantics as :func:`log_abs_det` (singular -> ``-inf``);
    used in bootstrap loops where per-call overhead matters.
    """
    _, logdet = np.linalg.slogdet(np.asarray(matrices, dtype=float))
    return logdet


def trace_powers(matrix: np.ndarray, r_max: int | None = None) -> np.ndarray:
    """``[Tr(M), Tr(M^2), ..., Tr(M^r_max)]`` by repeated multiplication.

    Defaults to ``r_max = M.shape[0]``: for an n x n matrix the first n
    power traces determine the spectrum (Newton's identities), so two
    matrices are cospectral iff all these values agree.  No eigensolver is
    involved.
    """
    m = np.asarray(matrix, dtype=float)
    if r_max is None:
        r_max = m.shape[0]
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    out = np.empty(r_max)
    acc = m
    out[0] = np.trace(acc)
    for r in range(1, r_max):
        acc = acc @ m
        out[r] = np.trace(acc)
    return out


def choi_matrix(ptm: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Choi operator (trace normalized to S_00) of a transfer matrix.

    ``J = (1/d^2) sum_nm S_nm P_n (x) P_m^T``; the map is completely positive
    iff ``J`` is positive semidefinite.
    """
    d2 = basis.size
    out = np.zeros((basis.dim**2, basis.dim**2), dtype=complex)
    for n in range(d2):
        for m in range(d2):
            if ptm[n, m] != 0.0:
                out += ptm[n, m] * np.kron(basis.elements[n], basis.elements[m].T)
    return out / d2


def spectrum_from_trace_powers(matrix: np.ndarray) -> np.ndarray:
    """Diagnostic eigenvalue estimate from power traces alone.

    Builds the characteristic polynomial through Newton's identities and
    returns its companion-matrix roots, sorted by descending magnitude.
    Intended for reporting; equality of spectra is always decided on the
    trace powers themselves.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    powers = trace_powers(m, n)
    # e_k via Newton's identities: k*e_k = sum_{i=1..k} (-1)^(i-1) e_{k-i} p_i
    elem = np.zeros(n + 1)
    elem[0] = 1.0
    for k in range(1, n + 1):
        acc = 0.0
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * elem[k - i] * powers[i - 1]
        elem[k] = acc / k
    coeffs = [(-1) ** k * elem[k] for k in range(n + 1)]
    roots = np.roots(coeffs)
    return roots[np.argsort(-np.abs(roots))]
