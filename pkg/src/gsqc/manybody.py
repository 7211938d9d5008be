"""Idle-dot encoding of one qubit: one electron per row.

Each of the N+1 rows holds an electron that is either idle or on one of the
two logical dots, so the full space has 3**(N+1) occupation states. The
computational subspace (exactly one non-idle row) is 2(N+1)-dimensional and
reproduces the standard single-qubit Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .circuit import Circuit, CircuitError, check
from .hamiltonian import BudgetError, SparseHermitian, _deltas

IDLE, LOGICAL0, LOGICAL1 = 0, 1, 2
MAX_ROWS = 11


@dataclass(frozen=True)
class OccupationBasis:
    """Base-3 occupation strings; row 0 is the least significant digit."""

    rows: int

    @property
    def dim(self) -> int:
        return 3**self.rows

    def digits(self, index: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.rows):
            index, d = divmod(index, 3)
            out.append(d)
        return tuple(out)

    def index(self, digits) -> int:
        if len(digits) != self.rows:
            raise ValueError(f"need {self.rows} digits")
        return int(sum(int(d) * 3**i for i, d in enumerate(digits)))

    @cached_property
    def digit_table(self) -> np.ndarray:
        idx = np.arange(self.dim)
        return np.stack([(idx // 3**i) % 3 for i in range(self.rows)], axis=1)

    @cached_property
    def nonidle_count(self) -> np.ndarray:
        return np.count_nonzero(self.digit_table, axis=1)

    def meaningful_indices(self) -> np.ndarray:
        """Occupation index of standard state ``2*row + bit``, in standard order."""
        out = []
        for row in range(self.rows):
            for bit in (0, 1):
                d = [IDLE] * self.rows
                d[row] = LOGICAL0 + bit
                out.append(self.index(d))
        return np.array(out)

    def embed(self, standard: np.ndarray) -> np.ndarray:
        """Map a 2(N+1) standard-encoding vector into the occupation space."""
        standard = np.asarray(standard)
        if standard.shape != (2 * self.rows,):
            raise ValueError(f"need a vector of length {2 * self.rows}")
        out = np.zeros(self.dim, dtype=complex)
        out[self.meaningful_indices()] = standard
        return out


def _row_op(basis: OccupationBasis, ops: dict[int, np.ndarray]) -> sp.csr_matrix:
    # Kronecker order runs from the most significant row down to row 0.
    out = sp.identity(1, format="csr", dtype=complex)
    for row in reversed(range(basis.rows)):
        m = sp.csr_matrix(ops[row]) if row in ops else sp.identity(3, format="csr")
        out = sp.kron(out, m, format="csr")
    return out


def build_manybody_single_qubit(
    circuit: Circuit, delta: float | None = None, eps: float = 1.0
) -> tuple[SparseHermitian, OccupationBasis]:
    """Idle-dot Hamiltonian ``eps * [delta * sz(row 0) + sum_i h_i(U_i)]``.

    ``h_i`` counts non-idle occupation of rows ``i-1`` and ``i`` and moves
    the logical state from row ``i-1`` (which becomes idle) to row ``i``
    (which leaves idle), rotated by ``U_i``.
    """
    check(circuit)
    if circuit.qubits != 1:
        raise CircuitError(f"idle-dot encoding needs one qubit, got {circuit.qubits}")
    if circuit.rows > MAX_ROWS:
        raise BudgetError(f"{circuit.rows} rows exceed the limit of {MAX_ROWS} (dim 3**rows)")
    d = _deltas(circuit, delta)[0]
    basis = OccupationBasis(circuit.rows)
    us = circuit.unitaries(0)
    n_op = np.diag([0.0, 1.0, 1.0])
    sz = np.diag([0.0, 1.0, -1.0])
    total = d * _row_op(basis, {0: sz})
    for i, u in enumerate(us, start=1):
        lower = np.zeros((3, 3))  # |idle><a| for a logical
        lower[IDLE, LOGICAL0] = lower[IDLE, LOGICAL1] = 1.0
        upper = np.zeros((3, 3), dtype=complex)  # sum_b U_ba |b><idle|
        hop_terms = []
        for a in (0, 1):
            take = np.zeros((3, 3))
            take[IDLE, LOGICAL0 + a] = 1.0
            put = np.zeros((3, 3), dtype=complex)
            put[LOGICAL0:, IDLE] = u[:, a]
            hop_terms.append((take, put))
        total = total + _row_op(basis, {i - 1: n_op}) + _row_op(basis, {i: n_op})
        for take, put in hop_terms:
            hop = _row_op(basis, {i - 1: take, i: put})
            total = total - hop - hop.conj().T
    return SparseHermitian.from_matrix(eps * total, check_hermitian=False), basis


def meaningful_projection(H: SparseHermitian, basis: OccupationBasis) -> np.ndarray:
    """Restriction to the one-non-idle-row subspace in standard ordering."""
    idx = basis.meaningful_indices()
    return H.matrix[idx][:, idx].toarray()


def subspace_leakage(H: SparseHermitian, basis: OccupationBasis) -> float:
    """max |(1-P) H P| entry for P the meaningful-subspace projector."""
    idx = basis.meaningful_indices()
    outside = np.setdiff1d(np.arange(basis.dim), idx)
    block = H.matrix[outside][:, idx]
    return float(abs(block).max()) if block.nnz else 0.0


def outside_weight(state: np.ndarray, basis: OccupationBasis) -> float:
    """Norm of the part of ``state`` outside the meaningful subspace."""
    mask = np.ones(basis.dim, dtype=bool)
    mask[basis.meaningful_indices()] = False
    return float(np.linalg.norm(np.asarray(state)[mask]))


@dataclass(frozen=True)
class IdleDominance:
    idle: np.ndarray
    nonidle: np.ndarray

    @property
    def ratio(self) -> float:
        """Smallest per-row ratio of idle to non-idle probability."""
        with np.errstate(divide="ignore"):
            return float(np.min(self.idle / self.nonidle))

    @property
    def total_nonidle(self) -> float:
        return float(np.sum(self.nonidle))


def idle_dominance(state: np.ndarray, basis: OccupationBasis, tol: float = 1e-10) -> IdleDominance:
    state = np.asarray(state)
    norm = float(np.vdot(state, state).real)
    if abs(norm - 1) > tol:
        raise ValueError(f"state norm squared is {norm:.12g}; normalize first")
    prob = np.abs(state) ** 2
    nonidle = np.array([prob[basis.digit_table[:, i] != IDLE].sum() for i in range(basis.rows)])
    return IdleDominance(1.0 - nonidle, nonidle)
