"""Ground-state computer Hamiltonians as sparse Hermitian operators.

Every qubit is one electron moving over ``rows`` rows of two dots each
(logical 0 and logical 1), so a qubit has ``2 * rows`` local states with
local index ``2 * row + bit``. Multi-qubit operators are sums of products of
per-qubit local operators, embedded with sparse Kronecker products; qubit 0
is the slowest index of the flat basis.

All energies are in units of ``eps``.
"""

from __future__ import annotations

import functools
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .circuit import (
    CNOT,
    Boost,
    Circuit,
    CircuitError,
    GateLibrary,
    Projection,
    SingleQubit,
    check,
)

DEFAULT_DELTA = 1e-3
DEFAULT_MAX_DIM = 14**5
SIGMA_Z = np.diag([1.0, -1.0])
P0 = np.diag([1.0, 0.0])


class BudgetError(RuntimeError):
    """Requested Hilbert space exceeds the configured dimension budget."""


class ProfileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# operator container


class SparseHermitian:
    """Hermitian operator stored as its upper triangle in coordinate form.

    ``rows[n] <= cols[n]`` for every stored entry; the strictly lower part is
    implied by conjugation. ``apply`` multiplies a vector (or a block of
    column vectors) through a cached CSR copy of the full matrix, which is
    read-only and safe to share between threads.
    """

    def __init__(self, dim: int, rows, cols, vals):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals)
        if rows.shape != cols.shape or rows.shape != vals.shape:
            raise ValueError("rows, cols and vals must have equal length")
        if np.any(rows > cols):
            raise ValueError("entries must lie in the upper triangle")
        if rows.size and (rows.min() < 0 or cols.max() >= dim):
            raise ValueError("entry index out of range")
        diag = rows == cols
        if np.iscomplexobj(vals):
            if np.any(vals[diag].imag != 0):
                raise ValueError("diagonal entries of a Hermitian operator must be real")
            if not np.any(vals.imag):
                vals = vals.real
        self.dim = int(dim)
        order = np.lexsort((cols, rows))
        self.rows, self.cols, self.vals = rows[order], cols[order], vals[order]

    @classmethod
    def from_matrix(cls, m, check_hermitian: bool = True, atol: float = 0.0) -> "SparseHermitian":
        m = sp.csr_matrix(m)
        if m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        if check_hermitian:
            diff = abs(m - m.conj().T)
            if diff.nnz and diff.max() > atol:
                raise ValueError(f"matrix is not Hermitian (max deviation {diff.max():.3g})")
        up = sp.triu(m).tocoo()
        keep = up.data != 0
        data = up.data[keep]
        d = up.row[keep] == up.col[keep]
        if np.iscomplexobj(data):
            data = data.copy()
            data[d] = data[d].real
        return cls(m.shape[0], up.row[keep], up.col[keep], data)

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @property
    def dtype(self):
        return self.vals.dtype

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.vals)

    @functools.cached_property
    def matrix(self) -> sp.csr_matrix:
        n = self.dim
        up = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(n, n))
        off = self.rows != self.cols
        low = sp.coo_matrix(
            (np.conj(self.vals[off]), (self.cols[off], self.rows[off])), shape=(n, n)
        )
        full = (up + low).tocsr()
        full.sort_indices()
        return full

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[0] != self.dim:
            raise ValueError(f"vector of length {v.shape[0]} does not match dimension {self.dim}")
        return self.matrix @ v

    __matmul__ = apply

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def dot_check(self, rng: np.random.Generator, trials: int = 3) -> float:
        """Largest |<w,Hv> - conj(<v,Hw>)| over random complex probes."""
        worst = 0.0
        for _ in range(trials):
            v = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
            w = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
            a = np.vdot(w, self.apply(v))
            b = np.vdot(v, self.apply(w))
            worst = max(worst, abs(a - np.conj(b)) / max(1.0, abs(a)))
        return worst

    def __add__(self, other: "SparseHermitian") -> "SparseHermitian":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return SparseHermitian.from_matrix(self.matrix + other.matrix, check_hermitian=False)

    def restrict(self, indices: np.ndarray) -> "SparseHermitian":
        """Principal submatrix on ``indices`` (in the given order)."""
        idx = np.asarray(indices, dtype=np.int64)
        sub = self.matrix[idx][:, idx]
        return SparseHermitian.from_matrix(sub, check_hermitian=False)

    def components(self) -> tuple[int, np.ndarray]:
        """Connected components of the coupling graph (exact invariant blocks)."""
        pattern = sp.csr_matrix(
            (np.ones(self.nnz, dtype=np.int8), (self.rows, self.cols)), shape=(self.dim, self.dim)
        )
        return connected_components(pattern, directed=False)

    def component_of(self, index: int) -> np.ndarray:
        _, labels = self.components()
        return np.flatnonzero(labels == labels[index])

    # -- text dump ---------------------------------------------------------

    def dump(self, fh) -> None:
        """Write ``dim <d>`` then ``i j re im`` per stored entry, row-major."""
        fh.write(f"dim {self.dim}\n")
        vals = self.vals.astype(complex)
        for i, j, z in zip(self.rows.tolist(), self.cols.tolist(), vals.tolist()):
            fh.write(f"{i} {j} {z.real!r} {z.imag!r}\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, fh) -> "SparseHermitian":
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "dim":
            raise ValueError("expected 'dim <d>' header")
        rows, cols, vals = [], [], []
        for line in fh:
            if not line.strip():
                continue
            i, j, re_, im = line.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(complex(float(re_), float(im)))
        return cls(int(header[1]), rows, cols, np.array(vals, dtype=complex))


# ---------------------------------------------------------------------------
# basis layouts


@dataclass(frozen=True)
class BasisLayout:
    """Flat index of (row, bit) per qubit; qubit 0 varies slowest."""

    qubits: int
    rows: int

    @property
    def local_dim(self) -> int:
        return 2 * self.rows

    @property
    def dim(self) -> int:
        return self.local_dim**self.qubits

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.local_dim,) * self.qubits

    def local_index(self, row: int, bit: int) -> int:
        if not (0 <= row < self.rows and bit in (0, 1)):
            raise IndexError(f"no local state (row={row}, bit={bit})")
        return 2 * row + bit

    def index_of(self, rows: Sequence[int], bits: Sequence[int]) -> int:
        if len(rows) != self.qubits or len(bits) != self.qubits:
            raise ValueError("need one row and one bit per qubit")
        idx = 0
        for r, b in zip(rows, bits):
            idx = idx * self.local_dim + self.local_index(r, b)
        return idx

    def state_of(self, index: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        if not 0 <= index < self.dim:
            raise IndexError(index)
        local = np.unravel_index(index, self.shape)
        return tuple(int(x) // 2 for x in local), tuple(int(x) % 2 for x in local)

    def as_tensor(self, state: np.ndarray) -> np.ndarray:
        """View a state as an array indexed ``[row_0, bit_0, row_1, bit_1, ...]``."""
        return np.asarray(state).reshape((self.rows, 2) * self.qubits)

    def row_block(self, state: np.ndarray, rows: Sequence[int] | int) -> np.ndarray:
        """Logical amplitudes (length ``2**q``) with qubit ``k`` on ``rows[k]``."""
        if isinstance(rows, (int, np.integer)):
            rows = (int(rows),) * self.qubits
        t = self.as_tensor(state)
        sel = t[tuple(x for r in rows for x in (r, slice(None)))]
        return np.asarray(sel).reshape(-1)


@dataclass(frozen=True)
class TeleportLayout:
    basis: BasisLayout
    n_gates: int
    measured: tuple[int, ...]
    output_qubit: int

    @property
    def final_row(self) -> int:
        return self.basis.rows - 1

    def conditional_block(self, state: np.ndarray) -> np.ndarray:
        """Output-qubit amplitudes with every electron on the final row and the
        measured qubits in logical 0 (unnormalized)."""
        t = self.basis.as_tensor(state)
        f = self.final_row
        sel = []
        for k in range(self.basis.qubits):
            sel += [f, slice(None) if k == self.output_qubit else 0]
        return np.asarray(t[tuple(sel)]).reshape(2)

    def success_probability(self, state: np.ndarray) -> float:
        norm2 = float(np.vdot(state, state).real)
        return float(np.sum(np.abs(self.conditional_block(state)) ** 2)) / norm2

    def start_index(self, bits: Sequence[int] | None = None) -> int:
        bits = bits or (0,) * self.basis.qubits
        return self.basis.index_of((0,) * self.basis.qubits, bits)


@dataclass(frozen=True)
class ChainProfile:
    """Onsite potentials ``v`` (N+1), hoppings ``t`` (N) and target amplitudes
    ``lam`` (N+1) of a tailored chain, in units of eps."""

    v: tuple[float, ...]
    t: tuple[float, ...]
    lam: tuple[float, ...]

    @property
    def n_steps(self) -> int:
        return len(self.t)

    def recurrence_residual(self) -> float:
        v, t, lam = map(np.asarray, (self.v, self.t, self.lam))
        n = len(t)
        res = [v[0] * lam[0] - t[0] * lam[1], -t[n - 1] * lam[n - 1] + v[n] * lam[n]]
        for i in range(1, n):
            res.append(-t[i - 1] * lam[i - 1] + 2 * v[i] * lam[i] - t[i] * lam[i + 1])
        return float(np.max(np.abs(res)))

    def check(self, tol: float = 1e-12) -> "ChainProfile":
        if len(self.v) != len(self.lam) or len(self.t) != len(self.v) - 1 or not self.t:
            raise ProfileError("need N+1 potentials, N hoppings and N+1 amplitudes with N >= 1")
        if max(map(abs, self.v)) > 1 + tol or max(map(abs, self.t)) > 1 + tol:
            raise ProfileError("potentials and hoppings must satisfy |v|, |t| <= 1")
        if min(self.lam) <= 0:
            raise ProfileError("amplitudes must be positive")
        if self.recurrence_residual() > tol:
            raise ProfileError(f"recurrences violated by {self.recurrence_residual():.3g}")
        return self


def profile_from_lambda(lam: Iterable[float], min_scale: float = 1e-6) -> ChainProfile:
    """Potentials and a common hopping whose chain has ``lam`` in its kernel.

    ``lam`` is renormalized to sum(lam**2) = N+1. All hoppings share one scale
    ``s``; potentials follow from the three-term recurrences and ``s`` is the
    largest value keeping every |v_i| <= 1.
    """
    lam = np.asarray(list(lam), dtype=float)
    if lam.ndim != 1 or lam.size < 2:
        raise ProfileError("need at least two amplitudes (N >= 1)")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise ProfileError("non-positive amplitude; every lambda_i must be > 0")
    n = lam.size - 1
    lam = lam * math.sqrt((n + 1) / float(np.sum(lam**2)))
    ratio = np.empty(n + 1)
    ratio[0] = lam[1] / lam[0]
    ratio[n] = lam[n - 1] / lam[n]
    ratio[1:n] = (lam[:-2] + lam[2:]) / (2 * lam[1:-1])
    s = min(1.0, 1.0 / float(np.max(np.abs(ratio))))
    if s < min_scale:
        raise ProfileError(f"degenerate profile: hopping scale {s:.3g} below {min_scale}")
    v = s * ratio
    return ChainProfile(tuple(v.tolist()), (s,) * n, tuple(lam.tolist())).check()


def uniform_profile(n_steps: int) -> ChainProfile:
    return profile_from_lambda(np.ones(n_steps + 1))


# ---------------------------------------------------------------------------
# local operators on one qubit with R rows


def _blk(row: int) -> slice:
    return slice(2 * row, 2 * row + 2)


def _link(R: int, i: int, hop: np.ndarray, pre=np.eye(2), post=np.eye(2)) -> np.ndarray:
    """``Cd_{i-1} pre C_{i-1} + Cd_i post C_i - (Cd_i hop C_{i-1} + h.c.)``."""
    m = np.zeros((2 * R, 2 * R), dtype=complex)
    m[_blk(i - 1), _blk(i - 1)] += pre
    m[_blk(i), _blk(i)] += post
    m[_blk(i), _blk(i - 1)] -= hop
    m[_blk(i - 1), _blk(i)] -= np.conj(hop).T
    return m


def gate_term(R: int, i: int, u: np.ndarray) -> np.ndarray:
    return _link(R, i, np.asarray(u, dtype=complex))


def projection_term(R: int, i: int, lam: float) -> np.ndarray:
    return _link(R, i, P0 / lam, pre=P0, post=P0 / lam**2)


def boost_term(R: int, i: int, lam: float) -> np.ndarray:
    return _link(R, i, np.eye(2) / lam, post=np.eye(2) / lam**2)


def occupation(R: int, row: int, bit: int | None = None) -> np.ndarray:
    m = np.zeros((2 * R, 2 * R))
    if bit is None:
        m[_blk(row), _blk(row)] = np.eye(2)
    else:
        m[2 * row + bit, 2 * row + bit] = 1.0
    return m


def bias_term(R: int, delta: float) -> np.ndarray:
    m = np.zeros((2 * R, 2 * R))
    m[_blk(0), _blk(0)] = delta * SIGMA_Z
    return m


def _embed(factors: dict[int, np.ndarray], q: int, d: int) -> sp.csr_matrix:
    out = None
    pending_id = 1
    for k in range(q):
        if k in factors:
            parts = []
            if pending_id > 1:
                parts.append(sp.identity(pending_id, format="csr"))
            parts.append(sp.csr_matrix(factors[k]))
            for part in parts:
                out = part if out is None else sp.kron(out, part, format="csr")
            pending_id = 1
        else:
            pending_id *= d
    if out is None:
        out = sp.identity(pending_id, format="csr")
    elif pending_id > 1:
        out = sp.kron(out, sp.identity(pending_id, format="csr"), format="csr")
    return out


class _Assembler:
    """Collects single-qubit and two-qubit product terms, then embeds them."""

    def __init__(self, q: int, rows: int):
        self.q, self.R = q, rows
        self.local = [np.zeros((2 * rows, 2 * rows), dtype=complex) for _ in range(q)]
        self.pairs: list[tuple[int, np.ndarray, int, np.ndarray]] = []

    def add_pair(self, a: int, op_a: np.ndarray, b: int, op_b: np.ndarray):
        self.pairs.append((a, op_a, b, op_b))

    def build(self, scale: float) -> SparseHermitian:
        d = 2 * self.R
        total = None
        for k, m in enumerate(self.local):
            if np.any(m):
                term = _embed({k: m}, self.q, d)
                total = term if total is None else total + term
        for a, oa, b, ob in self.pairs:
            term = _embed({a: oa, b: ob}, self.q, d)
            total = term if total is None else total + term
        if total is None:
            total = sp.csr_matrix((d**self.q, d**self.q))
        return SparseHermitian.from_matrix(scale * total, check_hermitian=False)


def _cnot_terms(asm: _Assembler, j: int, control: int, target: int) -> None:
    R = asm.R
    I2, X = GateLibrary.I.matrix, GateLibrary.NOT.matrix
    asm.add_pair(control, occupation(R, j - 1), target, occupation(R, j))
    asm.add_pair(control, gate_term(R, j, I2), target, occupation(R, j - 1))
    asm.add_pair(control, occupation(R, j, 0), target, gate_term(R, j, I2))
    asm.add_pair(control, occupation(R, j, 1), target, gate_term(R, j, X))


def input_deltas(circuit: Circuit, magnitude: float = DEFAULT_DELTA) -> tuple[float, ...]:
    """Bias per qubit: input 1 selects delta > 0, input 0 selects delta < 0."""
    return tuple(magnitude if b else -magnitude for b in circuit.inputs)


def _deltas(circuit: Circuit, delta) -> tuple[float, ...]:
    if delta is None:
        return input_deltas(circuit)
    if np.isscalar(delta):
        return (float(delta),) * circuit.qubits
    out = tuple(float(x) for x in delta)
    if len(out) != circuit.qubits:
        raise ValueError(f"need {circuit.qubits} bias values, got {len(out)}")
    return out


def _check_budget(dim: int, max_dim: int | None):
    if max_dim is not None and dim > max_dim:
        raise BudgetError(f"Hilbert space dimension {dim} exceeds budget {max_dim}")


def build_multi_qubit(
    circuit: Circuit,
    delta=None,
    eps: float = 1.0,
    max_dim: int | None = DEFAULT_MAX_DIM,
) -> tuple[SparseHermitian, BasisLayout]:
    """Standard-encoding Hamiltonian of an arbitrary circuit.

    ``delta`` is a scalar, one value per qubit, or ``None`` for the default
    magnitude with signs taken from the circuit inputs.

    A projection at step ``j`` has no logical-1 dot on row ``j``: that
    orbital is given an onsite energy ``eps`` so it cannot host zero modes.
    """
    check(circuit)
    deltas = _deltas(circuit, delta)
    layout = BasisLayout(circuit.qubits, circuit.rows)
    _check_budget(layout.dim, max_dim)
    R = layout.rows
    asm = _Assembler(circuit.qubits, R)
    for k, dk in enumerate(deltas):
        if dk:
            asm.local[k] += bias_term(R, dk)
    for j, step in enumerate(circuit.steps, start=1):
        for k, gate in enumerate(step):
            if isinstance(gate, SingleQubit):
                asm.local[k] += gate_term(R, j, gate.matrix)
            elif isinstance(gate, Projection):
                asm.local[k] += projection_term(R, j, gate.strength)
                asm.local[k] += occupation(R, j, 1)
            elif isinstance(gate, Boost):
                asm.local[k] += boost_term(R, j, gate.strength)
            elif isinstance(gate, CNOT):
                if j == 0:
                    raise CircuitError("CNOT needs a preceding row")
                if k == gate.control:
                    _cnot_terms(asm, j, gate.control, gate.target)
    return asm.build(eps), layout


def build_single_qubit(
    circuit: Circuit, delta: float | None = None, eps: float = 1.0
) -> tuple[SparseHermitian, BasisLayout]:
    """Block-tridiagonal single-qubit Hamiltonian: diagonal blocks
    ``I + delta*sz, 2I, ..., 2I, I`` and off-diagonal blocks ``-U_i``."""
    if circuit.qubits != 1:
        raise CircuitError(f"single-qubit builder got {circuit.qubits} qubits")
    d = _deltas(circuit, delta)[0]
    if not abs(d) < 1:
        raise ValueError("|delta| must be below 1")
    for j, step in enumerate(circuit.steps, start=1):
        if not isinstance(step[0], SingleQubit):
            raise CircuitError(f"step {j} is not a unitary gate")
    return build_multi_qubit(circuit, d, eps, max_dim=None)


def build_nonunitary_chain(
    circuit: Circuit, profile: ChainProfile, delta: float | None = None, eps: float = 1.0
) -> tuple[SparseHermitian, BasisLayout]:
    """Tailored chain: blocks ``v0(I + delta*sz), 2 v_i I, ..., v_N I`` on the
    diagonal and ``-t_i U_i`` below it."""
    if circuit.qubits != 1:
        raise CircuitError(f"non-unitary chain needs one qubit, got {circuit.qubits}")
    if profile.n_steps != circuit.n_steps:
        raise ProfileError(
            f"profile has {profile.n_steps} hoppings but circuit has {circuit.n_steps} steps"
        )
    profile.check()
    d = _deltas(circuit, delta)[0]
    us = circuit.unitaries(0)
    R = circuit.rows
    m = np.zeros((2 * R, 2 * R), dtype=complex)
    n = R - 1
    for i in range(R):
        w = profile.v[i] * (1.0 if i in (0, n) else 2.0)
        m[_blk(i), _blk(i)] = w * np.eye(2)
    m[_blk(0), _blk(0)] += profile.v[0] * d * SIGMA_Z
    for i in range(1, R):
        hop = profile.t[i - 1] * us[i - 1]
        m[_blk(i), _blk(i - 1)] = -hop
        m[_blk(i - 1), _blk(i)] = -np.conj(hop).T
    return SparseHermitian.from_matrix(eps * m, check_hermitian=False), BasisLayout(1, R)


# ---------------------------------------------------------------------------
# teleportation machine


def teleport_circuit(unitaries: Sequence[np.ndarray], lam: float) -> Circuit:
    """Seven-row circuit applying ``U_N ... U_1`` to |0> by teleportation.

    Qubit 0 carries ``U_1|0>``; qubits ``(2k-1, 2k)`` form the EPR pair that
    applies ``U_{k+1}``. Rows: Hadamards, pair CNOTs, gates, Bell CNOTs
    (pair qubit controlling its left neighbour), Hadamards, then projection on
    the measured qubits and a boost on the output qubit.
    """
    n = len(unitaries)
    if n < 2:
        raise CircuitError("teleportation needs at least two gates")
    if not lam >= 1.0:
        raise CircuitError(f"projection strength must be >= 1, got {lam}")
    q = 2 * n - 1
    I, W = GateLibrary.I, GateLibrary.W
    us = [SingleQubit(u) for u in unitaries]

    hadamards = tuple(W if k % 2 else I for k in range(q))
    pair = [I] * q
    for k in range(1, q, 2):
        pair[k] = pair[k + 1] = CNOT(k, k + 1)
    gates = [I] * q
    gates[0] = us[0]
    for k in range(2, q, 2):
        gates[k] = us[k // 2]
    bell = [I] * q
    for k in range(1, q, 2):
        bell[k] = bell[k - 1] = CNOT(k, k - 1)
    final = tuple(Projection(lam) for _ in range(q - 1)) + (Boost(lam),)
    steps = (hadamards, tuple(pair), tuple(gates), tuple(bell), hadamards, final)
    return check(Circuit(q, steps, (0,) * q))


def build_teleport(
    unitaries: Sequence[np.ndarray],
    lam: float,
    delta=-DEFAULT_DELTA,
    eps: float = 1.0,
    max_dim: int | None = DEFAULT_MAX_DIM,
) -> tuple[SparseHermitian, BasisLayout, TeleportLayout]:
    circuit = teleport_circuit(unitaries, lam)
    dim = BasisLayout(circuit.qubits, circuit.rows).dim
    _check_budget(dim, max_dim)
    H, layout = build_multi_qubit(circuit, delta, eps, max_dim=max_dim)
    q = circuit.qubits
    tl = TeleportLayout(layout, len(unitaries), tuple(range(q - 1)), q - 1)
    return H, layout, tl


def input_pin(layout: BasisLayout, bits: Sequence[int], strength: float = 1.0) -> SparseHermitian:
    """Onsite penalty on every row-0 logical state other than the requested input.

    Added to a zero-bias Hamiltonian it leaves exactly one zero mode: the
    history state that starts from ``bits``.
    """
    asm = _Assembler(layout.qubits, layout.rows)
    for k, b in enumerate(bits):
        asm.local[k] += occupation(layout.rows, 0, 1 - int(b))
    return asm.build(strength)
