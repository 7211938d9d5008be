"""Independent references: gate-model evolution, analytic chain spectra, ideal
mimic states and the algebraic expansion behind gate teleportation.

Nothing here builds a Hamiltonian; these are the quantities the ground
states are checked against. Qubit 0 is the most significant bit of every
state vector, matching the flat layout of the Hamiltonian builders.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import CNOT, Boost, Circuit, GateLibrary, Projection, SingleQubit, check
from .hamiltonian import BasisLayout, ChainProfile

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>| / (|a| |b|); insensitive to global phase. Zero vectors give nan."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return float("nan")
    return float(abs(np.vdot(a, b)) / (na * nb))


def basis_state(bits: Sequence[int]) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int("".join(str(int(b)) for b in bits) or "0", 2)] = 1.0
    return v


# ---------------------------------------------------------------------------
# gate-model evolution


def _apply_1q(state: np.ndarray, q: int, k: int, m: np.ndarray) -> np.ndarray:
    t = state.reshape((2,) * q)
    t = np.moveaxis(np.tensordot(m, t, axes=([1], [k])), 0, k)
    return t.reshape(-1)


def _apply_cnot(state: np.ndarray, q: int, control: int, target: int) -> np.ndarray:
    t = state.reshape((2,) * q).copy()
    sel = [slice(None)] * q
    sel[control] = 1
    sub = t[tuple(sel)]
    axis = target - (1 if target > control else 0)
    t[tuple(sel)] = np.flip(sub, axis=axis)
    return t.reshape(-1)


def apply_step(state: np.ndarray, step: Sequence, q: int) -> np.ndarray:
    """Logical action of one circuit step.

    A projection acts as |0><0| on its qubit and a boost as the identity;
    their strengths only reweight rows of a ground state, not logical
    amplitudes.
    """
    out = np.asarray(state, dtype=complex)
    done = set()
    for k, gate in enumerate(step):
        if isinstance(gate, SingleQubit):
            out = _apply_1q(out, q, k, gate.matrix)
        elif isinstance(gate, Projection):
            out = _apply_1q(out, q, k, np.diag([1.0, 0.0]))
        elif isinstance(gate, Boost):
            pass
        elif isinstance(gate, CNOT) and gate not in done:
            out = _apply_cnot(out, q, gate.control, gate.target)
            done.add(gate)
    return out


@dataclass(frozen=True)
class EvolutionTrace:
    states: tuple[np.ndarray, ...]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.states)


def evolve(circuit: Circuit, inputs: Sequence[int] | None = None) -> EvolutionTrace:
    """States psi(t_0) ... psi(t_N) of conventional step-by-step evolution."""
    check(circuit)
    bits = circuit.inputs if inputs is None else tuple(inputs)
    if len(bits) != circuit.qubits:
        raise ValueError(f"need {circuit.qubits} input bits, got {len(bits)}")
    states = [basis_state(bits)]
    for step in circuit.steps:
        states.append(apply_step(states[-1], step, circuit.qubits))
    return EvolutionTrace(tuple(states))


def mimic_state(
    circuit: Circuit,
    inputs: Sequence[int] | None = None,
    profile: ChainProfile | Sequence[float] | None = None,
) -> np.ndarray:
    """Ideal history state ``sum_i lam_i/sqrt(N+1) |psi(t_i)>`` on row ``i``.

    For several qubits the amplitudes sit in the sector where every electron
    is on the same row. ``profile`` (single qubit only) supplies ``lam``;
    the result is normalized iff ``sum lam_i**2 = N+1``.
    """
    trace = evolve(circuit, inputs)
    n = circuit.n_steps
    if profile is None:
        lam = np.ones(n + 1)
    else:
        if circuit.qubits != 1:
            raise ValueError("amplitude profiles are defined for one qubit")
        lam = np.asarray(profile.lam if isinstance(profile, ChainProfile) else profile, float)
        if lam.size != n + 1:
            raise ValueError(f"profile has {lam.size} amplitudes, circuit needs {n + 1}")
    layout = BasisLayout(circuit.qubits, circuit.rows)
    out = np.zeros(layout.dim, dtype=complex)
    t = layout.as_tensor(out)
    q = circuit.qubits
    for i, psi in enumerate(trace.states):
        block = (lam[i] / np.sqrt(n + 1)) * psi.reshape((2,) * q)
        t[tuple(x for _ in range(q) for x in (i, slice(None)))] = block
    return out


# ---------------------------------------------------------------------------
# analytic spectra


def chain_spectrum(n_steps: int, eps: float = 1.0) -> np.ndarray:
    """Spectrum of the unit tight-binding chain of N+1 sites, twice (one copy
    per logical value)."""
    if n_steps < 0:
        raise ValueError("N must be non-negative")
    m = np.arange(n_steps + 1)
    e = 2 * eps * (1 - np.cos(m * np.pi / (n_steps + 1)))
    return np.sort(np.repeat(e, 2))


def uniform_gap(n_steps: int, eps: float = 1.0) -> float:
    return float(2 * eps * (1 - np.cos(np.pi / (n_steps + 1))))


def splitting_estimate(n_steps: int, delta: float, eps: float = 1.0) -> float:
    """First-order splitting of the two mimic states by the row-0 bias."""
    return 2 * eps * abs(delta) / (n_steps + 1)


def teleport_gap_estimate(lam: float, eps: float = 1.0) -> float:
    return eps / (6 * (6 + lam**2))


def teleport_probability_bound(lam: float, n_gates: int) -> float:
    """Lower bound on the chance that every measured qubit reads 0 on the last row."""
    half = lam**2 / 2
    return (half / (6 + half)) ** (2 * n_gates - 2) * lam**2 / (6 + lam**2)


# ---------------------------------------------------------------------------
# Bell basis and gate teleportation


def bell_state(i: int) -> np.ndarray:
    """(|0> s_i|0> + |1> s_i|1>)/sqrt(2), first factor most significant."""
    s = PAULI[i]
    return (np.kron([1, 0], s[:, 0]) + np.kron([0, 1], s[:, 1])) / np.sqrt(2)


def bell_basis() -> np.ndarray:
    """4x4 matrix whose columns are the Bell states 0..3."""
    return np.stack([bell_state(i) for i in range(4)], axis=1)


@dataclass
class TeleportExpansion:
    n_gates: int
    direct: np.ndarray
    expanded: np.ndarray
    residuals: dict[tuple[int, ...], np.ndarray] = field(repr=False)

    @property
    def coefficient(self) -> float:
        return 2.0 ** -(self.n_gates - 1)

    @property
    def mismatch(self) -> float:
        return float(np.max(np.abs(self.direct - self.expanded)))

    def lookup(self, outcome: Sequence[int]) -> np.ndarray:
        """Residual output-qubit state attached to Bell outcome ``(i_1..i_{N-1})``."""
        key = tuple(int(i) for i in outcome)
        if key not in self.residuals:
            raise KeyError(f"no Bell outcome {key} for N={self.n_gates}")
        return self.residuals[key]

    def completeness(self) -> float:
        c2 = self.coefficient**2
        return float(sum(c2 * np.vdot(r, r).real for r in self.residuals.values()))


def teleport_expansion(
    unitaries: Sequence[np.ndarray], conjugate: bool = True
) -> TeleportExpansion:
    """Both sides of the parallel gate-teleportation identity.

    Direct side: ``U_1|0>`` on qubit 0 followed by ``N-1`` EPR pairs
    ``(|00>+|11>)/sqrt(2)`` whose second qubit carries ``U_{k+1}``. Expanded
    side: ``2^-(N-1) sum |Phi_i1>...|Phi_i(N-1)> U_N s_i(N-1) ... U_2 s_i1 U_1|0>``
    with Bell pairs on qubits ``(2k-2, 2k-1)`` and the output on the last
    qubit.

    Projecting ``|psi>|Phi_0>`` on ``<Phi_i|`` leaves ``conj(s_i)|psi>``, so the
    expanded side uses the conjugated Paulis by default. They differ from
    ``s_i`` only for ``s_2 = sigma_y``, by a sign; ``conjugate=False`` gives the
    unconjugated sum for comparison.
    """
    us = [np.asarray(u, dtype=complex) for u in unitaries]
    n = len(us)
    if n < 1:
        raise ValueError("need at least one gate")
    zero = np.array([1.0, 0.0], dtype=complex)
    epr = bell_state(0)
    direct = us[0] @ zero
    for u in us[1:]:
        direct = np.kron(direct, np.kron(np.eye(2), u) @ epr)
    residuals: dict[tuple[int, ...], np.ndarray] = {}
    expanded = np.zeros(2 ** (2 * n - 1), dtype=complex)
    coeff = 2.0 ** -(n - 1)
    for outcome in itertools.product(range(4), repeat=n - 1):
        psi = us[0] @ zero
        bells = np.ones(1, dtype=complex)
        for i, u in zip(outcome, us[1:]):
            s_i = PAULI[i].conj() if conjugate else PAULI[i]
            psi = u @ (s_i @ psi)
            bells = np.kron(bells, bell_state(i))
        residuals[outcome] = psi
        expanded += coeff * np.kron(bells, psi)
    return TeleportExpansion(n, direct, expanded, residuals)


@dataclass(frozen=True)
class BellRotationReport:
    """Image of each Bell state under the measurement rotation.

    ``images[i] = (label, phase)``: the rotated state equals
    ``phase * |label>`` with ``label`` read in ``order``.
    """

    orientation: str
    order: str
    images: tuple[tuple[str, complex], ...]
    max_error: float

    def phase(self, i: int) -> complex:
        return self.images[i][1]

    def label(self, i: int) -> str:
        return self.images[i][0]


def bell_rotation_check(orientation: str = "machine") -> BellRotationReport:
    """Map the four Bell states through the CNOT + Hadamard measurement rotation.

    ``"machine"``: CNOT with the pair qubit (second factor) as control, then
    W on the pair qubit, as wired in the teleportation computer; kets are
    read with the pair qubit first. ``"textbook"``: CNOT with the first
    factor as control, then W on the first factor, read in natural order.
    """
    w = GateLibrary.W.matrix
    cnot_12 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
    if orientation == "machine":
        rot = np.kron(np.eye(2), w) @ (swap @ cnot_12 @ swap)
        order, readout = "pair qubit, then carrier", swap
    elif orientation == "textbook":
        rot = np.kron(w, np.eye(2)) @ cnot_12
        order, readout = "natural", np.eye(4)
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    images = []
    worst = 0.0
    for i in range(4):
        out = readout @ rot @ bell_state(i)
        j = int(np.argmax(np.abs(out)))
        phase = complex(out[j])
        rest = out.copy()
        rest[j] = 0
        worst = max(worst, float(np.max(np.abs(rest))), abs(abs(phase) - 1))
        images.append((format(j, "02b"), complex(np.round(phase.real, 15) + 1j * np.round(phase.imag, 15))))
    return BellRotationReport(orientation, order, tuple(images), worst)
