"""Circuit description shared by every Hamiltonian builder.

A circuit is an ordered list of steps. Each step assigns exactly one gate to
every qubit; a CNOT occupies both of its qubits for that step. Idle qubits
carry an explicit identity so that every qubit has the same number of rows.

Circuit files are line based::

    # two bits: identity / NOT, then an XOR onto the left bit
    qubits 2
    input 0 0
    step I NOT
    step CNOT 1 0

Step tokens are read left to right, one per unassigned qubit. A token is a
library gate name (``I``, ``NOT``, ``X``, ``W``, ``Z``, ``phase(theta)``),
``CNOT <control> <target>``, ``P <lambda>``, ``B <lambda>`` or an inline
matrix ``[a b; c d]`` whose entries are complex literals such as ``0.5+1/2i``
or ``-s2`` (``s2`` is 1/sqrt(2)).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

UNITARY_TOL = 1e-12
SQRT_HALF = 1.0 / math.sqrt(2.0)


class CircuitError(ValueError):
    """Raised for malformed circuit text or an invalid circuit."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)):
        return False
    return float(np.max(np.abs(m.conj().T @ m - np.eye(2)))) <= tol


# ---------------------------------------------------------------------------
# gates


@dataclass(frozen=True, eq=False)
class SingleQubit:
    matrix: np.ndarray
    name: str | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        return isinstance(other, SingleQubit) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def __repr__(self):
        return f"SingleQubit({self.name or self.matrix.tolist()})"


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int


@dataclass(frozen=True)
class Projection:
    """Non-unitary link passing only logical 0, amplified by ``strength``."""

    strength: float


@dataclass(frozen=True)
class Boost:
    """Non-unitary link amplifying both logical states by ``strength``."""

    strength: float


Gate = Union[SingleQubit, CNOT, Projection, Boost]


def phase(theta: float) -> SingleQubit:
    return SingleQubit(np.diag([1.0, np.exp(1j * theta)]), name=f"phase({theta!r})")


class GateLibrary:
    """Named single-qubit gates."""

    I = SingleQubit(np.eye(2), name="I")
    NOT = SingleQubit([[0, 1], [1, 0]], name="NOT")
    W = SingleQubit(np.array([[1, 1], [1, -1]]) * SQRT_HALF, name="W")
    Z = SingleQubit(np.diag([1.0, -1.0]), name="Z")
    phase = staticmethod(phase)

    @classmethod
    def named(cls) -> dict[str, SingleQubit]:
        return {"I": cls.I, "NOT": cls.NOT, "X": cls.NOT, "W": cls.W, "Z": cls.Z}


IDLE = GateLibrary.I

# common names from other conventions that map onto library gates
_SUGGESTIONS = {"H": "W", "HADAMARD": "W", "ID": "I", "IDLE": "I", "CX": "CNOT", "SIGMAX": "NOT"}


# ---------------------------------------------------------------------------
# circuit


@dataclass(frozen=True)
class Violation:
    step: int | None
    message: str

    def __str__(self):
        return self.message if self.step is None else f"{self.message} at step {self.step}"


@dataclass(frozen=True)
class Circuit:
    """``steps[j][k]`` is the gate applied to qubit ``k`` in step ``j + 1``."""

    qubits: int
    steps: tuple[tuple[Gate, ...], ...]
    inputs: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(tuple(s) for s in self.steps))
        inputs = tuple(int(b) for b in self.inputs) or (0,) * self.qubits
        object.__setattr__(self, "inputs", inputs)

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def rows(self) -> int:
        return len(self.steps) + 1

    def unitaries(self, qubit: int = 0) -> list[np.ndarray]:
        """Per-step 2x2 matrices of one qubit; CNOT or non-unitary links raise."""
        out = []
        for j, step in enumerate(self.steps, start=1):
            gate = step[qubit]
            if not isinstance(gate, SingleQubit):
                raise CircuitError(f"qubit {qubit} has a {type(gate).__name__} at step {j}")
            out.append(gate.matrix)
        return out

    def validate(self) -> list[Violation]:
        return validate(self)


def single_qubit_circuit(unitaries: Iterable[np.ndarray], input_bit: int = 0) -> Circuit:
    steps = tuple((SingleQubit(u),) for u in unitaries)
    return check(Circuit(1, steps, (input_bit,)))


def validate(circuit: Circuit) -> list[Violation]:
    """Every circuit invariant that fails, with 1-based step indices."""
    report: list[Violation] = []
    q = circuit.qubits
    if q < 1:
        report.append(Violation(None, "circuit needs at least one qubit"))
        return report
    if len(circuit.inputs) != q:
        report.append(Violation(None, f"expected {q} input bits, got {len(circuit.inputs)}"))
    elif any(b not in (0, 1) for b in circuit.inputs):
        report.append(Violation(None, "input bits must be 0 or 1"))
    for j, step in enumerate(circuit.steps, start=1):
        if len(step) != q:
            report.append(Violation(j, f"step assigns {len(step)} gates to {q} qubits"))
            continue
        for k, gate in enumerate(step):
            if isinstance(gate, SingleQubit):
                if not is_unitary(gate.matrix):
                    report.append(Violation(j, "non-unitary"))
            elif isinstance(gate, CNOT):
                c, t = gate.control, gate.target
                if c == t:
                    report.append(Violation(j, "control equals target"))
                    continue
                if not (0 <= c < q and 0 <= t < q):
                    report.append(Violation(j, f"CNOT qubit out of range ({c}, {t})"))
                    continue
                if k not in (c, t):
                    report.append(Violation(j, f"CNOT({c},{t}) assigned to qubit {k}"))
                partner = t if k == c else c
                if step[partner] != gate:
                    report.append(Violation(j, f"qubit {partner} of CNOT({c},{t}) holds another gate"))
            elif isinstance(gate, (Projection, Boost)):
                if not (gate.strength >= 1.0 and math.isfinite(gate.strength)):
                    report.append(Violation(j, f"{type(gate).__name__} strength must be >= 1"))
            else:
                report.append(Violation(j, f"unknown gate object {gate!r}"))
    return report


def check(circuit: Circuit) -> Circuit:
    report = validate(circuit)
    if report:
        raise CircuitError("; ".join(str(v) for v in report))
    return circuit


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\[[^\]]*\]|phase\([^)]*\)|\S+")
_TERM = re.compile(r"[+-]?(?:[^+\-eE]|[eE][+-]?)+")


def _real(text: str) -> float:
    if not text:
        return 1.0
    value = 1.0
    for factor in text.split("*"):
        factor = factor.strip()
        if factor == "s2":
            value *= SQRT_HALF
        elif factor.startswith("sqrt(") and factor.endswith(")"):
            value *= math.sqrt(float(Fraction(factor[5:-1])))
        else:
            value *= float(Fraction(factor))
    return value


def parse_complex(text: str) -> complex:
    """Parse ``x+yi`` style literals with rational, decimal and ``s2`` parts."""
    s = text.replace(" ", "")
    if not s:
        raise ValueError("empty number")
    total = 0j
    pos = 0
    for m in _TERM.finditer(s):
        if m.start() != pos:
            raise ValueError(f"bad number {text!r}")
        pos = m.end()
        term = m.group()
        sign = -1.0 if term.startswith("-") else 1.0
        term = term.lstrip("+-")
        imag = term.endswith("i") or term.endswith("j")
        if imag:
            term = term[:-1].rstrip("*")
        try:
            mag = _real(term)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad number {text!r}") from exc
        total += sign * mag * (1j if imag else 1.0)
    if pos != len(s):
        raise ValueError(f"bad number {text!r}")
    return total


def _parse_matrix(token: str) -> np.ndarray:
    body = token[1:-1]
    rows = [r.split() for r in body.split(";")]
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise ValueError(f"inline matrix must be 2x2: {token}")
    return np.array([[parse_complex(x) for x in r] for r in rows], dtype=complex)


def _parse_step(tokens: list[str], q: int, line: int) -> tuple[Gate, ...]:
    slots: list[Gate | None] = [None] * q
    library = GateLibrary.named()

    def assign(k: int, gate: Gate):
        if not 0 <= k < q:
            raise CircuitError(f"qubit {k} out of range", line)
        if slots[k] is not None:
            raise CircuitError(f"qubit {k} assigned twice", line)
        slots[k] = gate

    def cursor() -> int:
        for k, g in enumerate(slots):
            if g is None:
                return k
        raise CircuitError("more gate tokens than qubits", line)

    it = iter(tokens)
    for tok in it:
        if tok == "CNOT":
            try:
                c, t = int(next(it)), int(next(it))
            except (StopIteration, ValueError):
                raise CircuitError("CNOT needs integer control and target", line) from None
            if c == t:
                raise CircuitError("CNOT control equals target", line)
            gate = CNOT(c, t)
            assign(c, gate)
            assign(t, gate)
            continue
        k = cursor()
        if tok in ("P", "B"):
            try:
                lam = float(_real(next(it)))
            except (StopIteration, ValueError):
                raise CircuitError(f"{tok} needs a strength", line) from None
            if lam < 1.0:
                raise CircuitError(f"{tok} strength must be >= 1, got {lam}", line)
            assign(k, Projection(lam) if tok == "P" else Boost(lam))
        elif tok.startswith("["):
            try:
                m = _parse_matrix(tok)
            except ValueError as exc:
                raise CircuitError(str(exc), line) from None
            if not is_unitary(m):
                raise CircuitError(f"inline matrix {tok} is not unitary", line)
            assign(k, SingleQubit(m))
        elif tok.startswith("phase("):
            try:
                assign(k, phase(_real(tok[6:-1])))
            except ValueError:
                raise CircuitError(f"bad phase angle in {tok}", line) from None
        elif tok in library:
            assign(k, library[tok])
        else:
            hint = _SUGGESTIONS.get(tok.upper())
            msg = f"unknown gate {tok!r}"
            if hint:
                msg += f"; did you mean {hint!r}?"
            raise CircuitError(msg, line)
    missing = [k for k, g in enumerate(slots) if g is None]
    if missing:
        raise CircuitError(f"step leaves qubits {missing} unassigned", line)
    return tuple(slots)  # type: ignore[arg-type]


def parse_circuit(text: str) -> Circuit:
    q: int | None = None
    inputs: tuple[int, ...] | None = None
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "qubits":
            if q is not None or steps:
                raise CircuitError("qubits must be declared once, before any step", lineno)
            try:
                q = int(rest)
            except ValueError:
                raise CircuitError(f"bad qubit count {rest!r}", lineno) from None
            if q < 1:
                raise CircuitError("qubit count must be positive", lineno)
        elif head == "input":
            if q is None:
                raise CircuitError("input before qubits", lineno)
            bits = rest.split()
            if len(bits) != q or any(b not in ("0", "1") for b in bits):
                raise CircuitError(f"input needs {q} bits of 0/1", lineno)
            inputs = tuple(int(b) for b in bits)
        elif head == "step":
            if q is None:
                raise CircuitError("step before qubits", lineno)
            steps.append(_parse_step(_TOKEN.findall(rest), q, lineno))
        else:
            raise CircuitError(f"syntax error: unexpected {head!r}", lineno)
    if q is None:
        raise CircuitError("missing 'qubits' header")
    return check(Circuit(q, tuple(steps), inputs or (0,) * q))


def load_circuit(path) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


# ---------------------------------------------------------------------------
# serialization


def _fmt_real(x: float) -> str:
    return repr(float(x))


def _fmt_complex(z: complex) -> str:
    re_, im = float(z.real), float(z.imag)
    if im == 0.0:
        return _fmt_real(re_)
    if re_ == 0.0:
        return f"{_fmt_real(im)}i"
    sign = "-" if im < 0 else "+"
    return f"{_fmt_real(re_)}{sign}{_fmt_real(abs(im))}i"


def _fmt_gate(gate: Gate) -> str:
    if isinstance(gate, SingleQubit):
        for name, lib in GateLibrary.named().items():
            if name != "X" and gate == lib:
                return name
        m = gate.matrix
        return "[{} {}; {} {}]".format(*(_fmt_complex(z) for z in m.ravel()))
    if isinstance(gate, Projection):
        return f"P {_fmt_real(gate.strength)}"
    if isinstance(gate, Boost):
        return f"B {_fmt_real(gate.strength)}"
    raise TypeError(gate)


def serialize(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.qubits}", "input " + " ".join(map(str, circuit.inputs))]
    for step in circuit.steps:
        tokens: list[str] = []
        seen: set[int] = set()
        for k, gate in enumerate(step):
            if k in seen:
                continue
            if isinstance(gate, CNOT):
                tokens.append(f"CNOT {gate.control} {gate.target}")
                seen.update((gate.control, gate.target))
            else:
                tokens.append(_fmt_gate(gate))
                seen.add(k)
        lines.append("step " + " ".join(tokens))
    return "\n".join(lines) + "\n"


def circuits_equal(a: Circuit, b: Circuit, rtol: float = 1e-15) -> bool:
    if (a.qubits, a.inputs, a.n_steps) != (b.qubits, b.inputs, b.n_steps):
        return False
    for sa, sb in zip(a.steps, b.steps):
        for ga, gb in zip(sa, sb):
            if isinstance(ga, SingleQubit) and isinstance(gb, SingleQubit):
                if not np.allclose(ga.matrix, gb.matrix, rtol=rtol, atol=rtol):
                    return False
            elif ga != gb:
                return False
    return True


def fig2_circuit() -> Circuit:
    """Two bits from 0: identity / NOT, then a CNOT controlled by the flipped
    bit, so both end at 1."""
    cx = CNOT(1, 0)
    return Circuit(2, ((GateLibrary.I, GateLibrary.NOT), (cx, cx)), (0, 0))


def from_steps(qubits: int, steps: Sequence[Sequence[Gate]], inputs: Sequence[int] = ()) -> Circuit:
    return check(Circuit(qubits, tuple(tuple(s) for s in steps), tuple(inputs)))
