import numpy as np
import pytest
from hypothesis import given, strategies as st

from gsqc.circuit import (
    CNOT,
    Boost,
    Circuit,
    CircuitError,
    GateLibrary,
    Projection,
    SingleQubit,
    check,
    circuits_equal,
    fig2_circuit,
    parse_circuit,
    parse_complex,
    serialize,
    single_qubit_circuit,
    validate,
)

FIG2_TEXT = """\
# two bits: identity / NOT, then an XOR onto the left bit
qubits 2
input 0 0
step I NOT
step CNOT 1 0
"""


def test_fig2_text_matches_builtin():
    c = parse_circuit(FIG2_TEXT)
    assert circuits_equal(c, fig2_circuit())
    assert c.rows == 3 and c.n_steps == 2


def test_unitaries_refuse_cnot_steps():
    with pytest.raises(CircuitError, match="CNOT at step 2"):
        fig2_circuit().unitaries(1)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("qubits 1\nstep FOO", "unknown gate"),
        ("qubits 1\nstep H", "did you mean 'W'"),
        ("qubits 2\nstep I", "unassigned"),
        ("qubits 2\nstep CNOT 0 0", "control equals target"),
        ("qubits 2\nstep CNOT 0 2", "out of range"),
        ("qubits 1\nstep [1 1; 0 1]", "not unitary"),
        ("qubits 1\nstep P 0.5", ">= 1"),
        ("step I", "before qubits"),
        ("qubits 1\ninput 2", "0/1"),
        ("qubits 1\nfrobnicate", "syntax error"),
        ("", "missing 'qubits'"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(CircuitError, match=fragment):
        parse_circuit(text)


def test_parse_error_reports_line():
    with pytest.raises(CircuitError) as exc:
        parse_circuit("qubits 1\n\nstep I\nstep FOO\n")
    assert exc.value.line == 4


def test_complex_literals():
    assert parse_complex("0.5+1/2i") == 0.5 + 0.5j
    assert parse_complex("-s2") == pytest.approx(-1 / np.sqrt(2))
    assert parse_complex("i") == 1j


def test_inline_matrix_and_phase():
    c = parse_circuit("qubits 1\nstep [s2 s2; s2 -s2]\nstep phase(0.25)\n")
    assert np.allclose(c.unitaries()[0], GateLibrary.W.matrix)
    assert np.allclose(c.unitaries()[1], np.diag([1, np.exp(0.25j)]))


def test_projection_and_boost_tokens():
    c = parse_circuit("qubits 2\nstep P 4 B 2\n")
    assert c.steps[0] == (Projection(4.0), Boost(2.0))


def test_validate_flags_inconsistent_cnot():
    cx = CNOT(0, 1)
    bad = Circuit(2, ((cx, GateLibrary.I),), (0, 0))
    assert validate(bad)
    with pytest.raises(CircuitError):
        check(bad)


def test_single_qubit_circuit_rejects_non_unitary():
    with pytest.raises((CircuitError, ValueError)):
        single_qubit_circuit([np.array([[1, 1], [0, 1]])])


unitary = st.integers(0, 2**32 - 1).map(
    lambda s: SingleQubit(np.linalg.qr(np.random.default_rng(s).normal(size=(2, 2))
                                        + 1j * np.random.default_rng(s + 1).normal(size=(2, 2)))[0])
)


@given(st.lists(st.lists(unitary, min_size=2, max_size=2), min_size=1, max_size=4), st.booleans())
def test_serialize_roundtrip(steps, with_cnot):
    rows = [tuple(s) for s in steps]
    if with_cnot:
        cx = CNOT(1, 0)
        rows.append((cx, cx))
    rows.append((Projection(3.0), Boost(1.5)))
    c = check(Circuit(2, tuple(rows), (1, 0)))
    again = parse_circuit(serialize(c))
    assert circuits_equal(c, again, rtol=0)
