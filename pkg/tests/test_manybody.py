import numpy as np
import pytest
from hypothesis import given, strategies as st

from gsqc import oracle
from gsqc.analysis import random_unitaries
from gsqc.circuit import CircuitError, fig2_circuit, single_qubit_circuit
from gsqc.eigensolver import lowest_eigenpairs
from gsqc.hamiltonian import BudgetError, build_single_qubit
from gsqc.manybody import (
    IDLE,
    LOGICAL0,
    LOGICAL1,
    OccupationBasis,
    build_manybody_single_qubit,
    idle_dominance,
    meaningful_projection,
    outside_weight,
    subspace_leakage,
)


def circuit(n, seed):
    return single_qubit_circuit(random_unitaries(n, np.random.default_rng(seed)))


def test_digit_order():
    b = OccupationBasis(3)
    assert b.dim == 27
    assert b.index((LOGICAL1, IDLE, IDLE)) == 2
    assert b.digits(2 * 9 + 1) == (1, 0, 2)
    assert list(b.meaningful_indices()) == [1, 2, 3, 6, 9, 18]


@given(st.integers(0, 10_000), st.integers(1, 4), st.floats(-0.5, 0.5))
def test_projection_matches_standard(seed, n, delta):
    c = circuit(n, seed)
    H, basis = build_manybody_single_qubit(c, delta)
    Hs, _ = build_single_qubit(c, delta)
    assert np.max(np.abs(meaningful_projection(H, basis) - Hs.to_dense())) <= 1e-12
    assert subspace_leakage(H, basis) == 0


def test_vacuum_is_an_extra_zero_mode():
    # DERIVED: the all-idle string is annihilated by every term
    H, basis = build_manybody_single_qubit(circuit(1, 0), 0.0)
    e = np.linalg.eigvalsh(H.to_dense())
    assert np.allclose(e[:3], 0, atol=1e-14) and e[3] > 1
    assert H.diagonal()[0] == 0


def test_two_nonidle_rows_cost_at_least_eps():
    H, basis = build_manybody_single_qubit(circuit(3, 1), 0.0)
    diag = H.diagonal().real
    crowded = basis.nonidle_count >= 2
    assert np.all(diag[crowded] >= 1 - 1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_biased_ground_state_stays_meaningful(n):
    c = circuit(n, n)
    H, basis = build_manybody_single_qubit(c, -1e-3)
    res = lowest_eigenpairs(H, 2)
    assert res.eigenvalues[1] - res.eigenvalues[0] > 1e-5
    g = res.ground_state()
    assert outside_weight(g, basis) <= 1e-12
    mimic = basis.embed(oracle.mimic_state(c, (0,)))
    assert oracle.fidelity(mimic, g) > 1 - 1e-3


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_idle_ratio_of_mimic_is_n(n):
    c = circuit(n, 10 + n)
    basis = OccupationBasis(c.rows)
    rep = idle_dominance(basis.embed(oracle.mimic_state(c, (0,))), basis)
    assert np.isclose(rep.ratio, n, rtol=1e-12)
    assert np.isclose(rep.total_nonidle, 1)


def test_idle_dominance_requires_normalized_state():
    basis = OccupationBasis(2)
    with pytest.raises(ValueError, match="normalize"):
        idle_dominance(np.ones(basis.dim), basis)


def test_limits():
    with pytest.raises(CircuitError):
        build_manybody_single_qubit(fig2_circuit())
    with pytest.raises(BudgetError):
        build_manybody_single_qubit(circuit(11, 0))
    with pytest.raises(ValueError):
        OccupationBasis(2).embed(np.ones(3))
