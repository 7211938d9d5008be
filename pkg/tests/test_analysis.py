import json

import numpy as np
import pytest

from gsqc import oracle
from gsqc.analysis import (
    GapRow,
    GapTable,
    extract_mimic,
    fit_loglog_slope,
    geometric_profile,
    nonunitary_check,
    random_unitaries,
    standard_gap_row,
    teleport_biased_ground_state,
    teleport_run,
    well_profile,
    write_csv,
    write_json,
    write_table,
    write_xy,
)
from gsqc.circuit import GateLibrary, fig2_circuit
from gsqc.eigensolver import lowest_nonzero_eigenvalue
from gsqc.hamiltonian import build_multi_qubit, build_teleport

I2 = GateLibrary.I.matrix


def test_standard_row_n8():
    row = standard_gap_row(8, 1e-3)
    assert row.converged
    assert row.gap == pytest.approx(2 * (1 - np.cos(np.pi / 9)), rel=1e-10)
    assert row.splitting == pytest.approx(2e-3 / 9, rel=1e-2)


def test_loglog_slope_exact_power():
    x = np.array([5, 9, 17, 33])
    assert fit_loglog_slope(x, 3.0 / x**2) == pytest.approx(-2)


def test_fig2_extract():
    c = fig2_circuit()
    H, layout = build_multi_qubit(c, (-1e-3, -1e-3))
    g = np.linalg.eigh(H.to_dense())[1][:, 0]
    ext = extract_mimic(g, layout, oracle.evolve(c))
    assert np.all(ext.fidelities > 1 - 1e-10)
    assert oracle.fidelity(ext.output_block.ravel(), oracle.basis_state((1, 1))) > 1 - 1e-10
    # DERIVED: three of the seven equally weighted row configurations are same-row
    assert ext.diagonal_weight == pytest.approx(3 / 7, abs=1e-3)


def test_geometric_profile_weights():
    r = nonunitary_check("g", geometric_profile(2.0, 16))
    assert r.min_eigenvalue >= -1e-10
    assert r.kernel_residual <= 1e-12
    assert r.weight_error <= 1e-8


@pytest.mark.parametrize(
    "center, first, last, site",
    # DERIVED: unit-hopping chain with potential 1 + 4 (i/N - c)^2, N = 16, dense diagonalization
    [(0.0, 2.69713913462249, 5.00540218148562e-09, 0), (1.0, 5.00540218148562e-09, 2.69713913462249, 16)],
)
def test_edge_wells(center, first, last, site):
    r = nonunitary_check("w", well_profile(16, center))
    assert r.lam_first == pytest.approx(first, rel=1e-8)
    assert r.lam_last == pytest.approx(last, rel=1e-6)
    assert r.min_site == site


def test_center_well_gap():
    r = nonunitary_check("c", well_profile(16, 0.5))
    # DERIVED: 0.18903960417826 against 2(1 - cos(pi/17)) = 0.0340538006321964
    assert r.gap == pytest.approx(0.18903960417826, rel=1e-8)
    assert r.uniform_gap == pytest.approx(0.0340538006321964, rel=1e-12)
    assert r.min_site == 8


@pytest.mark.parametrize(
    "lam, p, gap",
    # DERIVED: N = 2 teleport machine with identity gates; dense check below
    [(2.0, 1 / 27, 0.00511390735136029), (4.0, 0.306954436450821, 0.000615835208750909),
     (8.0, 0.718029625733976, 4.61043680917006e-05)],
)
def test_teleport_two_gates(lam, p, gap):
    rep = teleport_run([I2, I2], lam)
    assert rep.component_dim == 1486
    assert rep.p == pytest.approx(p, rel=1e-9)
    assert rep.p >= rep.p_min
    assert rep.fidelity > 1 - 1e-12
    assert rep.gap == pytest.approx(gap, rel=1e-7)
    assert rep.zero_residual < 1e-10


def test_teleport_gap_does_not_depend_on_gates():
    a = teleport_run(random_unitaries(2, np.random.default_rng(0)), 4.0)
    assert a.gap == pytest.approx(0.000615835208750909, rel=1e-7)
    assert a.fidelity > 1 - 1e-12


def test_teleport_gap_matches_dense():
    H, _, tl = build_teleport([I2, I2], 4.0, 0.0)
    sub = H.restrict(H.component_of(tl.start_index()))
    e = np.linalg.eigvalsh(sub.to_dense())
    above = e[e > 1e-8][0]
    assert lowest_nonzero_eigenvalue(sub).value == pytest.approx(above, rel=1e-8)


def test_literal_bias_misses_probability_bound():
    # DERIVED: with the row-0 bias alone the lowest state is not the history state
    p, fid, overlap = teleport_biased_ground_state([I2, I2], 4.0)
    assert p < oracle.teleport_probability_bound(4.0, 2)
    assert overlap < 0.9


def test_writers(tmp_path):
    rows = [GapRow(4, -1.0, 0.5, 1.0, 1.5, 2.0, 2.0, True, "x"),
            GapRow(8, float("nan"), 0, 0, 0, 0, 0, False, "")]
    path = write_table(tmp_path / "t.csv", GapTable("standard", rows))
    raw = path.read_bytes()
    assert raw.startswith(b"param,E0,E1,E2,splitting,gap,reference,converged,note\r\n")
    assert b"4,-1,0.5,1,1.5,2,2,true,x\r\n" in raw
    write_xy(tmp_path / "a.dat", [1, 2], [0.1, 1 / 3])
    assert (tmp_path / "a.dat").read_text() == "1 0.1\n2 0.333333333333333\n"
    write_json(tmp_path / "r.json", {"b": float("nan"), "a": np.arange(2), "z": 1 + 2j})
    assert json.loads((tmp_path / "r.json").read_text()) == {"a": [0, 1], "b": None, "z": [1.0, 2.0]}
    write_csv(tmp_path / "c.csv", ("k",), [(np.float64(0.1 + 0.2),)])
    assert (tmp_path / "c.csv").read_text().splitlines()[1] == "0.3"
