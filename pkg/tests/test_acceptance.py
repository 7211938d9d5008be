"""Acceptance criteria, each at its stated tolerance and runtime budget.

Run with pytest (the PASS/FAIL lines appear in the terminal summary) or
directly: ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import resource
import sys
import time

import numpy as np
import pytest
from scipy.stats import unitary_group

from gsqc import oracle
from gsqc.analysis import (
    extract_mimic,
    fit_loglog_slope,
    geometric_profile,
    nonunitary_check,
    random_unitaries,
    standard_gap_row,
    teleport_run,
    well_profile,
)
from gsqc.circuit import CNOT, Circuit, SingleQubit, fig2_circuit, single_qubit_circuit
from gsqc.eigensolver import lowest_eigenpairs
from gsqc.hamiltonian import (
    build_multi_qubit,
    build_nonunitary_chain,
    build_single_qubit,
    build_teleport,
    input_pin,
)
from gsqc.manybody import (
    build_manybody_single_qubit,
    idle_dominance,
    meaningful_projection,
    outside_weight,
    subspace_leakage,
)

DOMINANCE = 100.0  # how much larger counts as "much larger" for the edge wells


def _peak_rss_gb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 2**20


def criterion_1():
    sizes = [4, 8, 16, 32, 64]
    rows = [standard_gap_row(n, 0.0) for n in sizes]
    gaps = np.array([r.E2 - r.E0 for r in rows])
    ref = np.array([oracle.uniform_gap(n) for n in sizes])
    rel = float(np.max(np.abs(gaps - ref) / ref))
    slope = fit_loglog_slope(np.array(sizes) + 1, gaps)
    ok = rel <= 1e-8 and abs(slope + 2) <= 0.05
    return ok, f"max rel err {rel:.2e} (tol 1e-8), slope {slope:.4f} (-2 +- 0.05)", 10


def criterion_2():
    sizes, delta = [4, 8, 16], 1e-3
    rel = max(
        abs(standard_gap_row(n, delta).splitting / oracle.splitting_estimate(n, delta) - 1) for n in sizes
    )
    return rel <= 0.01, f"max rel deviation {rel:.2e} (tol 1e-2)", 10


def criterion_3():
    n, rng = 8, np.random.default_rng(3)
    ref = np.linalg.eigvalsh(build_single_qubit(single_qubit_circuit([np.eye(2)] * n), 1e-3)[0].to_dense())
    worst = 0.0
    for _ in range(20):
        H, _ = build_single_qubit(single_qubit_circuit(random_unitaries(n, rng)), 1e-3)
        worst = max(worst, float(np.max(np.abs(np.linalg.eigvalsh(H.to_dense()) - ref))))
    return worst <= 1e-10, f"max eigenvalue deviation {worst:.2e} over 20 gate sets (tol 1e-10)", 5


def criterion_4():
    c = fig2_circuit()
    H, layout = build_multi_qubit(c, (-1e-3, -1e-3))
    g = lowest_eigenpairs(H, 1).ground_state()
    ext = extract_mimic(g, layout, oracle.evolve(c))
    fid = oracle.fidelity(oracle.basis_state((1, 1)), ext.output_block.ravel())
    return fid >= 1 - 1e-8, f"final-row fidelity with |11> {fid:.12f} (min 1-1e-8), dim {H.dim}", 30


def criterion_5():
    parts, ok = [], True
    for r in (0.5, 2.0):
        chk = nonunitary_check(f"r={r}", geometric_profile(r, 16))
        good = chk.min_eigenvalue >= -1e-10 and chk.kernel_residual <= 1e-12 and chk.weight_error <= 1e-8
        ok &= good
        parts.append(f"r={r:g}: min eig {chk.min_eigenvalue:.1e}, kernel res {chk.kernel_residual:.1e}, "
                     f"weight err {chk.weight_error:.1e}")
    left, right = nonunitary_check("left", well_profile(16, 0.0)), nonunitary_check("right", well_profile(16, 1.0))
    center = nonunitary_check("center", well_profile(16, 0.5))
    lr, rr = left.lam_first / left.lam_last, right.lam_last / right.lam_first
    ok &= lr >= DOMINANCE and rr >= DOMINANCE and center.gap > center.uniform_gap
    parts.append(f"lam0/lamN {lr:.2e}, lamN/lam0 {rr:.2e}, centred gap {center.gap:.4f} vs uniform "
                 f"{center.uniform_gap:.4f}")
    return ok, "; ".join(parts), 10


def criterion_6():
    rng = np.random.default_rng(6)
    worst_rhs = worst_lookup = 0.0
    for n in (2, 3):
        us = random_unitaries(n, rng)
        exp = oracle.teleport_expansion(us)
        target = np.array([1, 0], dtype=complex)
        for u in us:
            target = u @ target
        worst_rhs = max(worst_rhs, exp.mismatch)
        worst_lookup = max(worst_lookup, float(np.max(np.abs(exp.lookup((0,) * (n - 1)) - target))))
    ok = worst_rhs <= 1e-12 and worst_lookup <= 1e-12
    return ok, f"LHS-RHS {worst_rhs:.1e}, lookup {worst_lookup:.1e} (tol 1e-12)", 1


def criterion_7():
    us = random_unitaries(3, np.random.default_rng(7))
    parts, ok = [], True
    for lam in (2.0, 4.0, 8.0):
        rep = teleport_run(us, lam)
        if lam == 4.0:
            good = rep.p >= rep.p_min and rep.fidelity >= 1 - 1e-6
            ok &= good
            parts.append(f"lam=4: p {rep.p:.6f} (min {rep.p_min:.6f}), 1-fidelity {1 - rep.fidelity:.1e}")
        within = rep.within_factor(3.0)
        ok &= within
        parts.append(f"lam={lam:g}: gap {rep.gap:.4e} vs {rep.gap_estimate:.4e} "
                     f"(ratio {rep.gap / rep.gap_estimate:.3g}, {'within' if within else 'outside'} 3x)")
    mem = _peak_rss_gb()
    ok &= mem < 4
    parts.append(f"peak RSS {mem:.2f} GB")
    return ok, "; ".join(parts), 600


def criterion_8():
    rng = np.random.default_rng(8)
    worst_proj = worst_leak = worst_ratio = 0.0
    for n in (1, 2, 3, 4):
        c = single_qubit_circuit(random_unitaries(n, rng))
        H, basis = build_manybody_single_qubit(c, -1e-3)
        Hs, _ = build_single_qubit(c, -1e-3)
        worst_proj = max(worst_proj, float(np.max(np.abs(meaningful_projection(H, basis) - Hs.to_dense()))))
        worst_leak = max(worst_leak, subspace_leakage(H, basis),
                         outside_weight(lowest_eigenpairs(H, 1).ground_state(), basis))
        rep = idle_dominance(basis.embed(oracle.mimic_state(c, (0,))), basis)
        worst_ratio = max(worst_ratio, abs(rep.ratio - n) / n)
    ok = worst_proj <= 1e-12 and worst_leak <= 1e-12 and worst_ratio <= 1e-12
    return ok, (f"projection err {worst_proj:.1e}, leakage {worst_leak:.1e}, "
                f"idle ratio rel err {worst_ratio:.1e} (tol 1e-12)"), 30


def _krylov_cases():
    rng = np.random.default_rng(9)
    us = random_unitaries(40, rng)
    yield "single-qubit N=40", build_single_qubit(single_qubit_circuit(us), 1e-3)[0]
    yield "non-unitary N=40", build_nonunitary_chain(single_qubit_circuit(us), geometric_profile(0.9, 40), 1e-3)[0]
    cx = CNOT(0, 1)
    steps = [(SingleQubit(unitary_group.rvs(2, random_state=rng)), SingleQubit(unitary_group.rvs(2, random_state=rng))),
             (cx, cx),
             (SingleQubit(unitary_group.rvs(2, random_state=rng)), SingleQubit(unitary_group.rvs(2, random_state=rng)))]
    yield "two-qubit 3 steps", build_multi_qubit(Circuit(2, tuple(steps), (0, 1)))[0]
    yield "fig2", build_multi_qubit(fig2_circuit())[0]
    three = [tuple(SingleQubit(unitary_group.rvs(2, random_state=rng)) for _ in range(3)) for _ in range(3)]
    yield "three-qubit 3 steps", build_multi_qubit(Circuit(3, tuple(three), (0, 0, 1)))[0]
    yield "idle-dot N=5", build_manybody_single_qubit(single_qubit_circuit(us[:5]), -1e-3)[0]
    H0, layout, tl = build_teleport(us[:2], 4.0, 0.0)
    pinned = H0 + input_pin(layout, (0, 0, 0))
    yield "teleport N=2 component", pinned.restrict(pinned.component_of(tl.start_index()))


def criterion_9():
    worst, parts = 0.0, []
    for label, H in _krylov_cases():
        assert H.dim <= 2048, label
        ref = np.linalg.eigvalsh(H.to_dense())[:4]
        got = lowest_eigenpairs(H, 4, method="lanczos", dense_cutoff=0, tol=1e-10).eigenvalues
        err = float(np.max(np.abs(got - ref)))
        worst = max(worst, err)
        parts.append(f"{label} (dim {H.dim}) {err:.0e}")
    return worst <= 1e-10, f"max deviation {worst:.1e} (tol 1e-10): " + ", ".join(parts), 60


CRITERIA = {
    1: ("uniform-chain gap", criterion_1),
    2: ("input splitting", criterion_2),
    3: ("gauge invariance", criterion_3),
    4: ("two-qubit CNOT", criterion_4),
    5: ("non-unitary tailoring", criterion_5),
    6: ("teleportation identity", criterion_6),
    7: ("teleport computer", criterion_7),
    8: ("many-body equivalence", criterion_8),
    9: ("Krylov vs dense", criterion_9),
}


def evaluate(number: int) -> tuple[bool, str]:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail, budget = fn()
    seconds = time.perf_counter() - t0
    ok = bool(ok) and seconds < budget
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}; {seconds:.2f} s (budget {budget} s)"
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance_lines):
    ok, line = evaluate(number)
    print(line)
    acceptance_lines.append(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(k) for k in sorted(CRITERIA)]
    for _, line in results:
        print(line, flush=True)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
