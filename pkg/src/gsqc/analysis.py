"""Experiments: build, solve, extract and compare against the oracles."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

from . import oracle
from .circuit import GateLibrary, single_qubit_circuit
from .eigensolver import (
    ConvergenceError,
    anchored_zero_mode,
    lowest_eigenpairs,
    lowest_nonzero_eigenvalue,
)
from .hamiltonian import (
    DEFAULT_MAX_DIM,
    BasisLayout,
    ChainProfile,
    SparseHermitian,
    build_nonunitary_chain,
    build_single_qubit,
    build_teleport,
    input_pin,
    profile_from_lambda,
)

ZERO_TOL = 1e-8


def random_unitaries(n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Haar-random 2x2 unitaries drawn from ``rng``."""
    return [unitary_group.rvs(2, random_state=rng) for _ in range(n)]


# ---------------------------------------------------------------------------
# mimic extraction


@dataclass
class MimicExtract:
    blocks: list[np.ndarray]
    weights: np.ndarray
    fidelities: np.ndarray
    output_row: int

    @property
    def diagonal_weight(self) -> float:
        """Total weight of the sector with every electron on the same row."""
        return float(np.sum(self.weights))

    @property
    def output_block(self) -> np.ndarray:
        return self.blocks[self.output_row]


def extract_mimic(state: np.ndarray, layout: BasisLayout, trace: oracle.EvolutionTrace) -> MimicExtract:
    """Per-row logical blocks of a ground state and their fidelity to the trace."""
    state = np.asarray(state)
    state = state / np.linalg.norm(state)
    if len(trace) != layout.rows:
        raise ValueError(f"trace has {len(trace)} states for {layout.rows} rows")
    blocks, weights, fids = [], [], []
    for i in range(layout.rows):
        b = layout.row_block(state, i)
        blocks.append(b)
        w = float(np.vdot(b, b).real)
        weights.append(w)
        fids.append(oracle.fidelity(trace.states[i], b) if w > 0 else float("nan"))
    return MimicExtract(blocks, np.array(weights), np.array(fids), layout.rows - 1)


# ---------------------------------------------------------------------------
# gap tables


@dataclass
class GapRow:
    param: float
    E0: float
    E1: float
    E2: float
    splitting: float
    gap: float
    reference: float
    converged: bool = True
    note: str = ""


@dataclass
class GapTable:
    kind: str
    rows: list[GapRow]
    slope: float | None = None

    columns = ("param", "E0", "E1", "E2", "splitting", "gap", "reference", "converged", "note")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def _spectrum(H: SparseHermitian, k: int, tol: float, seed: int) -> tuple[np.ndarray, bool, str]:
    try:
        return lowest_eigenpairs(H, k, tol=tol, seed=seed).eigenvalues, True, ""
    except ConvergenceError as exc:
        part = exc.partial.eigenvalues if exc.partial is not None else np.array([])
        out = np.full(k, np.nan)
        out[: part.size] = part[:k]
        return out, False, str(exc)


def _chain_row(H: SparseHermitian, twin: SparseHermitian, param, reference, tol, seed) -> GapRow:
    e, ok, note = _spectrum(H, 3, tol, seed)
    e0, ok0, note0 = _spectrum(twin, 3, tol, seed)
    return GapRow(
        float(param), float(e[0]), float(e[1]), float(e[2]), float(e[1] - e[0]),
        float(e0[2] - e0[0]), float(reference), ok and ok0, note or note0,
    )


def standard_gap_row(
    n_steps: int,
    delta: float = 0.0,
    eps: float = 1.0,
    unitaries: Sequence[np.ndarray] | None = None,
    tol: float = 1e-10,
    seed: int = 0,
) -> GapRow:
    us = unitaries if unitaries is not None else [GateLibrary.I.matrix] * n_steps
    circuit = single_qubit_circuit(us, 0)
    H, _ = build_single_qubit(circuit, delta, eps)
    twin, _ = build_single_qubit(circuit, 0.0, eps)
    return _chain_row(H, twin, n_steps, oracle.uniform_gap(n_steps, eps), tol, seed)


def geometric_profile(ratio: float, n_steps: int) -> ChainProfile:
    return profile_from_lambda(float(ratio) ** np.arange(n_steps + 1))


def well_profile(n_steps: int, center: float, depth: float = 4.0) -> ChainProfile:
    """Chain whose potential has a quadratic minimum at ``center * N``.

    The diagonal ``(v_0, 2v_1, ..., 2v_{N-1}, v_N)`` with unit hopping is
    shifted so its nodeless ground state has zero energy; that ground state
    becomes ``lam`` and the equal-hopping profile is rebuilt from it.
    """
    i = np.arange(n_steps + 1)
    v = 1.0 + depth * (i / n_steps - center) ** 2
    diag = 2 * v
    diag[0], diag[-1] = v[0], v[-1]
    from scipy.linalg import eigh_tridiagonal

    _, vec = eigh_tridiagonal(diag, -np.ones(n_steps), select="i", select_range=(0, 0))
    lam = np.abs(vec[:, 0])
    return profile_from_lambda(lam)


def nonunitary_gap_row(
    profile: ChainProfile,
    param: float,
    delta: float = 0.0,
    eps: float = 1.0,
    unitaries: Sequence[np.ndarray] | None = None,
    tol: float = 1e-10,
    seed: int = 0,
) -> GapRow:
    n = profile.n_steps
    us = unitaries if unitaries is not None else [GateLibrary.I.matrix] * n
    circuit = single_qubit_circuit(us, 0)
    H, _ = build_nonunitary_chain(circuit, profile, delta, eps)
    twin, _ = build_nonunitary_chain(circuit, profile, 0.0, eps)
    return _chain_row(H, twin, param, oracle.uniform_gap(n, eps), tol, seed)


@dataclass
class NonunitaryCheck:
    label: str
    n_steps: int
    min_eigenvalue: float
    kernel_residual: float
    weight_error: float
    lam_first: float
    lam_last: float
    gap: float
    uniform_gap: float
    min_site: int


def nonunitary_check(label: str, profile: ChainProfile, eps: float = 1.0, seed: int = 0) -> NonunitaryCheck:
    """PSD, kernel and row-weight checks for one tailored chain with random
    gates (the spectrum does not depend on them)."""
    n = profile.n_steps
    rng = np.random.default_rng(seed)
    circuit = single_qubit_circuit(random_unitaries(n, rng), 0)
    H, layout = build_nonunitary_chain(circuit, profile, 0.0, eps)
    e, vecs = np.linalg.eigh(H.to_dense())
    psi = oracle.mimic_state(circuit, (0,), profile)
    res = float(np.linalg.norm(H.apply(psi)))
    # any vector of the (two-fold) kernel carries the same row weights
    ext = extract_mimic(vecs[:, 0], layout, oracle.evolve(circuit, (0,)))
    lam = np.asarray(profile.lam)
    err = float(np.max(np.abs(ext.weights - lam**2 / np.sum(lam**2))))
    v = np.asarray(profile.v)
    return NonunitaryCheck(
        label, n, float(e[0]), res, err, float(lam[0]), float(lam[-1]),
        float(e[2] - e[0]), oracle.uniform_gap(n, eps), int(np.argmin(v)),
    )


# ---------------------------------------------------------------------------
# teleportation


@dataclass
class TeleportReport:
    n_gates: int
    lam: float
    dim: int
    component_dim: int
    p: float
    p_min: float
    fidelity: float
    gap: float | None
    gap_estimate: float
    zero_residual: float
    gap_residual: float | None
    output_state: list[list[float]] = field(default_factory=list)

    @property
    def gap_ratio(self) -> float | None:
        return None if self.gap is None else self.gap_estimate / self.gap

    def within_factor(self, factor: float) -> bool:
        return self.gap is not None and 1 / factor <= self.gap / self.gap_estimate <= factor


def teleport_ground_state(
    unitaries: Sequence[np.ndarray],
    lam: float,
    eps: float = 1.0,
    max_dim: int | None = DEFAULT_MAX_DIM,
    tol: float = 1e-12,
):
    """History state started from all-zero inputs, as the unique zero mode
    of the unbiased Hamiltonian plus an input pin on row 0.

    Returns ``(psi, H0, layout, teleport_layout, component, zero_residual)``
    where ``component`` indexes the invariant block holding the start state.
    """
    H0, layout, tl = build_teleport(unitaries, lam, 0.0, eps, max_dim=max_dim)
    pinned = H0 + input_pin(layout, (0,) * layout.qubits, strength=eps)
    start = tl.start_index()
    comp = pinned.component_of(start)
    sub = pinned.restrict(comp)
    anchor = int(np.searchsorted(comp, start))
    mode = anchored_zero_mode(sub, anchor, tol=tol)
    psi = np.zeros(H0.dim, dtype=mode.vector.dtype)
    psi[comp] = mode.vector
    return psi, H0, layout, tl, comp, mode.residual


def teleport_run(
    unitaries: Sequence[np.ndarray],
    lam: float,
    eps: float = 1.0,
    max_dim: int | None = DEFAULT_MAX_DIM,
    compute_gap: bool = True,
    seed: int = 0,
) -> TeleportReport:
    """Success probability, conditional output fidelity and gap of the
    teleportation computer."""
    us = [np.asarray(u, dtype=complex) for u in unitaries]
    psi, H0, layout, tl, comp, zres = teleport_ground_state(us, lam, eps, max_dim)
    target = np.array([1.0, 0.0], dtype=complex)
    for u in us:
        target = u @ target
    block = tl.conditional_block(psi)
    gap = gres = None
    if compute_gap:
        level = lowest_nonzero_eigenvalue(H0.restrict(comp), zero_tol=ZERO_TOL * eps, seed=seed)
        gap, gres = level.value, level.residual
    out = block / np.linalg.norm(block)
    out = out * np.exp(-1j * np.angle(out[np.argmax(np.abs(out))]))
    return TeleportReport(
        len(us), float(lam), H0.dim, int(comp.size), tl.success_probability(psi),
        oracle.teleport_probability_bound(lam, len(us)), oracle.fidelity(target, block),
        gap, oracle.teleport_gap_estimate(lam, eps), zres, gres,
        [[float(z.real), float(z.imag)] for z in out],
    )


def teleport_biased_ground_state(
    unitaries: Sequence[np.ndarray], lam: float, delta: float = -1e-3, eps: float = 1.0
):
    """Lowest state of the literally biased teleport Hamiltonian (small N only).

    Returns ``(p, fidelity, overlap)`` where ``overlap`` is the fidelity with
    the pinned history state.
    """
    us = [np.asarray(u, dtype=complex) for u in unitaries]
    H, layout, tl = build_teleport(us, lam, delta, eps, max_dim=14**3)
    comp = H.component_of(tl.start_index())
    g = lowest_eigenpairs(H.restrict(comp), 1, method="dense").ground_state()
    psi = np.zeros(H.dim, dtype=complex)
    psi[comp] = g
    ref, *_ = teleport_ground_state(us, lam, eps, max_dim=14**3)
    target = np.array([1.0, 0.0], dtype=complex)
    for u in us:
        target = u @ target
    block = tl.conditional_block(psi)
    fid = oracle.fidelity(target, block) if np.linalg.norm(block) > 0 else 0.0
    return tl.success_probability(psi), fid, oracle.fidelity(ref, psi)


# ---------------------------------------------------------------------------
# artifacts


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def write_table(path: Path, table: GapTable) -> Path:
    return write_csv(path, GapTable.columns, ([getattr(r, c) for c in GapTable.columns] for r in table.rows))


def write_xy(path: Path, x: Sequence[float], y: Sequence[float]) -> Path:
    """Two-column whitespace-separated data file for plotting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for a, b in zip(x, y):
            fh.write(f"{fmt(float(a))} {fmt(float(b))}\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if not math.isfinite(x) else float(f"{x:.15g}")
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path
