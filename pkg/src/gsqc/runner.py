"""Config-driven experiments with declared assertions and run artifacts.

A config is a TOML file::

    name = "fig2"
    experiment = "simulate"
    seed = 0
    output = "runs/fig2"

    [params]
    circuit = "fig2"
    delta = 1e-3

    [budget]
    max_dim = 537824

    [assert]
    final_fidelity_min = 0.99999999

Every experiment returns its checks; the run passes iff all of them do.
"""

from __future__ import annotations

import hashlib
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from . import __version__, oracle
from .analysis import (
    GapRow,
    GapTable,
    extract_mimic,
    fit_loglog_slope,
    geometric_profile,
    nonunitary_check,
    nonunitary_gap_row,
    random_unitaries,
    standard_gap_row,
    teleport_run,
    well_profile,
    write_csv,
    write_json,
    write_table,
    write_xy,
)
from .circuit import Circuit, GateLibrary, fig2_circuit, load_circuit, parse_circuit, single_qubit_circuit
from .eigensolver import lowest_eigenpairs
from .hamiltonian import DEFAULT_MAX_DIM, build_multi_qubit, build_single_qubit, input_deltas
from .manybody import (
    build_manybody_single_qubit,
    idle_dominance,
    meaningful_projection,
    outside_weight,
    subspace_leakage,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXPERIMENTS = ("simulate", "gap-scan", "nonunitary", "teleport", "manybody")
TOP_KEYS = {"name", "experiment", "seed", "output", "params", "budget", "assert"}


class ConfigError(ValueError):
    pass


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    threshold: object

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value} (threshold {self.threshold})"


@dataclass
class RunResult:
    name: str
    experiment: str
    checks: list[Check]
    report: dict
    artifacts: list[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# ---------------------------------------------------------------------------
# config handling


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw.setdefault("_base", str(path.parent))
    return normalize_config(raw)


def normalize_config(raw: dict) -> dict:
    extra = set(raw) - TOP_KEYS - {"_base"}
    if extra:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(extra))}")
    kind = raw.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(EXPERIMENTS)}")
    cfg = {
        "name": str(raw.get("name", kind)),
        "experiment": kind,
        "seed": raw.get("seed", 0),
        "output": str(raw.get("output", f"runs/{raw.get('name', kind)}")),
        "params": dict(raw.get("params", {})),
        "budget": dict(raw.get("budget", {})),
        "assert": dict(raw.get("assert", {})),
        "_base": raw.get("_base", "."),
    }
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    for section in ("params", "budget", "assert"):
        if not isinstance(raw.get(section, {}), dict):
            raise ConfigError(f"[{section}] must be a table")
    return cfg


def config_hash(cfg: dict) -> str:
    public = {k: v for k, v in cfg.items() if not k.startswith("_") and k != "output"}
    blob = json.dumps(public, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


class _Params:
    """Typed access to a config section that rejects unused keys."""

    def __init__(self, section: str, data: dict):
        self.section, self.data, self.used = section, data, set()

    def get(self, key: str, default, kind: Callable = float):
        self.used.add(key)
        if key not in self.data:
            return default
        value = self.data[key]
        try:
            if kind is list:
                if not isinstance(value, list):
                    raise TypeError
                return value
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"[{self.section}] {key} = {value!r} is not a valid {kind.__name__}") from None

    def finish(self):
        extra = set(self.data) - self.used
        if extra:
            raise ConfigError(f"[{self.section}] unknown keys: {', '.join(sorted(extra))}")


def _unitaries(spec, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    if spec == "random":
        return random_unitaries(n, rng)
    if spec == "identity":
        return [GateLibrary.I.matrix] * n
    if isinstance(spec, list):
        if len(spec) != n:
            raise ConfigError(f"need {n} gate names, got {len(spec)}")
        library = GateLibrary.named()
        unknown = [str(g) for g in spec if str(g) not in library]
        if unknown:
            raise ConfigError(f"unknown gates {unknown}; known: {', '.join(sorted(library))}")
        return [library[str(g)].matrix for g in spec]
    raise ConfigError(f"gates must be 'random', 'identity' or a list of names, got {spec!r}")


def _circuit(spec: str, base: str) -> Circuit:
    if spec == "fig2":
        return fig2_circuit()
    if "\n" in spec:
        return parse_circuit(spec)
    path = Path(spec)
    if not path.is_absolute() and not path.exists():
        path = Path(base) / path
    if not path.exists():
        raise ConfigError(f"circuit file {spec} not found")
    return load_circuit(path)


# ---------------------------------------------------------------------------
# experiments


def run_simulate(cfg: dict, out: Path) -> RunResult:
    p, a = _Params("params", cfg["params"]), _Params("assert", cfg["assert"])
    circuit = _circuit(p.get("circuit", "fig2", str), cfg["_base"])
    delta = p.get("delta", 1e-3)
    eps = p.get("eps", 1.0)
    dump = p.get("dump", "", str)
    max_dim = _Params("budget", cfg["budget"]).get("max_dim", DEFAULT_MAX_DIM, int)
    deltas = input_deltas(circuit, abs(delta))
    fid_min = a.get("final_fidelity_min", 1 - 10 * abs(delta) if circuit.qubits == 1 else 1 - 1e-8)
    row_min = a.get("row_fidelity_min", 1 - 10 * abs(delta))
    p.finish()
    a.finish()
    if circuit.qubits == 1:
        H, layout = build_single_qubit(circuit, deltas[0], eps)
    else:
        H, layout = build_multi_qubit(circuit, deltas, eps, max_dim=max_dim)
    k = min(4, H.dim)
    spec = lowest_eigenpairs(H, k, seed=cfg["seed"])
    trace = oracle.evolve(circuit)
    ext = extract_mimic(spec.ground_state(), layout, trace)
    name = cfg["name"]
    arts = [
        write_csv(out / f"{name}.rows.csv", ("row", "weight", "fidelity"),
                  [(i, w, f) for i, (w, f) in enumerate(zip(ext.weights, ext.fidelities))]),
        write_xy(out / f"{name}.weights.dat", range(layout.rows), ext.weights),
    ]
    if dump:
        dpath = out / dump
        with dpath.open("w") as fh:
            H.dump(fh)
        arts.append(dpath)
    final = float(ext.fidelities[-1])
    checks = [Check("final_row_fidelity", final >= fid_min, final, fid_min)]
    if circuit.qubits == 1:
        worst = float(np.nanmin(ext.fidelities))
        checks.append(Check("min_row_fidelity", worst >= row_min, worst, row_min))
    report = {
        "circuit": {"qubits": circuit.qubits, "steps": circuit.n_steps},
        "dim": H.dim,
        "deltas": deltas,
        "energies": spec.eigenvalues,
        "residuals": spec.residuals,
        "row_weights": ext.weights,
        "row_fidelities": ext.fidelities,
        "diagonal_weight": ext.diagonal_weight,
        "final_row_state": [[z.real, z.imag] for z in ext.output_block / np.linalg.norm(ext.output_block)],
        "expected_final_state": [[z.real, z.imag] for z in trace.final],
    }
    return RunResult(name, "simulate", checks, report, arts)


def run_gap_scan(cfg: dict, out: Path) -> RunResult:
    p, a = _Params("params", cfg["params"]), _Params("assert", cfg["assert"])
    rng = np.random.default_rng(cfg["seed"])
    kind = p.get("kind", "standard", str)
    eps = p.get("eps", 1.0)
    gates = cfg["params"].get("gates", "identity")
    p.used.add("gates")
    checks: list[Check] = []
    name = cfg["name"]
    if kind == "standard":
        values = [int(v) for v in p.get("values", [4, 8, 16, 32, 64], list)]
        delta = p.get("delta", 1e-3)
        gap_tol = a.get("gap_rel_tol", 1e-8)
        split_tol = a.get("splitting_rel_tol", 0.01)
        slope_target = a.get("slope", -2.0)
        slope_tol = a.get("slope_tol", 0.05)
        rows = [standard_gap_row(n, delta, eps, _unitaries(gates, n, rng), seed=cfg["seed"]) for n in values]
        table = GapTable("standard", rows)
        gaps, refs = table.column("gap"), table.column("reference")
        rel = float(np.max(np.abs(gaps - refs) / refs))
        checks.append(Check("gap_vs_chain_formula", rel <= gap_tol, rel, gap_tol))
        if len(values) >= 2:
            table.slope = fit_loglog_slope(np.array(values) + 1, gaps)
            ok = abs(table.slope - slope_target) <= slope_tol
            checks.append(Check("loglog_slope", ok, table.slope, f"{slope_target}+-{slope_tol}"))
        if delta:
            est = np.array([oracle.splitting_estimate(n, delta, eps) for n in values])
            srel = float(np.max(np.abs(table.column("splitting") - est) / est))
            checks.append(Check("splitting_vs_first_order", srel <= split_tol, srel, split_tol))
    elif kind == "nonunitary":
        n = p.get("n_steps", 16, int)
        values = [float(v) for v in p.get("values", [0.5, 1.0, 2.0], list)]
        delta = p.get("delta", 1e-3)
        rows = [
            nonunitary_gap_row(geometric_profile(r, n), r, delta, eps, _unitaries(gates, n, rng), seed=cfg["seed"])
            for r in values
        ]
        table = GapTable("nonunitary", rows)
        done = all(r.converged for r in rows)
        checks.append(Check("all_converged", done, done, True))
    elif kind == "teleport":
        n = p.get("n_gates", 3, int)
        values = [float(v) for v in p.get("values", [2.0, 4.0, 8.0], list)]
        max_dim = _Params("budget", cfg["budget"]).get("max_dim", DEFAULT_MAX_DIM, int)
        factor = a.get("gap_factor", 3.0)
        rows = []
        us = _unitaries(gates, n, rng)
        for lam in values:
            rep = teleport_run(us, lam, eps, max_dim=max_dim, seed=cfg["seed"])
            rows.append(GapRow(lam, 0.0, float("nan"), float("nan"), float("nan"), rep.gap,
                               rep.gap_estimate, True, f"p={rep.p:.6g}"))
            ok = rep.within_factor(factor)
            checks.append(Check(f"gap_within_factor[lam={lam:g}]", ok, rep.gap / rep.gap_estimate, f"1/{factor}..{factor}"))
        table = GapTable("teleport", rows)
    else:
        raise ConfigError(f"unknown gap-scan kind {kind!r}")
    p.finish()
    a.finish()
    params = table.column("param")
    arts = [
        write_table(out / f"{name}.csv", table),
        write_xy(out / f"{name}.gap.dat", params, table.column("gap")),
        write_xy(out / f"{name}.reference.dat", params, table.column("reference")),
    ]
    if kind != "teleport":
        arts.append(write_xy(out / f"{name}.splitting.dat", params, table.column("splitting")))
    report = {"kind": kind, "rows": table.rows, "slope": table.slope,
              "all_converged": all(r.converged for r in table.rows)}
    return RunResult(name, "gap-scan", checks, report, arts)


def run_nonunitary(cfg: dict, out: Path) -> RunResult:
    p, a = _Params("params", cfg["params"]), _Params("assert", cfg["assert"])
    n = p.get("n_steps", 16, int)
    ratios = [float(r) for r in p.get("ratios", [0.5, 2.0], list)]
    depth = p.get("depth", 4.0)
    psd_tol = a.get("psd_tol", 1e-10)
    kernel_tol = a.get("kernel_tol", 1e-12)
    weight_tol = a.get("weight_tol", 1e-8)
    dominance = a.get("dominance", 10.0)
    p.finish()
    a.finish()
    profiles = {f"geometric_r{r:g}": geometric_profile(r, n) for r in ratios}
    profiles.update(
        well_left=well_profile(n, 0.0, depth),
        well_right=well_profile(n, 1.0, depth),
        well_center=well_profile(n, 0.5, depth),
    )
    results = {k: nonunitary_check(k, prof, seed=cfg["seed"]) for k, prof in profiles.items()}
    checks = []
    for k, r in results.items():
        checks.append(Check(f"psd[{k}]", r.min_eigenvalue >= -psd_tol, r.min_eigenvalue, -psd_tol))
        checks.append(Check(f"kernel[{k}]", r.kernel_residual <= kernel_tol, r.kernel_residual, kernel_tol))
        checks.append(Check(f"row_weights[{k}]", r.weight_error <= weight_tol, r.weight_error, weight_tol))
    left, right, center = results["well_left"], results["well_right"], results["well_center"]
    checks += [
        Check("left_minimum_favours_first_row", left.lam_first >= dominance * left.lam_last,
              left.lam_first / left.lam_last, dominance),
        Check("right_minimum_favours_last_row", right.lam_last >= dominance * right.lam_first,
              right.lam_last / right.lam_first, dominance),
        Check("centered_minimum_beats_uniform_gap", center.gap > center.uniform_gap,
              center.gap, center.uniform_gap),
    ]
    name = cfg["name"]
    fields = ("label", "n_steps", "min_eigenvalue", "kernel_residual", "weight_error",
              "lam_first", "lam_last", "gap", "uniform_gap", "min_site")
    arts = [write_csv(out / f"{name}.csv", fields, [[getattr(r, f) for f in fields] for r in results.values()])]
    for k, prof in profiles.items():
        arts.append(write_xy(out / f"{name}.{k}.lam.dat", range(n + 1), prof.lam))
        arts.append(write_xy(out / f"{name}.{k}.v.dat", range(n + 1), prof.v))
    report = {"checks": results, "profiles": {k: {"v": pr.v, "t": pr.t, "lam": pr.lam} for k, pr in profiles.items()}}
    return RunResult(name, "nonunitary", checks, report, arts)


def run_teleport(cfg: dict, out: Path) -> RunResult:
    p, a = _Params("params", cfg["params"]), _Params("assert", cfg["assert"])
    rng = np.random.default_rng(cfg["seed"])
    n = p.get("n_gates", 3, int)
    lam_raw = cfg["params"].get("lam", 4.0)
    p.used.add("lam")
    lams = [float(x) for x in (lam_raw if isinstance(lam_raw, list) else [lam_raw])]
    gates = cfg["params"].get("gates", "random")
    p.used.add("gates")
    with_gap = p.get("gap", True, bool)
    eps = p.get("eps", 1.0)
    max_dim = _Params("budget", cfg["budget"]).get("max_dim", DEFAULT_MAX_DIM, int)
    fid_min = a.get("fidelity_min", 1 - 1e-6)
    factor = a.get("gap_factor", 3.0)
    p.finish()
    a.finish()
    us = _unitaries(gates, n, rng)
    reports = [teleport_run(us, lam, eps, max_dim=max_dim, compute_gap=with_gap, seed=cfg["seed"]) for lam in lams]
    checks = []
    for r in reports:
        tag = f"lam={r.lam:g}"
        checks.append(Check(f"p_at_least_bound[{tag}]", r.p >= r.p_min, r.p, r.p_min))
        checks.append(Check(f"output_fidelity[{tag}]", r.fidelity >= fid_min, r.fidelity, fid_min))
        if with_gap:
            checks.append(Check(f"gap_within_factor[{tag}]", r.within_factor(factor),
                                r.gap / r.gap_estimate, f"1/{factor}..{factor}"))
    name = cfg["name"]
    fields = ("lam", "p", "p_min", "fidelity", "gap", "gap_estimate", "zero_residual", "gap_residual")
    arts = [
        write_csv(out / f"{name}.csv", fields, [[getattr(r, f) for f in fields] for r in reports]),
        write_xy(out / f"{name}.p.dat", lams, [r.p for r in reports]),
    ]
    if with_gap:
        arts.append(write_xy(out / f"{name}.gap.dat", lams, [r.gap for r in reports]))
    report = {"n_gates": n, "unitaries": [[[z.real, z.imag] for z in u.ravel()] for u in us], "runs": reports}
    return RunResult(name, "teleport", checks, report, arts)


def run_manybody(cfg: dict, out: Path) -> RunResult:
    p, a = _Params("params", cfg["params"]), _Params("assert", cfg["assert"])
    rng = np.random.default_rng(cfg["seed"])
    sizes = [int(v) for v in p.get("n_steps", [1, 2, 3, 4], list)]
    delta = p.get("delta", -1e-3)
    tol = a.get("match_tol", 1e-12)
    leak_tol = a.get("leakage_tol", 1e-12)
    ratio_tol = a.get("ratio_tol", 1e-9)
    p.finish()
    a.finish()
    rows, checks = [], []
    for n in sizes:
        circuit = single_qubit_circuit(random_unitaries(n, rng), 0)
        H, basis = build_manybody_single_qubit(circuit, delta)
        Hs, _ = build_single_qubit(circuit, delta)
        err = float(np.max(np.abs(meaningful_projection(H, basis) - Hs.to_dense())))
        inv = subspace_leakage(H, basis)
        ground = lowest_eigenpairs(H, 1).ground_state()
        leak = outside_weight(ground, basis)
        mimic = basis.embed(oracle.mimic_state(circuit, (0,)))
        ratio = idle_dominance(mimic, basis).ratio
        ground_ratio = idle_dominance(ground, basis).ratio
        rows.append((n, basis.dim, err, inv, leak, ratio, ground_ratio))
        checks += [
            Check(f"projection_matches_standard[N={n}]", err <= tol, err, tol),
            Check(f"subspace_invariant[N={n}]", inv <= tol, inv, tol),
            Check(f"ground_leakage[N={n}]", leak <= leak_tol, leak, leak_tol),
            Check(f"idle_ratio_equals_N[N={n}]", abs(ratio - n) <= ratio_tol, ratio, n),
        ]
    name = cfg["name"]
    fields = ("n_steps", "dim", "projection_error", "subspace_leakage", "ground_leakage",
              "idle_ratio_mimic", "idle_ratio_ground")
    arts = [
        write_csv(out / f"{name}.csv", fields, rows),
        write_xy(out / f"{name}.idle_ratio.dat", [r[0] for r in rows], [r[5] for r in rows]),
    ]
    return RunResult(name, "manybody", checks, {"rows": [dict(zip(fields, r)) for r in rows]}, arts)


RUNNERS = {
    "simulate": run_simulate,
    "gap-scan": run_gap_scan,
    "nonunitary": run_nonunitary,
    "teleport": run_teleport,
    "manybody": run_manybody,
}


def versions() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "gsqc": __version__}


def execute(cfg: dict, out: str | Path | None = None) -> RunResult:
    """Run a normalized config and write its report and manifest."""
    out = Path(out or cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    result = RUNNERS[cfg["experiment"]](cfg, out)
    name = cfg["name"]
    result.report["checks"] = [c.__dict__ for c in result.checks]
    result.report["passed"] = result.passed
    report_path = write_json(out / f"{name}.report.json", result.report)
    result.artifacts.append(report_path)
    manifest = {
        "name": name,
        "experiment": cfg["experiment"],
        "config_sha256": config_hash(cfg),
        "config": {k: v for k, v in cfg.items() if not k.startswith("_")},
        "seed": cfg["seed"],
        "versions": versions(),
        "platform": sys.platform,
        "artifacts": sorted(p.name for p in result.artifacts),
        "passed": result.passed,
    }
    manifest["config"]["output"] = str(out)
    result.artifacts.append(write_json(out / f"{name}.manifest.json", manifest))
    return result
