"""Command-line entry point.

Exit status: 0 when every declared check passes, 1 when a check (or the
solver) fails, 2 for configuration or input errors, 3 when a run would
exceed its resource budget.
"""

from __future__ import annotations

import argparse
import sys
import time

from .circuit import CircuitError
from .eigensolver import ConvergenceError
from .hamiltonian import DEFAULT_MAX_DIM, BudgetError, ProfileError
from .runner import ConfigError, execute, load_config, normalize_config

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser, name: str):
    p.add_argument("--out", help=f"output directory (default runs/{name})")
    p.add_argument("--name", default=name, help="artifact file prefix")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gsqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="ground state of a circuit file versus gate-model evolution")
    p.add_argument("circuit", help="circuit file, or 'fig2' for the built-in CNOT example")
    p.add_argument("--delta", type=float, default=1e-3, help="bias magnitude; signs follow the inputs")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--dump-hamiltonian", metavar="FILE", help="also write the operator as 'i j re im' text")
    _common(p, "simulate")

    p = sub.add_parser("gap-scan", help="splitting and gap over a parameter sweep")
    p.add_argument("--kind", choices=("standard", "nonunitary", "teleport"), default="standard")
    p.add_argument("--values", type=float, nargs="+",
                   help="N values (standard), ratios r (nonunitary) or lambda values (teleport)")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--gates", choices=("identity", "random"), default="identity")
    p.add_argument("--n-steps", type=int, default=16, help="chain length for nonunitary scans")
    p.add_argument("--n-gates", type=int, default=3, help="gate count for teleport scans")
    p.add_argument("--max-dim", type=int, default=DEFAULT_MAX_DIM)
    _common(p, "gap-scan")

    p = sub.add_parser("nonunitary", help="tailored amplitude profiles and potential-minimum scenarios")
    p.add_argument("--n-steps", type=int, default=16)
    p.add_argument("--ratios", type=float, nargs="+", default=[0.5, 2.0])
    p.add_argument("--depth", type=float, default=4.0, help="depth of the quadratic potential wells")
    _common(p, "nonunitary")

    p = sub.add_parser("teleport", help="teleportation computer: success probability, fidelity, gap")
    p.add_argument("--n-gates", type=int, default=3)
    p.add_argument("--lam", type=float, nargs="+", default=[4.0])
    p.add_argument("--gates", default="random", help="'random', 'identity' or comma-separated gate names")
    p.add_argument("--no-gap", action="store_true", help="skip the gap computation")
    p.add_argument("--max-dim", type=int, default=DEFAULT_MAX_DIM, help="Hilbert-space budget")
    _common(p, "teleport")

    p = sub.add_parser("manybody", help="idle-dot encoding versus the standard encoding")
    p.add_argument("--n-steps", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--delta", type=float, default=-1e-3)
    _common(p, "manybody")

    p = sub.add_parser("run", help="run an experiment described by a TOML config")
    p.add_argument("config")
    p.add_argument("--out", help="override the config's output directory")
    return parser


def config_from_args(args: argparse.Namespace) -> dict:
    if args.command == "run":
        return load_config(args.config)
    params: dict = {}
    budget: dict = {}
    if args.command == "simulate":
        params = {"circuit": args.circuit, "delta": args.delta, "eps": args.eps}
        if args.dump_hamiltonian:
            params["dump"] = args.dump_hamiltonian
    elif args.command == "gap-scan":
        params = {"kind": args.kind, "gates": args.gates}
        if args.values:
            params["values"] = list(args.values)
        if args.delta is not None:
            params["delta"] = args.delta
        if args.kind == "nonunitary":
            params["n_steps"] = args.n_steps
        if args.kind == "teleport":
            params["n_gates"] = args.n_gates
            budget["max_dim"] = args.max_dim
            params.pop("delta", None)
    elif args.command == "nonunitary":
        params = {"n_steps": args.n_steps, "ratios": args.ratios, "depth": args.depth}
    elif args.command == "teleport":
        gates = args.gates if args.gates in ("random", "identity") else args.gates.split(",")
        params = {"n_gates": args.n_gates, "lam": args.lam, "gates": gates, "gap": not args.no_gap}
        budget["max_dim"] = args.max_dim
    elif args.command == "manybody":
        params = {"n_steps": args.n_steps, "delta": args.delta}
    raw = {
        "name": args.name,
        "experiment": args.command,
        "seed": args.seed,
        "output": args.out or f"runs/{args.name}",
        "params": params,
        "budget": budget,
    }
    return normalize_config(raw)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = config_from_args(args)
        result = execute(cfg, getattr(args, "out", None))
    except (ConfigError, CircuitError, ProfileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetError, MemoryError) as exc:
        print(f"resource limit: {exc or 'out of memory'}", file=sys.stderr)
        return EXIT_RESOURCE
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    for check in result.checks:
        print(check.line())
    print(f"{result.name}: {'passed' if result.passed else 'FAILED'} "
          f"({len(result.checks)} checks, {time.perf_counter() - t0:.1f} s)")
    for path in result.artifacts:
        print(f"  wrote {path}")
    return EXIT_OK if result.passed else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
