"""Ground-state quantum computation: history-state Hamiltonians, their low
spectrum, and checks against conventional gate-model references."""

__version__ = "0.1.0"

from .circuit import (  # noqa: E402
    CNOT,
    Boost,
    Circuit,
    CircuitError,
    GateLibrary,
    Projection,
    SingleQubit,
    fig2_circuit,
    load_circuit,
    parse_circuit,
    serialize,
    single_qubit_circuit,
)
from .eigensolver import (  # noqa: E402
    ConvergenceError,
    SpectrumResult,
    gap_report,
    lowest_eigenpairs,
    lowest_nonzero_eigenvalue,
)
from .hamiltonian import (  # noqa: E402
    BasisLayout,
    BudgetError,
    ChainProfile,
    SparseHermitian,
    TeleportLayout,
    build_multi_qubit,
    build_nonunitary_chain,
    build_single_qubit,
    build_teleport,
    profile_from_lambda,
)
