"""Noisy-VQE toolkit: ADAPT-VQE and fixed-ansatz VQE on a depolarizing
density-matrix simulator, noise-susceptibility analysis, and gate-error
budgets for chemical accuracy."""

__version__ = "0.1.0"

from .adapt import (
    AdaptConfig,
    AdaptRecord,
    adapt_run,
    bfgs_minimize,
    nelder_mead,
    optimize_parameters,
    pool_gradients,
    truncation_prefixes,
)
from .analysis import (
    CHEMICAL_ACCURACY,
    PcEstimate,
    ScalingFit,
    SusceptibilityReport,
    SweepTable,
    chi_from_density_derivative,
    estimate_pc,
    noise_susceptibility,
    optimal_truncation,
    pc_scaling_fit,
    sweep_crossing_pc,
    sweep_noise,
    zne_linear,
)
from .ansatz import (
    Ansatz,
    AnsatzElement,
    Pool,
    build_kupccgsd,
    build_pool,
    build_uccsd,
    hartree_fock_index,
)
from .chem import (
    BUNDLED_MOLECULES,
    FrozenCoreSpec,
    MolecularIntegrals,
    Problem,
    load_bundled,
    parse_fcidump,
)
from .exceptions import (
    ConfigError,
    DimensionError,
    FcidumpError,
    NumericIntegrityError,
    ResourceLimitError,
    StalledError,
    VqeNoiseError,
)
from .operators import (
    FermionOperator,
    PauliString,
    QubitOperator,
    commutator,
    exact_spectrum,
    expectation,
    jordan_wigner,
)
from .simulator import (
    NOISELESS,
    GateOp,
    NoiseModel,
    QuantumState,
    apply_depolarizing,
    apply_gate,
    cnot_count,
    compile_circuit,
    run_circuit,
)

__all__ = [
    "AdaptConfig",
    "AdaptRecord",
    "Ansatz",
    "AnsatzElement",
    "BUNDLED_MOLECULES",
    "CHEMICAL_ACCURACY",
    "ConfigError",
    "DimensionError",
    "FcidumpError",
    "FermionOperator",
    "FrozenCoreSpec",
    "GateOp",
    "MolecularIntegrals",
    "NOISELESS",
    "NoiseModel",
    "NumericIntegrityError",
    "PauliString",
    "PcEstimate",
    "Pool",
    "Problem",
    "QuantumState",
    "QubitOperator",
    "ResourceLimitError",
    "ScalingFit",
    "StalledError",
    "SusceptibilityReport",
    "SweepTable",
    "VqeNoiseError",
    "adapt_run",
    "apply_depolarizing",
    "apply_gate",
    "bfgs_minimize",
    "build_kupccgsd",
    "build_pool",
    "build_uccsd",
    "chi_from_density_derivative",
    "cnot_count",
    "commutator",
    "compile_circuit",
    "estimate_pc",
    "exact_spectrum",
    "expectation",
    "hartree_fock_index",
    "jordan_wigner",
    "load_bundled",
    "nelder_mead",
    "noise_susceptibility",
    "optimal_truncation",
    "optimize_parameters",
    "parse_fcidump",
    "pc_scaling_fit",
    "pool_gradients",
    "run_circuit",
    "sweep_crossing_pc",
    "sweep_noise",
    "truncation_prefixes",
    "zne_linear",
]
