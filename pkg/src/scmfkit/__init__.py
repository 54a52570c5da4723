"""scmfkit: self-consistent mean-field solvers over finite bases, with an
exact Fock-space oracle and a differentiability/representability lab."""

from .errors import (
    BracketError,
    ConfigError,
    ConjugateMissing,
    DimensionError,
    DomainError,
    InvalidMatrix,
    InvalidOccupation,
    LabelError,
    NotRepresentable,
    ScmfkitError,
    SectorError,
    SingularU,
    TooLarge,
)
from .matrixcore import (
    BogoliubovTransform,
    DensityMatrix,
    GeneralizedDensity,
    HermitianMatrix,
    PairingTensor,
    SPBasis,
    assemble_generalized,
    density_from_orbitals,
    eig_hermitian,
    idempotency_defect,
    qp_symmetry_defect,
)
from .fock_oracle import (
    FockBasis,
    ManyBodyState,
    SearchOptions,
    TwoBodyHamiltonian,
    apply_hamiltonian,
    constrained_search,
    enumerate_basis,
    ground_state,
    hamiltonian_from_config,
    hubbard_chain,
    one_body_density,
    pair_condensate_state,
    pairing_hamiltonian,
    pairing_tensor_of,
    two_body_correlation,
)
from .edf import (
    EnergyTerm,
    KSFunctional,
    LatticeModel1D,
    PrincipalVariable,
    fd_gradient_check,
    functional_from_config,
    hf_energy_and_field,
    hf_from_hamiltonian,
    hfb_energy_and_fields,
    hfb_from_hamiltonian,
    ks_fields,
    ksbdg_fields,
    lattice_functional,
    repartition,
    site_density,
)
from .scf import (
    SolverConfig,
    SolverReport,
    condensate_amplitude,
    solve_hf,
    solve_hfb,
    solve_ks,
    solve_ksbdg,
)
from .search import (
    KinkReport,
    ScanCurve,
    appendix_scan,
    hk_scan,
    kink_scan,
    ks_representability_probe,
    phi,
    phi_inner_min,
)

__version__ = "0.1.0"
