"""Quasi-local operators, sector-confined dynamics, and dissipative generators
for bosonic fields on an infinite lattice, computed at desk scale through
finite windows with controlled diagnostics."""

from .lattice import (
    FockTruncation,
    GridIndex,
    field_ops,
    ladder_ops,
    number_basis_state,
    site,
    site_conjugate,
    site_inner,
)
from .algebra import (
    ProductOperator,
    QuasiLocalOperator,
    add,
    adjoint,
    commutator,
    embed_dense,
    multiply,
)
from .states import (
    Background,
    LocalVector,
    PureStateVector,
    SectorId,
    apply,
    cross_sector_overlap_partial,
    equivalent,
    global_inner_product,
    inner_product,
    linear_combine,
    norm,
)
from .functionals import (
    MixedState,
    PureStateFunctional,
    evaluate,
    evaluate_mixed,
    expectation,
    expectation_mixed,
)
from .dynamics import (
    HamiltonianSpec,
    Window,
    WindowEvolution,
    evolve_heisenberg,
    evolve_schrodinger,
    interaction_density,
    kinetic_density,
    liouville_apply,
    momentum_density,
    number_density,
    window_hamiltonian,
)
from .reversal import (
    ReversalVerdict,
    check_TLT_equals_L,
    reverse_background,
    reverse_operator,
    reverse_state,
    sector_of_reversal,
)
from .master import (
    ObservableBasis,
    ProjectedGenerator,
    Superoperator,
    build_superoperator,
    compare_exact_vs_master,
    density_basis,
    dispersion_dissipation,
    project_split,
    self_energy,
    semigroup_evolve,
    weak_coupling_pole,
)
from .errors import (
    CapExceeded,
    ConfigError,
    LeakageError,
    NearSingularResolvent,
    PlateauNotFound,
    QlocalError,
    SectorMismatch,
    TruncationMismatch,
)

__version__ = "0.1.0"
