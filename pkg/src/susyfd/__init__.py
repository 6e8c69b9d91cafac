"""Higher-order supersymmetric partners of one-dimensional Schrodinger operators
built by a finite-difference recursion on superpotentials."""

from .backlund import (
    assemble_potential,
    backlund_step,
    build_chain,
    default_family,
    omega_step,
    parity_potential,
    parity_residual,
    zero_mode,
)
from .catalog import (
    BranchSpec,
    EnergyFamily,
    abraham_moses2,
    bargmann_double_well,
    branch_family,
    free_particle_beta,
    free_particle_seed,
    oscillator_potential,
    oscillator_seed,
    periodic_confluent,
    zero_potential,
)
from .confluent import (
    AM2_THRESHOLD,
    ConfluentIteration,
    am2_bracket_zeros,
    am2_threshold,
    confluent_step_derivative,
    confluent_step_integral,
    energy_derivative_fd,
    iterated_confluent,
    key_function,
    key_function_recurrence,
    nonsingularity_domain_am2,
)
from .core import (
    DEFAULT_WINDOW,
    ChainStep,
    CheckResult,
    Grid,
    RealFunction,
    StepKind,
    SusyChain,
    VerificationReport,
    add_derivative,
    classify_singularities,
    discover_poles,
    exclusion_windows,
    is_pole,
)
from .errors import *  # noqa: F401,F403
from .riccati import beta_from_u, general_solution, riccati_residual, solve_schrodinger
from .verify import (
    DEFAULT_TOLERANCES,
    OracleSeed,
    TestFunctionSet,
    crum_oracle,
    factorization_residual,
    intertwining_residual,
    map_eigenfunction,
    verify_chain,
    wronskian_jet,
)

__version__ = "0.1.0"
