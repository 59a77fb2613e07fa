"""Finite-volume solver for nonlinear Fokker-Planck gradient flows.

Core objects: :class:`ModelSpec` (coefficients + hypothesis constants),
:class:`SpatialGrid` / :class:`DensityField` (discretization),
`resolvent_step` (one implicit step), `evolve` (the mild-solution chain),
the energy/dissipation diagnostics, and the McKean-Vlasov particle
cross-check.
"""

from .energy import (
    AuditTable,
    EnergyReport,
    EtaTable,
    dissipation,
    energy,
    entropy_potential,
    eta,
    gradient,
    gradient_flow_audit,
    metric_norm_sq,
    metric_norm_sq_matched,
)
from .errors import ConfigError, ConvergenceError, GridMismatchError, NumericsError
from .grid import (
    DensityField,
    ScalarField,
    SpatialGrid,
    apply_A,
    discrete_mass,
    gaussian_density,
    hminus_norm,
    l1_distance,
    l2_norm,
    load_density_csv,
    random_bump_density,
    save_density_csv,
    uniform_density,
)
from .model import (
    CoefficientFn,
    ModelSpec,
    Potential,
    ValidationReport,
    b_star,
    b_star_deriv,
    get_preset,
    linear_ou,
    soft_confinement,
    spec_from_config,
    validate_hypotheses,
)
from .particles import (
    KdeConfig,
    ParticleEnsemble,
    cross_validate,
    kde_density,
    sample_from_density,
    simulate_mckean_vlasov,
)
from .resolvent import ResolventConfig, ResolventResult, contraction_check, resolvent_step
from .semigroup import (
    EvolutionConfig,
    Trajectory,
    evolve,
    exp_formula,
    quasi_contraction_check,
    steady_state,
)

__version__ = "0.1.0"
