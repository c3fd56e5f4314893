"""Numerical probes of absorption, squeezing, Lipschitz bounds and dimension."""

from .absorption import AbsorptionReport, ReentryCheck, absorption_probe, entry_time, reentry_check
from .determining import DeterminingReport, chaotic_pairs, determining_modes_experiment, perturbed_pairs
from .dimension import DimensionBoundInputs, dimension_bound, theta_grid, theta_scan
from .inequalities import EmbeddingEstimate, InequalityCheck, embedding_constants, lipschitz_check, monotonicity_check
from .lipschitz import LipschitzReport, TimeLipschitzReport, lipschitz_probe, time_lipschitz_probe
from .sampling import (
    ensemble_G,
    ensemble_lp_bounds,
    make_pairs,
    mode_vector,
    random_fields,
    random_states,
    random_states_with_norm,
)
from .squeezing import (
    PhiMonitorResult,
    SqueezeReport,
    SqueezeTheory,
    basis_for_selection,
    case3_condition,
    delta_theoretical,
    log_delta_theoretical,
    mode_condition,
    phi_monitor,
    phi_nonincrease,
    phi_value,
    required_eigenvalue,
    select_m,
    squeeze_test,
    squeeze_theory,
)
