"""Spectral Galerkin experiments for the diffusive Hindmarsh-Rose system."""

from .errors import BasisError, BlowUpError, HRLabError, ValidationError
from .integrator import StepperConfig, Trajectory, evolve, evolve_batch, evolve_pair, ode_rk4, step
from .model import (
    HRParameters,
    K,
    coupled_constant,
    lipschitz_E_to_H,
    model_constants,
    monotone_constant,
    nonlinearity,
    ode_rhs,
    preset,
    time_lipschitz_constant,
)
from .spectral import DomainSpec, ProjectionSpec, ScalarField, SpectralBasis, State, build_basis, norm, project

__version__ = "0.1.0"
