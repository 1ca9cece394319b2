"""dyonflow: scalar flows on static dyonic black hole backgrounds in N = 1 supergravity.

The package evaluates Kähler geometry, the scalar, black-hole and effective
potentials, solves the radial scalar flow with a certified Picard iteration
cross-checked by an adaptive Runge-Kutta integrator, and audits the energy
of the resulting configurations.
"""

__version__ = "0.1.0"

from .backgrounds import Asymptotic, NearHorizon, Tabulated, near_horizon_from_attractor, pq_profiles
from .criticality import CriticalPoint, Which, check_frozen_pair, find_critical
from .energy import EnergyReport, energy, energy_bound_check
from .flow import (
    FlowProfile, PhaseState, SolverConfig, asymptotic_match, near_horizon_seed, picard_chain, picard_solve,
    rk_solve,
)
from .gauge import dual_tensor, field_strengths, residual_gauge_eom
from .kahler import KahlerModel, certify_bounds, christoffel, inverse_metric, metric
from .model import Charges, GaugeCouplings, ModelSpec, Polynomial
from .potentials import (
    bh_potential, bh_potential_grad, effective_potential, effective_potential_at, effective_potential_grad,
    lipschitz_estimate, scalar_potential, scalar_potential_grad,
)

__all__ = [
    "Asymptotic", "NearHorizon", "Tabulated", "near_horizon_from_attractor", "pq_profiles",
    "CriticalPoint", "Which", "check_frozen_pair", "find_critical",
    "EnergyReport", "energy", "energy_bound_check",
    "FlowProfile", "PhaseState", "SolverConfig", "asymptotic_match", "near_horizon_seed", "picard_chain",
    "picard_solve", "rk_solve",
    "dual_tensor", "field_strengths", "residual_gauge_eom",
    "KahlerModel", "certify_bounds", "christoffel", "inverse_metric", "metric",
    "Charges", "GaugeCouplings", "ModelSpec", "Polynomial",
    "bh_potential", "bh_potential_grad", "effective_potential", "effective_potential_at",
    "effective_potential_grad", "lipschitz_estimate", "scalar_potential", "scalar_potential_grad",
]
