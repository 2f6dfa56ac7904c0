"""Eigenvalue counting for two-dimensional Pauli and magnetic Schrodinger operators
with radial magnetic fields, and numerical checks of CLR-type bounds."""

from .errors import ConfigError, DomainError, FactorizationError, IntegrationError, TruncationError
from .field_models import (
    FieldModel, GroundStateData, build_ground_state, field_from_json, flux,
    gaussian_field, gaussian_with_flux, m_alpha, zero_field,
)
from .potential_models import (
    AngularAverage, PotentialModel, angular_average, disk_potential, gaussian_potential,
    potential_from_json, v_sigma_potential, w_sigma_potential, zero_potential,
)
from .radial_spectra import CountReport, RadialGrid, build_channel, count_total, sweep_lambda
from .special_functions import BesselPair, bessel_ik, gamma_fn

__version__ = "0.1.0"

__all__ = [
    "AngularAverage", "BesselPair", "ConfigError", "CountReport", "DomainError",
    "FactorizationError", "FieldModel", "GroundStateData", "IntegrationError",
    "PotentialModel", "RadialGrid", "TruncationError", "angular_average", "bessel_ik",
    "build_channel", "build_ground_state", "count_total", "disk_potential",
    "field_from_json", "flux", "gamma_fn", "gaussian_field", "gaussian_potential",
    "gaussian_with_flux", "m_alpha", "potential_from_json", "sweep_lambda",
    "v_sigma_potential", "w_sigma_potential", "zero_field", "zero_potential",
]
