"""Empirical condition harness."""

from .report import CheckReport, timed_report
from .checks import (
    bundle_estimate,
    plus_phase_profile,
    minus_phase_profile,
    check_semigroup,
    check_monotonicity,
    check_equilibria,
    check_flow_consistency,
    check_interface_formation,
    check_propagation_vs_1d,
    check_ito_coupling_drift,
    check_diffusivity,
    check_mcf_duality,
    check_allen_cahn_duality,
)

__all__ = [
    "CheckReport",
    "timed_report",
    "bundle_estimate",
    "plus_phase_profile",
    "minus_phase_profile",
    "check_semigroup",
    "check_monotonicity",
    "check_equilibria",
    "check_flow_consistency",
    "check_interface_formation",
    "check_propagation_vs_1d",
    "check_ito_coupling_drift",
    "check_diffusivity",
    "check_mcf_duality",
    "check_allen_cahn_duality",
]
