"""Minimal KPP front speeds in periodic media, and their large-drift limits."""
from .eigen import assemble, k_of_lambda, principal_eigenpair, principal_eigenvalue
from .fields import FieldDefs, FieldSet, catalog_defs, sample_fields, validate_fields
from .first_integrals import (build_level_set_space, build_shear_space, drift_term, g_of_lambda,
                              h_profile, large_drift_limit, mixed_limit)
from .grid import CellSpec, Grid, build_grid
from .speed import (SpeedOptions, drift_sweep, large_diffusion_sweep, minimal_speed,
                    small_reaction_sweep)
from .topology import channel_witness, classify_trajectories, positivity_criterion, solve_stream
from .verify import (consistency_report, decomposition_identity_check, direct_front_speed,
                     eigenfunction_first_integral_check, homogenized_check)

__version__ = "0.1.0"

__all__ = [
    "CellSpec", "FieldDefs", "FieldSet", "Grid", "SpeedOptions",
    "assemble", "build_grid", "build_level_set_space", "build_shear_space", "catalog_defs",
    "channel_witness", "classify_trajectories", "consistency_report", "decomposition_identity_check",
    "direct_front_speed", "drift_sweep", "drift_term", "eigenfunction_first_integral_check",
    "g_of_lambda", "h_profile", "homogenized_check", "k_of_lambda", "large_diffusion_sweep",
    "large_drift_limit", "minimal_speed", "mixed_limit", "positivity_criterion", "principal_eigenpair",
    "principal_eigenvalue", "sample_fields", "small_reaction_sweep", "solve_stream", "validate_fields",
]
