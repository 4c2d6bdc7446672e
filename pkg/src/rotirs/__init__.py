"""Rotatable double-IRS link simulation.

Geometry of rotatable reflecting surfaces, Rician channel synthesis,
closed-form beamforming, PSO-based orientation search and the AO-PSO
solver, plus an experiment harness that writes plot-ready CSV.
"""
from .beamform import (BeamformingSolution, LinkBudget, db_to_linear, dbm_to_watts, irs1_phases,
                       irs2_phases, linear_to_db, los_closed_form, mrt_weights, snr,
                       snr_los_closed_form, snr_los_single_irs)
from .channel import (ChannelSet, ChannelSynthesizer, LosSignature, RicianParams,
                      far_field_distances, los_signature_decomposition, synthesize_channels)
from .errors import (ConfigError, DegenerateChannelError, DegenerateGeometryError, DomainError,
                     NumericalError)
from .experiment import (ExperimentSpec, ResultRow, default_geometry, emit_csv, parse_config,
                         run_experiment)
from .geometry import (ArrayLayout, Orientation, ScenarioGeometry, SingleGeometry,
                       elevation_angles, feasibility_slacks, rotation_matrix,
                       single_irs_geometry, surface_gains)
from .rotation import (PsoConfig, closed_form_azimuth_irs1, closed_form_azimuth_irs2,
                       penalized_fitness_rician, pso_optimize)
from .solver import (DOUBLE_FIXED, DOUBLE_ROTATABLE, SINGLE_FIXED, SINGLE_ROTATABLE, AoPsoState,
                     Scheme, SchemeKind, solve_ao_pso, solve_los, upper_bound_snr)

__version__ = "0.1.0"
