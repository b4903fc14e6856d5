"""Long-time decay of entropy solutions for scalar conservation laws with periodic-plus-vanishing data."""

from .analysis import DecayReport, decay_report, norm_equivalence_bound, slice_means, torus_l1_distance, v_norm, x_norm
from .flux import (FluxModel, NonlinearitySet, PiecewisePolynomial, check_genuine_nonlinearity, directional_component,
                   is_affine_on, lipschitz_bound, nonlinearity_set)
from .lattice import (FundamentalCell, LatticeBasis, NormWindow, PeriodStructure, covering_count, dual_lattice,
                      fundamental_cell, torus_mean, validate_periods)
from .oracle import Example1Params, example1_flux, example1_periodic, example1_perturbed
from .problem import (EnvelopeSet, InitialData, ProblemSpec, build_bracketing_data, nondecaying_example,
                      periodic_envelopes, reduce_problem, verify_vanishing)
from .solver import GridField, SchemeConfig, Trajectory, cfl_dt, entropy_residual, solve, step, total_mass

__version__ = "0.1.0"
