"""Misanthrope-type particle systems with product blocking measures."""

from .model import (BUILTINS, BoundaryRates, DomainError, IncompatibleVolumeError, LatticeSpec,
                    ModelError, ModelSpec, OccupancyInterval, RateKernel, ValidationReport, builtin,
                    bulk_rate_p, bulk_rate_q, theta_bounds, validate, validate_attractivity,
                    validate_reservoirs, validate_vanishing)
from .state import (Configuration, ContractError, apply_move, conserved_n, count_holes,
                    count_particles, shift)
from .measures import (MarginalLaw, SectorWeight, blocking_log_density_ratio, f_factorial,
                       log_blocking_density, marginal_pmf, partition, sample_blocking,
                       sample_marginal, sample_sector, sector_weight, shift_identity_rhs,
                       theta_sequence)
from .standup import lay_down, move_correspondence, stand_up

__version__ = "0.1.0"
