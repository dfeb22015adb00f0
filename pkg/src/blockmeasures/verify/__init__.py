"""Exact verification: finite-chain oracle, identity checks, Jacobi triple product."""

from .chain import (ChainTooLarge, FiniteChain, check_detailed_balance, check_stationarity, compare_stationary,
                    enumerate_chain, stationary_gth, stationary_sparse, stationary_vector)
from .identities import (SectorDP, check_c_independence, check_combi, check_combi_ground, check_meq,
                         check_mucn, check_nuinv, check_sector_decomposition, check_sector_law,
                         check_shift_identity, enumerate_window, random_half_line,
                         sector_marginals)
from .jacobi import check_jacobi, jacobi_grid, jacobi_lhs, jacobi_rhs
from .report import IdentityReport
