"""Joint drone-BS placement, user association and backhaul bandwidth allocation."""
from .association import (Association, UtilityReport, evaluate, feasible_sets, optimal_alpha,
                          round_association, solve_relaxed)
from .channel import (BaseStation, Environment, LinkMatrix, a2g_excess_loss, antenna_gain,
                      build_link_matrix, elevation_angle, fspl_db, make_dbs, make_mbs,
                      mbs_path_loss_db, p_los)
from .orchestrator import AlgoConfig, Solution, run
from .placement import NetworkConfig, SwarmConfig, penalized_utility, pso_optimize
from .scenario import MaternConfig, Region, User, compute_cov, generate_users, kmeans_init

__version__ = "0.1.0"
