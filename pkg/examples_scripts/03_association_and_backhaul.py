"""
Association and the backhaul split
==================================

With the drones fixed, solve the relaxed association, round it, and pick
the smallest backhaul share that keeps every drone's feed sufficient.
"""

import numpy as np

from dbsnet.association import (evaluate, feasible_sets, improve_association, optimal_alpha,
                                round_association, solve_relaxed)
from dbsnet.channel import build_link_matrix, make_dbs, make_mbs
from dbsnet.config import resolve
from dbsnet.placement import NetworkConfig
from dbsnet.scenario import generate_users, kmeans_init

spec = resolve({})
region, net = spec.region, NetworkConfig()
users = generate_users(spec.preset("high").matern, region, 0.2, np.random.default_rng(3))
positions = kmeans_init(users, 3, np.random.default_rng(3))

bss = [make_mbs(region.mbs_position), *make_dbs(positions, net.theta_b)]
link = build_link_matrix(users, bss)
mask = feasible_sets(users, link, net.theta_star)
print(f"users allowed on some DBS: {int(mask[:, 1:].any(axis=1).sum())} of {len(users)}")

# Fractional optimum of the concave subproblem at a trial backhaul share.
alpha = 0.5
relaxed = solve_relaxed(link, mask, alpha, tol=1e-8)
print(f"relaxed objective {relaxed.objective:.4f} after {relaxed.iterations} Frank-Wolfe steps, "
      f"gap {relaxed.gap:.1e}")

# Round to one BS per user; overloaded drones hand users back to the MBS.
rounded = round_association(relaxed.association.x, link, mask, alpha)
a_star = optimal_alpha(rounded, link)
report = evaluate(rounded.x, a_star, link)
print(f"rounded: loads {rounded.loads().astype(int).tolist()}, alpha* {a_star:.4f}, "
      f"utility {report.utility:.4f}")

# A move/swap local search can recover what rounding left on the table.
x, a_ls = improve_association(rounded.x, link, mask)
print(f"after local search: loads {x.sum(axis=0).astype(int).tolist()}, alpha* {a_ls:.4f}, "
      f"utility {evaluate(x, a_ls, link).utility:.4f}")
print("backhaul slack per DBS:", np.round(evaluate(x, a_ls, link).backhaul_slack, 4))
