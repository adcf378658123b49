"""
Joint placement and association
===============================

The full loop: k-means start, association / backhaul alternation, then
particle-swarm moves of the drones until the utility stops improving.
"""

import numpy as np

from dbsnet.config import resolve
from dbsnet.constraints import violations
from dbsnet.orchestrator import run
from dbsnet.placement import NetworkConfig
from dbsnet.scenario import generate_users

spec = resolve({})
region = spec.region
users = generate_users(spec.preset("high").matern, region, 0.2, np.random.default_rng(11))

sol = run(users, region, num_dbs=3, rng=np.random.default_rng(11))

print("outer checkpoints:", [round(u, 3) for u in sol.outer_checkpoints()])
print(f"final utility {sol.utility:.3f}, backhaul share {sol.alpha:.3f}")
print("DBS positions (x, y, h):")
print(np.round(sol.dbs_positions, 1))
counts = np.bincount(sol.serving_bs, minlength=4)
print(f"users per BS (MBS first): {counts.tolist()}")
rates = sol.report.per_user_rate
print(f"median user rate {np.median(rates):.3f} bit/s/Hz, total on DBSs {rates[sol.serving_bs > 0].sum():.3f}")

# The returned solution satisfies every constraint family.
tau = np.array([u.tau for u in users])
print("violations:", violations(sol.association.x, sol.alpha, sol.link, tau, sol.dbs_positions,
                                NetworkConfig().theta_star) or "none")
