"""
Air-to-ground channel basics
============================

How elevation angle drives line-of-sight probability, excess loss and
antenna gain, and what that means for the rate a user sees from a drone.
"""

import numpy as np

from dbsnet import Environment
from dbsnet.channel import (a2g_excess_loss, antenna_gain, build_link_matrix, fspl_db, make_dbs,
                            make_mbs, mbs_path_loss_db, p_los)
from dbsnet.scenario import User

env = Environment()

# Free-space loss at the 2 GHz carrier grows 20 dB per decade of distance.
for d in (100.0, 1000.0):
    print(f"FSPL at {d:6.0f} m: {fspl_db(d, env.f_c):.2f} dB")

# Low elevation angles are mostly NLoS; steep ones are almost surely LoS.
theta = np.array([10.0, 30.0, 60.0, 90.0])
print("elevation  P_LoS   mean excess loss (dB)")
for t, p, loss in zip(theta, p_los(theta, env), a2g_excess_loss(theta, env)):
    print(f"{t:7.0f}   {p:.3f}   {loss:.2f}")

# A 60 degree beam gives full gain inside its cone and nothing outside it.
print("gain inside / outside a 60 deg beam:", antenna_gain(np.array([80.0, 50.0]), 60.0))

# The macro cell uses the urban 3GPP model; shadowing only in sampled mode.
print(f"MBS loss at 1 km: {mbs_path_loss_db(1000.0):.1f} dB")

# Put a drone 100 m above one user and 150 m east of another.
users = [User(0, (250.0, 250.0), 0), User(1, (400.0, 250.0), 0)]
bss = [make_mbs((0.0, 0.0)), *make_dbs([[250.0, 250.0, 100.0]], theta_b=60.0)]
link = build_link_matrix(users, bss, env)
print("access spectral efficiency (bit/s/Hz), columns MBS, DBS:")
print(np.round(link.r, 3))
print("elevation to the DBS (deg):", np.round(link.elevation[:, 0], 1))
print(f"backhaul spectral efficiency MBS->DBS: {link.backhaul_rate[0]:.3f}")
