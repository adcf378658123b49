"""Feasibility checks for a complete association / placement / bandwidth solution."""
from __future__ import annotations

import numpy as np

from .association import evaluate
from .channel import LinkMatrix
from .placement import separation_violation


def violations(x, alpha, link: LinkMatrix, tau, dbs_positions, theta_star: float,
               slack_tol: float = 1e-9, distance_tol: float = 1e-6) -> list[str]:
    """Human-readable list of every violated constraint; empty when feasible."""
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=int)
    out = []
    if not 0.0 <= alpha <= 1.0:
        out.append(f"alpha={alpha} outside [0, 1]")
    if not np.all((x == 0) | (x == 1)):
        out.append("association is not binary")
    bad = np.flatnonzero(np.abs(x.sum(axis=1) - 1.0) > 1e-12)
    if len(bad):
        out.append(f"users {bad.tolist()} not associated with exactly one BS")
    report = evaluate(x, alpha, link)
    over = np.flatnonzero(report.shares.sum(axis=0) > 1.0 - alpha + 1e-12)
    if len(over):
        out.append(f"BSs {over.tolist()} allocate more than 1-alpha")
    bh = np.flatnonzero(report.backhaul_slack < -slack_tol)
    if len(bh):
        out.append(f"DBSs {(bh + 1).tolist()} exceed backhaul capacity")
    if x.shape[1] > 1:
        delay = np.flatnonzero((tau == 1) & (x[:, 1:].sum(axis=1) > 0))
        if len(delay):
            out.append(f"delay-sensitive users {delay.tolist()} served by a DBS")
        foot = np.argwhere((x[:, 1:] > 0) & (link.elevation < theta_star))
        if len(foot):
            out.append(f"(user, DBS) pairs {[(int(i), int(j) + 1) for i, j in foot]} outside footprint")
        sep = separation_violation(np.asarray(dbs_positions, dtype=float).reshape(-1, 3), theta_star)
        if np.any(sep > distance_tol):
            out.append(f"DBS footprints overlap by up to {sep.max():.6g} m")
    return out


def is_feasible(*args, **kwargs) -> bool:
    return not violations(*args, **kwargs)
